//! Run configuration: one JSON document describing the population, the
//! design, the feature, the specifications to estimate, and the
//! diagnostics to report.
//!
//! Parsing rejects unknown fields; semantic validation reports the JSON
//! path of the offending field. All randomness in a run flows from the
//! single `seed`: population parameters draw from one named stream,
//! per-agent random signals from another, and arm assignment from a
//! third, so adding draws to one stage never shifts the others.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Deserialize;

use infoprov::actions::{ActionFunction, LatentDist};
use infoprov::beliefs::{Anchor, Belief, Feature, GaussianBelief, UpdateRule};
use infoprov::error::{Error, Result};
use infoprov::estimators::{ConditioningVar, GapNormalization, InteractionKind, MisusePolicy};
use infoprov::experiment::{
    constant_signal, prior_offset_signal, streams, tabulated_signal, Agent, Design, Perception,
    SignalFn,
};
use infoprov::io::{load_grid_belief, load_signal_family};

fn invalid(path: &str, message: &str) -> Error {
    Error::Schema(format!("{path}: {message}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub feature: FeatureSpec,
    pub population: PopulationSpec,
    pub design: DesignSpec,
    #[serde(default)]
    pub specs: Vec<SpecEntry>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticsSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    #[default]
    Mean,
    Variance,
    SecondMoment,
}

impl FeatureSpec {
    pub fn to_feature(self) -> Feature {
        match self {
            FeatureSpec::Mean => Feature::Mean,
            FeatureSpec::Variance => Feature::Variance,
            FeatureSpec::SecondMoment => Feature::SecondMoment,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureSpec::Mean => "mean",
            FeatureSpec::Variance => "variance",
            FeatureSpec::SecondMoment => "second_moment",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub groups: Vec<GroupSpec>,
}

impl PopulationSpec {
    pub fn total_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: usize,
    pub prior: PriorSpec,
    pub update: UpdateRuleSpec,
    /// Rule for the no-signal counterfactual. Required: a passive design
    /// is meaningless without it, and the checks exercise it.
    #[serde(default)]
    pub control: Option<UpdateRuleSpec>,
    pub action: ActionSpec,
    #[serde(default)]
    pub covariates: Vec<Dist>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Gaussian {
        mean: Dist,
        variance: Dist,
        noise_variance: Dist,
    },
    /// Grid prior and perceived signal family loaded from CSV files,
    /// resolved relative to the config file. All agents in the group
    /// share them.
    Grid {
        belief_csv: PathBuf,
        family_csv: PathBuf,
        #[serde(default)]
        strict: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum UpdateRuleSpec {
    Bayesian,
    Anchored { tau: f64 },
    Grether { chi0: f64, chi1: f64 },
    NoUpdate,
    MeanShift { delta: f64 },
}

impl UpdateRuleSpec {
    pub fn to_rule(&self) -> UpdateRule {
        match self {
            UpdateRuleSpec::Bayesian => UpdateRule::Bayesian,
            UpdateRuleSpec::Anchored { tau } => UpdateRule::Anchored {
                tau: *tau,
                anchor: Anchor::Prior,
            },
            UpdateRuleSpec::Grether { chi0, chi1 } => UpdateRule::Grether {
                chi0: *chi0,
                chi1: *chi1,
            },
            UpdateRuleSpec::NoUpdate => UpdateRule::NoUpdate,
            UpdateRuleSpec::MeanShift { delta } => UpdateRule::MeanShift { delta: *delta },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    Affine { intercept: Dist, slope: Dist },
    Polynomial { coeffs: Vec<f64> },
    BinaryNormal { location: Dist, scale: Dist },
    BinaryLogistic { location: Dist, scale: Dist },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Choice { values: Vec<f64> },
}

impl Dist {
    fn validate(&self, path: &str) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(path, &format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            Dist::Constant { value } => finite(*value, "value"),
            Dist::Uniform { lo, hi } => {
                finite(*lo, "lo")?;
                finite(*hi, "hi")?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(invalid(path, &format!("lo {lo} must be below hi {hi}")))
                }
            }
            Dist::Normal { mean, sd } => {
                finite(*mean, "mean")?;
                if *sd > 0.0 && sd.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(path, &format!("sd must be positive, got {sd}")))
                }
            }
            Dist::Lognormal { mu, sigma } => {
                finite(*mu, "mu")?;
                if *sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(path, &format!("sigma must be positive, got {sigma}")))
                }
            }
            Dist::Choice { values } => {
                if values.is_empty() {
                    return Err(invalid(path, "choice needs at least one value"));
                }
                for v in values {
                    finite(*v, "values entry")?;
                }
                Ok(())
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Dist::Constant { value } => *value,
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dist::Normal { mean, sd } => {
                rand_distr::Normal::new(*mean, *sd).expect("validated").sample(rng)
            }
            Dist::Lognormal { mu, sigma } => {
                rand_distr::LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
            }
            Dist::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Passive {
        treat_prob: f64,
        signal: SignalSpec,
    },
    Active {
        high_prob: f64,
        low_signal: SignalSpec,
        high_signal: SignalSpec,
    },
}

impl DesignSpec {
    pub fn is_passive(&self) -> bool {
        matches!(self, DesignSpec::Passive { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Constant { value: f64 },
    /// The agent's prior feature plus a fixed offset.
    PriorOffset { offset: f64 },
    /// One independent draw per agent from the signal stream.
    Random { dist: Dist },
    /// Explicit per-agent values, indexed by agent id.
    Table { values: Vec<f64> },
}

impl SignalSpec {
    fn validate(&self, path: &str, population: usize) -> Result<()> {
        match self {
            SignalSpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(path, &format!("value must be finite, got {value}")))
                }
            }
            SignalSpec::PriorOffset { offset } => {
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(path, &format!("offset must be finite, got {offset}")))
                }
            }
            SignalSpec::Random { dist } => dist.validate(&format!("{path}.dist")),
            SignalSpec::Table { values } => {
                if values.len() != population {
                    return Err(invalid(
                        path,
                        &format!(
                            "table has {} values for a population of {population}",
                            values.len()
                        ),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(invalid(path, &format!("table holds non-finite value {v}")));
                }
                Ok(())
            }
        }
    }

    fn build(&self, feature: Feature, population: usize, rng: &mut ChaCha8Rng) -> SignalFn {
        match self {
            SignalSpec::Constant { value } => constant_signal(*value),
            SignalSpec::PriorOffset { offset } => prior_offset_signal(feature, *offset),
            SignalSpec::Random { dist } => {
                let values: Vec<f64> = (0..population).map(|_| dist.sample(rng)).collect();
                tabulated_signal(values)
            }
            SignalSpec::Table { values } => tabulated_signal(values.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    Passive,
    Active,
    Conditional,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InteractionSpec {
    Sign,
    Gap,
    OneGap,
    OnePrior,
    OneSignalPrior,
}

impl InteractionSpec {
    pub fn to_kind(self) -> InteractionKind {
        match self {
            InteractionSpec::Sign => InteractionKind::Sign,
            InteractionSpec::Gap => InteractionKind::Gap,
            InteractionSpec::OneGap => InteractionKind::OneGap,
            InteractionSpec::OnePrior => InteractionKind::OnePrior,
            InteractionSpec::OneSignalPrior => InteractionKind::OneSignalPrior,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InteractionSpec::Sign => "sign",
            InteractionSpec::Gap => "gap",
            InteractionSpec::OneGap => "one_gap",
            InteractionSpec::OnePrior => "one_prior",
            InteractionSpec::OneSignalPrior => "one_signal_prior",
        }
    }

    /// Accepts both the JSON spelling (`one_gap`) and the flag spelling
    /// (`one-gap`).
    pub fn parse(text: &str) -> Result<Self> {
        match text.replace('-', "_").as_str() {
            "sign" => Ok(InteractionSpec::Sign),
            "gap" => Ok(InteractionSpec::Gap),
            "one_gap" => Ok(InteractionSpec::OneGap),
            "one_prior" => Ok(InteractionSpec::OnePrior),
            "one_signal_prior" => Ok(InteractionSpec::OneSignalPrior),
            other => Err(Error::Schema(format!(
                "unknown interaction '{other}'; expected sign, gap, one-gap, one-prior, \
                 or one-signal-prior"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(tag = "var", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConditioningSpec {
    PriorFeature,
    SignedGap,
    Covariate { index: usize },
}

impl ConditioningSpec {
    pub fn to_var(self) -> ConditioningVar {
        match self {
            ConditioningSpec::PriorFeature => ConditioningVar::PriorFeature,
            ConditioningSpec::SignedGap => ConditioningVar::SignedGap,
            ConditioningSpec::Covariate { index } => ConditioningVar::Covariate(index),
        }
    }

    pub fn label(self) -> String {
        match self {
            ConditioningSpec::PriorFeature => "prior_feature".into(),
            ConditioningSpec::SignedGap => "signed_gap".into(),
            ConditioningSpec::Covariate { index } => format!("covariate_{index}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationSpec {
    #[default]
    Raw,
    PercentOfSignal,
}

impl NormalizationSpec {
    pub fn to_normalization(self) -> GapNormalization {
        match self {
            NormalizationSpec::Raw => GapNormalization::Raw,
            NormalizationSpec::PercentOfSignal => GapNormalization::PercentOfSignal,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MisuseSpec {
    #[default]
    Warn,
    Error,
}

impl MisuseSpec {
    pub fn to_policy(self) -> MisusePolicy {
        match self {
            MisuseSpec::Warn => MisusePolicy::Warn,
            MisuseSpec::Error => MisusePolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntry {
    pub spec: SpecKind,
    #[serde(default)]
    pub interaction: Option<InteractionSpec>,
    #[serde(default)]
    pub conditioning: Option<ConditioningSpec>,
    #[serde(default)]
    pub elasticity: bool,
    #[serde(default)]
    pub normalization: NormalizationSpec,
    #[serde(default)]
    pub misuse: MisuseSpec,
}

impl SpecEntry {
    /// Stable artifact name stem for this entry.
    pub fn slug(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        match self.spec {
            SpecKind::Passive => {
                parts.push("passive".into());
                if let Some(kind) = self.interaction {
                    parts.push(kind.label().into());
                }
            }
            SpecKind::Active => parts.push("active".into()),
            SpecKind::Conditional => {
                parts.push("conditional".into());
                if let Some(c) = self.conditioning {
                    parts.push(c.label());
                }
            }
        }
        if self.elasticity {
            parts.push("elasticity".into());
        }
        parts.join("-")
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BinVariableSpec {
    #[default]
    Gap,
    PriorFeature,
    Signal,
}

impl BinVariableSpec {
    pub fn to_variable(self) -> infoprov::diagnostics::BinVariable {
        match self {
            BinVariableSpec::Gap => infoprov::diagnostics::BinVariable::Gap,
            BinVariableSpec::PriorFeature => infoprov::diagnostics::BinVariable::PriorFeature,
            BinVariableSpec::Signal => infoprov::diagnostics::BinVariable::Signal,
        }
    }
}

fn default_bins() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Interaction to characterize; omit for active-design diagnostics.
    #[serde(default)]
    pub interaction: Option<InteractionSpec>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub variable: BinVariableSpec,
    #[serde(default)]
    pub normalization: NormalizationSpec,
}

impl DiagnosticsSpec {
    pub fn slug(&self) -> String {
        match self.interaction {
            Some(kind) => kind.label().into(),
            None => "active".into(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file, reporting the offending JSON
    /// field path on semantic errors.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.population.groups.is_empty() {
            return Err(invalid("population.groups", "at least one group is required"));
        }
        let total = self.population.total_count();
        if total == 0 {
            return Err(invalid("population.groups", "total agent count is zero"));
        }
        for (g, group) in self.population.groups.iter().enumerate() {
            let path = format!("population.groups[{g}]");
            if group.count == 0 {
                return Err(invalid(&format!("{path}.count"), "must be at least one"));
            }
            if group.control.is_none() {
                return Err(invalid(
                    &format!("{path}.control"),
                    "missing control-arm update rule",
                ));
            }
            if let Some(UpdateRuleSpec::Anchored { .. } | UpdateRuleSpec::Grether { .. }) =
                group.control
            {
                return Err(invalid(
                    &format!("{path}.control"),
                    "control-arm rule must work without a signal (no_update or mean_shift)",
                ));
            }
            match (&group.prior, &group.update) {
                (PriorSpec::Gaussian { .. }, UpdateRuleSpec::Anchored { .. }) => {
                    return Err(invalid(
                        &format!("{path}.update"),
                        "anchored updating needs a grid prior",
                    ));
                }
                (PriorSpec::Gaussian { mean, variance, noise_variance }, _) => {
                    mean.validate(&format!("{path}.prior.mean"))?;
                    variance.validate(&format!("{path}.prior.variance"))?;
                    noise_variance.validate(&format!("{path}.prior.noise_variance"))?;
                }
                (PriorSpec::Grid { .. }, _) => {}
            }
            match &group.action {
                ActionSpec::Affine { intercept, slope } => {
                    intercept.validate(&format!("{path}.action.intercept"))?;
                    slope.validate(&format!("{path}.action.slope"))?;
                }
                ActionSpec::Polynomial { coeffs } => {
                    if coeffs.is_empty() {
                        return Err(invalid(
                            &format!("{path}.action.coeffs"),
                            "polynomial needs at least one coefficient",
                        ));
                    }
                }
                ActionSpec::BinaryNormal { location, scale }
                | ActionSpec::BinaryLogistic { location, scale } => {
                    location.validate(&format!("{path}.action.location"))?;
                    scale.validate(&format!("{path}.action.scale"))?;
                }
            }
            for (c, dist) in group.covariates.iter().enumerate() {
                dist.validate(&format!("{path}.covariates[{c}]"))?;
            }
        }

        match &self.design {
            DesignSpec::Passive { treat_prob, signal } => {
                if !(treat_prob.is_finite() && *treat_prob > 0.0 && *treat_prob < 1.0) {
                    return Err(invalid(
                        "design.treat_prob",
                        &format!("must lie strictly between 0 and 1, got {treat_prob}"),
                    ));
                }
                signal.validate("design.signal", total)?;
            }
            DesignSpec::Active {
                high_prob,
                low_signal,
                high_signal,
            } => {
                if !(high_prob.is_finite() && *high_prob > 0.0 && *high_prob < 1.0) {
                    return Err(invalid(
                        "design.high_prob",
                        &format!("must lie strictly between 0 and 1, got {high_prob}"),
                    ));
                }
                low_signal.validate("design.low_signal", total)?;
                high_signal.validate("design.high_signal", total)?;
            }
        }

        for (s, entry) in self.specs.iter().enumerate() {
            let path = format!("specs[{s}]");
            match entry.spec {
                SpecKind::Passive => {
                    if entry.interaction.is_none() {
                        return Err(invalid(
                            &format!("{path}.interaction"),
                            "passive specs need an interaction",
                        ));
                    }
                    if !self.design.is_passive() {
                        return Err(invalid(&path, "passive spec under an active design"));
                    }
                }
                SpecKind::Active => {
                    if entry.interaction.is_some() || entry.conditioning.is_some() {
                        return Err(invalid(
                            &path,
                            "active specs take no interaction or conditioning",
                        ));
                    }
                    if self.design.is_passive() {
                        return Err(invalid(&path, "active spec under a passive design"));
                    }
                }
                SpecKind::Conditional => {
                    if entry.conditioning.is_none() {
                        return Err(invalid(
                            &format!("{path}.conditioning"),
                            "conditional specs need a conditioning variable",
                        ));
                    }
                    if entry.elasticity {
                        return Err(invalid(
                            &format!("{path}.elasticity"),
                            "conditional specs have no elasticity form",
                        ));
                    }
                    if !self.design.is_passive() {
                        return Err(invalid(&path, "conditional spec under an active design"));
                    }
                }
            }
        }

        for (d, spec) in self.diagnostics.iter().enumerate() {
            let path = format!("diagnostics[{d}]");
            if spec.bins == 0 {
                return Err(invalid(&format!("{path}.bins"), "at least one bin is required"));
            }
            if spec.interaction.is_some() != self.design.is_passive() {
                return Err(invalid(
                    &path,
                    if self.design.is_passive() {
                        "passive-design diagnostics need an interaction"
                    } else {
                        "active-design diagnostics take no interaction"
                    },
                ));
            }
        }
        Ok(())
    }
}

/// A population, design, and feature realized from a config.
pub struct BuiltRun {
    pub agents: Vec<Agent>,
    pub design: Design,
    pub feature: Feature,
}

/// Realizes the config: draws every agent's parameters from the
/// population stream, per-agent random signals from the signal stream,
/// and hands arm assignment its own stream via the design seed. Grid
/// belief and family files resolve relative to `base_dir`.
pub fn build(config: &RunConfig, base_dir: &Path) -> Result<BuiltRun> {
    let feature = config.feature.to_feature();
    let mut rng_pop = ChaCha8Rng::seed_from_u64(config.seed);
    rng_pop.set_stream(streams::POPULATION);
    let mut rng_sig = ChaCha8Rng::seed_from_u64(config.seed);
    rng_sig.set_stream(streams::SIGNALS);

    let total = config.population.total_count();
    let mut agents = Vec::with_capacity(total);
    let mut id = 0usize;
    for (g, group) in config.population.groups.iter().enumerate() {
        let grid_parts = match &group.prior {
            PriorSpec::Grid {
                belief_csv,
                family_csv,
                strict,
            } => {
                let belief = load_grid_belief(base_dir.join(belief_csv)).map_err(|e| {
                    Error::Schema(format!("population.groups[{g}].prior.belief_csv: {e}"))
                })?;
                let family = load_signal_family(base_dir.join(family_csv)).map_err(|e| {
                    Error::Schema(format!("population.groups[{g}].prior.family_csv: {e}"))
                })?;
                Some((belief, Arc::new(family), *strict))
            }
            PriorSpec::Gaussian { .. } => None,
        };

        for _ in 0..group.count {
            let (prior, perception) = match &group.prior {
                PriorSpec::Gaussian {
                    mean,
                    variance,
                    noise_variance,
                } => {
                    let m = mean.sample(&mut rng_pop);
                    let v = variance.sample(&mut rng_pop);
                    let nv = noise_variance.sample(&mut rng_pop);
                    if !(v > 0.0) {
                        return Err(invalid(
                            &format!("population.groups[{g}].prior.variance"),
                            &format!("drew non-positive variance {v}; tighten the distribution"),
                        ));
                    }
                    if !(nv > 0.0) {
                        return Err(invalid(
                            &format!("population.groups[{g}].prior.noise_variance"),
                            &format!("drew non-positive variance {nv}; tighten the distribution"),
                        ));
                    }
                    (
                        Belief::Gaussian(GaussianBelief::new(m, v)?),
                        Perception::Noise { variance: nv },
                    )
                }
                PriorSpec::Grid { .. } => {
                    let (belief, family, strict) = grid_parts.as_ref().expect("built above");
                    (
                        Belief::Grid(belief.clone()),
                        Perception::Family {
                            family: Arc::clone(family),
                            strict: *strict,
                        },
                    )
                }
            };
            let action = build_action(&group.action, &mut rng_pop);
            let covariates: Vec<f64> = group
                .covariates
                .iter()
                .map(|d| d.sample(&mut rng_pop))
                .collect();
            let agent = Agent::new(
                id,
                prior,
                group.update.to_rule(),
                group.control.as_ref().expect("validated").to_rule(),
                perception,
                action,
                covariates,
            )
            .map_err(|e| Error::Schema(format!("population.groups[{g}]: {e}")))?;
            agents.push(agent);
            id += 1;
        }
    }

    let design = match &config.design {
        DesignSpec::Passive { treat_prob, signal } => Design::passive(
            signal.build(feature.clone(), total, &mut rng_sig),
            *treat_prob,
            config.seed,
        )?,
        DesignSpec::Active {
            high_prob,
            low_signal,
            high_signal,
        } => {
            let low = low_signal.build(feature.clone(), total, &mut rng_sig);
            let high = high_signal.build(feature.clone(), total, &mut rng_sig);
            Design::active(low, high, *high_prob, config.seed)?
        }
    };

    Ok(BuiltRun {
        agents,
        design,
        feature,
    })
}

fn build_action(spec: &ActionSpec, rng: &mut ChaCha8Rng) -> ActionFunction {
    match spec {
        ActionSpec::Affine { intercept, slope } => ActionFunction::Affine {
            intercept: intercept.sample(rng),
            slope: slope.sample(rng),
        },
        ActionSpec::Polynomial { coeffs } => ActionFunction::Polynomial {
            coeffs: coeffs.clone(),
        },
        ActionSpec::BinaryNormal { location, scale } => ActionFunction::BinaryLatent {
            dist: LatentDist::Normal {
                location: location.sample(rng),
                scale: scale.sample(rng),
            },
        },
        ActionSpec::BinaryLogistic { location, scale } => ActionFunction::BinaryLatent {
            dist: LatentDist::Logistic {
                location: location.sample(rng),
                scale: scale.sample(rng),
            },
        },
    }
}
