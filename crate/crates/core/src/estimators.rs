//! Two-stage least squares estimators over experiment records.
//!
//! All estimators regress the outcome on the endogenous posterior feature,
//! instrumenting it with arm indicators interacted with design data. The
//! choice of [`InteractionKind`] decides which weighted average of agent
//! partial effects the estimate converges to; the weight diagnostics
//! module characterizes that average from the counterfactual panel.
//!
//! Estimators see observed records only. Passive designs carry the
//! treated-arm signal on every record because the experimenter chose it,
//! so interactions are computable for control agents too.

use crate::error::{Error, Result};
use crate::experiment::{ExperimentRecord, Group};
use crate::linalg::{tsls, DesignMatrix, TslsFit};

/// Instrument interaction for passive designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    /// Sign of the signal-minus-prior gap; zero gaps get weight zero.
    Sign,
    /// The raw (or normalized) gap.
    Gap,
    /// Constant plus gap: instruments are the arm dummy and its gap
    /// interaction.
    OneGap,
    /// Constant plus prior feature; sensible only when every agent gets
    /// the same treated-arm signal.
    OnePrior,
    /// Constant, signal, and prior feature; requires signal variation.
    OneSignalPrior,
}

impl InteractionKind {
    fn label(&self) -> &'static str {
        match self {
            InteractionKind::Sign => "sign",
            InteractionKind::Gap => "gap",
            InteractionKind::OneGap => "one_gap",
            InteractionKind::OnePrior => "one_prior",
            InteractionKind::OneSignalPrior => "one_signal_prior",
        }
    }
}

/// How the signal-minus-prior gap enters gap-based interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapNormalization {
    /// Use the gap as is.
    Raw,
    /// Divide the gap by the treated-arm signal, turning it into a
    /// fractional surprise. Zero signals are errors.
    PercentOfSignal,
}

/// What to do when an interaction is used outside the conditions under
/// which its weights are characterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisusePolicy {
    /// Attach a warning to the fit and proceed.
    Warn,
    /// Refuse to estimate.
    Error,
}

/// Options for passive-design estimation.
#[derive(Debug, Clone)]
pub struct PassiveOptions {
    pub interaction: InteractionKind,
    pub gap_normalization: GapNormalization,
    pub misuse_policy: MisusePolicy,
    /// Indices into each record's covariates to include as controls.
    pub covariate_indices: Vec<usize>,
}

impl PassiveOptions {
    pub fn new(interaction: InteractionKind) -> Self {
        PassiveOptions {
            interaction,
            gap_normalization: GapNormalization::Raw,
            misuse_policy: MisusePolicy::Warn,
            covariate_indices: Vec::new(),
        }
    }
}

/// The conditioning variable of a conditional passive estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditioningVar {
    /// A covariate column by index.
    Covariate(usize),
    /// The prior feature value.
    PriorFeature,
    /// The sign of the signal-minus-prior gap.
    SignedGap,
}

/// Which design an elasticity estimate runs on.
#[derive(Debug, Clone)]
pub enum ElasticityDesign {
    Passive(PassiveOptions),
    Active,
}

/// Sign with a hard zero: positive gaps map to 1, negative to -1, and an
/// exactly confirming signal to 0.
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_nonempty(records: &[ExperimentRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to estimate from".into()));
    }
    Ok(())
}

fn check_passive_groups(records: &[ExperimentRecord]) -> Result<()> {
    let mut treated = 0usize;
    for (i, r) in records.iter().enumerate() {
        match r.group {
            Group::Treated => treated += 1,
            Group::Control => {}
            other => {
                return Err(Error::Schema(format!(
                    "record {i} belongs to arm {}, expected a passive-design arm (C or T)",
                    other.label()
                )));
            }
        }
        if r.treatment_signal.is_none() {
            return Err(Error::Schema(format!(
                "record {i} lacks a treated-arm signal; passive estimation needs one on every record"
            )));
        }
    }
    if treated == 0 || treated == records.len() {
        return Err(Error::Invalid(
            "estimation needs records from both arms".into(),
        ));
    }
    Ok(())
}

fn check_active_groups(records: &[ExperimentRecord]) -> Result<()> {
    let mut high = 0usize;
    for (i, r) in records.iter().enumerate() {
        match r.group {
            Group::High => high += 1,
            Group::Low => {}
            other => {
                return Err(Error::Schema(format!(
                    "record {i} belongs to arm {}, expected an active-design arm (L or H)",
                    other.label()
                )));
            }
        }
    }
    if high == 0 || high == records.len() {
        return Err(Error::Invalid(
            "estimation needs records from both arms".into(),
        ));
    }
    Ok(())
}

fn covariate_column(records: &[ExperimentRecord], index: usize) -> Result<Vec<f64>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.covariates.get(index).copied().ok_or_else(|| {
                Error::Invalid(format!(
                    "record {i} has {} covariates, index {index} is out of range",
                    r.covariates.len()
                ))
            })
        })
        .collect()
}

/// Gap between the treated-arm signal and the prior feature, optionally
/// normalized by the signal.
pub(crate) fn normalized_gap(
    signal: f64,
    prior_feature: f64,
    normalization: GapNormalization,
    row: usize,
) -> Result<f64> {
    let gap = signal - prior_feature;
    match normalization {
        GapNormalization::Raw => Ok(gap),
        GapNormalization::PercentOfSignal => {
            if signal == 0.0 {
                Err(Error::Domain(format!(
                    "record {row} has a zero treated-arm signal; the gap cannot be \
                     expressed as a fraction of it"
                )))
            } else {
                Ok(gap / signal)
            }
        }
    }
}

fn gap_column(
    records: &[ExperimentRecord],
    normalization: GapNormalization,
) -> Result<Vec<f64>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            normalized_gap(
                r.treatment_signal.expect("validated above"),
                r.prior_feature,
                normalization,
                i,
            )
        })
        .collect()
}

/// The interaction vector's components as labeled columns. The constant
/// component carries the label "one"; estimators turn it into the plain
/// arm dummy, diagnostics keep it as is.
pub(crate) fn interaction_components(
    kind: InteractionKind,
    gaps: &[f64],
    signals: &[f64],
    priors: &[f64],
) -> Vec<(String, Vec<f64>)> {
    let ones = vec![1.0; gaps.len()];
    match kind {
        InteractionKind::Sign => vec![(
            "sign".into(),
            gaps.iter().map(|g| sign0(*g)).collect(),
        )],
        InteractionKind::Gap => vec![("gap".into(), gaps.to_vec())],
        InteractionKind::OneGap => vec![
            ("one".into(), ones),
            ("gap".into(), gaps.to_vec()),
        ],
        InteractionKind::OnePrior => vec![
            ("one".into(), ones),
            ("prior_feature".into(), priors.to_vec()),
        ],
        InteractionKind::OneSignalPrior => vec![
            ("one".into(), ones),
            ("signal".into(), signals.to_vec()),
            ("prior_feature".into(), priors.to_vec()),
        ],
    }
}

fn treated_indicator(records: &[ExperimentRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| if r.group.is_instrument_arm() { 1.0 } else { 0.0 })
        .collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn signal_spread(records: &[ExperimentRecord]) -> f64 {
    let signals: Vec<f64> = records
        .iter()
        .filter_map(|r| r.treatment_signal)
        .collect();
    let lo = signals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = signals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo.abs().max(hi.abs()).max(1.0)
}

pub(crate) struct PassiveDesignData {
    pub(crate) y: Vec<f64>,
    pub(crate) endog: Vec<f64>,
    pub(crate) exog: DesignMatrix,
    pub(crate) instruments: DesignMatrix,
    /// Interaction components per record, in instrument column order.
    pub(crate) components: Vec<(String, Vec<f64>)>,
    pub(crate) warnings: Vec<String>,
}

pub(crate) fn passive_design_data(
    records: &[ExperimentRecord],
    options: &PassiveOptions,
) -> Result<PassiveDesignData> {
    check_nonempty(records)?;
    check_passive_groups(records)?;

    let n = records.len();
    let treated = treated_indicator(records);
    let y: Vec<f64> = records.iter().map(|r| r.outcome).collect();
    let endog: Vec<f64> = records.iter().map(|r| r.posterior_feature).collect();
    let priors: Vec<f64> = records.iter().map(|r| r.prior_feature).collect();
    let signals: Vec<f64> = records
        .iter()
        .map(|r| r.treatment_signal.expect("validated above"))
        .collect();
    let mut warnings = Vec::new();

    let heterogeneous_signals = signal_spread(records) > 1e-9;
    match options.interaction {
        InteractionKind::OnePrior if heterogeneous_signals => {
            let message = "the constant-plus-prior interaction is characterized for a common \
                           treated-arm signal, but signals vary across records"
                .to_string();
            match options.misuse_policy {
                MisusePolicy::Warn => warnings.push(message),
                MisusePolicy::Error => return Err(Error::Invalid(message)),
            }
        }
        InteractionKind::OneSignalPrior if !heterogeneous_signals => {
            return Err(Error::Invalid(
                "the signal-plus-prior interaction needs treated-arm signal variation; \
                 with a common signal its columns are collinear"
                    .into(),
            ));
        }
        _ => {}
    }

    let gaps = gap_column(records, options.gap_normalization)?;
    let components = interaction_components(options.interaction, &gaps, &signals, &priors);
    if components.len() == 1 && components[0].1.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroFirstStage(format!(
            "every signal equals the prior feature, so the {} interaction is identically zero",
            components[0].0
        )));
    }

    let mut exog_cols: Vec<(String, Vec<f64>)> = vec![("const".into(), vec![1.0; n])];
    let mut inst_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for (label, column) in &components {
        let inst_label = if label == "one" {
            "treated".to_string()
        } else {
            format!("treated_x_{label}")
        };
        inst_cols.push((inst_label, product(&treated, column)));
        if label != "one" {
            exog_cols.push((label.clone(), column.clone()));
        }
    }
    for &index in &options.covariate_indices {
        exog_cols.push((format!("cov{index}"), covariate_column(records, index)?));
    }

    Ok(PassiveDesignData {
        y,
        endog,
        exog: DesignMatrix::from_columns(exog_cols)?,
        instruments: DesignMatrix::from_columns(inst_cols)?,
        components,
        warnings,
    })
}

/// Passive-design TSLS: outcome on the posterior feature, instrumented by
/// the treated-arm indicator interacted per `options.interaction`, with
/// the interaction's own components as controls.
pub fn passive_tsls(records: &[ExperimentRecord], options: &PassiveOptions) -> Result<TslsFit> {
    let data = passive_design_data(records, options)?;
    let mut fit = tsls(
        &data.y,
        ("posterior_feature", &data.endog),
        &data.exog,
        &data.instruments,
    )?;
    fit.warnings.extend(data.warnings);
    fit.warnings.extend(interaction_note(options.interaction));
    Ok(fit)
}

fn interaction_note(kind: InteractionKind) -> Option<String> {
    match kind {
        InteractionKind::Sign | InteractionKind::Gap => None,
        InteractionKind::OneGap | InteractionKind::OnePrior | InteractionKind::OneSignalPrior => {
            Some(format!(
                "the {} interaction does not certify nonnegative weights; inspect the weight \
                 diagnostics before interpreting the estimate as an average effect",
                kind.label()
            ))
        }
    }
}

/// Active-design TSLS: outcome on the posterior feature, instrumented by
/// the high-arm indicator alone.
pub fn active_tsls(records: &[ExperimentRecord]) -> Result<TslsFit> {
    check_nonempty(records)?;
    check_active_groups(records)?;
    let n = records.len();
    let y: Vec<f64> = records.iter().map(|r| r.outcome).collect();
    let endog: Vec<f64> = records.iter().map(|r| r.posterior_feature).collect();
    let exog = DesignMatrix::from_columns(vec![("const".into(), vec![1.0; n])])?;
    let instruments =
        DesignMatrix::from_columns(vec![("high".into(), treated_indicator(records))])?;
    tsls(&y, ("posterior_feature", &endog), &exog, &instruments)
}

/// Conditional passive TSLS: instrument is the treated indicator times the
/// conditioning variable, which also enters the controls. With the signed
/// gap as the conditioning variable this reproduces the sign interaction
/// exactly.
pub fn conditional_tsls(
    records: &[ExperimentRecord],
    conditioning: ConditioningVar,
) -> Result<TslsFit> {
    check_nonempty(records)?;
    check_passive_groups(records)?;
    let n = records.len();
    let (label, values): (String, Vec<f64>) = match conditioning {
        ConditioningVar::Covariate(index) => {
            (format!("cov{index}"), covariate_column(records, index)?)
        }
        ConditioningVar::PriorFeature => (
            "prior_feature".into(),
            records.iter().map(|r| r.prior_feature).collect(),
        ),
        ConditioningVar::SignedGap => {
            let gap = gap_column(records, GapNormalization::Raw)?;
            ("sign".into(), gap.iter().map(|g| sign0(*g)).collect())
        }
    };
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroFirstStage(format!(
            "conditioning variable {label} is identically zero"
        )));
    }
    let y: Vec<f64> = records.iter().map(|r| r.outcome).collect();
    let endog: Vec<f64> = records.iter().map(|r| r.posterior_feature).collect();
    let treated = treated_indicator(records);
    let instruments = DesignMatrix::from_columns(vec![(
        format!("treated_x_{label}"),
        product(&treated, &values),
    )])?;
    let exog = DesignMatrix::from_columns(vec![
        ("const".into(), vec![1.0; n]),
        (label, values),
    ])?;
    tsls(&y, ("posterior_feature", &endog), &exog, &instruments)
}

/// TSLS in logs: regresses log outcome on log posterior feature with the
/// same instruments as the level estimators, so the coefficient is an
/// elasticity. Every outcome and feature value must be strictly positive.
pub fn elasticity_tsls(
    records: &[ExperimentRecord],
    design: &ElasticityDesign,
) -> Result<TslsFit> {
    check_nonempty(records)?;
    let mut logged = records.to_vec();
    for (i, r) in logged.iter_mut().enumerate() {
        if r.outcome <= 0.0 {
            return Err(Error::Domain(format!(
                "record {i} has outcome {} but elasticities need strictly positive outcomes",
                r.outcome
            )));
        }
        if r.posterior_feature <= 0.0 {
            return Err(Error::Domain(format!(
                "record {i} has posterior feature {} but elasticities need strictly positive \
                 features",
                r.posterior_feature
            )));
        }
        r.outcome = r.outcome.ln();
        r.posterior_feature = r.posterior_feature.ln();
    }
    let mut fit = match design {
        ElasticityDesign::Passive(options) => passive_tsls(&logged, options)?,
        ElasticityDesign::Active => active_tsls(&logged)?,
    };
    fit.endog_label = "log_posterior_feature".into();
    Ok(fit)
}
