//! Agents, randomized designs, and the simulator.
//!
//! An [`Agent`] bundles a prior, an update rule for received signals, a
//! control-arm rule for the no-signal counterfactual, a perception model,
//! an action function, and observed covariates. A [`Design`] randomizes
//! agents into two arms: passive designs withhold the signal from the
//! control arm, active designs send every agent one of two signals.
//!
//! [`simulate`] produces two views of the same run. The observed
//! [`ExperimentRecord`] rows contain only what an experimenter would see,
//! plus the signals the design itself fixes. The [`CounterfactualPanel`]
//! contains both potential posteriors and outcomes per agent along with
//! the agent's exact average partial effect between them, which is what
//! weight diagnostics consume.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actions::ActionFunction;
use crate::beliefs::{
    gaussian_likelihood_row, gaussian_posterior, grether_gaussian_posterior, update_grid_from_row,
    Belief, Feature, GridBelief, SignalFamily, UpdateRule,
};
use crate::error::{Error, Result};

/// Stream identifiers for splitting one seed into independent generators.
pub mod streams {
    /// Arm assignment draws.
    pub const ASSIGNMENT: u64 = 1;
    /// Population construction (used by callers that synthesize agents).
    pub const POPULATION: u64 = 2;
    /// Signal realization draws (used by callers with stochastic signals).
    pub const SIGNALS: u64 = 3;
}

/// Experimental arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    Control,
    Treated,
    Low,
    High,
}

impl Group {
    /// Single-letter label used in record files.
    pub fn label(&self) -> &'static str {
        match self {
            Group::Control => "C",
            Group::Treated => "T",
            Group::Low => "L",
            Group::High => "H",
        }
    }

    pub fn from_label(label: &str) -> Result<Group> {
        match label {
            "C" => Ok(Group::Control),
            "T" => Ok(Group::Treated),
            "L" => Ok(Group::Low),
            "H" => Ok(Group::High),
            other => Err(Error::Schema(format!(
                "unknown group label {other:?}, expected C, T, L, or H"
            ))),
        }
    }

    /// True for the arm whose indicator instruments the endogenous
    /// feature: Treated in passive designs, High in active ones.
    pub fn is_instrument_arm(&self) -> bool {
        matches!(self, Group::Treated | Group::High)
    }
}

/// The agent's subjective model of how signals relate to the state.
#[derive(Debug, Clone)]
pub enum Perception {
    /// Tabulated likelihood family on the prior's state grid. With
    /// `strict` set, off-grid signals are errors instead of snapping.
    Family {
        family: Arc<SignalFamily>,
        strict: bool,
    },
    /// The signal is state plus mean-zero Gaussian noise with this
    /// variance. Works for both grid and Gaussian priors.
    Noise { variance: f64 },
}

/// One simulated decision maker.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub prior: Belief,
    /// Rule applied when the agent receives a signal.
    pub update: UpdateRule,
    /// Rule applied in the no-signal counterfactual; must not need a
    /// signal, so only `NoUpdate` and `MeanShift` are allowed.
    pub control_update: UpdateRule,
    pub perception: Perception,
    pub action: ActionFunction,
    /// Observed covariates, excluding the constant.
    pub covariates: Vec<f64>,
}

impl Agent {
    /// Validates all parts and their compatibility: grid priors must align
    /// with a family perception's state grid, Gaussian priors require the
    /// noise perception and reject anchored updates, and the control rule
    /// must work without a signal.
    pub fn new(
        id: usize,
        prior: Belief,
        update: UpdateRule,
        control_update: UpdateRule,
        perception: Perception,
        action: ActionFunction,
        covariates: Vec<f64>,
    ) -> Result<Agent> {
        let agent = Agent {
            id,
            prior,
            update,
            control_update,
            perception,
            action,
            covariates,
        };
        agent.validate().map_err(|e| Error::for_agent(id, e))?;
        Ok(agent)
    }

    /// A Gaussian-prior agent with Bayesian updating, a stable control
    /// arm, and noise-variance perception.
    pub fn gaussian(
        id: usize,
        prior_mean: f64,
        prior_variance: f64,
        noise_variance: f64,
        action: ActionFunction,
    ) -> Result<Agent> {
        Agent::new(
            id,
            Belief::Gaussian(crate::beliefs::GaussianBelief::new(prior_mean, prior_variance)?),
            UpdateRule::Bayesian,
            UpdateRule::NoUpdate,
            Perception::Noise {
                variance: noise_variance,
            },
            action,
            Vec::new(),
        )
    }

    /// A grid-prior agent with Bayesian updating over a tabulated family
    /// and a stable control arm.
    pub fn grid(
        id: usize,
        prior: GridBelief,
        family: Arc<SignalFamily>,
        action: ActionFunction,
    ) -> Result<Agent> {
        Agent::new(
            id,
            Belief::Grid(prior),
            UpdateRule::Bayesian,
            UpdateRule::NoUpdate,
            Perception::Family {
                family,
                strict: false,
            },
            action,
            Vec::new(),
        )
    }

    fn validate(&self) -> Result<()> {
        self.update.validate()?;
        self.control_update.validate()?;
        self.action.validate()?;
        if self.control_update.needs_signal() {
            return Err(Error::Invalid(
                "control-arm update rule must work without a signal (NoUpdate or MeanShift)"
                    .into(),
            ));
        }
        for (i, c) in self.covariates.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Invalid(format!("covariate {i} is non-finite")));
            }
        }
        match (&self.prior, &self.perception) {
            (Belief::Grid(prior), Perception::Family { family, .. }) => {
                if family.states().len() != prior.len() {
                    return Err(Error::dimension(
                        "family state grid",
                        prior.len(),
                        family.states().len(),
                    ));
                }
                Ok(())
            }
            (Belief::Grid(_), Perception::Noise { variance }) => {
                if *variance > 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!(
                        "perception noise variance must be positive, got {variance}"
                    )))
                }
            }
            (Belief::Gaussian(_), Perception::Noise { variance }) => {
                if !(*variance > 0.0 && variance.is_finite()) {
                    return Err(Error::Invalid(format!(
                        "perception noise variance must be positive, got {variance}"
                    )));
                }
                if matches!(self.update, UpdateRule::Anchored { .. }) {
                    return Err(Error::Invalid(
                        "anchored updating leaves the Gaussian family; use a grid prior"
                            .into(),
                    ));
                }
                Ok(())
            }
            (Belief::Gaussian(_), Perception::Family { .. }) => Err(Error::Invalid(
                "tabulated signal families require a grid prior".into(),
            )),
        }
    }

    /// Posterior belief given the received signal, or the control-arm
    /// belief when no signal is received.
    pub fn posterior(&self, signal: Option<f64>) -> Result<Belief> {
        let s = match signal {
            None => {
                return match &self.control_update {
                    UpdateRule::NoUpdate => Ok(self.prior.clone()),
                    UpdateRule::MeanShift { delta } => self.prior.shifted(*delta),
                    _ => Err(Error::Invalid(
                        "control-arm update rule requires a signal".into(),
                    )),
                };
            }
            Some(s) => s,
        };
        if !s.is_finite() {
            return Err(Error::Invalid(format!("signal must be finite, got {s}")));
        }
        match (&self.prior, &self.perception) {
            (Belief::Grid(prior), Perception::Family { family, strict }) => {
                if *strict {
                    family.exact_index(s)?;
                }
                Ok(Belief::Grid(self.update.apply_grid(prior, family, s)?))
            }
            (Belief::Grid(prior), Perception::Noise { variance }) => {
                let row = gaussian_likelihood_row(prior.states(), s, *variance);
                Ok(Belief::Grid(update_grid_from_row(prior, &row, &self.update)?))
            }
            (Belief::Gaussian(prior), Perception::Noise { variance }) => match &self.update {
                UpdateRule::Bayesian => {
                    Ok(Belief::Gaussian(gaussian_posterior(prior, s, *variance)?.0))
                }
                UpdateRule::Grether { chi0, chi1 } => Ok(Belief::Gaussian(
                    grether_gaussian_posterior(prior, s, *variance, *chi0, *chi1)?,
                )),
                UpdateRule::NoUpdate => Ok(self.prior.clone()),
                UpdateRule::MeanShift { delta } => self.prior.shifted(*delta),
                UpdateRule::Anchored { .. } => Err(Error::Invalid(
                    "anchored updating leaves the Gaussian family; use a grid prior".into(),
                )),
            },
            (Belief::Gaussian(_), Perception::Family { .. }) => Err(Error::Invalid(
                "tabulated signal families require a grid prior".into(),
            )),
        }
    }
}

/// Computes an agent's signal from its primitives.
pub type SignalFn = Arc<dyn Fn(&Agent) -> Result<f64> + Send + Sync>;

/// The same signal for every agent.
pub fn constant_signal(value: f64) -> SignalFn {
    Arc::new(move |_| Ok(value))
}

/// Signal at a fixed offset from the agent's prior feature value.
pub fn prior_offset_signal(feature: Feature, offset: f64) -> SignalFn {
    Arc::new(move |agent: &Agent| Ok(agent.prior.feature(&feature)? + offset))
}

/// Per-agent signals looked up by id.
pub fn tabulated_signal(values: Vec<f64>) -> SignalFn {
    Arc::new(move |agent: &Agent| {
        values.get(agent.id).copied().ok_or_else(|| {
            Error::Invalid(format!("no tabulated signal for agent id {}", agent.id))
        })
    })
}

/// A randomized information-provision design.
#[derive(Clone)]
pub enum Design {
    /// Treated agents receive `signal`; control agents receive nothing.
    Passive {
        signal: SignalFn,
        treat_prob: f64,
        seed: u64,
    },
    /// Every agent receives a signal: `high` with probability
    /// `high_prob`, otherwise `low`.
    Active {
        low: SignalFn,
        high: SignalFn,
        high_prob: f64,
        seed: u64,
    },
}

impl std::fmt::Debug for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Design::Passive {
                treat_prob, seed, ..
            } => f
                .debug_struct("Passive")
                .field("treat_prob", treat_prob)
                .field("seed", seed)
                .finish_non_exhaustive(),
            Design::Active {
                high_prob, seed, ..
            } => f
                .debug_struct("Active")
                .field("high_prob", high_prob)
                .field("seed", seed)
                .finish_non_exhaustive(),
        }
    }
}

fn check_arm_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "arm probability must lie strictly inside (0, 1), got {p}"
        )))
    }
}

impl Design {
    pub fn passive(signal: SignalFn, treat_prob: f64, seed: u64) -> Result<Design> {
        check_arm_probability(treat_prob)?;
        Ok(Design::Passive {
            signal,
            treat_prob,
            seed,
        })
    }

    pub fn active(low: SignalFn, high: SignalFn, high_prob: f64, seed: u64) -> Result<Design> {
        check_arm_probability(high_prob)?;
        Ok(Design::Active {
            low,
            high,
            high_prob,
            seed,
        })
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Design::Active { .. })
    }

    fn seed(&self) -> u64 {
        match self {
            Design::Passive { seed, .. } | Design::Active { seed, .. } => *seed,
        }
    }

    fn instrument_arm_probability(&self) -> f64 {
        match self {
            Design::Passive { treat_prob, .. } => *treat_prob,
            Design::Active { high_prob, .. } => *high_prob,
        }
    }
}

/// Draws the arm of each agent, in id order, from the design's seed on the
/// assignment stream. Deterministic for a fixed design.
pub fn assign_groups(design: &Design, n: usize) -> Vec<Group> {
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed());
    rng.set_stream(streams::ASSIGNMENT);
    let p = design.instrument_arm_probability();
    let (hit, miss) = if design.is_active() {
        (Group::High, Group::Low)
    } else {
        (Group::Treated, Group::Control)
    };
    (0..n)
        .map(|_| if rng.random::<f64>() < p { hit } else { miss })
        .collect()
}

/// What an experimenter observes about one agent, plus the signals the
/// design itself fixes for both arms.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub id: usize,
    pub group: Group,
    /// Signal actually received; absent for passive control agents.
    pub signal: Option<f64>,
    /// Signal the treated arm carries for this agent (passive designs).
    pub treatment_signal: Option<f64>,
    /// Arm signals in active designs.
    pub low_signal: Option<f64>,
    pub high_signal: Option<f64>,
    pub prior_feature: f64,
    pub posterior_feature: f64,
    pub outcome: f64,
    pub covariates: Vec<f64>,
}

/// Ground truth for one agent: both potential posteriors and outcomes.
#[derive(Debug, Clone, Serialize)]
pub struct PanelRow {
    pub id: usize,
    pub assigned: Group,
    pub prior_feature: f64,
    /// Feature under the no-signal or low-signal arm.
    pub posterior_base: f64,
    /// Feature under the treated or high-signal arm.
    pub posterior_treated: f64,
    pub outcome_base: f64,
    pub outcome_treated: f64,
    /// Exact average partial effect of the action between the two
    /// posterior features.
    pub within_ape: f64,
    /// Signal gap driving the update: treated signal minus prior feature
    /// in passive designs, high minus low signal in active ones.
    pub perception_gap: f64,
    /// Signal behind `posterior_base` (absent for passive designs).
    pub base_signal: Option<f64>,
    /// Signal behind `posterior_treated`.
    pub treated_signal: f64,
    pub covariates: Vec<f64>,
}

impl PanelRow {
    /// Belief movement between the two arms.
    pub fn delta_feature(&self) -> f64 {
        self.posterior_treated - self.posterior_base
    }
}

/// The full counterfactual panel of a simulated run.
#[derive(Debug, Clone, Serialize)]
pub struct CounterfactualPanel {
    pub rows: Vec<PanelRow>,
}

impl CounterfactualPanel {
    pub fn delta_features(&self) -> Vec<f64> {
        self.rows.iter().map(PanelRow::delta_feature).collect()
    }

    /// Average absolute belief movement, the scale constant in weight
    /// formulas.
    pub fn mean_abs_delta(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows
            .iter()
            .map(|r| r.delta_feature().abs())
            .sum::<f64>()
            / self.rows.len() as f64
    }
}

/// Observed records and ground-truth panel from one simulated run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<ExperimentRecord>,
    pub panel: CounterfactualPanel,
}

fn validate_population(agents: &[Agent]) -> Result<()> {
    if agents.is_empty() {
        return Err(Error::Invalid("population is empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let cov_len = agents[0].covariates.len();
    for agent in agents {
        if !seen.insert(agent.id) {
            return Err(Error::Invalid(format!("duplicate agent id {}", agent.id)));
        }
        if agent.covariates.len() != cov_len {
            return Err(Error::for_agent(
                agent.id,
                Error::dimension("covariates", cov_len, agent.covariates.len()),
            ));
        }
    }
    Ok(())
}

struct AgentRun {
    base_signal: Option<f64>,
    treated_signal: f64,
    prior_feature: f64,
    posterior_base: f64,
    posterior_treated: f64,
    outcome_base: f64,
    outcome_treated: f64,
    within_ape: f64,
    perception_gap: f64,
}

fn run_agent(agent: &Agent, design: &Design, feature: &Feature) -> Result<AgentRun> {
    agent.validate()?;
    let prior_feature = agent.prior.feature(feature)?;

    let (base_signal, treated_signal) = match design {
        Design::Passive { signal, .. } => (None, signal(agent)?),
        Design::Active { low, high, .. } => (Some(low(agent)?), high(agent)?),
    };
    if !treated_signal.is_finite() {
        return Err(Error::Invalid(format!(
            "signal must be finite, got {treated_signal}"
        )));
    }
    if let Some(s) = base_signal {
        if !s.is_finite() {
            return Err(Error::Invalid(format!("signal must be finite, got {s}")));
        }
    }

    let posterior_base = agent.posterior(base_signal)?.feature(feature)?;
    let posterior_treated = agent.posterior(Some(treated_signal))?.feature(feature)?;
    let outcome_base = agent.action.outcome(posterior_base)?;
    let outcome_treated = agent.action.outcome(posterior_treated)?;
    let within_ape = agent.action.within_ape(posterior_base, posterior_treated)?;
    let perception_gap = match base_signal {
        None => treated_signal - prior_feature,
        Some(low) => treated_signal - low,
    };
    Ok(AgentRun {
        base_signal,
        treated_signal,
        prior_feature,
        posterior_base,
        posterior_treated,
        outcome_base,
        outcome_treated,
        within_ape,
        perception_gap,
    })
}

fn arm_record(agent: &Agent, run: &AgentRun, design: &Design, group: Group) -> ExperimentRecord {
    let (signal, posterior_feature, outcome) = if group.is_instrument_arm() {
        (
            Some(run.treated_signal),
            run.posterior_treated,
            run.outcome_treated,
        )
    } else {
        (run.base_signal, run.posterior_base, run.outcome_base)
    };
    ExperimentRecord {
        id: agent.id,
        group,
        signal,
        treatment_signal: if design.is_active() {
            None
        } else {
            Some(run.treated_signal)
        },
        low_signal: run.base_signal,
        high_signal: if design.is_active() {
            Some(run.treated_signal)
        } else {
            None
        },
        prior_feature: run.prior_feature,
        posterior_feature,
        outcome,
        covariates: agent.covariates.clone(),
    }
}

fn panel_row(agent: &Agent, run: &AgentRun, assigned: Group) -> PanelRow {
    PanelRow {
        id: agent.id,
        assigned,
        prior_feature: run.prior_feature,
        posterior_base: run.posterior_base,
        posterior_treated: run.posterior_treated,
        outcome_base: run.outcome_base,
        outcome_treated: run.outcome_treated,
        within_ape: run.within_ape,
        perception_gap: run.perception_gap,
        base_signal: run.base_signal,
        treated_signal: run.treated_signal,
        covariates: agent.covariates.clone(),
    }
}

/// Runs the design over the population, measuring beliefs through
/// `feature`. Records reflect the assigned arm only; the panel carries
/// both arms of every agent.
pub fn simulate(agents: &[Agent], design: &Design, feature: &Feature) -> Result<Simulation> {
    validate_population(agents)?;
    let groups = assign_groups(design, agents.len());
    let mut records = Vec::with_capacity(agents.len());
    let mut rows = Vec::with_capacity(agents.len());

    for (agent, group) in agents.iter().zip(groups) {
        let run = run_agent(agent, design, feature).map_err(|e| Error::for_agent(agent.id, e))?;
        records.push(arm_record(agent, &run, design, group));
        rows.push(panel_row(agent, &run, group));
    }

    Ok(Simulation {
        records,
        panel: CounterfactualPanel { rows },
    })
}

/// Emits every agent under both arms: two records per agent, one panel row.
/// The record set is the exact product of the population with a fair coin,
/// so sample estimators applied to it reproduce population quantities for
/// an arm probability of one half without sampling noise. The panel's
/// `assigned` field carries the base arm as a placeholder.
pub fn enumerate_both_arms(
    agents: &[Agent],
    design: &Design,
    feature: &Feature,
) -> Result<Simulation> {
    validate_population(agents)?;
    let (base_arm, instrument_arm) = if design.is_active() {
        (Group::Low, Group::High)
    } else {
        (Group::Control, Group::Treated)
    };
    let mut records = Vec::with_capacity(agents.len() * 2);
    let mut rows = Vec::with_capacity(agents.len());
    for agent in agents {
        let run = run_agent(agent, design, feature).map_err(|e| Error::for_agent(agent.id, e))?;
        records.push(arm_record(agent, &run, design, base_arm));
        records.push(arm_record(agent, &run, design, instrument_arm));
        rows.push(panel_row(agent, &run, base_arm));
    }
    Ok(Simulation {
        records,
        panel: CounterfactualPanel { rows },
    })
}

/// Outcome of [`stability_check`].
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub holds: bool,
    pub max_drift: f64,
    /// Signed average drift, the weak (in-expectation) form.
    pub mean_drift: f64,
    pub violating_ids: Vec<usize>,
}

/// Checks that no-signal beliefs keep their feature value: the control
/// arm measures the prior. Reports the worst and average drift and which
/// agents moved more than `tol`.
pub fn stability_check(agents: &[Agent], feature: &Feature, tol: f64) -> Result<StabilityReport> {
    validate_population(agents)?;
    let mut max_drift: f64 = 0.0;
    let mut sum_drift = 0.0;
    let mut violating_ids = Vec::new();
    for agent in agents {
        let prior = agent
            .prior
            .feature(feature)
            .map_err(|e| Error::for_agent(agent.id, e))?;
        let control = agent
            .posterior(None)
            .and_then(|b| b.feature(feature))
            .map_err(|e| Error::for_agent(agent.id, e))?;
        let drift = control - prior;
        sum_drift += drift;
        max_drift = max_drift.max(drift.abs());
        if drift.abs() > tol {
            violating_ids.push(agent.id);
        }
    }
    Ok(StabilityReport {
        holds: violating_ids.is_empty(),
        max_drift,
        mean_drift: sum_drift / agents.len() as f64,
        violating_ids,
    })
}

/// Outcome of [`neutrality_check`].
#[derive(Debug, Clone, Serialize)]
pub struct NeutralityReport {
    pub holds: bool,
    pub max_drift: f64,
    /// Signed average drift, the weak (in-expectation) form.
    pub mean_drift: f64,
    pub violating_ids: Vec<usize>,
}

/// Checks that a signal confirming the prior feature value leaves the
/// feature unchanged. Exact for Gaussian-prior Bayesian agents; grid
/// agents generally move, and the report says by how much.
pub fn neutrality_check(
    agents: &[Agent],
    feature: &Feature,
    tol: f64,
) -> Result<NeutralityReport> {
    validate_population(agents)?;
    let mut max_drift: f64 = 0.0;
    let mut sum_drift = 0.0;
    let mut violating_ids = Vec::new();
    for agent in agents {
        let prior = agent
            .prior
            .feature(feature)
            .map_err(|e| Error::for_agent(agent.id, e))?;
        let confirmed = agent
            .posterior(Some(prior))
            .and_then(|b| b.feature(feature))
            .map_err(|e| Error::for_agent(agent.id, e))?;
        let drift = confirmed - prior;
        sum_drift += drift;
        max_drift = max_drift.max(drift.abs());
        if drift.abs() > tol {
            violating_ids.push(agent.id);
        }
    }
    Ok(NeutralityReport {
        holds: violating_ids.is_empty(),
        max_drift,
        mean_drift: sum_drift / agents.len() as f64,
        violating_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::GaussianBelief;
    use approx::assert_abs_diff_eq;

    fn unit_action() -> ActionFunction {
        ActionFunction::Affine {
            intercept: 0.0,
            slope: 2.0,
        }
    }

    fn gaussian_population(n: usize) -> Vec<Agent> {
        (0..n)
            .map(|id| Agent::gaussian(id, 1.0, 1.0, 1.0, unit_action()).unwrap())
            .collect()
    }

    #[test]
    fn assignment_is_deterministic_in_the_seed() {
        let design = Design::passive(constant_signal(3.0), 0.5, 42).unwrap();
        let a = assign_groups(&design, 100);
        let b = assign_groups(&design, 100);
        assert_eq!(a, b);
        let design2 = Design::passive(constant_signal(3.0), 0.5, 43).unwrap();
        assert_ne!(a, assign_groups(&design2, 100));
        assert!(a.contains(&Group::Treated) && a.contains(&Group::Control));
    }

    #[test]
    fn degenerate_arm_probabilities_are_rejected() {
        assert!(Design::passive(constant_signal(0.0), 0.0, 1).is_err());
        assert!(Design::passive(constant_signal(0.0), 1.0, 1).is_err());
        assert!(Design::active(constant_signal(0.0), constant_signal(1.0), 1.5, 1).is_err());
    }

    #[test]
    fn passive_gaussian_panel_matches_responsiveness_identity() {
        // r = 1 / (1 + 1) = 1/2, so the belief moves half the gap.
        let agents = gaussian_population(3);
        let design = Design::passive(constant_signal(3.0), 0.5, 7).unwrap();
        let sim = simulate(&agents, &design, &Feature::Mean).unwrap();
        for row in &sim.panel.rows {
            assert_abs_diff_eq!(row.prior_feature, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(row.posterior_base, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(row.perception_gap, 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(
                row.delta_feature(),
                0.5 * row.perception_gap,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(row.posterior_treated, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row.within_ape, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                row.outcome_treated - row.outcome_base,
                row.within_ape * row.delta_feature(),
                epsilon = 1e-12
            );
        }
        for record in &sim.records {
            match record.group {
                Group::Treated => {
                    assert_eq!(record.signal, Some(3.0));
                    assert_abs_diff_eq!(record.posterior_feature, 2.0, epsilon = 1e-12);
                }
                Group::Control => {
                    assert_eq!(record.signal, None);
                    assert_abs_diff_eq!(record.posterior_feature, 1.0, epsilon = 1e-15);
                }
                _ => panic!("passive design produced an active arm"),
            }
            assert_eq!(record.treatment_signal, Some(3.0));
            assert_eq!(record.low_signal, None);
        }
    }

    #[test]
    fn active_gaussian_panel_scales_the_arm_gap() {
        let agents = gaussian_population(4);
        let design =
            Design::active(constant_signal(0.0), constant_signal(4.0), 0.5, 11).unwrap();
        let sim = simulate(&agents, &design, &Feature::Mean).unwrap();
        for row in &sim.panel.rows {
            assert_abs_diff_eq!(row.perception_gap, 4.0, epsilon = 1e-15);
            assert_abs_diff_eq!(row.delta_feature(), 2.0, epsilon = 1e-12);
            assert_eq!(row.base_signal, Some(0.0));
        }
        for record in &sim.records {
            assert!(matches!(record.group, Group::Low | Group::High));
            assert_eq!(record.low_signal, Some(0.0));
            assert_eq!(record.high_signal, Some(4.0));
            assert_eq!(record.treatment_signal, None);
            assert!(record.signal.is_some());
        }
    }

    #[test]
    fn grid_noise_lane_tracks_the_closed_form() {
        let prior = GridBelief::discretized_gaussian(1.0, 1.0, 8.0, 1201).unwrap();
        let agent = Agent::new(
            0,
            Belief::Grid(prior),
            UpdateRule::Bayesian,
            UpdateRule::NoUpdate,
            Perception::Noise { variance: 1.0 },
            unit_action(),
            Vec::new(),
        )
        .unwrap();
        let posterior = agent.posterior(Some(3.0)).unwrap();
        let (closed, _) =
            gaussian_posterior(&GaussianBelief::new(1.0, 1.0).unwrap(), 3.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            posterior.feature(&Feature::Mean).unwrap(),
            closed.mean,
            epsilon = 1e-3
        );
    }

    #[test]
    fn control_drift_is_flagged_by_stability_check() {
        let mut agents = gaussian_population(3);
        agents[1].control_update = UpdateRule::MeanShift { delta: 0.5 };
        let report = stability_check(&agents, &Feature::Mean, 1e-10).unwrap();
        assert!(!report.holds);
        assert_eq!(report.violating_ids, vec![1]);
        assert_abs_diff_eq!(report.max_drift, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(report.mean_drift, 0.5 / 3.0, epsilon = 1e-15);

        let stable = gaussian_population(3);
        let report = stability_check(&stable, &Feature::Mean, 1e-10).unwrap();
        assert!(report.holds);
        assert_eq!(report.max_drift, 0.0);
    }

    #[test]
    fn confirming_signals_leave_gaussian_beliefs_alone() {
        let agents = gaussian_population(5);
        let report = neutrality_check(&agents, &Feature::Mean, 1e-12).unwrap();
        assert!(report.holds);
        assert!(report.max_drift <= 1e-15);
    }

    #[test]
    fn grid_agents_can_fail_neutrality_and_the_report_says_so() {
        // Binary-state agent whose mean is 0.5: the nearest grid signal is
        // 0, which drags the posterior mean to 0.2.
        let densities =
            ndarray::Array2::from_shape_vec((2, 2), vec![1.6, 0.4, 0.4, 1.6]).unwrap();
        let family = Arc::new(
            SignalFamily::new(vec![0.0, 1.0], vec![0.0, 1.0], densities).unwrap(),
        );
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        let agent = Agent::grid(0, prior, family, unit_action()).unwrap();
        let report = neutrality_check(&[agent], &Feature::Mean, 1e-10).unwrap();
        assert!(!report.holds);
        assert_abs_diff_eq!(report.max_drift, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn assignment_balances_covariates() {
        let mut agents = gaussian_population(4000);
        for agent in &mut agents {
            agent.covariates = vec![(agent.id % 2) as f64];
        }
        let design = Design::passive(constant_signal(2.0), 0.5, 19).unwrap();
        let sim = simulate(&agents, &design, &Feature::Mean).unwrap();
        let (mut sum_t, mut n_t, mut sum_c, mut n_c) = (0.0, 0.0, 0.0, 0.0);
        for r in &sim.records {
            if r.group == Group::Treated {
                sum_t += r.covariates[0];
                n_t += 1.0;
            } else {
                sum_c += r.covariates[0];
                n_c += 1.0;
            }
        }
        let diff = sum_t / n_t - sum_c / n_c;
        // Bernoulli(1/2) covariate: four standard errors of the mean gap.
        let se = (0.25 / n_t + 0.25 / n_c).sqrt();
        assert!(
            diff.abs() < 4.0 * se,
            "covariate imbalance {diff} exceeds 4 standard errors {se}"
        );
    }

    #[test]
    fn population_validation_catches_structural_mistakes() {
        let mut agents = gaussian_population(2);
        agents[1].id = 0;
        let design = Design::passive(constant_signal(1.0), 0.5, 3).unwrap();
        assert!(simulate(&agents, &design, &Feature::Mean).is_err());

        let mut agents = gaussian_population(2);
        agents[1].covariates = vec![1.0];
        assert!(simulate(&agents, &design, &Feature::Mean).is_err());

        assert!(simulate(&[], &design, &Feature::Mean).is_err());
    }

    #[test]
    fn signal_errors_carry_the_agent_id() {
        let agents = gaussian_population(9);
        let failing: SignalFn = Arc::new(|agent: &Agent| {
            if agent.id == 7 {
                Err(Error::Invalid("no signal for this agent".into()))
            } else {
                Ok(1.0)
            }
        });
        let design = Design::passive(failing, 0.5, 5).unwrap();
        match simulate(&agents, &design, &Feature::Mean) {
            Err(Error::Agent { id, .. }) => assert_eq!(id, 7),
            other => panic!("expected an agent-tagged error, got {other:?}"),
        }

        let design =
            Design::passive(constant_signal(f64::INFINITY), 0.5, 5).unwrap();
        assert!(simulate(&agents, &design, &Feature::Mean).is_err());
    }

    #[test]
    fn strict_family_perception_rejects_off_grid_signals() {
        let family = Arc::new(
            SignalFamily::gaussian_location(
                (0..21).map(|i| -5.0 + 0.5 * i as f64).collect(),
                (0..9).map(|i| -2.0 + 0.5 * i as f64).collect(),
                1.0,
            )
            .unwrap(),
        );
        let prior = GridBelief::uniform(family.states().to_vec()).unwrap();
        let mut agent = Agent::grid(0, prior, family, unit_action()).unwrap();
        if let Perception::Family { strict, .. } = &mut agent.perception {
            *strict = true;
        }
        assert!(agent.posterior(Some(0.3)).is_err());
        assert!(agent.posterior(Some(0.5)).is_ok());
    }

    #[test]
    fn incompatible_lane_combinations_fail_at_construction() {
        let gaussian_prior = Belief::Gaussian(GaussianBelief::new(0.0, 1.0).unwrap());
        let family = Arc::new(
            SignalFamily::gaussian_location(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0], 1.0).unwrap(),
        );
        assert!(Agent::new(
            0,
            gaussian_prior.clone(),
            UpdateRule::Bayesian,
            UpdateRule::NoUpdate,
            Perception::Family {
                family,
                strict: false
            },
            unit_action(),
            Vec::new(),
        )
        .is_err());

        assert!(Agent::new(
            0,
            gaussian_prior.clone(),
            UpdateRule::Anchored {
                tau: 0.5,
                anchor: crate::beliefs::Anchor::Prior
            },
            UpdateRule::NoUpdate,
            Perception::Noise { variance: 1.0 },
            unit_action(),
            Vec::new(),
        )
        .is_err());

        assert!(Agent::new(
            0,
            gaussian_prior,
            UpdateRule::Bayesian,
            UpdateRule::Bayesian,
            Perception::Noise { variance: 1.0 },
            unit_action(),
            Vec::new(),
        )
        .is_err());
    }

    #[test]
    fn simulation_is_reproducible() {
        let agents = gaussian_population(50);
        let design = Design::passive(
            prior_offset_signal(Feature::Mean, 1.5),
            0.4,
            123,
        )
        .unwrap();
        let a = simulate(&agents, &design, &Feature::Mean).unwrap();
        let b = simulate(&agents, &design, &Feature::Mean).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.group, rb.group);
            assert_eq!(ra.outcome.to_bits(), rb.outcome.to_bits());
            assert_eq!(
                ra.posterior_feature.to_bits(),
                rb.posterior_feature.to_bits()
            );
        }
    }

    #[test]
    fn tabulated_signals_look_up_by_id() {
        let agents = gaussian_population(3);
        let design =
            Design::passive(tabulated_signal(vec![1.0, 2.0, 3.0]), 0.5, 9).unwrap();
        let sim = simulate(&agents, &design, &Feature::Mean).unwrap();
        for (i, row) in sim.panel.rows.iter().enumerate() {
            assert_eq!(row.treated_signal, (i + 1) as f64);
        }
        let short = Design::passive(tabulated_signal(vec![1.0]), 0.5, 9).unwrap();
        assert!(simulate(&agents, &short, &Feature::Mean).is_err());
    }
}
