//! Weight diagnostics: which average of agent effects an estimator targets.
//!
//! Each estimator's probability limit is a weighted average of within-agent
//! average partial effects, with weights proportional to the agent's belief
//! movement times the first-stage value of its interaction vector. This
//! module computes those weights two ways:
//!
//! * from the counterfactual panel, exactly, including the estimand they
//!   imply and how much of the weight mass is negative;
//! * from observed records alone, binned on an observable, using
//!   arm-contrast ratio estimators that an experimenter could run on real
//!   data.
//!
//! It also verifies the closed-form weight expressions available for each
//! interaction when belief movement is sign-aligned with the signal gap,
//! and ships a small population proving that uniformly positive agent
//! effects can produce a negative estimand.

use serde::Serialize;

use crate::actions::ActionFunction;
use crate::beliefs::Feature;
use crate::error::{Error, Result};
use crate::estimators::{
    interaction_components, normalized_gap, passive_design_data, sign0, GapNormalization,
    InteractionKind, PassiveOptions,
};
use crate::experiment::{
    tabulated_signal, Agent, CounterfactualPanel, Design, ExperimentRecord,
};
use crate::linalg::{ols, DesignMatrix};

/// Relative tolerance deciding when the weight normalizer is too close to
/// zero to divide by.
const NORMALIZER_RTOL: f64 = 1e-12;

fn check_passive_panel(panel: &CounterfactualPanel) -> Result<()> {
    if panel.rows.is_empty() {
        return Err(Error::Invalid("the panel has no rows".into()));
    }
    if let Some(i) = panel.rows.iter().position(|r| r.base_signal.is_some()) {
        return Err(Error::Schema(format!(
            "panel row {i} carries a base-arm signal; this panel came from an active design"
        )));
    }
    Ok(())
}

fn check_active_panel(panel: &CounterfactualPanel) -> Result<()> {
    if panel.rows.is_empty() {
        return Err(Error::Invalid("the panel has no rows".into()));
    }
    if let Some(i) = panel.rows.iter().position(|r| r.base_signal.is_none()) {
        return Err(Error::Schema(format!(
            "panel row {i} has no base-arm signal; this panel came from a passive design"
        )));
    }
    Ok(())
}

fn panel_interaction_matrix(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
) -> Result<Vec<(String, Vec<f64>)>> {
    let gaps: Vec<f64> = panel
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| normalized_gap(r.treated_signal, r.prior_feature, normalization, i))
        .collect::<Result<_>>()?;
    let signals: Vec<f64> = panel.rows.iter().map(|r| r.treated_signal).collect();
    let priors: Vec<f64> = panel.rows.iter().map(|r| r.prior_feature).collect();
    Ok(interaction_components(kind, &gaps, &signals, &priors))
}

/// Population first stage on the panel: the least-squares coefficients of
/// belief movement on the interaction components. Returns the component
/// labels with their coefficients.
pub fn panel_first_stage(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
) -> Result<(Vec<String>, Vec<f64>)> {
    check_passive_panel(panel)?;
    let components = panel_interaction_matrix(panel, kind, normalization)?;
    let labels: Vec<String> = components.iter().map(|(l, _)| l.clone()).collect();
    let matrix = DesignMatrix::from_columns(components)?;
    let deltas = panel.delta_features();
    let fit = ols(&matrix, &deltas)?;
    Ok((labels, fit.coeffs.to_vec()))
}

fn index_values(components: &[(String, Vec<f64>)], pi: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            components
                .iter()
                .zip(pi)
                .map(|((_, col), coeff)| col[i] * coeff)
                .sum()
        })
        .collect()
}

/// Normalizes unnormalized weights to mean one, rejecting populations whose
/// average is too close to zero relative to the weights' own scale.
fn normalize_weights(unnormalized: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = unnormalized.len() as f64;
    let mean = unnormalized.iter().sum::<f64>() / n;
    let mean_abs = unnormalized.iter().map(|u| u.abs()).sum::<f64>() / n;
    if mean_abs == 0.0 {
        return Err(Error::DegenerateWeights(
            "every weight is zero; the instrument index never aligns with belief movement"
                .into(),
        ));
    }
    if mean.abs() <= NORMALIZER_RTOL * mean_abs {
        return Err(Error::DegenerateWeights(format!(
            "weights average to {mean:e} against a typical magnitude of {mean_abs:e}; \
             the weighted average is not defined"
        )));
    }
    Ok((unnormalized.iter().map(|u| u / mean).collect(), mean))
}

/// Exact weights an estimator places on each agent, computed from the
/// counterfactual panel. Weights are normalized to mean one.
#[derive(Debug, Clone, Serialize)]
pub struct WeightReport {
    /// Which estimator the weights belong to.
    pub interaction: String,
    /// Mean-one weights, one per panel row.
    pub weights: Vec<f64>,
    /// Within-agent average partial effects, one per panel row.
    pub apes: Vec<f64>,
    /// First-stage coefficients behind the instrument index.
    pub first_stage: Vec<f64>,
    /// Mean of the unnormalized weights (the normalizing constant).
    pub normalization: f64,
    /// Fraction of rows with strictly negative weight.
    pub negative_share: f64,
    /// Fraction of absolute weight mass on negatively weighted rows.
    pub negative_mass: f64,
    /// The weighted average of partial effects the estimator targets.
    pub estimand: f64,
}

impl WeightReport {
    /// The same weights rescaled to sum to one.
    pub fn weights_summing_to_one(&self) -> Vec<f64> {
        let n = self.weights.len() as f64;
        self.weights.iter().map(|w| w / n).collect()
    }
}

fn report_from_unnormalized(
    interaction: String,
    unnormalized: Vec<f64>,
    apes: Vec<f64>,
    first_stage: Vec<f64>,
) -> Result<WeightReport> {
    let (weights, normalization) = normalize_weights(&unnormalized)?;
    let n = weights.len() as f64;
    let negative_share = weights.iter().filter(|w| **w < 0.0).count() as f64 / n;
    let abs_mass: f64 = weights.iter().map(|w| w.abs()).sum();
    let negative_mass = weights
        .iter()
        .filter(|w| **w < 0.0)
        .map(|w| w.abs())
        .sum::<f64>()
        / abs_mass;
    let estimand = weights.iter().zip(&apes).map(|(w, a)| w * a).sum::<f64>() / n;
    Ok(WeightReport {
        interaction,
        weights,
        apes,
        first_stage,
        normalization,
        negative_share,
        negative_mass,
        estimand,
    })
}

/// Exact weights of a passive-design estimator over the panel population:
/// each row's belief movement times its interaction index, normalized to
/// mean one. The first stage is fitted on the panel itself.
pub fn population_weights_passive(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
) -> Result<WeightReport> {
    let (_, pi) = panel_first_stage(panel, kind, normalization)?;
    population_weights_passive_with_pi(panel, kind, normalization, &pi)
}

/// Like [`population_weights_passive`], but with first-stage coefficients
/// supplied by the caller, typically from a fitted sample specification.
pub fn population_weights_passive_with_pi(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
    pi: &[f64],
) -> Result<WeightReport> {
    check_passive_panel(panel)?;
    let components = panel_interaction_matrix(panel, kind, normalization)?;
    if pi.len() != components.len() {
        return Err(Error::dimension(
            "first-stage coefficients",
            components.len(),
            pi.len(),
        ));
    }
    let index = index_values(&components, pi, panel.rows.len());
    let unnormalized: Vec<f64> = panel
        .rows
        .iter()
        .zip(&index)
        .map(|(row, idx)| row.delta_feature() * idx)
        .collect();
    let apes = panel.rows.iter().map(|r| r.within_ape).collect();
    report_from_unnormalized(format!("{kind:?}"), unnormalized, apes, pi.to_vec())
}

/// Exact weights of the active-design estimator: belief movement between
/// the two signal arms, normalized to mean one.
pub fn population_weights_active(panel: &CounterfactualPanel) -> Result<WeightReport> {
    check_active_panel(panel)?;
    let deltas = panel.delta_features();
    let pi = vec![deltas.iter().sum::<f64>() / deltas.len() as f64];
    let unnormalized: Vec<f64> = deltas.iter().map(|d| d * pi[0]).collect();
    let apes = panel.rows.iter().map(|r| r.within_ape).collect();
    report_from_unnormalized("Active".into(), unnormalized, apes, pi)
}

/// The estimator's probability limit computed through outcomes instead of
/// partial effects: the ratio of index-weighted outcome movement to
/// index-weighted belief movement.
pub fn panel_estimand_passive(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
) -> Result<f64> {
    check_passive_panel(panel)?;
    let components = panel_interaction_matrix(panel, kind, normalization)?;
    let (_, pi) = panel_first_stage(panel, kind, normalization)?;
    let index = index_values(&components, &pi, panel.rows.len());
    ratio_estimand(panel, &index)
}

/// Active-design analog of [`panel_estimand_passive`]: the Wald ratio of
/// average outcome movement to average belief movement.
pub fn panel_estimand_active(panel: &CounterfactualPanel) -> Result<f64> {
    check_active_panel(panel)?;
    let index = vec![1.0; panel.rows.len()];
    ratio_estimand(panel, &index)
}

fn ratio_estimand(panel: &CounterfactualPanel, index: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, idx) in panel.rows.iter().zip(index) {
        num += idx * (row.outcome_treated - row.outcome_base);
        den += idx * row.delta_feature();
    }
    let scale = panel
        .rows
        .iter()
        .zip(index)
        .map(|(r, idx)| (idx * r.delta_feature()).abs())
        .sum::<f64>();
    if scale == 0.0 || den.abs() <= NORMALIZER_RTOL * scale {
        return Err(Error::DegenerateWeights(
            "index-weighted belief movement sums to zero; the estimand is not defined".into(),
        ));
    }
    Ok(num / den)
}

/// Outcome of comparing machinery weights against their closed form.
#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationReport {
    pub interaction: String,
    /// Whether the closed form's premise holds: belief movement is
    /// sign-aligned with the signal gap on every row (and, for the active
    /// design, movement never changes direction).
    pub applicable: bool,
    /// Whether the normalized weights agree within the tolerance.
    pub matches: bool,
    pub max_abs_diff: f64,
}

/// Verifies the closed-form weight expression for a passive interaction
/// against the general first-stage machinery on the same panel.
///
/// Closed forms exist when every agent's belief moves in the direction of
/// its signal gap: then the weight is the absolute movement times a known
/// function of the gap or prior. `tol` bounds the allowed disagreement
/// between normalized weights.
pub fn verify_weight_characterization(
    panel: &CounterfactualPanel,
    kind: InteractionKind,
    normalization: GapNormalization,
    tol: f64,
) -> Result<CharacterizationReport> {
    check_passive_panel(panel)?;
    let report = population_weights_passive(panel, kind, normalization)?;
    let gaps: Vec<f64> = panel
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| normalized_gap(r.treated_signal, r.prior_feature, normalization, i))
        .collect::<Result<_>>()?;

    let applicable = panel.rows.iter().zip(&gaps).all(|(row, gap)| {
        let delta = row.delta_feature();
        delta == 0.0 || sign0(delta) == sign0(*gap)
    });

    let pi = &report.first_stage;
    let closed_unnormalized: Vec<f64> = panel
        .rows
        .iter()
        .zip(&gaps)
        .map(|(row, gap)| {
            let moved = row.delta_feature().abs();
            let dir = sign0(*gap);
            match kind {
                InteractionKind::Sign => moved * pi[0] * dir.abs(),
                InteractionKind::Gap => moved * pi[0].abs() * gap.abs(),
                InteractionKind::OneGap => moved * (pi[0] * dir + pi[1] * gap.abs()),
                InteractionKind::OnePrior => {
                    moved * (pi[0] * dir + pi[1] * dir * row.prior_feature)
                }
                InteractionKind::OneSignalPrior => moved
                    * (pi[0] * dir
                        + pi[1] * dir * row.treated_signal
                        + pi[2] * dir * row.prior_feature),
            }
        })
        .collect();
    let (closed_weights, _) = normalize_weights(&closed_unnormalized)?;
    let max_abs_diff = report
        .weights
        .iter()
        .zip(&closed_weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    Ok(CharacterizationReport {
        interaction: format!("{kind:?}"),
        applicable,
        matches: applicable && max_abs_diff <= tol,
        max_abs_diff,
    })
}

/// Active-design analog of [`verify_weight_characterization`]: weights are
/// proportional to absolute belief movement when all movement shares one
/// direction.
pub fn verify_active_weight_characterization(
    panel: &CounterfactualPanel,
    tol: f64,
) -> Result<CharacterizationReport> {
    check_active_panel(panel)?;
    let report = population_weights_active(panel)?;
    let deltas = panel.delta_features();
    let has_pos = deltas.iter().any(|d| *d > 0.0);
    let has_neg = deltas.iter().any(|d| *d < 0.0);
    let applicable = !(has_pos && has_neg);
    let closed_unnormalized: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let (closed_weights, _) = normalize_weights(&closed_unnormalized)?;
    let max_abs_diff = report
        .weights
        .iter()
        .zip(&closed_weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    Ok(CharacterizationReport {
        interaction: "Active".into(),
        applicable,
        matches: applicable && max_abs_diff <= tol,
        max_abs_diff,
    })
}

/// Observable used to bin records in sample-side weight reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinVariable {
    /// Signal minus prior feature (normalized per the options).
    Gap,
    PriorFeature,
    Signal,
}

impl BinVariable {
    fn label(&self) -> &'static str {
        match self {
            BinVariable::Gap => "gap",
            BinVariable::PriorFeature => "prior_feature",
            BinVariable::Signal => "signal",
        }
    }
}

/// One bin of a sample-side weight report.
#[derive(Debug, Clone, Serialize)]
pub struct BinEstimate {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Fraction of records in the bin.
    pub share: f64,
    /// Estimated average weight on the bin's subpopulation.
    pub mean_weight: f64,
    /// The bin's additive contribution to the ratio-form estimate.
    pub contribution: f64,
    pub empty: bool,
}

/// Sample-side weight and contribution decomposition over bins of an
/// observable.
#[derive(Debug, Clone, Serialize)]
pub struct BinReport {
    pub interaction: String,
    pub variable: String,
    pub edges: Vec<f64>,
    pub bins: Vec<BinEstimate>,
    /// Ratio-form estimate of the full weighted average. The bins'
    /// contributions sum to this exactly; it differs from the TSLS
    /// regression coefficient by sampling noise of order one over the
    /// square root of the sample size.
    pub total: f64,
    /// True when the interaction guarantees nonnegative weights under
    /// sign-aligned updating (sign and gap interactions only).
    pub sign_certified: bool,
    pub warnings: Vec<String>,
}

fn quantile_edges(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    let n = sorted.len();
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| sorted[((n - 1) * k) / bins])
        .collect();
    edges.dedup();
    if edges.len() < 2 {
        return Err(Error::Invalid(
            "the binning variable is constant; bins cannot be formed".into(),
        ));
    }
    Ok(edges)
}

fn bin_index(edges: &[f64], x: f64, row: usize) -> Result<usize> {
    let last = edges.len() - 2;
    if x < edges[0] || x > edges[edges.len() - 1] {
        return Err(Error::Invalid(format!(
            "record {row} has binning value {x} outside the edge range [{}, {}]",
            edges[0],
            edges[edges.len() - 1]
        )));
    }
    for j in 0..=last {
        if x < edges[j + 1] || j == last {
            return Ok(j);
        }
    }
    unreachable!("edge scan covers the range")
}

/// Sample-side weight decomposition on quantile bins of `variable`.
/// See [`bin_characterization_with_edges`] for the mechanics.
pub fn bin_characterization(
    records: &[ExperimentRecord],
    options: &PassiveOptions,
    variable: BinVariable,
    bins: usize,
) -> Result<BinReport> {
    if bins == 0 {
        return Err(Error::Invalid("at least one bin is required".into()));
    }
    let values = bin_values(records, options, variable)?;
    let edges = quantile_edges(&values, bins)?;
    bin_characterization_with_edges(records, options, variable, &edges)
}

fn bin_values(
    records: &[ExperimentRecord],
    options: &PassiveOptions,
    variable: BinVariable,
) -> Result<Vec<f64>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let signal = r.treatment_signal.ok_or_else(|| {
                Error::Schema(format!(
                    "record {i} lacks a treated-arm signal; passive diagnostics need one"
                ))
            })?;
            Ok(match variable {
                BinVariable::Gap => {
                    normalized_gap(signal, r.prior_feature, options.gap_normalization, i)?
                }
                BinVariable::PriorFeature => r.prior_feature,
                BinVariable::Signal => signal,
            })
        })
        .collect()
}

/// Sample-side weight decomposition over explicit bin edges, computed from
/// observed records only.
///
/// The first stage fitted on the records gives each record an instrument
/// index. Weight and contribution estimates are arm contrasts: the bin's
/// mean weight compares index-weighted posterior features between arms
/// within the bin, and its contribution does the same with outcomes,
/// against the full-sample belief-movement denominator. Contributions sum
/// to the ratio-form total exactly. Edges must cover every record.
pub fn bin_characterization_with_edges(
    records: &[ExperimentRecord],
    options: &PassiveOptions,
    variable: BinVariable,
    edges: &[f64],
) -> Result<BinReport> {
    if edges.len() < 2 {
        return Err(Error::Invalid("at least two bin edges are required".into()));
    }
    for (i, pair) in edges.windows(2).enumerate() {
        if !pair[0].is_finite() || pair[1] <= pair[0] {
            return Err(Error::Invalid(format!(
                "bin edges must be finite and strictly increasing (violated at edge {i})"
            )));
        }
    }

    let data = passive_design_data(records, options)?;
    let first_stage_x = data.exog.hstack(&data.instruments)?;
    let fit = ols(&first_stage_x, &data.endog)?;
    let pi = &fit.coeffs[data.exog.k()..];
    let index = index_values(&data.components, pi, records.len());

    let values = bin_values(records, options, variable)?;
    let n_bins = edges.len() - 1;
    let mut assignment = Vec::with_capacity(records.len());
    for (i, v) in values.iter().enumerate() {
        assignment.push(bin_index(edges, *v, i)?);
    }

    let mut n_treated = 0.0;
    let mut n_control = 0.0;
    for r in records {
        if r.group.is_instrument_arm() {
            n_treated += 1.0;
        } else {
            n_control += 1.0;
        }
    }

    // Arm means of index * quantity, overall and per bin.
    let arm_contrast = |quantity: &dyn Fn(usize) -> f64, bin: Option<usize>| -> f64 {
        let mut sum_t = 0.0;
        let mut sum_c = 0.0;
        for (i, r) in records.iter().enumerate() {
            if bin.is_some_and(|b| assignment[i] != b) {
                continue;
            }
            let v = index[i] * quantity(i);
            if r.group.is_instrument_arm() {
                sum_t += v;
            } else {
                sum_c += v;
            }
        }
        sum_t / n_treated - sum_c / n_control
    };

    let feature = |i: usize| records[i].posterior_feature;
    let outcome = |i: usize| records[i].outcome;
    let denominator = arm_contrast(&feature, None);
    let denominator_scale: f64 = index
        .iter()
        .zip(records)
        .map(|(idx, r)| (idx * r.posterior_feature).abs())
        .sum::<f64>()
        / records.len() as f64;
    if denominator.abs() <= NORMALIZER_RTOL * denominator_scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateWeights(
            "the arm contrast of index-weighted features is zero; ratio estimates are not \
             defined"
                .into(),
        ));
    }

    let mut bins_out = Vec::with_capacity(n_bins);
    let mut total = 0.0;
    for b in 0..n_bins {
        let count = assignment.iter().filter(|a| **a == b).count();
        let share = count as f64 / records.len() as f64;
        let empty = count == 0;
        let (mean_weight, contribution) = if empty {
            (0.0, 0.0)
        } else {
            let weight_num = arm_contrast(&feature, Some(b));
            let contrib_num = arm_contrast(&outcome, Some(b));
            (weight_num / denominator / share, contrib_num / denominator)
        };
        total += contribution;
        bins_out.push(BinEstimate {
            lo: edges[b],
            hi: edges[b + 1],
            count,
            share,
            mean_weight,
            contribution,
            empty,
        });
    }

    let mut warnings = data.warnings;
    if bins_out.iter().any(|b| b.empty) {
        warnings.push("some bins contain no records; their estimates are reported as zero".into());
    }

    Ok(BinReport {
        interaction: format!("{:?}", options.interaction),
        variable: variable.label().into(),
        edges: edges.to_vec(),
        bins: bins_out,
        total,
        sign_certified: matches!(
            options.interaction,
            InteractionKind::Sign | InteractionKind::Gap
        ),
        warnings,
    })
}

/// A three-agent population on which the constant-plus-prior estimator's
/// target is exactly -1 even though every agent's partial effect is
/// strictly positive.
///
/// All agents share unit prior variance and unit noise variance, so each
/// moves halfway toward its signal. Priors sit at 0, 1, and 2; signals at
/// 2, -1, and 4 put the middle agent's gap in the opposite direction; and
/// action slopes are 1, 3, and 1. The first stage then loads only on the
/// constant, every agent gets index one third, and the middle agent's
/// opposite belief movement carries weight -3 against its slope of 3.
pub fn negative_weight_population() -> Result<(Vec<Agent>, Design, Feature)> {
    let slopes = [1.0, 3.0, 1.0];
    let agents = slopes
        .iter()
        .enumerate()
        .map(|(id, slope)| {
            Agent::gaussian(
                id,
                id as f64,
                1.0,
                1.0,
                ActionFunction::Affine {
                    intercept: 0.0,
                    slope: *slope,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let design = Design::passive(tabulated_signal(vec![2.0, -1.0, 4.0]), 0.5, 17)?;
    Ok((agents, design, Feature::Mean))
}
