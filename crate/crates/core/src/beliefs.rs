//! Belief states, signal likelihood families, and update rules.
//!
//! Beliefs over a scalar state come in two representations: a discrete
//! [`GridBelief`] (point masses on a strictly increasing state grid) and a
//! closed-form [`GaussianBelief`]. Signals are described by a
//! [`SignalFamily`]: per-state likelihood rows evaluated on a signal grid,
//! normalized under trapezoidal quadrature. Update rules cover exact Bayes,
//! anchoring toward a fixed belief, Grether-style over/underweighting of
//! likelihood and prior, a no-op, and a pure mean drift used to probe
//! stability violations.
//!
//! Two checks connect likelihood structure to behavior: [`mlr_check`]
//! verifies the monotone likelihood ratio property by exhaustive
//! cross-product comparisons, and [`signal_monotonicity_check`] verifies
//! that the post-update value of a feature is nondecreasing along the
//! signal grid for a concrete prior and rule.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for probability-mass accounting.
pub const MASS_TOL: f64 = 1e-10;
/// Absolute tolerance for quadrature normalization of likelihood columns.
pub const FAMILY_NORMALIZATION_TOL: f64 = 1e-8;
/// Tolerance for the monotone-likelihood-ratio cross-product inequality.
pub const MLR_TOL: f64 = 1e-12;
/// Tolerance for feature monotonicity along the signal grid.
pub const MONOTONICITY_TOL: f64 = 1e-10;

fn check_grid(label: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Invalid(format!("{label} grid is empty")));
    }
    for (i, v) in grid.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Invalid(format!("{label} grid has non-finite entry at {i}")));
        }
    }
    for i in 1..grid.len() {
        if grid[i] <= grid[i - 1] {
            return Err(Error::Invalid(format!(
                "{label} grid must be strictly increasing (violated at index {i})"
            )));
        }
    }
    Ok(())
}

/// Trapezoidal quadrature weights for a strictly increasing grid.
///
/// A single-point grid gets weight one, so sums over it act as plain
/// evaluation.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; n];
    w[0] = (grid[1] - grid[0]) / 2.0;
    w[n - 1] = (grid[n - 1] - grid[n - 2]) / 2.0;
    for i in 1..n - 1 {
        w[i] = (grid[i + 1] - grid[i - 1]) / 2.0;
    }
    w
}

/// A discrete belief: point masses on a strictly increasing state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBelief {
    states: Vec<f64>,
    masses: Vec<f64>,
}

impl GridBelief {
    /// Validates grids and masses: strictly increasing finite states,
    /// nonnegative masses summing to one within [`MASS_TOL`].
    pub fn new(states: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        check_grid("state", &states)?;
        if masses.len() != states.len() {
            return Err(Error::dimension("belief masses", states.len(), masses.len()));
        }
        let mut total = 0.0;
        for (i, m) in masses.iter().enumerate() {
            if !m.is_finite() || *m < 0.0 {
                return Err(Error::Invalid(format!(
                    "belief mass at index {i} must be finite and nonnegative, got {m}"
                )));
            }
            total += m;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Invalid(format!(
                "belief masses must sum to 1 within {MASS_TOL:e}, got {total}"
            )));
        }
        Ok(GridBelief { states, masses })
    }

    /// Uniform belief over the given states.
    pub fn uniform(states: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Invalid("state grid is empty".into()));
        }
        GridBelief::new(states, vec![1.0 / n as f64; n])
    }

    /// All mass on one grid point.
    pub fn point_mass(states: Vec<f64>, index: usize) -> Result<Self> {
        if index >= states.len() {
            return Err(Error::Invalid(format!(
                "point-mass index {index} out of range for {} states",
                states.len()
            )));
        }
        let mut masses = vec![0.0; states.len()];
        masses[index] = 1.0;
        GridBelief::new(states, masses)
    }

    /// Normalizes nonnegative weights into masses.
    pub fn from_weights(states: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_grid("state", &states)?;
        if weights.len() != states.len() {
            return Err(Error::dimension("belief weights", states.len(), weights.len()));
        }
        let mut total = 0.0;
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Invalid(format!(
                    "belief weight at index {i} must be finite and nonnegative, got {w}"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::DegenerateEvidence(
                "belief weights sum to zero".into(),
            ));
        }
        let masses = weights.into_iter().map(|w| w / total).collect();
        Ok(GridBelief { states, masses })
    }

    /// Discretizes a normal density on an evenly spaced grid spanning
    /// `half_width_sigmas` standard deviations around the mean, with
    /// trapezoid-weighted, renormalized masses.
    pub fn discretized_gaussian(
        mean: f64,
        variance: f64,
        half_width_sigmas: f64,
        points: usize,
    ) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Invalid(format!("variance must be positive, got {variance}")));
        }
        if points < 2 {
            return Err(Error::Invalid("discretization needs at least 2 points".into()));
        }
        if !(half_width_sigmas > 0.0) {
            return Err(Error::Invalid("half width must be positive".into()));
        }
        let sd = variance.sqrt();
        let lo = mean - half_width_sigmas * sd;
        let hi = mean + half_width_sigmas * sd;
        let step = (hi - lo) / (points - 1) as f64;
        let states: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let quad = trapezoid_weights(&states);
        let weights: Vec<f64> = states
            .iter()
            .zip(&quad)
            .map(|(x, w)| {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() * w
            })
            .collect();
        GridBelief::from_weights(states, weights)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.masses)
            .map(|(s, m)| s * m)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.masses)
            .map(|(s, m)| s * s * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.second_moment() - mu * mu
    }

    /// Cumulative masses along the state grid.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// Same masses on a grid shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::Invalid(format!("shift must be finite, got {delta}")));
        }
        Ok(GridBelief {
            states: self.states.iter().map(|s| s + delta).collect(),
            masses: self.masses.clone(),
        })
    }

    /// Value of a feature of this belief.
    pub fn feature(&self, feature: &Feature) -> Result<f64> {
        match feature {
            Feature::Mean => Ok(self.mean()),
            Feature::SecondMoment => Ok(self.second_moment()),
            Feature::Variance => Ok(self.variance()),
            Feature::Moment(phi) => {
                if phi.len() != self.len() {
                    return Err(Error::dimension("moment weights", self.len(), phi.len()));
                }
                Ok(phi.iter().zip(&self.masses).map(|(p, m)| p * m).sum())
            }
        }
    }
}

/// A normal belief in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::Invalid(format!("mean must be finite, got {mean}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Invalid(format!("variance must be positive, got {variance}")));
        }
        Ok(GaussianBelief { mean, variance })
    }

    pub fn feature(&self, feature: &Feature) -> Result<f64> {
        match feature {
            Feature::Mean => Ok(self.mean),
            Feature::SecondMoment => Ok(self.variance + self.mean * self.mean),
            Feature::Variance => Ok(self.variance),
            Feature::Moment(_) => Err(Error::Invalid(
                "moment features are defined on grid beliefs only".into(),
            )),
        }
    }
}

/// Either belief representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Belief {
    Grid(GridBelief),
    Gaussian(GaussianBelief),
}

impl Belief {
    pub fn feature(&self, feature: &Feature) -> Result<f64> {
        match self {
            Belief::Grid(b) => b.feature(feature),
            Belief::Gaussian(b) => b.feature(feature),
        }
    }

    /// The same belief with its location shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Belief> {
        match self {
            Belief::Grid(b) => Ok(Belief::Grid(b.shifted(delta)?)),
            Belief::Gaussian(b) => Ok(Belief::Gaussian(GaussianBelief::new(
                b.mean + delta,
                b.variance,
            )?)),
        }
    }
}

/// The scalar feature of a belief that agents act on.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Mean,
    SecondMoment,
    Variance,
    /// A general moment: expectation of per-state values `phi`.
    Moment(Vec<f64>),
}

impl Feature {
    /// Short name used in reports and CSV headers.
    pub fn label(&self) -> &'static str {
        match self {
            Feature::Mean => "mean",
            Feature::SecondMoment => "second_moment",
            Feature::Variance => "variance",
            Feature::Moment(_) => "moment",
        }
    }
}

/// Value of `feature` under `belief`.
pub fn feature_value(belief: &Belief, feature: &Feature) -> Result<f64> {
    belief.feature(feature)
}

/// Per-state signal likelihoods evaluated on a signal grid.
///
/// Row `j` holds the density of signal `signals[j]` under each state; each
/// state column integrates to one under trapezoidal quadrature on the
/// signal grid.
#[derive(Debug, Clone)]
pub struct SignalFamily {
    signals: Vec<f64>,
    states: Vec<f64>,
    /// Shape (signals, states).
    densities: Array2<f64>,
    quad_weights: Vec<f64>,
}

impl SignalFamily {
    /// Validates grids, nonnegativity, and column normalization within
    /// [`FAMILY_NORMALIZATION_TOL`].
    pub fn new(signals: Vec<f64>, states: Vec<f64>, densities: Array2<f64>) -> Result<Self> {
        check_grid("signal", &signals)?;
        check_grid("state", &states)?;
        if densities.nrows() != signals.len() {
            return Err(Error::dimension("density rows", signals.len(), densities.nrows()));
        }
        if densities.ncols() != states.len() {
            return Err(Error::dimension("density columns", states.len(), densities.ncols()));
        }
        for ((j, m), v) in densities.indexed_iter() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Invalid(format!(
                    "density at signal {j}, state {m} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let quad_weights = trapezoid_weights(&signals);
        for m in 0..states.len() {
            let total: f64 = (0..signals.len())
                .map(|j| densities[[j, m]] * quad_weights[j])
                .sum();
            if (total - 1.0).abs() > FAMILY_NORMALIZATION_TOL {
                return Err(Error::Invalid(format!(
                    "likelihood column for state index {m} integrates to {total}, expected 1"
                )));
            }
        }
        Ok(SignalFamily {
            signals,
            states,
            densities,
            quad_weights,
        })
    }

    /// Normal location family: signal = state + noise with the given
    /// variance, columns renormalized exactly on the signal grid.
    pub fn gaussian_location(
        signals: Vec<f64>,
        states: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        let sd = noise_variance.sqrt();
        Self::location_family(signals, states, move |s, omega| {
            let z = (s - omega) / sd;
            (-0.5 * z * z).exp()
        })
    }

    /// Logistic location family with the given scale parameter.
    pub fn logistic_location(signals: Vec<f64>, states: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!("scale must be positive, got {scale}")));
        }
        Self::location_family(signals, states, move |s, omega| {
            let z = (s - omega) / scale;
            let e = (-z.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        })
    }

    /// Builds a family from an unnormalized density kernel, renormalizing
    /// each state column on the signal grid.
    pub fn location_family(
        signals: Vec<f64>,
        states: Vec<f64>,
        kernel: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        check_grid("signal", &signals)?;
        check_grid("state", &states)?;
        let quad = trapezoid_weights(&signals);
        let mut densities = Array2::zeros((signals.len(), states.len()));
        for (m, omega) in states.iter().enumerate() {
            let mut total = 0.0;
            for (j, s) in signals.iter().enumerate() {
                let v = kernel(*s, *omega);
                densities[[j, m]] = v;
                total += v * quad[j];
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Invalid(format!(
                    "likelihood column for state index {m} has non-normalizable mass {total}"
                )));
            }
            for j in 0..signals.len() {
                densities[[j, m]] /= total;
            }
        }
        SignalFamily::new(signals, states, densities)
    }

    pub fn signals(&self) -> &[f64] {
        &self.signals
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn density(&self, signal_index: usize, state_index: usize) -> f64 {
        self.densities[[signal_index, state_index]]
    }

    /// Likelihood of signal row `j` across all states.
    pub fn likelihood_row(&self, signal_index: usize) -> Vec<f64> {
        (0..self.states.len())
            .map(|m| self.densities[[signal_index, m]])
            .collect()
    }

    /// Index of the grid signal closest to `s`; ties resolve to the lower
    /// index.
    pub fn nearest_index(&self, s: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (j, sj) in self.signals.iter().enumerate() {
            let d = (s - sj).abs();
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        best
    }

    /// Strict lookup: errors unless `s` coincides with a grid signal.
    pub fn exact_index(&self, s: f64) -> Result<usize> {
        let j = self.nearest_index(s);
        let scale = self.signals[j].abs().max(1.0);
        if (s - self.signals[j]).abs() <= 1e-12 * scale {
            Ok(j)
        } else {
            Err(Error::Invalid(format!(
                "signal {s} is off the family grid (nearest grid point {})",
                self.signals[j]
            )))
        }
    }

    /// Checks that this family's state grid matches a prior's grid.
    fn check_alignment(&self, prior: &GridBelief) -> Result<()> {
        if self.states.len() != prior.len() {
            return Err(Error::dimension(
                "family state grid",
                prior.len(),
                self.states.len(),
            ));
        }
        for (m, (a, b)) in self.states.iter().zip(prior.states()).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Invalid(format!(
                    "family state grid disagrees with prior grid at index {m}: {a} vs {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Unnormalized Gaussian likelihood of observing `s` under each state, used
/// when perception is described by a noise variance instead of a tabulated
/// family.
pub(crate) fn gaussian_likelihood_row(states: &[f64], s: f64, noise_variance: f64) -> Vec<f64> {
    let sd = noise_variance.sqrt();
    states
        .iter()
        .map(|omega| {
            let z = (s - omega) / sd;
            (-0.5 * z * z).exp()
        })
        .collect()
}

/// Posterior masses proportional to `row[m] * prior[m]`.
pub(crate) fn posterior_from_row(prior: &GridBelief, row: &[f64]) -> Result<GridBelief> {
    if row.len() != prior.len() {
        return Err(Error::dimension("likelihood row", prior.len(), row.len()));
    }
    let weights: Vec<f64> = row.iter().zip(prior.masses()).map(|(q, p)| q * p).collect();
    GridBelief::from_weights(prior.states().to_vec(), weights).map_err(|e| match e {
        Error::DegenerateEvidence(_) => Error::DegenerateEvidence(
            "signal has zero likelihood under every prior state".into(),
        ),
        other => other,
    })
}

/// Applies any update rule to a grid prior given the likelihood row of the
/// realized signal. This is the single grid-update kernel: the tabulated
/// family lane and the noise-variance lane both feed it their rows.
pub(crate) fn update_grid_from_row(
    prior: &GridBelief,
    row: &[f64],
    rule: &UpdateRule,
) -> Result<GridBelief> {
    rule.validate()?;
    match rule {
        UpdateRule::Bayesian => posterior_from_row(prior, row),
        UpdateRule::Anchored { tau, anchor } => {
            let anchor_belief = match anchor {
                Anchor::Prior => prior,
                Anchor::Fixed(b) => {
                    if b.len() != prior.len()
                        || b.states().iter().zip(prior.states()).any(|(a, p)| a != p)
                    {
                        return Err(Error::Invalid(
                            "anchor belief must share the prior's state grid".into(),
                        ));
                    }
                    b
                }
            };
            let bayes = posterior_from_row(prior, row)?;
            let masses: Vec<f64> = anchor_belief
                .masses()
                .iter()
                .zip(bayes.masses())
                .map(|(a, b)| tau * a + (1.0 - tau) * b)
                .collect();
            GridBelief::new(prior.states().to_vec(), masses)
        }
        UpdateRule::Grether { chi0, chi1 } => {
            if row.len() != prior.len() {
                return Err(Error::dimension("likelihood row", prior.len(), row.len()));
            }
            let weights: Vec<f64> = row
                .iter()
                .zip(prior.masses())
                .map(|(q, p)| q.powf(*chi1) * p.powf(*chi0))
                .collect();
            GridBelief::from_weights(prior.states().to_vec(), weights).map_err(|e| match e {
                Error::DegenerateEvidence(_) => Error::DegenerateEvidence(
                    "distorted likelihood-prior product has zero total mass".into(),
                ),
                other => other,
            })
        }
        UpdateRule::NoUpdate => Ok(prior.clone()),
        UpdateRule::MeanShift { delta } => prior.shifted(*delta),
    }
}

/// Likelihood row for signal `s` under a family, snapping to the nearest
/// grid signal after checking state-grid alignment with the prior.
fn family_row(prior: &GridBelief, family: &SignalFamily, s: f64) -> Result<Vec<f64>> {
    family.check_alignment(prior)?;
    if !s.is_finite() {
        return Err(Error::Invalid(format!("signal must be finite, got {s}")));
    }
    Ok(family.likelihood_row(family.nearest_index(s)))
}

/// Exact Bayes update of a grid prior. Off-grid signals snap to the
/// nearest grid point; use [`SignalFamily::exact_index`] first to enforce
/// strict lookup.
pub fn bayes_update(prior: &GridBelief, family: &SignalFamily, s: f64) -> Result<GridBelief> {
    let row = family_row(prior, family, s)?;
    update_grid_from_row(prior, &row, &UpdateRule::Bayesian)
}

/// Anchored update: a `tau`-weighted mixture of the anchor belief and the
/// exact Bayes posterior. The anchor must live on the prior's state grid.
pub fn anchored_update(
    prior: &GridBelief,
    family: &SignalFamily,
    s: f64,
    tau: f64,
    anchor: &GridBelief,
) -> Result<GridBelief> {
    let row = family_row(prior, family, s)?;
    let rule = UpdateRule::Anchored {
        tau,
        anchor: Anchor::Fixed(anchor.clone()),
    };
    update_grid_from_row(prior, &row, &rule)
}

/// Grether update: posterior proportional to `likelihood^chi1 * prior^chi0`
/// with both exponents strictly positive.
pub fn grether_update(
    prior: &GridBelief,
    family: &SignalFamily,
    s: f64,
    chi0: f64,
    chi1: f64,
) -> Result<GridBelief> {
    let row = family_row(prior, family, s)?;
    update_grid_from_row(prior, &row, &UpdateRule::Grether { chi0, chi1 })
}

/// Closed-form normal-normal update. Returns the posterior and the
/// responsiveness `r = prior_var / (prior_var + noise_var)`, so the
/// posterior mean is `r * s + (1 - r) * prior_mean` and the posterior
/// variance is `(1 - r) * prior_var`.
pub fn gaussian_posterior(
    prior: &GaussianBelief,
    s: f64,
    noise_variance: f64,
) -> Result<(GaussianBelief, f64)> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::Invalid(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    if !s.is_finite() {
        return Err(Error::Invalid(format!("signal must be finite, got {s}")));
    }
    let r = prior.variance / (prior.variance + noise_variance);
    let posterior = GaussianBelief::new(r * s + (1.0 - r) * prior.mean, (1.0 - r) * prior.variance)?;
    Ok((posterior, r))
}

/// Grether update in the normal-normal model: exponentiating a normal
/// density rescales its precision, so the posterior stays normal with
/// precision `chi0 / prior_var + chi1 / noise_var`.
pub fn grether_gaussian_posterior(
    prior: &GaussianBelief,
    s: f64,
    noise_variance: f64,
    chi0: f64,
    chi1: f64,
) -> Result<GaussianBelief> {
    if !(chi0 > 0.0 && chi0.is_finite()) || !(chi1 > 0.0 && chi1.is_finite()) {
        return Err(Error::Invalid(format!(
            "Grether exponents must be positive, got chi0={chi0}, chi1={chi1}"
        )));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::Invalid(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    if !s.is_finite() {
        return Err(Error::Invalid(format!("signal must be finite, got {s}")));
    }
    let prior_precision = chi0 / prior.variance;
    let signal_precision = chi1 / noise_variance;
    let precision = prior_precision + signal_precision;
    GaussianBelief::new(
        (prior_precision * prior.mean + signal_precision * s) / precision,
        1.0 / precision,
    )
}

/// Anchor of an anchored update rule.
#[derive(Debug, Clone)]
pub enum Anchor {
    /// Anchor on the agent's own prior (conservatism).
    Prior,
    /// Anchor on a fixed belief sharing the prior's grid.
    Fixed(GridBelief),
}

/// How an agent maps a received signal into a posterior.
#[derive(Debug, Clone)]
pub enum UpdateRule {
    /// Exact Bayes.
    Bayesian,
    /// Mixture of an anchor belief and the Bayes posterior.
    Anchored { tau: f64, anchor: Anchor },
    /// Likelihood and prior raised to separate positive powers.
    Grether { chi0: f64, chi1: f64 },
    /// Keep the prior.
    NoUpdate,
    /// Shift the belief's location by a constant, ignoring the signal.
    /// Exists to construct control-side drift when probing stability.
    MeanShift { delta: f64 },
}

impl UpdateRule {
    /// Parameter validation shared by all lanes.
    pub fn validate(&self) -> Result<()> {
        match self {
            UpdateRule::Bayesian | UpdateRule::NoUpdate => Ok(()),
            UpdateRule::MeanShift { delta } => {
                if delta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!("drift must be finite, got {delta}")))
                }
            }
            UpdateRule::Anchored { tau, anchor } => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::Invalid(format!(
                        "anchoring weight must lie in [0, 1], got {tau}"
                    )));
                }
                if let Anchor::Fixed(belief) = anchor {
                    if belief.is_empty() {
                        return Err(Error::Invalid("anchor belief is empty".into()));
                    }
                }
                Ok(())
            }
            UpdateRule::Grether { chi0, chi1 } => {
                if *chi0 > 0.0 && chi0.is_finite() && *chi1 > 0.0 && chi1.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!(
                        "Grether exponents must be positive, got chi0={chi0}, chi1={chi1}"
                    )))
                }
            }
        }
    }

    /// True when the rule consumes a signal.
    pub fn needs_signal(&self) -> bool {
        !matches!(self, UpdateRule::NoUpdate | UpdateRule::MeanShift { .. })
    }

    /// Applies the rule to a grid prior with a tabulated family.
    pub fn apply_grid(
        &self,
        prior: &GridBelief,
        family: &SignalFamily,
        s: f64,
    ) -> Result<GridBelief> {
        let row = family_row(prior, family, s)?;
        update_grid_from_row(prior, &row, self)
    }
}

/// One violating quadruple found by [`mlr_check`].
#[derive(Debug, Clone, Serialize)]
pub struct MlrViolation {
    pub signal_low: usize,
    pub signal_high: usize,
    pub state_low: usize,
    pub state_high: usize,
    /// Value of the cross-product difference; negative means violated.
    pub margin: f64,
}

/// Outcome of the monotone-likelihood-ratio check.
#[derive(Debug, Clone, Serialize)]
pub struct MlrReport {
    pub holds: bool,
    /// Most negative cross-product difference encountered (0 when none).
    pub worst_margin: f64,
    /// Violating quadruples, capped by the caller.
    pub violations: Vec<MlrViolation>,
}

/// Exhaustive monotone-likelihood-ratio check in cross-product form:
/// for all signal pairs s' > s and state pairs w' > w,
/// `q(s'|w') * q(s|w) >= q(s|w') * q(s'|w)` within [`MLR_TOL`].
///
/// Violations are reported as index quadruples, at most `max_violations`
/// of them. Cost grows with the square of both grid sizes.
pub fn mlr_check(family: &SignalFamily, max_violations: usize) -> MlrReport {
    mlr_check_with(family, MLR_TOL, max_violations)
}

/// [`mlr_check`] with an explicit tolerance.
pub fn mlr_check_with(family: &SignalFamily, tol: f64, max_violations: usize) -> MlrReport {
    let nj = family.signals().len();
    let nm = family.states().len();
    let mut worst: f64 = 0.0;
    let mut violations = Vec::new();
    for j_low in 0..nj {
        for j_high in j_low + 1..nj {
            for m_low in 0..nm {
                for m_high in m_low + 1..nm {
                    let lhs = family.density(j_high, m_high) * family.density(j_low, m_low);
                    let rhs = family.density(j_low, m_high) * family.density(j_high, m_low);
                    let margin = lhs - rhs;
                    if margin < -tol {
                        if violations.len() < max_violations {
                            violations.push(MlrViolation {
                                signal_low: j_low,
                                signal_high: j_high,
                                state_low: m_low,
                                state_high: m_high,
                                margin,
                            });
                        }
                        worst = worst.min(margin);
                    }
                }
            }
        }
    }
    MlrReport {
        holds: violations.is_empty(),
        worst_margin: worst,
        violations,
    }
}

/// Outcome of [`signal_monotonicity_check`].
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub holds: bool,
    /// Largest decrease between consecutive signals (0 when monotone).
    pub worst_drop: f64,
    /// Post-update feature value at each grid signal.
    pub feature_path: Vec<f64>,
}

/// Checks that the post-update feature value is nondecreasing along the
/// whole signal grid for this prior and rule.
///
/// The guarantee that this holds under a monotone-likelihood-ratio family
/// applies to the mean (or any increasing moment); other features are
/// checked as given, without such a guarantee.
pub fn signal_monotonicity_check(
    prior: &GridBelief,
    rule: &UpdateRule,
    family: &SignalFamily,
    feature: &Feature,
) -> Result<MonotonicityReport> {
    signal_monotonicity_check_with(prior, rule, family, feature, MONOTONICITY_TOL)
}

/// [`signal_monotonicity_check`] with an explicit tolerance.
pub fn signal_monotonicity_check_with(
    prior: &GridBelief,
    rule: &UpdateRule,
    family: &SignalFamily,
    feature: &Feature,
    tol: f64,
) -> Result<MonotonicityReport> {
    rule.validate()?;
    let mut feature_path = Vec::with_capacity(family.signals().len());
    for &s in family.signals() {
        let posterior = rule.apply_grid(prior, family, s)?;
        feature_path.push(posterior.feature(feature)?);
    }
    let mut worst_drop: f64 = 0.0;
    for w in feature_path.windows(2) {
        worst_drop = worst_drop.max(w[0] - w[1]);
    }
    Ok(MonotonicityReport {
        holds: worst_drop <= tol,
        worst_drop,
        feature_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    /// Two-point family on signals {0, 1}: trapezoid weights are (1/2, 1/2),
    /// so density values q(1|.) = (0.4, 1.6) make the likelihood ratio 1:4
    /// while every column integrates to one.
    fn binary_family() -> SignalFamily {
        let densities =
            Array2::from_shape_vec((2, 2), vec![1.6, 0.4, 0.4, 1.6]).unwrap();
        SignalFamily::new(vec![0.0, 1.0], vec![0.0, 1.0], densities).unwrap()
    }

    #[test]
    fn point_mass_mean_is_its_state() {
        let b = GridBelief::point_mass(vec![1.0, 3.0, 5.0], 1).unwrap();
        assert_eq!(b.feature(&Feature::Mean).unwrap(), 3.0);
    }

    #[test]
    fn bernoulli_uniform_variance_is_quarter() {
        let b = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(b.feature(&Feature::Variance).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn identity_moment_equals_mean() {
        let b = GridBelief::new(vec![0.0, 4.0], vec![0.25, 0.75]).unwrap();
        let m = b.feature(&Feature::Moment(vec![0.0, 4.0])).unwrap();
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m, b.mean(), epsilon = 1e-15);
    }

    #[test]
    fn moment_length_mismatch_errors() {
        let b = GridBelief::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            b.feature(&Feature::Moment(vec![1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn gaussian_second_moment_adds_mean_square() {
        let b = GaussianBelief::new(1.5, 2.0).unwrap();
        assert_abs_diff_eq!(b.feature(&Feature::SecondMoment).unwrap(), 4.25, epsilon = 1e-15);
        assert!(b.feature(&Feature::Moment(vec![1.0])).is_err());
    }

    #[test]
    fn invalid_masses_are_rejected() {
        assert!(GridBelief::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(GridBelief::new(vec![0.0, 1.0], vec![-0.1, 1.1]).is_err());
        assert!(GridBelief::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(GaussianBelief::new(0.0, 0.0).is_err());
    }

    #[test]
    fn flat_likelihood_returns_prior() {
        // Constant-in-state likelihood: both columns identical.
        let densities = Array2::from_shape_vec((2, 2), vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let family =
            SignalFamily::new(vec![0.0, 1.0], vec![0.0, 1.0], densities).unwrap();
        let prior = GridBelief::new(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        let post = bayes_update(&prior, &family, 1.0).unwrap();
        for (a, b) in post.masses().iter().zip(prior.masses()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn bayes_update_matches_hand_computation() {
        // Even prior, likelihood ratio 1:4 at the high signal.
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        let post = bayes_update(&prior, &family, 1.0).unwrap();
        assert_abs_diff_eq!(post.masses()[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(post.masses()[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn off_grid_signal_snaps_to_nearest() {
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        let snapped = bayes_update(&prior, &family, 0.9).unwrap();
        let exact = bayes_update(&prior, &family, 1.0).unwrap();
        assert_eq!(snapped.masses(), exact.masses());
        assert!(family.exact_index(0.9).is_err());
        assert_eq!(family.exact_index(1.0).unwrap(), 1);
    }

    #[test]
    fn grid_bayes_tracks_normal_closed_form() {
        let prior_mean = 2.0;
        let prior_var = 1.0;
        let noise_var = 1.0;
        let prior = GridBelief::discretized_gaussian(prior_mean, prior_var, 8.0, 801).unwrap();
        let family = SignalFamily::gaussian_location(
            linspace(-10.0, 14.0, 601),
            prior.states().to_vec(),
            noise_var,
        )
        .unwrap();
        let s = 4.0;
        assert!(family.exact_index(s).is_ok(), "test signal must sit on the grid");
        let post = bayes_update(&prior, &family, s).unwrap();
        let (closed, r) =
            gaussian_posterior(&GaussianBelief::new(prior_mean, prior_var).unwrap(), s, noise_var)
                .unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(post.mean(), closed.mean, epsilon = 1e-4);
        assert_abs_diff_eq!(post.variance(), closed.variance, epsilon = 1e-3);
    }

    #[test]
    fn zero_likelihood_signal_is_degenerate_evidence() {
        // Third signal row is impossible under every state; columns are
        // normalized over the remaining rows. Signals {0,1,2} have trapezoid
        // weights (1/2, 1, 1/2).
        let densities = Array2::from_shape_vec(
            (3, 2),
            vec![
                1.0, 0.2, // s=0
                0.5, 0.9, // s=1
                0.0, 0.0, // s=2
            ],
        )
        .unwrap();
        let family =
            SignalFamily::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0], densities).unwrap();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            bayes_update(&prior, &family, 2.0),
            Err(Error::DegenerateEvidence(_))
        ));
    }

    #[test]
    fn anchored_endpoints_and_midpoint() {
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        let bayes = bayes_update(&prior, &family, 1.0).unwrap();

        let no_anchor = anchored_update(&prior, &family, 1.0, 0.0, &prior).unwrap();
        for (a, b) in no_anchor.masses().iter().zip(bayes.masses()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }

        let full_anchor = anchored_update(&prior, &family, 1.0, 1.0, &prior).unwrap();
        assert_eq!(full_anchor.masses(), prior.masses());

        let half = anchored_update(&prior, &family, 1.0, 0.5, &prior).unwrap();
        assert_abs_diff_eq!(half.mean(), 0.5 * (prior.mean() + bayes.mean()), epsilon = 1e-15);

        assert!(anchored_update(&prior, &family, 1.0, 1.5, &prior).is_err());
    }

    #[test]
    fn grether_unit_exponents_reduce_to_bayes() {
        let family = binary_family();
        let prior = GridBelief::new(vec![0.0, 1.0], vec![0.35, 0.65]).unwrap();
        let g = grether_update(&prior, &family, 1.0, 1.0, 1.0).unwrap();
        let b = bayes_update(&prior, &family, 1.0).unwrap();
        for (x, y) in g.masses().iter().zip(b.masses()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn grether_squared_likelihood_hand_case() {
        // Likelihood (0.2, 0.8) squared against an even prior gives
        // unnormalized (0.04, 0.64) * 0.5, i.e. (1/17, 16/17).
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        let g = grether_update(&prior, &family, 1.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(g.masses()[0], 1.0 / 17.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.masses()[1], 16.0 / 17.0, epsilon = 1e-15);
    }

    #[test]
    fn grether_rejects_nonpositive_exponents() {
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 1.0]).unwrap();
        assert!(grether_update(&prior, &family, 1.0, 0.0, 1.0).is_err());
        assert!(grether_update(&prior, &family, 1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn gaussian_posterior_halves_toward_signal() {
        let prior = GaussianBelief::new(2.0, 1.0).unwrap();
        let (post, r) = gaussian_posterior(&prior, 4.0, 1.0).unwrap();
        assert_abs_diff_eq!(post.mean, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.variance, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_posterior_edge_behavior() {
        let prior = GaussianBelief::new(1.0, 2.0).unwrap();
        // Nearly useless signal: posterior hugs the prior.
        let (post, r) = gaussian_posterior(&prior, 50.0, 1e12).unwrap();
        assert!(r < 1e-10);
        assert_abs_diff_eq!(post.mean, 1.0, epsilon = 1e-8);
        // Signal at the prior mean is a fixed point of the mean.
        let (post, _) = gaussian_posterior(&prior, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(post.mean, 1.0, epsilon = 1e-15);
        assert!(post.variance < prior.variance);
        assert!(gaussian_posterior(&prior, 1.0, 0.0).is_err());
    }

    #[test]
    fn grether_gaussian_matches_grid_grether() {
        let prior_mean = 0.5;
        let prior_var = 1.2;
        let noise_var = 0.8;
        let (chi0, chi1) = (0.6, 1.7);
        let closed = grether_gaussian_posterior(
            &GaussianBelief::new(prior_mean, prior_var).unwrap(),
            1.5,
            noise_var,
            chi0,
            chi1,
        )
        .unwrap();

        let prior = GridBelief::discretized_gaussian(prior_mean, prior_var, 8.0, 1201).unwrap();
        let family = SignalFamily::gaussian_location(
            linspace(-9.0, 10.0, 1201),
            prior.states().to_vec(),
            noise_var,
        )
        .unwrap();
        let s = family.signals()[family.nearest_index(1.5)];
        let grid = grether_update(&prior, &family, s, chi0, chi1).unwrap();
        let closed_at_s = grether_gaussian_posterior(
            &GaussianBelief::new(prior_mean, prior_var).unwrap(),
            s,
            noise_var,
            chi0,
            chi1,
        )
        .unwrap();
        assert_abs_diff_eq!(grid.mean(), closed_at_s.mean, epsilon = 1e-3);
        let (bayes_check, _) = gaussian_posterior(
            &GaussianBelief::new(prior_mean, prior_var).unwrap(),
            1.5,
            noise_var,
        )
        .unwrap();
        // Sanity: unit exponents reduce to Bayes.
        let unit = grether_gaussian_posterior(
            &GaussianBelief::new(prior_mean, prior_var).unwrap(),
            1.5,
            noise_var,
            1.0,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(unit.mean, bayes_check.mean, epsilon = 1e-14);
        assert_abs_diff_eq!(unit.variance, bayes_check.variance, epsilon = 1e-14);
        assert!(closed.variance > 0.0);
    }

    #[test]
    fn gaussian_location_family_satisfies_mlr() {
        let family = SignalFamily::gaussian_location(
            linspace(-4.0, 4.0, 17),
            linspace(-2.0, 2.0, 9),
            0.7,
        )
        .unwrap();
        let report = mlr_check(&family, 8);
        assert!(report.holds, "worst margin {}", report.worst_margin);
    }

    #[test]
    fn swapped_state_columns_break_mlr() {
        let base = SignalFamily::gaussian_location(
            linspace(-4.0, 4.0, 17),
            linspace(-2.0, 2.0, 9),
            0.7,
        )
        .unwrap();
        let mut densities = Array2::zeros((17, 9));
        for j in 0..17 {
            for m in 0..9 {
                densities[[j, m]] = base.density(j, m);
            }
        }
        // Swap the likelihood columns of two distant states.
        for j in 0..17 {
            let tmp = densities[[j, 1]];
            densities[[j, 1]] = densities[[j, 7]];
            densities[[j, 7]] = tmp;
        }
        let family = SignalFamily::new(
            base.signals().to_vec(),
            base.states().to_vec(),
            densities,
        )
        .unwrap();
        let report = mlr_check(&family, 8);
        assert!(!report.holds);
        assert!(!report.violations.is_empty());
        assert!(report.worst_margin < 0.0);
    }

    #[test]
    fn single_state_family_is_vacuously_mlr() {
        let family = SignalFamily::gaussian_location(
            linspace(-3.0, 3.0, 13),
            vec![0.0],
            1.0,
        )
        .unwrap();
        let report = mlr_check(&family, 8);
        assert!(report.holds);
        assert_eq!(report.worst_margin, 0.0);
    }

    #[test]
    fn bayes_mean_is_monotone_under_mlr_family() {
        let prior = GridBelief::discretized_gaussian(0.0, 1.0, 4.0, 41).unwrap();
        let family = SignalFamily::gaussian_location(
            linspace(-5.0, 5.0, 41),
            prior.states().to_vec(),
            0.8,
        )
        .unwrap();
        let report =
            signal_monotonicity_check(&prior, &UpdateRule::Bayesian, &family, &Feature::Mean)
                .unwrap();
        assert!(report.holds, "worst drop {}", report.worst_drop);
    }

    #[test]
    fn non_mlr_family_breaks_mean_monotonicity() {
        let prior = GridBelief::discretized_gaussian(0.0, 1.0, 4.0, 21).unwrap();
        let base = SignalFamily::gaussian_location(
            linspace(-5.0, 5.0, 41),
            prior.states().to_vec(),
            0.5,
        )
        .unwrap();
        let mut densities = Array2::zeros((41, 21));
        for j in 0..41 {
            for m in 0..21 {
                densities[[j, m]] = base.density(j, m);
            }
        }
        // Swap columns of two well-separated states carrying real prior mass.
        for j in 0..41 {
            let tmp = densities[[j, 5]];
            densities[[j, 5]] = densities[[j, 15]];
            densities[[j, 15]] = tmp;
        }
        let family = SignalFamily::new(
            base.signals().to_vec(),
            base.states().to_vec(),
            densities,
        )
        .unwrap();
        let report =
            signal_monotonicity_check(&prior, &UpdateRule::Bayesian, &family, &Feature::Mean)
                .unwrap();
        assert!(!report.holds);
        assert!(report.worst_drop > MONOTONICITY_TOL);
    }

    #[test]
    fn fully_anchored_rule_is_trivially_monotone() {
        let prior = GridBelief::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        let family = SignalFamily::gaussian_location(
            linspace(-2.0, 4.0, 25),
            prior.states().to_vec(),
            1.0,
        )
        .unwrap();
        let rule = UpdateRule::Anchored {
            tau: 1.0,
            anchor: Anchor::Prior,
        };
        let report =
            signal_monotonicity_check(&prior, &rule, &family, &Feature::Mean).unwrap();
        assert!(report.holds);
        assert_eq!(report.worst_drop, 0.0);
    }

    #[test]
    fn mean_shift_rule_moves_grid_and_gaussian_beliefs() {
        let rule = UpdateRule::MeanShift { delta: 1.0 };
        let prior = GridBelief::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let family = binary_family();
        let shifted = rule.apply_grid(&prior, &family, 0.0).unwrap();
        assert_abs_diff_eq!(shifted.mean(), prior.mean() + 1.0, epsilon = 1e-15);

        let g = Belief::Gaussian(GaussianBelief::new(0.5, 1.0).unwrap());
        let gs = g.shifted(-2.0).unwrap();
        assert_abs_diff_eq!(gs.feature(&Feature::Mean).unwrap(), -1.5, epsilon = 1e-15);
    }

    #[test]
    fn family_alignment_is_enforced() {
        let family = binary_family();
        let prior = GridBelief::uniform(vec![0.0, 0.5, 1.0]).unwrap();
        assert!(bayes_update(&prior, &family, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Every rule output is a valid belief on the prior's grid, and the
        /// parameter edge cases collapse to exact Bayes.
        #[test]
        fn updates_yield_valid_beliefs(
            seed_mean in -1.5_f64..1.5,
            prior_var in 0.3_f64..2.0,
            noise in 0.3_f64..2.5,
            tau in 0.0_f64..1.0,
            chi0 in 0.2_f64..3.0,
            chi1 in 0.2_f64..3.0,
            signal_pick in 0_usize..21,
        ) {
            let prior = GridBelief::discretized_gaussian(seed_mean, prior_var, 5.0, 31).unwrap();
            let family = SignalFamily::gaussian_location(
                linspace(seed_mean - 8.0, seed_mean + 8.0, 21),
                prior.states().to_vec(),
                noise,
            ).unwrap();
            let s = family.signals()[signal_pick];

            let rules = [
                UpdateRule::Bayesian,
                UpdateRule::Anchored { tau, anchor: Anchor::Prior },
                UpdateRule::Grether { chi0, chi1 },
                UpdateRule::NoUpdate,
            ];
            for rule in &rules {
                let post = rule.apply_grid(&prior, &family, s).unwrap();
                let total: f64 = post.masses().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
                prop_assert!(post.masses().iter().all(|m| *m >= 0.0));
                prop_assert_eq!(post.states(), prior.states());
            }

            let bayes = bayes_update(&prior, &family, s).unwrap();
            let anchored0 = anchored_update(&prior, &family, s, 0.0, &prior).unwrap();
            let grether1 = grether_update(&prior, &family, s, 1.0, 1.0).unwrap();
            for m in 0..prior.len() {
                prop_assert!((anchored0.masses()[m] - bayes.masses()[m]).abs() < 1e-12);
                prop_assert!((grether1.masses()[m] - bayes.masses()[m]).abs() < 1e-12);
            }
        }

        /// Monotone-likelihood-ratio location families induce nondecreasing
        /// posterior means and first-order dominance in the signal, across
        /// Bayes, anchoring, and Grether distortions.
        #[test]
        fn mlr_families_induce_monotone_updating(
            prior_mean in -1.0_f64..1.0,
            prior_var in 0.4_f64..1.6,
            noise in 0.4_f64..2.0,
            logistic in proptest::bool::ANY,
            tau in 0.0_f64..0.9,
            chi0 in 0.3_f64..2.5,
            chi1 in 0.3_f64..2.5,
        ) {
            let prior = GridBelief::discretized_gaussian(prior_mean, prior_var, 4.0, 13).unwrap();
            let signals = linspace(prior_mean - 6.0, prior_mean + 6.0, 11);
            let family = if logistic {
                SignalFamily::logistic_location(signals, prior.states().to_vec(), noise.sqrt()).unwrap()
            } else {
                SignalFamily::gaussian_location(signals, prior.states().to_vec(), noise).unwrap()
            };
            prop_assert!(mlr_check(&family, 4).holds);

            let rules = [
                UpdateRule::Bayesian,
                UpdateRule::Anchored { tau, anchor: Anchor::Prior },
                UpdateRule::Grether { chi0, chi1 },
            ];
            for rule in &rules {
                let report = signal_monotonicity_check(&prior, rule, &family, &Feature::Mean).unwrap();
                prop_assert!(report.holds, "worst drop {}", report.worst_drop);
            }

            // First-order dominance of Bayes posteriors in the signal.
            let mut prev_cdf: Option<Vec<f64>> = None;
            for &s in family.signals() {
                let cdf = bayes_update(&prior, &family, s).unwrap().cdf();
                if let Some(prev) = &prev_cdf {
                    for (hi, lo) in cdf.iter().zip(prev) {
                        prop_assert!(*hi <= lo + 1e-10);
                    }
                }
                prev_cdf = Some(cdf);
            }
        }
    }
}
