//! Action functions: how an agent's belief feature becomes an outcome.
//!
//! Every variant exposes both the outcome and its exact partial effect
//! with respect to the feature, so downstream weight diagnostics never
//! rely on finite differencing. [`ActionFunction::within_ape`] gives the
//! average partial effect between two feature values, which for smooth
//! outcomes equals the difference quotient by the fundamental theorem of
//! calculus.
//!
//! The [`MonotoneSpline`] implements Fritsch-Carlson monotone cubic
//! interpolation with linear tails, giving a strictly increasing,
//! invertible transform for link-style outcomes solved from
//! `map(outcome) = theta * feature + intercept`.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_TWO_PI: f64 = 2.5066282746310002;

/// Distribution of the latent threshold behind an expected binary action.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentDist {
    Normal { location: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
}

impl LatentDist {
    fn validate(&self) -> Result<()> {
        let (location, scale) = match self {
            LatentDist::Normal { location, scale } | LatentDist::Logistic { location, scale } => {
                (*location, *scale)
            }
        };
        if !location.is_finite() {
            return Err(Error::Invalid(format!(
                "latent location must be finite, got {location}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!(
                "latent scale must be positive, got {scale}"
            )));
        }
        Ok(())
    }

    fn cdf(&self, v: f64) -> f64 {
        match self {
            LatentDist::Normal { location, scale } => {
                0.5 * (1.0 + libm::erf((v - location) / (scale * SQRT_2)))
            }
            LatentDist::Logistic { location, scale } => {
                1.0 / (1.0 + (-(v - location) / scale).exp())
            }
        }
    }

    fn pdf(&self, v: f64) -> f64 {
        match self {
            LatentDist::Normal { location, scale } => {
                let z = (v - location) / scale;
                (-0.5 * z * z).exp() / (scale * SQRT_TWO_PI)
            }
            LatentDist::Logistic { location, scale } => {
                let e = (-((v - location) / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
        }
    }
}

/// A strictly increasing transform, either trivial or a fitted spline.
#[derive(Debug, Clone)]
pub enum MonotoneMap {
    Identity,
    Spline(MonotoneSpline),
}

impl MonotoneMap {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Identity => x,
            MonotoneMap::Spline(s) => s.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Identity => 1.0,
            MonotoneMap::Spline(s) => s.deriv(x),
        }
    }

    pub fn inverse(&self, target: f64) -> Result<f64> {
        match self {
            MonotoneMap::Identity => Ok(target),
            MonotoneMap::Spline(s) => s.inverse(target),
        }
    }
}

/// Fritsch-Carlson monotone cubic Hermite interpolant through strictly
/// increasing knots, extended linearly beyond them with the end tangents.
#[derive(Debug, Clone)]
pub struct MonotoneSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneSpline {
    /// Both knot coordinates must be finite and strictly increasing; at
    /// least two knots are required.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Invalid("spline needs at least 2 knots".into()));
        }
        if ys.len() != xs.len() {
            return Err(Error::dimension("spline knots", xs.len(), ys.len()));
        }
        for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Invalid(format!("spline knot {i} is non-finite")));
            }
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] || ys[i] <= ys[i - 1] {
                return Err(Error::Invalid(format!(
                    "spline knots must be strictly increasing in both coordinates (violated at index {i})"
                )));
            }
        }

        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut tangents = vec![0.0; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            tangents[i] = 0.5 * (secants[i - 1] + secants[i]);
        }
        // Fritsch-Carlson limiter keeps each interval's cubic monotone.
        for i in 0..n - 1 {
            let alpha = tangents[i] / secants[i];
            let beta = tangents[i + 1] / secants[i];
            let norm = alpha * alpha + beta * beta;
            if norm > 9.0 {
                let t = 3.0 / norm.sqrt();
                tangents[i] = t * alpha * secants[i];
                tangents[i + 1] = t * beta * secants[i];
            }
        }
        Ok(MonotoneSpline { xs, ys, tangents })
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|xi| *xi <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.tangents[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.tangents[n - 1] * (x - self.xs[n - 1]);
        }
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.tangents[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.tangents[i + 1]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.tangents[0];
        }
        if x >= self.xs[n - 1] {
            return self.tangents[n - 1];
        }
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.ys[i]
            + d10 * h * self.tangents[i]
            + d01 * self.ys[i + 1]
            + d11 * h * self.tangents[i + 1])
            / h
    }

    /// Solves `eval(x) = target` by bisection inside the knot range and in
    /// closed form on the linear tails.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::Invalid(format!(
                "inverse target must be finite, got {target}"
            )));
        }
        let n = self.xs.len();
        if target <= self.ys[0] {
            return Ok(self.xs[0] + (target - self.ys[0]) / self.tangents[0]);
        }
        if target >= self.ys[n - 1] {
            return Ok(self.xs[n - 1] + (target - self.ys[n - 1]) / self.tangents[n - 1]);
        }
        let i = self.ys.partition_point(|yi| *yi <= target) - 1;
        let mut lo = self.xs[i];
        let mut hi = self.xs[i + 1];
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * scale {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Maps the belief feature `v` into an outcome.
#[derive(Debug, Clone)]
pub enum ActionFunction {
    /// `intercept + slope * v`.
    Affine { intercept: f64, slope: f64 },
    /// `sum_k coeffs[k] * v^k`.
    Polynomial { coeffs: Vec<f64> },
    /// Outcome solved from `map(outcome) = theta * v + intercept`.
    Link {
        map: MonotoneMap,
        theta: f64,
        intercept: f64,
    },
    /// Expected binary action `P(latent <= v)`.
    BinaryLatent { dist: LatentDist },
}

impl ActionFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            ActionFunction::Affine { intercept, slope } => {
                if intercept.is_finite() && slope.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid(
                        "affine action parameters must be finite".into(),
                    ))
                }
            }
            ActionFunction::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Invalid("polynomial action has no coefficients".into()));
                }
                if coeffs.iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Invalid(
                        "polynomial coefficients must be finite".into(),
                    ))
                }
            }
            ActionFunction::Link { theta, intercept, .. } => {
                if theta.is_finite() && intercept.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid("link action parameters must be finite".into()))
                }
            }
            ActionFunction::BinaryLatent { dist } => dist.validate(),
        }
    }

    /// Outcome at feature value `v`.
    pub fn outcome(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "feature value must be finite, got {v}"
            )));
        }
        match self {
            ActionFunction::Affine { intercept, slope } => Ok(intercept + slope * v),
            ActionFunction::Polynomial { coeffs } => {
                Ok(coeffs.iter().rev().fold(0.0, |acc, c| acc * v + c))
            }
            ActionFunction::Link {
                map,
                theta,
                intercept,
            } => map.inverse(theta * v + intercept),
            ActionFunction::BinaryLatent { dist } => Ok(dist.cdf(v)),
        }
    }

    /// Exact derivative of the outcome with respect to the feature.
    pub fn partial_effect(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "feature value must be finite, got {v}"
            )));
        }
        match self {
            ActionFunction::Affine { slope, .. } => Ok(*slope),
            ActionFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * v + c * k as f64;
                }
                Ok(acc)
            }
            ActionFunction::Link {
                map,
                theta,
                intercept,
            } => {
                let y = map.inverse(theta * v + intercept)?;
                let slope = map.deriv(y);
                if slope <= 0.0 || !slope.is_finite() {
                    return Err(Error::Domain(format!(
                        "link map slope {slope} at implied outcome {y} is not positive"
                    )));
                }
                Ok(theta / slope)
            }
            ActionFunction::BinaryLatent { dist } => Ok(dist.pdf(v)),
        }
    }

    /// Average partial effect between feature values `a` and `b`: the
    /// outcome difference quotient, or the pointwise derivative when the
    /// endpoints are too close to divide safely.
    pub fn within_ape(&self, a: f64, b: f64) -> Result<f64> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(
                "feature endpoints must be finite".into(),
            ));
        }
        if (b - a).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()) {
            return self.partial_effect(0.5 * (a + b));
        }
        Ok((self.outcome(b)? - self.outcome(a)?) / (b - a))
    }
}
