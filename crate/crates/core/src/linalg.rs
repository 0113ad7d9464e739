//! Self-contained least-squares core.
//!
//! Ordinary least squares is solved through a Householder QR factorization
//! with column pivoting rather than normal equations, so near-collinear
//! designs are detected instead of silently amplified. The two-stage
//! estimator reuses the same solver for both stages and reports
//! heteroskedasticity-robust (sandwich, HC1) standard errors computed with
//! second-stage residuals evaluated at the actual endogenous column.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative pivot threshold: a column is treated as dependent when its
/// remaining norm falls below this multiple of the largest initial norm.
pub const PIVOT_RTOL: f64 = 1e-10;

/// Relative threshold under which the instruments are declared irrelevant:
/// the part of the first-stage fit orthogonal to the exogenous block must
/// exceed this multiple of the endogenous column's scale.
pub const FIRST_STAGE_RTOL: f64 = 1e-8;

/// A labeled n-by-k regressor matrix, stored row major.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    labels: Vec<String>,
    data: Array2<f64>,
}

impl DesignMatrix {
    /// Builds a design matrix from named columns of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Invalid("design matrix needs at least one column".into()));
        }
        let n = columns[0].1.len();
        let k = columns.len();
        if n < k {
            return Err(Error::Invalid(format!(
                "design matrix needs at least as many rows ({n}) as columns ({k})"
            )));
        }
        let mut labels = Vec::with_capacity(k);
        let mut data = Array2::zeros((n, k));
        for (j, (label, col)) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::dimension(format!("column '{label}'"), n, col.len()));
            }
            for (i, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Invalid(format!(
                        "non-finite value in column '{label}' at row {i}"
                    )));
                }
                data[[i, j]] = *v;
            }
            labels.push(label);
        }
        Ok(DesignMatrix { labels, data })
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of columns.
    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    /// Column labels in order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Borrow the underlying matrix.
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Concatenates the columns of `self` and `other`.
    pub fn hstack(&self, other: &DesignMatrix) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::dimension("hstack rows", self.n(), other.n()));
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut data = Array2::zeros((self.n(), self.k() + other.k()));
        for i in 0..self.n() {
            for j in 0..self.k() {
                data[[i, j]] = self.data[[i, j]];
            }
            for j in 0..other.k() {
                data[[i, self.k() + j]] = other.data[[i, j]];
            }
        }
        Ok(DesignMatrix { labels, data })
    }

    /// True when some column is constant and nonzero (an intercept).
    pub fn has_constant_column(&self) -> bool {
        (0..self.k()).any(|j| {
            let first = self.data[[0, j]];
            first != 0.0 && (0..self.n()).all(|i| self.data[[i, j]] == first)
        })
    }
}

/// Result of an ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficients in input column order.
    pub coeffs: Vec<f64>,
    /// y minus fitted values.
    pub residuals: Vec<f64>,
    /// Fitted values X * coeffs.
    pub fitted: Vec<f64>,
}

/// Householder QR with column pivoting of a copy of `x`, with `y` carried
/// along so Q' y is available without storing Q.
struct PivotedQr {
    /// Packed R in the upper triangle (k-by-k slice of the factored matrix).
    factored: Array2<f64>,
    /// Q' applied to the response.
    qty: Array1<f64>,
    /// Column permutation: position j of R corresponds to input column perm[j].
    perm: Vec<usize>,
    /// Numerical rank under the pivot threshold.
    rank: usize,
}

fn pivoted_qr(x: &Array2<f64>, y: &[f64]) -> PivotedQr {
    let n = x.nrows();
    let k = x.ncols();
    let mut a = x.clone();
    let mut qty = Array1::from_iter(y.iter().copied());
    let mut perm: Vec<usize> = (0..k).collect();

    let initial_scale = (0..k)
        .map(|j| a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    let tol = PIVOT_RTOL * initial_scale;

    let mut rank = k;
    for step in 0..k {
        // Recompute remaining column norms; cheap at these widths and immune
        // to the cancellation that plagues downdating.
        let (pivot, pivot_norm) = (step..k)
            .map(|j| {
                let norm = (step..n).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt();
                (j, norm)
            })
            .fold((step, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });

        if pivot_norm <= tol {
            rank = step;
            break;
        }
        if pivot != step {
            for i in 0..n {
                a.swap([i, step], [i, pivot]);
            }
            perm.swap(step, pivot);
        }

        // Householder reflector for column `step`, rows step..n.
        let alpha = if a[[step, step]] >= 0.0 { -pivot_norm } else { pivot_norm };
        let mut v: Vec<f64> = (step..n).map(|i| a[[i, step]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        a[[step, step]] = alpha;
        for i in step + 1..n {
            a[[i, step]] = 0.0;
        }
        if vnorm2 > 0.0 {
            for j in step + 1..k {
                let dot: f64 = (step..n).map(|i| v[i - step] * a[[i, j]]).sum();
                let c = 2.0 * dot / vnorm2;
                for i in step..n {
                    a[[i, j]] -= c * v[i - step];
                }
            }
            let dot: f64 = (step..n).map(|i| v[i - step] * qty[i]).sum();
            let c = 2.0 * dot / vnorm2;
            for i in step..n {
                qty[i] -= c * v[i - step];
            }
        }
    }

    PivotedQr {
        factored: a,
        qty,
        perm,
        rank,
    }
}

impl PivotedQr {
    /// Back-substitutes R b = (Q'y)[..rank] and undoes the permutation.
    fn solve(&self, k: usize) -> Vec<f64> {
        let r = self.rank;
        let mut b = vec![0.0; r];
        for j in (0..r).rev() {
            let mut s = self.qty[j];
            for l in j + 1..r {
                s -= self.factored[[j, l]] * b[l];
            }
            b[j] = s / self.factored[[j, j]];
        }
        let mut coeffs = vec![0.0; k];
        for (j, &bj) in b.iter().enumerate() {
            coeffs[self.perm[j]] = bj;
        }
        coeffs
    }

    /// (X'X)^-1 reconstructed from R and the permutation. Requires full rank.
    fn xtx_inverse(&self, k: usize) -> Array2<f64> {
        // Invert R by back-substitution on the identity, then
        // (X'X)^-1 = P R^-1 R^-T P'.
        let mut rinv = Array2::zeros((k, k));
        for col in 0..k {
            let mut e = vec![0.0; k];
            e[col] = 1.0;
            for j in (0..k).rev() {
                let mut s = e[j];
                for l in j + 1..k {
                    s -= self.factored[[j, l]] * rinv[[l, col]];
                }
                rinv[[j, col]] = s / self.factored[[j, j]];
            }
        }
        let mut out = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for l in 0..k {
                    s += rinv[[i, l]] * rinv[[j, l]];
                }
                out[[self.perm[i], self.perm[j]]] = s;
            }
        }
        out
    }
}

/// Ordinary least squares of `y` on the columns of `x`.
///
/// Errors with the labels of the dependent columns when the numerical rank
/// of `x` falls short of its width.
pub fn ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    ols_impl(x, y).map(|(fit, _)| fit)
}

fn ols_impl(x: &DesignMatrix, y: &[f64]) -> Result<(OlsFit, PivotedQr)> {
    let n = x.n();
    let k = x.k();
    if y.len() != n {
        return Err(Error::dimension("response length", n, y.len()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite response at row {i}")));
    }
    let qr = pivoted_qr(x.data(), y);
    if qr.rank < k {
        let dropped = qr.perm[qr.rank..]
            .iter()
            .map(|&j| x.labels()[j].clone())
            .collect();
        return Err(Error::RankDeficient { dropped });
    }
    let coeffs = qr.solve(k);
    let mut fitted = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..k {
            s += x.data()[[i, j]] * coeffs[j];
        }
        fitted[i] = s;
    }
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    Ok((
        OlsFit {
            coeffs,
            residuals,
            fitted,
        },
        qr,
    ))
}

/// HC1 sandwich covariance for an OLS-style fit: (X'X)^-1 meat (X'X)^-1
/// scaled by n/(n-k), where meat = sum of e_i^2 x_i x_i'.
fn sandwich_covariance(x: &Array2<f64>, residuals: &[f64], xtx_inv: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let k = x.ncols();
    let mut meat = Array2::zeros((k, k));
    for i in 0..n {
        let e2 = residuals[i] * residuals[i];
        for a in 0..k {
            let xa = x[[i, a]];
            if xa == 0.0 {
                continue;
            }
            for b in 0..k {
                meat[[a, b]] += e2 * xa * x[[i, b]];
            }
        }
    }
    let bread_meat = xtx_inv.dot(&meat);
    let mut cov = bread_meat.dot(xtx_inv);
    let dof_scale = n as f64 / (n - k) as f64;
    cov.mapv_inplace(|v| v * dof_scale);
    cov
}

/// Output of the two-stage estimator.
#[derive(Debug, Clone, Serialize)]
pub struct TslsFit {
    /// Coefficient on the endogenous column.
    pub gamma: f64,
    /// Robust standard error for `gamma`.
    pub gamma_se: f64,
    /// Label of the endogenous column.
    pub endog_label: String,
    /// Exogenous-column labels.
    pub exog_labels: Vec<String>,
    /// Coefficients on the exogenous columns.
    pub exog_coeffs: Vec<f64>,
    /// Robust standard errors for the exogenous columns.
    pub exog_ses: Vec<f64>,
    /// Instrument-column labels, in first-stage order.
    pub first_stage_labels: Vec<String>,
    /// First-stage coefficients on the instrument columns.
    pub first_stage: Vec<f64>,
    /// Homoskedastic F-style statistic for instrument relevance: the joint
    /// explanatory gain of the instruments over the exogenous block.
    pub first_stage_f: f64,
    /// Number of observations.
    pub n: usize,
    /// Non-fatal notes accumulated while fitting.
    pub warnings: Vec<String>,
}

/// Two-stage least squares with one endogenous column.
///
/// First stage regresses `endog` on `[exog | instruments]`; second stage
/// regresses `y` on `[exog | fitted endog]`. Standard errors are HC1
/// sandwich values computed from residuals at the actual (not fitted)
/// endogenous column. `exog` must contain a constant column.
pub fn tsls(
    y: &[f64],
    endog: (&str, &[f64]),
    exog: &DesignMatrix,
    instruments: &DesignMatrix,
) -> Result<TslsFit> {
    let n = exog.n();
    let (endog_label, endog_col) = endog;
    if y.len() != n {
        return Err(Error::dimension("response length", n, y.len()));
    }
    if endog_col.len() != n {
        return Err(Error::dimension("endogenous column length", n, endog_col.len()));
    }
    if instruments.n() != n {
        return Err(Error::dimension("instrument rows", n, instruments.n()));
    }
    if !exog.has_constant_column() {
        return Err(Error::Invalid(
            "exogenous block must include a constant column".into(),
        ));
    }

    // First stage.
    let first_design = exog.hstack(instruments)?;
    let (first_fit, _) = ols_impl(&first_design, endog_col)?;
    let k_exog = exog.k();
    let first_stage: Vec<f64> = first_fit.coeffs[k_exog..].to_vec();

    // Relevance: the fitted endogenous column must move outside the span of
    // the exogenous block.
    let exog_only = ols(exog, &first_fit.fitted)?;
    let extra_norm = exog_only
        .residuals
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let endog_scale = endog_col.iter().map(|v| v * v).sum::<f64>().sqrt();
    if extra_norm <= FIRST_STAGE_RTOL * (endog_scale + 1.0) {
        return Err(Error::ZeroFirstStage(format!(
            "instruments {:?} add no variation to '{endog_label}' beyond the exogenous block",
            instruments.labels()
        )));
    }

    // F-style strength diagnostic from the first stage.
    let rss_unrestricted: f64 = first_fit.residuals.iter().map(|v| v * v).sum();
    let restricted = ols(exog, endog_col)?;
    let rss_restricted: f64 = restricted.residuals.iter().map(|v| v * v).sum();
    let q = instruments.k() as f64;
    let dof = (n - first_design.k()) as f64;
    let first_stage_f = if rss_unrestricted > 0.0 && dof > 0.0 {
        ((rss_restricted - rss_unrestricted) / q) / (rss_unrestricted / dof)
    } else {
        f64::INFINITY
    };

    // Second stage on the fitted endogenous column.
    let fitted_col = DesignMatrix::from_columns(vec![(
        format!("fitted:{endog_label}"),
        first_fit.fitted.clone(),
    )])?;
    let second_design = exog.hstack(&fitted_col)?;
    let (second_fit, qr) = ols_impl(&second_design, y)?;
    let exog_coeffs: Vec<f64> = second_fit.coeffs[..k_exog].to_vec();
    let gamma = second_fit.coeffs[k_exog];

    // Structural residuals use the actual endogenous column.
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let mut s = endog_col[i] * gamma;
        for j in 0..k_exog {
            s += exog.data()[[i, j]] * exog_coeffs[j];
        }
        residuals[i] = y[i] - s;
    }

    let xtx_inv = qr.xtx_inverse(second_design.k());
    let cov = sandwich_covariance(second_design.data(), &residuals, &xtx_inv);
    let exog_ses: Vec<f64> = (0..k_exog).map(|j| cov[[j, j]].sqrt()).collect();
    let gamma_se = cov[[k_exog, k_exog]].sqrt();

    Ok(TslsFit {
        gamma,
        gamma_se,
        endog_label: endog_label.to_string(),
        exog_labels: exog.labels().to_vec(),
        exog_coeffs,
        exog_ses,
        first_stage_labels: instruments.labels().to_vec(),
        first_stage,
        first_stage_f,
        n,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn column(label: &str, values: Vec<f64>) -> (String, Vec<f64>) {
        (label.to_string(), values)
    }

    #[test]
    fn constant_column_recovers_mean() {
        let x = DesignMatrix::from_columns(vec![column("const", vec![1.0, 1.0, 1.0])]).unwrap();
        let fit = ols(&x, &[2.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(fit.coeffs[0], 2.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn exact_line_is_recovered() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.5 * x).collect();
        let x = DesignMatrix::from_columns(vec![
            column("const", vec![1.0; 5]),
            column("x", xs),
        ])
        .unwrap();
        let fit = ols(&x, &ys).unwrap();
        assert_abs_diff_eq!(fit.coeffs[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coeffs[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_column_names_the_dependent_column() {
        let x = DesignMatrix::from_columns(vec![
            column("const", vec![1.0; 4]),
            column("a", vec![1.0, 2.0, 3.0, 4.0]),
            column("a_copy", vec![2.0, 4.0, 6.0, 8.0]),
        ])
        .unwrap();
        let err = ols(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        match err {
            Error::RankDeficient { dropped } => {
                assert_eq!(dropped.len(), 1);
                assert!(dropped[0] == "a" || dropped[0] == "a_copy");
            }
            other => panic!("expected rank error, got {other}"),
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let mut cols: Vec<(String, Vec<f64>)> = vec![column("const", vec![1.0; n])];
        for j in 0..3 {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            cols.push(column(&format!("x{j}"), v));
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let x = DesignMatrix::from_columns(cols).unwrap();
        let fit = ols(&x, &y).unwrap();
        for j in 0..x.k() {
            let dot: f64 = (0..n).map(|i| x.data()[[i, j]] * fit.residuals[i]).sum();
            assert!(dot.abs() < 1e-7, "column {j} not orthogonal: {dot}");
        }
    }

    /// Builds a small endogenous system with a single instrument and
    /// intercept-only exogenous block. The just-identified coefficient has
    /// the closed form cov(z, y) / cov(z, x), computed here by direct
    /// demeaned sums, independent of the QR path.
    fn simulated_iv_system(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let zi = rng.random::<f64>() * 2.0 - 1.0;
            let u = rng.random::<f64>() - 0.5;
            let xi = 0.8 * zi + u + 0.3 * (rng.random::<f64>() - 0.5);
            let yi = 2.0 + 1.7 * xi + 2.5 * u;
            y.push(yi);
            x.push(xi);
            z.push(zi);
        }
        (y, x, z)
    }

    fn iv_ratio(y: &[f64], x: &[f64], z: &[f64]) -> f64 {
        let n = y.len() as f64;
        let my = y.iter().sum::<f64>() / n;
        let mx = x.iter().sum::<f64>() / n;
        let mz = z.iter().sum::<f64>() / n;
        let czy: f64 = z.iter().zip(y).map(|(zi, yi)| (zi - mz) * (yi - my)).sum();
        let czx: f64 = z.iter().zip(x).map(|(zi, xi)| (zi - mz) * (xi - mx)).sum();
        czy / czx
    }

    #[test]
    fn just_identified_tsls_equals_iv_ratio() {
        let (y, x, z) = simulated_iv_system(400, 3);
        let exog = DesignMatrix::from_columns(vec![column("const", vec![1.0; 400])]).unwrap();
        let instruments = DesignMatrix::from_columns(vec![column("z", z.clone())]).unwrap();
        let fit = tsls(&y, ("x", &x), &exog, &instruments).unwrap();
        assert_abs_diff_eq!(fit.gamma, iv_ratio(&y, &x, &z), epsilon = 1e-10);
        assert!(fit.first_stage_f > 10.0);
    }

    #[test]
    fn exogenous_covariate_case_matches_hand_partialling() {
        // One extra exogenous column; the oracle partials it out with
        // explicitly solved 2x2 normal equations before taking the ratio.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 500;
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let (mut y, mut x, z) = simulated_iv_system(n, 21);
        for i in 0..n {
            x[i] += 0.6 * w[i];
            y[i] += 1.7 * 0.6 * w[i] - 1.1 * w[i];
        }

        let partial = |v: &[f64]| -> Vec<f64> {
            // Residual of v on [1, w] via normal equations solved by hand.
            let nf = n as f64;
            let sw: f64 = w.iter().sum();
            let sww: f64 = w.iter().map(|t| t * t).sum();
            let sv: f64 = v.iter().sum();
            let swv: f64 = w.iter().zip(v).map(|(wi, vi)| wi * vi).sum();
            let det = nf * sww - sw * sw;
            let a = (sww * sv - sw * swv) / det;
            let b = (nf * swv - sw * sv) / det;
            v.iter().zip(&w).map(|(vi, wi)| vi - a - b * wi).collect()
        };
        let (ry, rx, rz) = (partial(&y), partial(&x), partial(&z));
        let oracle: f64 = rz.iter().zip(&ry).map(|(a, b)| a * b).sum::<f64>()
            / rz.iter().zip(&rx).map(|(a, b)| a * b).sum::<f64>();

        let exog = DesignMatrix::from_columns(vec![
            column("const", vec![1.0; n]),
            column("w", w.clone()),
        ])
        .unwrap();
        let instruments = DesignMatrix::from_columns(vec![column("z", z)]).unwrap();
        let fit = tsls(&y, ("x", &x), &exog, &instruments).unwrap();
        assert_abs_diff_eq!(fit.gamma, oracle, epsilon = 1e-10);
    }

    #[test]
    fn instrument_rescaling_leaves_gamma_unchanged() {
        let (y, x, z) = simulated_iv_system(300, 5);
        let exog = DesignMatrix::from_columns(vec![column("const", vec![1.0; 300])]).unwrap();
        let z10: Vec<f64> = z.iter().map(|v| v * 10.0).collect();
        let fit_a = tsls(
            &y,
            ("x", &x),
            &exog,
            &DesignMatrix::from_columns(vec![column("z", z)]).unwrap(),
        )
        .unwrap();
        let fit_b = tsls(
            &y,
            ("x", &x),
            &exog,
            &DesignMatrix::from_columns(vec![column("z", z10)]).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(fit_a.gamma, fit_b.gamma, epsilon = 1e-10);
        assert_abs_diff_eq!(fit_a.gamma_se, fit_b.gamma_se, epsilon = 1e-10);
    }

    #[test]
    fn endogenous_column_in_instruments_reduces_to_ols() {
        let (y, x, _) = simulated_iv_system(250, 7);
        let exog = DesignMatrix::from_columns(vec![column("const", vec![1.0; 250])]).unwrap();
        let instruments =
            DesignMatrix::from_columns(vec![column("x_itself", x.clone())]).unwrap();
        let fit = tsls(&y, ("x", &x), &exog, &instruments).unwrap();

        let design = DesignMatrix::from_columns(vec![
            column("const", vec![1.0; 250]),
            column("x", x.clone()),
        ])
        .unwrap();
        let ols_fit = ols(&design, &y).unwrap();
        assert_abs_diff_eq!(fit.gamma, ols_fit.coeffs[1], epsilon = 1e-10);
    }

    #[test]
    fn orthogonal_instrument_is_a_zero_first_stage() {
        // The instrument lives entirely inside the exogenous span, so the
        // fitted endogenous column adds nothing.
        let n = 100;
        let x: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + v).collect();
        let exog = DesignMatrix::from_columns(vec![column("const", vec![1.0; n])]).unwrap();
        let instruments =
            DesignMatrix::from_columns(vec![column("z", vec![3.0; n])]).unwrap();
        let err = tsls(&y, ("x", &x), &exog, &instruments);
        assert!(matches!(err, Err(Error::RankDeficient { .. }) | Err(Error::ZeroFirstStage(_))));
    }

    #[test]
    fn missing_constant_is_rejected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = x.clone();
        let exog = DesignMatrix::from_columns(vec![column("w", x.clone())]).unwrap();
        let instruments = DesignMatrix::from_columns(vec![column("z", y.clone())]).unwrap();
        assert!(matches!(
            tsls(&y, ("x", &x), &exog, &instruments),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn robust_ses_match_direct_sandwich_on_ols_case() {
        // With the endogenous column instrumenting itself, the TSLS sandwich
        // must match a directly computed HC1 covariance for plain OLS.
        let (y, x, _) = simulated_iv_system(200, 13);
        let n = 200;
        let exog = DesignMatrix::from_columns(vec![column("const", vec![1.0; n])]).unwrap();
        let instruments = DesignMatrix::from_columns(vec![column("xz", x.clone())]).unwrap();
        let fit = tsls(&y, ("x", &x), &exog, &instruments).unwrap();

        // Direct 2x2 sandwich on [1, x].
        let design = DesignMatrix::from_columns(vec![
            column("const", vec![1.0; n]),
            column("x", x.clone()),
        ])
        .unwrap();
        let ols_fit = ols(&design, &y).unwrap();
        let nf = n as f64;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = nf * sxx - sx * sx;
        // (X'X)^-1 entries.
        let i00 = sxx / det;
        let i01 = -sx / det;
        let i11 = nf / det;
        let mut m = [[0.0_f64; 2]; 2];
        for i in 0..n {
            let e2 = ols_fit.residuals[i] * ols_fit.residuals[i];
            let xi = [1.0, x[i]];
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += e2 * xi[a] * xi[b];
                }
            }
        }
        let inv = [[i00, i01], [i01, i11]];
        let mut cov11 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                cov11 += inv[1][a] * m[a][b] * inv[b][1];
            }
        }
        cov11 *= nf / (nf - 2.0);
        assert_abs_diff_eq!(fit.gamma_se, cov11.sqrt(), epsilon = 1e-10);
    }
}
