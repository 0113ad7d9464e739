//! Simulation and estimation toolkit for information-provision experiments.
//!
//! The crate models populations of agents who hold beliefs over a scalar
//! state, receive signals under a randomized experimental design, update
//! those beliefs with possibly non-Bayesian rules, and act on a feature of
//! the updated belief. On top of the simulator it provides the standard
//! two-stage least squares specifications used to analyze such experiments
//! and diagnostics that expose exactly which weighted average of individual
//! responses each specification recovers.
//!
//! Module map:
//! - [`beliefs`]: belief states, signal likelihood families, update rules,
//!   likelihood-ratio and induced-monotonicity checks.
//! - [`actions`]: action functions mapping a belief feature to an outcome,
//!   with pointwise and interval-average partial effects.
//! - [`experiment`]: agents, passive and active designs, simulation into
//!   realized records plus a full counterfactual panel, stability and
//!   neutrality checks.
//! - [`linalg`]: self-contained least-squares core (pivoted QR) and the
//!   two-stage estimator with robust standard errors.
//! - [`estimators`]: interaction construction and the passive, active,
//!   conditional, and elasticity specifications.
//! - [`diagnostics`]: population weight reports, closed-form weight
//!   verification, binned weight and contribution profiles, and the
//!   panel-based estimand oracle.
//! - [`io`]: CSV schemas for records, panels, beliefs, and families.

pub mod actions;
pub mod beliefs;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod io;
pub mod linalg;

pub use error::{Error, Result};
