//! Maximum-likelihood estimation of sample-selection models in which the
//! response follows an exponential family and its observation is governed by
//! a latent threshold: `y` is seen when `T ≤ h(y)`, `T ~ G0`, so that
//!
//! ```text
//! f(y | D = 1) = f(y) G0{h(y)} / π,    π = E[G0{h(Y)}].
//! ```
//!
//! The dependence parameter α is estimated by profile likelihood; the
//! remaining parameters by Newton iterations with analytic derivatives.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod family;
pub mod glm;
pub mod io;
pub mod likelihood;
pub mod mechanism;
pub mod normalizer;
pub mod quadrature;
pub mod simulate;
pub mod special;

pub use data::{Dataset, Model, ParamVector};
pub use error::{Error, Result};
pub use estimator::{
    alpha_confidence, inner_maximize, profile_maximize, standard_errors, BoundaryDiagnostic, CiBound,
    FitReport, GridConfig, ProfileCurve,
};
pub use family::{FamilyKind, Link, ResponseFamily};
pub use glm::{fit_glm, fit_selection_glm, GlmFit};
pub use likelihood::{hessian, loglik, score, ScoreHessian};
pub use mechanism::{G0Kind, HKind, MechanismKind, SelectionMechanism};
pub use normalizer::{selection_probability, PiResult, Truncation};
pub use simulate::{esn_density_check, pi_monte_carlo, simulate, CovariateLaw, SimConfig, Simulated};
