//! Stochastic frontier estimation with breakdown-frontier sensitivity
//! analysis for the normal / truncated-normal composed-error model.

pub mod deltas;
pub mod error;
pub mod frontier;
pub mod inference;
pub mod likelihood;
pub mod model;
pub mod normal;
pub mod optim;
pub mod quadrature;
pub mod sampling;

pub use deltas::{delta_set, delta_set_quadrature, delta_set_simulated, master_integral, DeltaSet};
pub use error::{Error, Result};
pub use model::{composed_residual, predict_frontier, Dataset, FitResult, Observation, Theta};
pub use likelihood::{fit_mle, information_matrix, loglik, score, OptimOptions};
pub use frontier::{
    b_of_c, breakdown_frontier, efficiency_bounds, in_robust_region, point_efficiency, rho_schedule, soft_max,
    soft_max_derivative, Bounds, FrontierCurve, RelaxationPoint,
};
pub use inference::{
    b_gradient, bonferroni_tests, bootstrap_frontier, debiased_soft_bf, delta_jacobian, influence_b, variance_b,
    variance_soft_bf, BandMethod, BootstrapBands, BootstrapConfig, CovarianceConvention, TestReport,
};
