//! Moment functions, the exponentially tilted averaged moment, the
//! chi-square bounded test statistic and confidence-set inversion.

mod ci;
mod moments;
mod optimize;
mod tilt;

pub use ci::{confidence_interval, regression_moments, CiConfig, ConfidenceSet, HouseholdSample, Target};
pub use moments::{moments_mv, population_variance, MomentSpec};
pub use optimize::{chi2_quantile, GammaSolution, MomentPanel, OptimizerConfig, TestResult};
pub use tilt::{averaged_moment, averaged_moment_jacobian, objective, DrawMatrix};
