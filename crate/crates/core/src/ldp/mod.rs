//! Large-deviation experiments: Cameron–Martin shifts and their lifts,
//! dilation tails under the uniform distance, moment growth of Wiener chaos
//! functionals and the analytic pointwise Gaussian tail.

mod cameron_martin;
mod chaos;
mod schilder;
mod tails;

pub use cameron_martin::{
    cameron_martin_path, cm_lift_uniform_convergence, cm_regularity_check, rate_function,
    CMControl, CMPath, CmRegularity, ModeControl, UniformRow,
};
pub use chaos::{
    chaos_experiment, chaos_moment_ratio, chaos_samples, ChaosFunctional, ChaosReport,
    ChaosSettings, GaussianCheck, MomentRatio,
};
pub use schilder::{log_gaussian_tail, schilder_point_check, SchilderReport};
pub use tails::{approximation_distances, tail_curve, tail_probability, TailCurve, TailRow};
