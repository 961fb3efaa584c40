//! Experiment engine: data, specs, runs, fits and reports.

pub mod data;
pub mod experiments;
pub mod fit;
pub mod report;
pub mod spec;

pub use data::{gaussian_data, rough_data};
pub use experiments::{
    decay_experiment, growth_experiment, residual_scaling, run_limit_experiment, self_convergence, DecayOptions,
    DecayReport, GrowthReport, LimitReport, LimitRow, SelfConvergence, SolverKind,
};
pub use fit::{fit_rate, RateFit};
pub use spec::{DataSpec, ExperimentSpec};
