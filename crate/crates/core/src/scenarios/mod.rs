//! The kernel (local) and series applications as discretized classes with
//! exact Gaussian analogues, and rate experiments comparing the two.

mod basis;
mod kernel;
mod rate;
mod series;

pub use basis::Basis;
pub use kernel::{
    build_kernel_class, kernel_sup_sample, BandwidthRule, GFamily, Kernel, KernelClass, KernelScenario, MeanFn,
    Normalization, Obs, ResponseModel,
};
pub use rate::{rate_experiment, GridRefinement, RateReport, RateRow, ScenarioSpec};
pub use series::{
    build_series_class, series_linear_statistic, series_sup_sample, xi_n, KRule, SeriesClass, SeriesModel,
    SeriesScenario,
};
