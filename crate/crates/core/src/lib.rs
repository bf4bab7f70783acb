//! Gaussian coupling bounds for suprema of empirical processes, and the
//! Monte Carlo machinery to check them.
//!
//! The crate is organised around a handful of modules:
//!
//! * [`funcclass`]: discretized function classes, covering numbers and
//!   uniform entropy integrals.
//! * [`smoothmax`]: the log-sum-exp smooth maximum, its derivatives and the
//!   Gaussian-smoothed set indicator used by the Stein coupling.
//! * [`bounds`]: closed-form coupling, deviation and maximal bounds, with
//!   every unspecified universal constant exposed as a parameter.
//! * [`simulate`]: reproducible parallel sampling of empirical and Gaussian
//!   suprema, Kolmogorov distances, quantile couplings and Lévy concentration.
//! * [`scenarios`]: kernel (local) and series empirical processes with exact
//!   Gaussian analogues, and rate experiments.
//! * [`bands`]: uniform confidence bands and coverage experiments.
//!
//! Formula-level code is generic over [`Scalar`] (`f32` or `f64`); the
//! simulation layers work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod bounds;
pub mod error;
pub mod funcclass;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod scenarios;
pub mod simulate;
pub mod smoothmax;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use rng::{RngPolicy, StreamRng};
pub use scalar::Scalar;

pub type DiscretizedClass64<S> = funcclass::DiscretizedClass<S, f64>;
pub type DiscretizedClass32<S> = funcclass::DiscretizedClass<S, f32>;
pub type DiscreteMeasure64<S> = funcclass::DiscreteMeasure<S, f64>;
pub type SmoothMaxDerivs64 = smoothmax::SmoothMaxDerivs<f64>;
pub type SmoothMaxDerivs32 = smoothmax::SmoothMaxDerivs<f32>;
pub type IndicatorSmoothing64 = smoothmax::IndicatorSmoothing<f64>;
pub type MomentInputs64 = bounds::MomentInputs<f64>;
pub type CouplingBudget64 = bounds::CouplingBudget<f64>;
pub type SteinCouplingTerms64 = bounds::SteinCouplingTerms<f64>;
pub type SupSample64 = simulate::SupSample<f64>;
pub type SupSample32 = simulate::SupSample<f32>;
