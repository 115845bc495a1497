//! Mapped sieve estimation and multiplier-bootstrap inference for
//! time-varying nonlinear regression of locally stationary time series.

pub mod basis;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod study;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SieveFit64 = estimator::SieveFit<f64>;
pub type SieveFit32 = estimator::SieveFit<f32>;
pub type SieveConfig64 = estimator::SieveConfig<f64>;
pub type SieveConfig32 = estimator::SieveConfig<f32>;
pub type RegressionData64 = estimator::RegressionData<f64>;
pub type ScrGrid64 = inference::ScrGrid<f64>;
pub type TestReport64 = inference::TestReport<f64>;
