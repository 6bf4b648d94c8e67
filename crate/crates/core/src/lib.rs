//! Goodness-of-fit testing for inhomogeneous Poisson processes whose
//! intensity belongs to a shift/scale family `λ₀((t−α)/β)`.
//!
//! The test fits `(α, β)` by maximum likelihood and compares an exactly
//! evaluated Cramér–von Mises statistic with a threshold calibrated by
//! simulating the parameter-free limit law.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod intensity;
pub mod ks;
pub mod limit;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod statistic;
pub mod testkit;

pub use error::{ApfError, Result};
pub use estimate::{FisherStar, FitOptions, FitResult};
pub use intensity::{BaseIntensityModel, ParamBox, ShiftScaleParams};
pub use limit::{LimitDraw, LimitGrid, ThresholdTable};
pub use simulate::{Dataset, Trajectory};
pub use statistic::{StatMethod, StatValue};
pub use testkit::{AltIntensity, FitSettings, StudyResult, TestReport};
