//! Large-deviation asymptotics for sums of semiexponential triangular arrays.
//!
//! For row sums `T_n = Y_1 + ... + Y_N` of variables with tail
//! `log P(Y >= y) ~ -q y^(1-eps)`, the probability `P(T_n >= N^alpha y)`
//! decays like `exp(-N^s I(y))`. This crate provides
//!
//! * [`rates`]: every rate function `I` in closed form, the thresholds where
//!   their pieces change, and a brute-force minimization oracle;
//! * [`phase`]: the map from `(alpha, beta, eps, c)` to the regime, its speed
//!   exponent `s` and its rate function;
//! * [`model`]: concrete Weibull-tailed families, truncations, exact tails,
//!   moments and assumption audits;
//! * [`mc`]: rare-event estimators (naive, exponential tilting, big-jump
//!   stratification), an exact lattice convolution oracle and limit
//!   extrapolation.
//!
//! The closed-form code in `rates` and `phase` is generic over the scalar
//! type; the aliases at the crate root fix it to `f64`.

pub mod error;
pub mod fmt;
pub mod lattice;
pub mod mc;
pub mod model;
pub mod phase;
mod quad;
pub mod rates;
pub mod scalar;

pub use error::{Error, Result};
pub use lattice::LatticeDist;
pub use scalar::Real;

pub type ModelParams = model::ModelParams<f64>;
pub type RateParams = rates::RateParams<f64>;
pub type Thresholds = rates::Thresholds<f64>;
pub type RateEvaluation = rates::RateEvaluation<f64>;
pub type RegimeInfo = phase::RegimeInfo<f64>;

pub type ModelParamsF32 = model::ModelParams<f32>;
pub type RateParamsF32 = rates::RateParams<f32>;
pub type RateEvaluationF32 = rates::RateEvaluation<f32>;
pub type RegimeInfoF32 = phase::RegimeInfo<f32>;
