//! Closed-form rate functions for every deviation regime.
//!
//! With `k = 1 - eps`, the transition rate is
//!
//! ```text
//! I(y) = inf_{0 <= t <= 1} q t^k y^k + (1 - t)^2 y^2 / (2 sigma^2)
//! ```
//!
//! which equals `y^2 / (2 sigma^2)` up to `y1` and is attained at the larger
//! root of `(1 - t) t^eps = (1 - eps) q sigma^2 / y^(1 + eps)` beyond it.
//! The truncated model adds saturated jumps of size `c`, giving the
//! piecewise rates `I2`, `I3`, `I01` and `I02`.

mod curve;
mod oracle;

pub use curve::{emit_curve, read_curve_csv, write_curve_csv, CurveRow};
pub use oracle::rate_oracle_grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::model::ModelParams;
use crate::scalar::{rel_eq, Real};

const THETA_MAX_ITER: usize = 200;
const THETA_RESIDUAL: f64 = 1e-12;

/// Model constants plus the optional saturation level `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams<T> {
    pub model: ModelParams<T>,
    pub c: Option<T>,
}

impl<T: Real> RateParams<T> {
    pub fn new(model: ModelParams<T>, c: Option<T>) -> Result<Self> {
        let p = Self { model, c };
        p.validate()?;
        Ok(p)
    }

    /// Shorthand for the `(q, sigma2, eps, c)` parameterization used by the
    /// rate functions; `gamma` is irrelevant here and set to 1.
    pub fn from_constants(q: T, sigma2: T, epsilon: T, c: Option<T>) -> Result<Self> {
        Self::new(ModelParams::new(epsilon, q, sigma2, T::one())?, c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(c) = self.c {
            ensure!(c > T::zero() && c.is_finite(), Parameter, "c must be positive, got {c}");
        }
        Ok(())
    }

    fn require_c(&self) -> Result<T> {
        self.c
            .ok_or_else(|| Error::Parameter("this rate needs the saturation level c".into()))
    }

    #[inline]
    fn k(&self) -> T {
        self.model.tail_power()
    }

    #[inline]
    fn two_sigma2(&self) -> T {
        T::lit(2.0) * self.model.sigma2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    /// Below `y0` the transition objective is increasing in the jump share.
    pub y0: T,
    /// Gaussian and interior branches of `I` tie at `y1`.
    pub y1: T,
    pub y3: Option<T>,
    pub c0: Option<T>,
    pub y01: Option<T>,
    pub y02: Option<T>,
}

pub fn thresholds<T: Real>(params: &RateParams<T>) -> Result<Thresholds<T>> {
    params.validate()?;
    let ModelParams {
        epsilon: e,
        q,
        sigma2: s2,
        ..
    } = params.model;
    let one = T::one();
    let two = T::lit(2.0);
    let qs = q * s2;
    let inv = one / (one + e);
    let y0 = ((one - e * e) * (one + one / e).powf(e) * qs).powf(inv);
    let y1 = (one + e) * (qs / (two * e).powf(e)).powf(inv);
    let (y3, c0, y01, y02) = match params.c {
        Some(c) => {
            let ce = c.powf(-e);
            (
                Some(qs * ce),
                Some((two * e * qs).powf(inv)),
                Some(c / two + qs * ce),
                Some(c + (one - e) * qs * ce),
            )
        }
        None => (None, None, None, None),
    };
    Ok(Thresholds {
        y0,
        y1,
        y3,
        c0,
        y01,
        y02,
    })
}

/// Which piece of a piecewise rate produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Gaussian,
    MaxJump,
    /// `I` on `[0, y1]`, jump share 0 (ties at `y1` land here).
    TransitionGaussian,
    /// `I` beyond `y1`, attained at the interior root.
    TransitionInterior,
    Transition2,
    TruncMaxJump,
    Transition3Quadratic,
    Transition3Affine,
    /// `I01`, used for `c <= c0` (and at `c = c0`).
    T01,
    /// `I02`, used for `c > c0`.
    T02,
}

impl Branch {
    pub const ALL: [Branch; 10] = [
        Branch::Gaussian,
        Branch::MaxJump,
        Branch::TransitionGaussian,
        Branch::TransitionInterior,
        Branch::Transition2,
        Branch::TruncMaxJump,
        Branch::Transition3Quadratic,
        Branch::Transition3Affine,
        Branch::T01,
        Branch::T02,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Gaussian => "gaussian",
            Branch::MaxJump => "max_jump",
            Branch::TransitionGaussian => "transition_gaussian",
            Branch::TransitionInterior => "transition_interior",
            Branch::Transition2 => "transition2",
            Branch::TruncMaxJump => "trunc_max_jump",
            Branch::Transition3Quadratic => "transition3_quadratic",
            Branch::Transition3Affine => "transition3_affine",
            Branch::T01 => "t0_1",
            Branch::T02 => "t0_2",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown branch tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEvaluation<T> {
    pub y: T,
    pub value: T,
    /// Optimizing jump share (`theta` for `I`, `t` for `I3`).
    pub theta: Option<T>,
    pub branch: Branch,
    /// Number of saturated jumps for `I2`, `I01`, `I02`.
    pub jumps: Option<u64>,
}

impl<T: Real> RateEvaluation<T> {
    fn plain(y: T, value: T, branch: Branch) -> Self {
        Self {
            y,
            value,
            theta: None,
            branch,
            jumps: None,
        }
    }
}

/// Identifier of a rate function, as used on the command line and in the
/// regime classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateId {
    Gaussian,
    MaxJump,
    Transition,
    Transition2,
    TruncMaxJump,
    Transition3,
    T0,
}

impl RateId {
    pub const ALL: [RateId; 7] = [
        RateId::Gaussian,
        RateId::MaxJump,
        RateId::Transition,
        RateId::Transition2,
        RateId::TruncMaxJump,
        RateId::Transition3,
        RateId::T0,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RateId::Gaussian => "gaussian",
            RateId::MaxJump => "max_jump",
            RateId::Transition => "transition",
            RateId::Transition2 => "transition2",
            RateId::TruncMaxJump => "trunc_max_jump",
            RateId::Transition3 => "transition3",
            RateId::T0 => "t0",
        }
    }

    pub fn needs_c(&self) -> bool {
        matches!(
            self,
            RateId::Transition2 | RateId::TruncMaxJump | RateId::Transition3 | RateId::T0
        )
    }
}

impl fmt::Display for RateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RateId::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown rate id {s:?}")))
    }
}

fn check_y<T: Real>(y: T) -> Result<()> {
    ensure!(
        y >= T::zero() && y.is_finite(),
        Domain,
        "rate argument must be finite and >= 0, got {y}"
    );
    Ok(())
}

pub fn gaussian_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    Ok(RateEvaluation::plain(y, y * y / params.two_sigma2(), Branch::Gaussian))
}

pub fn max_jump_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    Ok(RateEvaluation::plain(
        y,
        params.model.q * y.powf(params.k()),
        Branch::MaxJump,
    ))
}

pub fn trunc_max_jump_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    let c = params.require_c()?;
    Ok(RateEvaluation::plain(
        y,
        params.model.q * y * c.powf(-params.model.epsilon),
        Branch::TruncMaxJump,
    ))
}

/// Right-hand side of the first-order condition for the jump share.
#[inline]
fn theta_rhs<T: Real>(params: &RateParams<T>, y: T) -> T {
    let e = params.model.epsilon;
    (T::one() - e) * params.model.q * params.model.sigma2 / y.powf(T::one() + e)
}

/// `(1 - theta) theta^eps - rhs`.
#[inline]
pub(crate) fn theta_residual<T: Real>(params: &RateParams<T>, y: T, theta: T) -> T {
    (T::one() - theta) * theta.powf(params.model.epsilon) - theta_rhs(params, y)
}

/// Larger root in `[eps/(1+eps), 1]` of `(1 - t) t^eps = (1-eps) q sigma^2 / y^(1+eps)`.
///
/// The left side decreases strictly on that interval, so plain bisection
/// brackets the root from the maximum at `eps/(1+eps)` down to 1.
pub fn theta_root<T: Real>(params: &RateParams<T>, y: T) -> Result<T> {
    params.validate()?;
    let th = thresholds(params)?;
    ensure!(
        y > th.y0 && y.is_finite(),
        Domain,
        "theta_root needs y > y0 = {}, got {y}",
        th.y0
    );
    let e = params.model.epsilon;
    let mut lo = e / (T::one() + e);
    let mut hi = T::one();
    if theta_residual(params, y, lo) <= T::zero() {
        // y within rounding of y0: the double root sits at the maximizer.
        return Ok(lo);
    }
    let tol = T::tolerance(THETA_RESIDUAL);
    let two = T::lit(2.0);
    for _ in 0..THETA_MAX_ITER {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let r = theta_residual(params, y, mid);
        if r == T::zero() {
            return Ok(mid);
        }
        if r > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() && theta_residual(params, y, lo).abs() < tol {
            break;
        }
    }
    // Return whichever endpoint has the smaller residual.
    let (rl, rh) = (theta_residual(params, y, lo).abs(), theta_residual(params, y, hi).abs());
    Ok(if rl <= rh { lo } else { hi })
}

/// Transition objective `q (t y)^k + (1 - t)^2 y^2 / (2 sigma^2)`.
#[inline]
pub(crate) fn transition_objective<T: Real>(params: &RateParams<T>, y: T, t: T) -> T {
    let one = T::one();
    params.model.q * (t * y).powf(params.k()) + (one - t) * (one - t) * y * y / params.two_sigma2()
}

pub fn transition_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    let th = thresholds(params)?;
    if y <= th.y1 {
        return Ok(RateEvaluation {
            y,
            value: y * y / params.two_sigma2(),
            theta: Some(T::zero()),
            branch: Branch::TransitionGaussian,
            jumps: None,
        });
    }
    let theta = theta_root(params, y)?;
    Ok(RateEvaluation {
        y,
        value: transition_objective(params, y, theta),
        theta: Some(theta),
        branch: Branch::TransitionInterior,
        jumps: None,
    })
}

#[inline]
fn floor_count<T: Real>(x: T) -> T {
    x.floor().max(T::zero())
}

pub fn trunc_transition2_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    let c = params.require_c()?;
    let k = params.k();
    let jumps = floor_count(y / c);
    let rest = (y - jumps * c).max(T::zero());
    Ok(RateEvaluation {
        y,
        value: params.model.q * (jumps * c.powf(k) + rest.powf(k)),
        theta: None,
        branch: Branch::Transition2,
        jumps: jumps.to_u64(),
    })
}

pub fn transition3_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    let c = params.require_c()?;
    let th = thresholds(params)?;
    let y3 = th.y3.expect("c present");
    let ModelParams {
        epsilon: e,
        q,
        sigma2: s2,
        ..
    } = params.model;
    if y <= y3 {
        return Ok(RateEvaluation {
            y,
            value: y * y / params.two_sigma2(),
            theta: Some(T::one()),
            branch: Branch::Transition3Quadratic,
            jumps: None,
        });
    }
    let ce = c.powf(-e);
    Ok(RateEvaluation {
        y,
        value: q * y * ce - q * q * s2 * ce * ce / T::lit(2.0),
        theta: Some(y3 / y),
        branch: Branch::Transition3Affine,
        jumps: None,
    })
}

/// `max(floor((y - y_start) / c) + 1, 0)`.
fn saturated_count<T: Real>(y: T, y_start: T, c: T) -> T {
    (((y - y_start) / c).floor() + T::one()).max(T::zero())
}

fn t01<T: Real>(params: &RateParams<T>, y: T, c: T, y01: T) -> RateEvaluation<T> {
    let k = saturated_count(y, y01, c);
    let rest = y - k * c;
    RateEvaluation {
        y,
        value: params.model.q * k * c.powf(params.k()) + rest * rest / params.two_sigma2(),
        theta: None,
        branch: Branch::T01,
        jumps: k.to_u64(),
    }
}

fn t02<T: Real>(params: &RateParams<T>, y: T, c: T, y02: T) -> Result<RateEvaluation<T>> {
    let k = saturated_count(y, y02, c);
    let rest = (y - k * c).max(T::zero());
    let inner = transition_rate(params, rest)?;
    Ok(RateEvaluation {
        y,
        value: params.model.q * k * c.powf(params.k()) + inner.value,
        theta: inner.theta,
        branch: Branch::T02,
        jumps: k.to_u64(),
    })
}

/// Rate on the `alpha = beta = 1/(1+eps)` corner: `I01` for `c <= c0`,
/// `I02` for `c > c0`.
pub fn t0_rate<T: Real>(params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    check_y(y)?;
    let c = params.require_c()?;
    let th = thresholds(params)?;
    let (c0, y01, y02) = (th.c0.expect("c"), th.y01.expect("c"), th.y02.expect("c"));
    if rel_eq(c, c0, 1e-12) {
        let a = t01(params, y, c, y01);
        let b = t02(params, y, c, y02)?;
        let tol = T::tolerance(1e-8) * (T::one() + a.value.abs());
        debug_assert!(
            (a.value - b.value).abs() <= tol,
            "I01 and I02 disagree at c = c0: {} vs {}",
            a.value,
            b.value
        );
        return Ok(a);
    }
    if c < c0 {
        Ok(t01(params, y, c, y01))
    } else {
        t02(params, y, c, y02)
    }
}

/// Dispatch by identifier.
pub fn evaluate<T: Real>(id: RateId, params: &RateParams<T>, y: T) -> Result<RateEvaluation<T>> {
    match id {
        RateId::Gaussian => gaussian_rate(params, y),
        RateId::MaxJump => max_jump_rate(params, y),
        RateId::Transition => transition_rate(params, y),
        RateId::Transition2 => trunc_transition2_rate(params, y),
        RateId::TruncMaxJump => trunc_max_jump_rate(params, y),
        RateId::Transition3 => transition3_rate(params, y),
        RateId::T0 => t0_rate(params, y),
    }
}
