//! Weibull-tailed families, their truncations, exact tails and moments.
//!
//! The continuous families have magnitude `W` with the exact tail
//! `P(W >= t) = exp(-q t^(1-eps))`. `OneSidedCentered` is `W - E[W]`;
//! `Symmetric` attaches a fair random sign to `W`. A `Lattice` family wraps a
//! centered [`LatticeDist`] so exact convolution oracles can be used.

mod audit;

pub use audit::{audit_assumptions, AuditReport, AuditRow, Verdict};

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{ensure, Error, Result};
use crate::lattice::{neumaier_sum, LatticeDist};
use crate::quad;
use crate::scalar::Real;

/// Distributional constants: tail exponent, tail constant, variance and
/// the moment order used by the `2 + gamma` moment condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub epsilon: T,
    pub q: T,
    pub sigma2: T,
    pub gamma: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(epsilon: T, q: T, sigma2: T, gamma: T) -> Result<Self> {
        let p = Self {
            epsilon,
            q,
            sigma2,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        ensure!(
            self.epsilon > zero && self.epsilon < one,
            Parameter,
            "epsilon must lie in (0, 1), got {}",
            self.epsilon
        );
        ensure!(
            self.q > zero && self.q.is_finite(),
            Parameter,
            "q must be positive, got {}",
            self.q
        );
        ensure!(
            self.sigma2 > zero && self.sigma2.is_finite(),
            Parameter,
            "sigma2 must be positive, got {}",
            self.sigma2
        );
        ensure!(
            self.gamma > zero && self.gamma <= one,
            Parameter,
            "gamma must lie in (0, 1], got {}",
            self.gamma
        );
        Ok(())
    }

    /// Tail power `1 - epsilon`.
    #[inline]
    pub fn tail_power(&self) -> T {
        T::one() - self.epsilon
    }
}

/// Row-dependent truncation `Y < n_index^beta * c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub beta: f64,
    pub c: f64,
    pub n_index: u64,
}

impl TruncationParams {
    pub fn new(beta: f64, c: f64, n_index: u64) -> Result<Self> {
        let t = Self { beta, c, n_index };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.beta > 0.0 && self.beta.is_finite(),
            Parameter,
            "beta must be positive, got {}",
            self.beta
        );
        ensure!(
            self.c > 0.0 && self.c.is_finite(),
            Parameter,
            "c must be positive, got {}",
            self.c
        );
        ensure!(self.n_index >= 1, Parameter, "row index must be at least 1");
        Ok(())
    }

    /// Same `(beta, c)` at another row.
    pub fn with_n(&self, n_index: u64) -> Self {
        Self { n_index, ..*self }
    }

    /// The cap `N^beta * c`.
    pub fn cutoff(&self) -> f64 {
        (self.n_index as f64).powf(self.beta) * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    OneSidedCentered,
    Symmetric,
    Lattice,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::OneSidedCentered => "one_sided_centered",
            FamilyKind::Symmetric => "symmetric",
            FamilyKind::Lattice => "lattice",
        }
    }
}

/// A concrete law for the summands. Construct through the named
/// constructors so `params.sigma2` always equals the exact variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiexpFamily {
    kind: FamilyKind,
    params: ModelParams<f64>,
    lattice: Option<LatticeDist>,
    inv_power: f64,
    shift: f64,
}

/// `((-ln u) / q)^(1 / (1 - eps))`: the magnitude with tail `exp(-q t^(1-eps))`.
#[inline]
pub fn weibull_magnitude(q: f64, epsilon: f64, u: f64) -> f64 {
    (-u.ln() / q).powf(1.0 / (1.0 - epsilon))
}

/// `E[W^p]` for the Weibull magnitude.
fn magnitude_moment(q: f64, k: f64, p: f64) -> f64 {
    gamma(1.0 + p / k) * q.powf(-p / k)
}

/// `E[W^p; W < a]`.
fn magnitude_moment_below(q: f64, k: f64, p: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if a.is_infinite() {
        return magnitude_moment(q, k, p);
    }
    magnitude_moment(q, k, p) * gamma_lr(1.0 + p / k, q * a.powf(k))
}

/// `E[W^p; W >= a]`.
fn magnitude_moment_above(q: f64, k: f64, p: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return magnitude_moment(q, k, p);
    }
    if a.is_infinite() {
        return 0.0;
    }
    magnitude_moment(q, k, p) * gamma_ur(1.0 + p / k, q * a.powf(k))
}

/// `ln(e^a - e^b)` for `a >= b`.
#[inline]
fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp_m1()).ln()
}

impl SemiexpFamily {
    pub fn symmetric(epsilon: f64, q: f64, gamma_order: f64) -> Result<Self> {
        let k = 1.0 - epsilon;
        let var = if epsilon > 0.0 && epsilon < 1.0 && q > 0.0 {
            magnitude_moment(q, k, 2.0)
        } else {
            1.0
        };
        let params = ModelParams::new(epsilon, q, var, gamma_order)?;
        Ok(Self {
            kind: FamilyKind::Symmetric,
            params,
            lattice: None,
            inv_power: 1.0 / k,
            shift: 0.0,
        })
    }

    pub fn one_sided_centered(epsilon: f64, q: f64, gamma_order: f64) -> Result<Self> {
        let k = 1.0 - epsilon;
        let (var, mean) = if epsilon > 0.0 && epsilon < 1.0 && q > 0.0 {
            let m1 = magnitude_moment(q, k, 1.0);
            (magnitude_moment(q, k, 2.0) - m1 * m1, m1)
        } else {
            (1.0, 0.0)
        };
        let params = ModelParams::new(epsilon, q, var, gamma_order)?;
        Ok(Self {
            kind: FamilyKind::OneSidedCentered,
            params,
            lattice: None,
            inv_power: 1.0 / k,
            shift: mean,
        })
    }

    /// Wraps a centered lattice law; `epsilon` and `q` describe the tail the
    /// lattice is meant to approximate and are used by the audit.
    pub fn lattice(dist: LatticeDist, epsilon: f64, q: f64, gamma_order: f64) -> Result<Self> {
        let scale = dist.min_point().abs().max(dist.max_point().abs()).max(1.0);
        ensure!(
            dist.mean().abs() <= 1e-12 * scale,
            Parameter,
            "lattice family must be centered, mean is {:e}",
            dist.mean()
        );
        let var = dist.variance();
        ensure!(var > 0.0, Parameter, "lattice family must be non-degenerate");
        let params = ModelParams::new(epsilon, q, var, gamma_order)?;
        Ok(Self {
            kind: FamilyKind::Lattice,
            params,
            lattice: Some(dist),
            inv_power: 1.0 / (1.0 - epsilon),
            shift: 0.0,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams<f64> {
        &self.params
    }

    pub fn lattice_dist(&self) -> Option<&LatticeDist> {
        self.lattice.as_ref()
    }

    /// Exact mean of the uncentered magnitude for the one-sided family, else 0.
    pub fn centering_shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    fn k(&self) -> f64 {
        1.0 - self.params.epsilon
    }

    /// Infimum of the support.
    pub fn support_min(&self) -> f64 {
        match self.kind {
            FamilyKind::OneSidedCentered => -self.shift,
            FamilyKind::Symmetric => f64::NEG_INFINITY,
            FamilyKind::Lattice => self.lattice.as_ref().map_or(0.0, |d| d.min_point()),
        }
    }

    /// `ln P(Y >= t)` for the untruncated law.
    pub fn log_sf(&self, t: f64) -> f64 {
        let (q, k) = (self.params.q, self.k());
        match self.kind {
            FamilyKind::OneSidedCentered => {
                let w = t + self.shift;
                if w <= 0.0 {
                    0.0
                } else {
                    -q * w.powf(k)
                }
            }
            FamilyKind::Symmetric => {
                if t > 0.0 {
                    -std::f64::consts::LN_2 - q * t.powf(k)
                } else {
                    (-0.5 * (-q * (-t).powf(k)).exp()).ln_1p()
                }
            }
            FamilyKind::Lattice => self.lattice.as_ref().expect("lattice").sf(t).ln(),
        }
    }

    /// `ln P(Y < t)` for the untruncated law.
    pub fn log_cdf(&self, t: f64) -> f64 {
        let (q, k) = (self.params.q, self.k());
        match self.kind {
            FamilyKind::OneSidedCentered => {
                let w = t + self.shift;
                if w <= 0.0 {
                    f64::NEG_INFINITY
                } else if w.is_infinite() {
                    0.0
                } else {
                    (-(-q * w.powf(k)).exp_m1()).ln()
                }
            }
            FamilyKind::Symmetric => {
                if t > 0.0 {
                    (-0.5 * (-q * t.powf(k)).exp()).ln_1p()
                } else {
                    -std::f64::consts::LN_2 - q * (-t).powf(k)
                }
            }
            FamilyKind::Lattice => self.lattice.as_ref().expect("lattice").cdf_below(t).ln(),
        }
    }

    /// `ln P(lo <= Y < hi)`.
    pub fn log_prob_between(&self, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        if let Some(d) = &self.lattice {
            let tol = d.grid_tol();
            return neumaier_sum(
                d.points()
                    .filter(|&(x, _)| x >= lo - tol && x < hi - tol)
                    .map(|(_, m)| m),
            )
            .ln();
        }
        // Use whichever side keeps the larger probabilities to avoid cancellation.
        if self.log_sf(lo) <= self.log_cdf(hi) {
            log_diff_exp(self.log_sf(lo), self.log_sf(hi))
        } else {
            log_diff_exp(self.log_cdf(hi), self.log_cdf(lo))
        }
    }

    /// One untruncated draw. The symmetric family draws the sign first.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            FamilyKind::OneSidedCentered => self.magnitude(rng.sample(Open01)) - self.shift,
            FamilyKind::Symmetric => {
                let positive: bool = rng.gen();
                let m = self.magnitude(rng.sample(Open01));
                if positive {
                    m
                } else {
                    -m
                }
            }
            FamilyKind::Lattice => self.lattice.as_ref().expect("lattice").sample(rng),
        }
    }

    #[inline]
    fn magnitude(&self, u: f64) -> f64 {
        (-u.ln() / self.params.q).powf(self.inv_power)
    }

    /// Draw from `Y | lo <= Y < hi` by inverse CDF, for continuous families
    /// with `lo` at or above the centre of the magnitude (`lo >= 0`, or
    /// `lo >= -shift` for the one-sided family).
    pub fn draw_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
        let (q, k) = (self.params.q, self.k());
        let base = match self.kind {
            FamilyKind::Symmetric => 0.0,
            FamilyKind::OneSidedCentered => self.shift,
            FamilyKind::Lattice => {
                return Err(Error::Precondition(
                    "inverse-CDF stratum sampling needs a continuous family".into(),
                ))
            }
        };
        let (wlo, whi) = ((lo + base).max(0.0), hi + base);
        ensure!(
            lo >= -base,
            Precondition,
            "lower stratum bound {lo} below the magnitude origin"
        );
        ensure!(whi > wlo, Precondition, "empty stratum [{lo}, {hi})");
        let s_lo = q * wlo.powf(k);
        let width = if whi.is_infinite() {
            f64::INFINITY
        } else {
            q * whi.powf(k) - s_lo
        };
        let u: f64 = rng.sample(Open01);
        // Exponential truncated to [0, width).
        let e = if width.is_infinite() {
            -u.ln()
        } else {
            -(-(u * -(-width).exp_m1())).ln_1p()
        };
        let w = ((s_lo + e) / q).powf(self.inv_power).min(whi);
        Ok(w - base)
    }
}

/// Rejection sampler for `Y | Y < upper`.
#[derive(Debug, Clone)]
pub struct BoundedSampler<'a> {
    family: &'a SemiexpFamily,
    upper: f64,
    acceptance: f64,
}

impl<'a> BoundedSampler<'a> {
    pub fn new(family: &'a SemiexpFamily, upper: f64) -> Result<Self> {
        let acceptance = if upper.is_infinite() {
            1.0
        } else {
            family.log_cdf(upper).exp()
        };
        if acceptance.is_nan() || acceptance < 1e-6 {
            return Err(Error::DegenerateTruncation(acceptance));
        }
        Ok(Self {
            family,
            upper,
            acceptance,
        })
    }

    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let y = self.family.draw(rng);
            if y < self.upper {
                return y;
            }
        }
    }
}

/// `count` i.i.d. draws of the centered base variable.
pub fn sample_base(family: &SemiexpFamily, seed: u64, count: usize) -> Result<Vec<f64>> {
    ensure!(count >= 1, Precondition, "count must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| family.draw(&mut rng)).collect())
}

/// `count` i.i.d. draws of `Y | Y < N^beta c` by rejection from the base
/// stream; when nothing is rejected the output equals [`sample_base`].
pub fn sample_truncated(family: &SemiexpFamily, trunc: &TruncationParams, seed: u64, count: usize) -> Result<Vec<f64>> {
    ensure!(count >= 1, Precondition, "count must be at least 1");
    trunc.validate()?;
    let sampler = BoundedSampler::new(family, trunc.cutoff())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sampler.draw(&mut rng)).collect())
}

/// Exact `ln P(Y >= y)`, or `ln P(y <= Y < cutoff) / P(Y < cutoff)` under truncation.
pub fn tail_log_prob(family: &SemiexpFamily, trunc: Option<&TruncationParams>, y: f64) -> Result<f64> {
    ensure!(y.is_finite(), Parameter, "tail point must be finite");
    match trunc {
        None => Ok(family.log_sf(y)),
        Some(t) => {
            t.validate()?;
            let cutoff = t.cutoff();
            if y >= cutoff {
                return Ok(f64::NEG_INFINITY);
            }
            let norm = family.log_cdf(cutoff);
            if norm == f64::NEG_INFINITY {
                return Err(Error::DegenerateTruncation(0.0));
            }
            Ok(family.log_prob_between(y, cutoff) - norm)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    /// `E|Y|^(2 + gamma)`.
    pub abs_moment_2_gamma: f64,
    /// Truncation level used, `+inf` when untruncated.
    pub cutoff: f64,
}

impl MomentReport {
    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }
}

const QUAD_TOL: f64 = 1e-10;

/// Mean, variance and `E|Y|^(2+gamma)` of the (optionally truncated) law.
pub fn moments(family: &SemiexpFamily, trunc: Option<&TruncationParams>) -> Result<MomentReport> {
    let cutoff = match trunc {
        Some(t) => {
            t.validate()?;
            t.cutoff()
        }
        None => f64::INFINITY,
    };
    let p = 2.0 + family.params.gamma;
    let (q, k) = (family.params.q, family.k());
    match family.kind {
        FamilyKind::Lattice => {
            let d = family.lattice.as_ref().expect("lattice");
            let tol = d.grid_tol();
            let kept: Vec<(f64, f64)> = d.points().filter(|&(x, _)| x < cutoff - tol).collect();
            let z = neumaier_sum(kept.iter().map(|&(_, m)| m));
            ensure!(z > 0.0, Domain, "truncation removes the whole lattice support");
            let mean = neumaier_sum(kept.iter().map(|&(x, m)| m * x)) / z;
            let variance = neumaier_sum(kept.iter().map(|&(x, m)| m * (x - mean).powi(2))) / z;
            let abs = neumaier_sum(kept.iter().map(|&(x, m)| m * x.abs().powf(p))) / z;
            Ok(MomentReport {
                mean,
                variance,
                abs_moment_2_gamma: abs,
                cutoff,
            })
        }
        FamilyKind::Symmetric => {
            let (e1, e2, ep, z) = if cutoff > 0.0 {
                (
                    -0.5 * magnitude_moment_above(q, k, 1.0, cutoff),
                    0.5 * (magnitude_moment(q, k, 2.0) + magnitude_moment_below(q, k, 2.0, cutoff)),
                    0.5 * (magnitude_moment(q, k, p) + magnitude_moment_below(q, k, p, cutoff)),
                    family.log_cdf(cutoff).exp(),
                )
            } else {
                let a = -cutoff;
                (
                    -0.5 * magnitude_moment_above(q, k, 1.0, a),
                    0.5 * magnitude_moment_above(q, k, 2.0, a),
                    0.5 * magnitude_moment_above(q, k, p, a),
                    family.log_cdf(cutoff).exp(),
                )
            };
            ensure!(z > 0.0, Domain, "truncation at {cutoff} leaves no mass");
            let mean = e1 / z;
            Ok(MomentReport {
                mean,
                variance: (e2 / z - mean * mean).max(0.0),
                abs_moment_2_gamma: ep / z,
                cutoff,
            })
        }
        FamilyKind::OneSidedCentered => {
            let mu = family.shift;
            let a = cutoff + mu;
            ensure!(a > 0.0, Domain, "cutoff {cutoff} is below the support infimum {}", -mu);
            let z = if a.is_infinite() {
                1.0
            } else {
                -(-q * a.powf(k)).exp_m1()
            };
            ensure!(z > 0.0, Domain, "truncation at {cutoff} leaves no mass");
            let m1 = magnitude_moment_below(q, k, 1.0, a) / z;
            let m2 = magnitude_moment_below(q, k, 2.0, a) / z;
            let mean = m1 - mu;
            let variance = (m2 - m1 * m1).max(0.0);
            let abs = one_sided_abs_moment(q, k, mu, p, a)? / z;
            Ok(MomentReport {
                mean,
                variance,
                abs_moment_2_gamma: abs,
                cutoff,
            })
        }
    }
}

/// `E[|W - mu|^p; W < a]` by quadrature in the exponential variable `s = q W^k`.
fn one_sided_abs_moment(q: f64, k: f64, mu: f64, p: f64, a: f64) -> Result<f64> {
    let inv = 1.0 / k;
    let ratio = p / k;
    let s_max = if a.is_infinite() {
        ratio + 60.0 * (ratio + 1.0).sqrt() + 100.0
    } else {
        q * a.powf(k)
    };
    let s_mu = (q * mu.powf(k)).min(s_max);
    let scale = magnitude_moment(q, k, p).max(mu.powf(p)).max(1.0);
    let f = |s: f64| ((s / q).powf(inv) - mu).abs().powf(p) * (-s).exp();
    quad::integrate_pieces(f, &[0.0, s_mu, s_max], QUAD_TOL * scale)
}

/// JSON form of a family plus optional truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub epsilon: f64,
    pub q: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeDist>,
}

fn default_gamma() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn build(&self) -> Result<(SemiexpFamily, Option<TruncationParams>)> {
        let family = match self.kind {
            FamilyKind::Symmetric => SemiexpFamily::symmetric(self.epsilon, self.q, self.gamma)?,
            FamilyKind::OneSidedCentered => SemiexpFamily::one_sided_centered(self.epsilon, self.q, self.gamma)?,
            FamilyKind::Lattice => {
                let d = self
                    .lattice
                    .clone()
                    .ok_or_else(|| Error::Parameter("lattice family needs a \"lattice\" object".into()))?;
                SemiexpFamily::lattice(d, self.epsilon, self.q, self.gamma)?
            }
        };
        ensure!(
            self.kind == FamilyKind::Lattice || self.lattice.is_none(),
            Parameter,
            "\"lattice\" is only valid for kind \"lattice\""
        );
        let trunc = match (self.beta, self.c) {
            (Some(beta), Some(c)) => Some(TruncationParams::new(beta, c, self.n_index.unwrap_or(1))?),
            (None, None) => None,
            _ => return Err(Error::Parameter("truncation needs both beta and c".into())),
        };
        Ok((family, trunc))
    }

    pub fn from_parts(family: &SemiexpFamily, trunc: Option<&TruncationParams>) -> Self {
        Self {
            kind: family.kind,
            epsilon: family.params.epsilon,
            q: family.params.q,
            gamma: family.params.gamma,
            beta: trunc.map(|t| t.beta),
            c: trunc.map(|t| t.c),
            n_index: trunc.map(|t| t.n_index),
            lattice: family.lattice.clone(),
        }
    }
}

#[cfg(test)]
mod tests;
