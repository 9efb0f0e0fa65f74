//! Rare-event estimation of `P(T >= N^alpha y)`.
//!
//! Three Monte Carlo estimators with overlapping validity, an exact lattice
//! oracle, a discretization bridge from continuous families to lattices, and
//! extrapolation of `log P / N^s` to its limit.
//!
//! Sample budgets are split into batches of [`BATCH_SIZE`]. Batch `b` of
//! stream `s` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream
//! `(s << 32) | b`, and batch results are merged pairwise in index order, so
//! every estimate is a pure function of its inputs and seed regardless of
//! the rayon pool size.

mod big_jump;
mod discretize;
mod exact;
mod fit;
mod naive;
mod tilt;

pub use big_jump::{big_jump_split_estimate, big_jump_split_with_threshold, jump_threshold};
pub use discretize::{discretize, Discretization};
pub use exact::{exact_estimate, exact_tail_convolution};
pub use fit::{slope_fit, RatioRow, SlopeFit};
pub use naive::naive_estimate;
pub use tilt::{cgf_and_tilt, tilted_is_estimate};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Naive,
    TiltedIs,
    BigJumpSplit,
    ExactLattice,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Naive,
        Estimator::TiltedIs,
        Estimator::BigJumpSplit,
        Estimator::ExactLattice,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::TiltedIs => "tilted_is",
            Estimator::BigJumpSplit => "big_jump_split",
            Estimator::ExactLattice => "exact_lattice",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown estimator {s:?}")))
    }
}

/// One estimate of `log P(T >= threshold)`.
///
/// `y` is the deviation level for the family-level estimators and the raw
/// threshold for the lattice-level ones. Non-finite `log_prob` and `std_err`
/// serialize as `null` (JSON has no infinities) and read back as `-inf` and
/// `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub n: u64,
    pub y: f64,
    #[serde(serialize_with = "ser_nonfinite", deserialize_with = "de_log_prob")]
    pub log_prob: f64,
    #[serde(serialize_with = "ser_nonfinite", deserialize_with = "de_std_err")]
    pub std_err: f64,
    pub samples: u64,
    pub estimator: Estimator,
    pub seed: u64,
}

fn ser_nonfinite<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

fn de_log_prob<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

fn de_std_err<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl EstimateResult {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    /// No hits: `log_prob = -inf`, `std_err = inf`.
    pub fn is_degenerate(&self) -> bool {
        self.log_prob == f64::NEG_INFINITY
    }
}

/// Side information that does not belong in the JSON-lines schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Replicates (or tilted draws) that reached the threshold.
    pub hits: Option<u64>,
    pub lambda: Option<f64>,
    pub cgf: Option<f64>,
    /// Mean likelihood ratio over all tilted draws and its standard error;
    /// should be 1 within noise.
    pub weight_mean: Option<(f64, f64)>,
    pub jump_threshold: Option<f64>,
    /// Per-stratum `(m, log binomial weight, log conditional probability)`.
    pub strata: Vec<(u64, f64, f64)>,
    /// Upper bound on the probability mass of the strata that were dropped.
    pub bias_bound: Option<f64>,
    /// A stratum with no usable draw: its standard error was widened.
    pub widened: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub result: EstimateResult,
    pub diagnostics: Diagnostics,
}

/// Sum of `exp(v_i - shift)` and `exp(2 (v_i - shift))` over log-values `v_i`,
/// with the shift chosen on the fly. Zero terms (`v = -inf`) only count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogMoments {
    pub count: u64,
    pub shift: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Default for LogMoments {
    fn default() -> Self {
        Self {
            count: 0,
            shift: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
        }
    }
}

impl LogMoments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.shift {
            let r = (self.shift - v).exp();
            self.s1 *= r;
            self.s2 *= r * r;
            self.shift = v;
        }
        let e = (v - self.shift).exp();
        self.s1 += e;
        self.s2 += e * e;
    }

    pub fn merge(a: Self, b: Self) -> Self {
        if a.shift == f64::NEG_INFINITY {
            return Self {
                count: a.count + b.count,
                ..b
            };
        }
        if b.shift == f64::NEG_INFINITY {
            return Self {
                count: a.count + b.count,
                ..a
            };
        }
        let shift = a.shift.max(b.shift);
        let (ra, rb) = ((a.shift - shift).exp(), (b.shift - shift).exp());
        Self {
            count: a.count + b.count,
            shift,
            s1: a.s1 * ra + b.s1 * rb,
            s2: a.s2 * ra * ra + b.s2 * rb * rb,
        }
    }

    /// `(log mean, standard error of the log mean)`.
    pub fn log_mean(&self) -> (f64, f64) {
        if self.count == 0 || self.s1 == 0.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let m = self.count as f64;
        let mean = self.s1 / m;
        let log_mean = self.shift + mean.ln();
        if self.count < 2 {
            return (log_mean, f64::INFINITY);
        }
        let var = ((self.s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
        (log_mean, (var / m).sqrt() / mean)
    }
}

pub(crate) fn batch_rng(seed: u64, stream: u32, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | batch as u64);
    rng
}

/// Runs `samples` replicates in fixed batches and merges the per-batch
/// accumulators pairwise in batch order.
pub(crate) fn run_batches<A, F, M>(seed: u64, stream: u32, samples: u64, body: F, merge: M) -> A
where
    A: Send + Default,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let batches = samples.div_ceil(BATCH_SIZE as u64) as usize;
    let parts: Vec<A> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b as u64 * BATCH_SIZE as u64;
            let len = (samples - start).min(BATCH_SIZE as u64) as usize;
            body(&mut batch_rng(seed, stream, b), len)
        })
        .collect();
    pairwise(parts, &merge)
}

fn pairwise<A: Default, M: Fn(A, A) -> A>(mut parts: Vec<A>, merge: &M) -> A {
    if parts.is_empty() {
        return A::default();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("non-empty")
}

/// `ln C(n, m) + m ln p + (n - m) ln(1 - p)` from log-probabilities.
pub(crate) fn log_binomial_pmf(n: u64, m: u64, log_p: f64, log_1mp: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if m > n {
        return f64::NEG_INFINITY;
    }
    let (nf, mf) = (n as f64, m as f64);
    let choose = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0);
    let a = if m == 0 { 0.0 } else { mf * log_p };
    let b = if m == n { 0.0 } else { (nf - mf) * log_1mp };
    choose + a + b
}

/// `ln(sum exp(v))`.
pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(vs: I) -> f64 {
    let vs: Vec<f64> = vs.into_iter().collect();
    let m = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + crate::lattice::neumaier_sum(vs.iter().map(|v| (v - m).exp())).ln()
}
