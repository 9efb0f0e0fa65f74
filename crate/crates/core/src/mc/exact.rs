use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::tilt::{cgf_and_tilt, threshold_index};
use super::{Diagnostics, Estimate, EstimateResult, Estimator};
use crate::error::{ensure, Result};
use crate::lattice::{neumaier_sum, LatticeDist};

const MAX_SUPPORT: u64 = 10_000_000;
/// Tilted masses below this fraction of the largest one are dropped.
const PRUNE_REL: f64 = 1e-60;
/// Products of lengths up to this size are convolved directly.
const DIRECT_LIMIT: usize = 1 << 22;

/// Masses on consecutive indices starting at `start`.
#[derive(Debug, Clone)]
struct Segment {
    start: i64,
    masses: Vec<f64>,
}

impl Segment {
    fn prune(mut self) -> Self {
        let max = self.masses.iter().copied().fold(0.0, f64::max);
        let floor = max * PRUNE_REL;
        let first = self.masses.iter().position(|&m| m > floor).unwrap_or(0);
        let last = self.masses.iter().rposition(|&m| m > floor).unwrap_or(0);
        self.masses.truncate(last + 1);
        self.masses.drain(..first);
        self.start += first as i64;
        self
    }
}

fn convolve(a: &Segment, b: &Segment) -> Segment {
    let len = a.masses.len() + b.masses.len() - 1;
    let masses = if a.masses.len() * b.masses.len() <= DIRECT_LIMIT {
        let mut out = vec![0.0; len];
        for (i, &x) in a.masses.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out[i..].iter_mut().zip(&b.masses) {
                *o += x * y;
            }
        }
        out
    } else {
        fft_convolve(&a.masses, &b.masses, len)
    };
    Segment {
        start: a.start + b.start,
        masses,
    }
    .prune()
}

fn fft_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let load = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (slot, &x) in buf.iter_mut().zip(v) {
            slot.re = x;
        }
        buf
    };
    let (mut fa, mut fb) = (load(a), load(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|z| (z.re * scale).max(0.0)).collect()
}

/// `n`-fold convolution by repeated squaring.
fn convolution_power(base: Segment, n: u64) -> Segment {
    let mut acc: Option<Segment> = None;
    let mut pow = base;
    let mut k = n;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => pow.clone(),
                Some(a) => convolve(&a, &pow),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        pow = convolve(&pow, &pow);
    }
    acc.expect("n >= 1")
}

/// Exact `log P(X_1 + ... + X_n >= threshold)` for i.i.d. lattice summands.
///
/// The law is first tilted so that its mean is `threshold / n`. The tilted
/// `n`-fold convolution then has its bulk at the threshold, which keeps the
/// relevant masses far above the rounding floor; the tail probability is
/// recovered as `e^(n Lambda) sum_{s >= threshold} P_lambda(s) e^(-lambda s)`.
pub fn exact_tail_convolution(dist: &LatticeDist, n: u64, threshold: f64) -> Result<f64> {
    ensure!(n >= 1, Parameter, "n must be at least 1");
    ensure!(threshold.is_finite(), Parameter, "threshold must be finite");
    let nf = n as f64;
    let s_min = threshold_index(dist, n, threshold);
    let top = (dist.len() as i64 - 1) * n as i64;
    if s_min <= 0 {
        return Ok(0.0);
    }
    if s_min > top {
        return Ok(f64::NEG_INFINITY);
    }
    let last = *dist.masses().last().expect("non-empty");
    if s_min == top {
        return Ok(nf * last.ln());
    }
    let support = n.saturating_mul(dist.len() as u64 - 1).saturating_add(1);
    ensure!(
        support <= MAX_SUPPORT,
        Resource,
        "the {n}-fold sum has {support} support points, more than the limit of {MAX_SUPPORT}"
    );
    let target = threshold / nf;
    let (lambda, cgf) = if target <= dist.mean() {
        (0.0, 0.0)
    } else {
        cgf_and_tilt(dist, target)?
    };
    let (h, o) = (dist.step(), dist.offset());
    let logs: Vec<f64> = dist
        .points()
        .map(|(x, m)| {
            if m > 0.0 {
                m.ln() + lambda * x - cgf
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let base = Segment {
        start: 0,
        masses: logs.iter().map(|l| l.exp()).collect(),
    }
    .prune();
    let sum = convolution_power(base, n);
    // Weights e^(-lambda h (s - s_min)) are at most 1 on the tail.
    let tail = neumaier_sum(
        sum.masses
            .iter()
            .enumerate()
            .map(|(i, &m)| (sum.start + i as i64, m))
            .filter(|&(s, m)| s >= s_min && m > 0.0)
            .map(|(s, m)| m * (-lambda * h * (s - s_min) as f64).exp()),
    );
    if tail <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_p = nf * cgf - lambda * (nf * o + h * s_min as f64) + tail.ln();
    Ok(log_p.min(0.0))
}

/// [`exact_tail_convolution`] in the common result schema, with `std_err` 0.
pub fn exact_estimate(dist: &LatticeDist, n: u64, threshold: f64) -> Result<Estimate> {
    let log_prob = exact_tail_convolution(dist, n, threshold)?;
    Ok(Estimate {
        result: EstimateResult {
            n,
            y: threshold,
            log_prob,
            std_err: 0.0,
            samples: 0,
            estimator: Estimator::ExactLattice,
            seed: 0,
        },
        diagnostics: Diagnostics::default(),
    })
}
