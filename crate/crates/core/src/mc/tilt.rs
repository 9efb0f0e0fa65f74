use super::{run_batches, Diagnostics, Estimate, EstimateResult, Estimator, LogMoments};
use crate::error::{ensure, Result};
use crate::lattice::{neumaier_sum, LatticeDist};

const TILT_MAX_ITER: usize = 500;
const TILT_RESIDUAL: f64 = 1e-10;

/// `(log E[e^(lambda X)], tilted mean, tilted variance)`.
pub(crate) fn cgf_moments(dist: &LatticeDist, lambda: f64) -> (f64, f64, f64) {
    let (shift, exps) = tilted_exponents(dist, lambda);
    let z = neumaier_sum(exps.iter().copied());
    let mean = neumaier_sum(dist.points().zip(&exps).map(|((x, _), e)| x * e)) / z;
    let var = neumaier_sum(dist.points().zip(&exps).map(|((x, _), e)| (x - mean) * (x - mean) * e)) / z;
    (shift + z.ln(), mean, var)
}

/// `exp(ln m_j + lambda x_j - shift)` with `shift` the largest exponent.
fn tilted_exponents(dist: &LatticeDist, lambda: f64) -> (f64, Vec<f64>) {
    let logs: Vec<f64> = dist
        .points()
        .map(|(x, m)| {
            if m > 0.0 {
                m.ln() + lambda * x
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (shift, logs.iter().map(|l| (l - shift).exp()).collect())
}

/// The `lambda`-tilted lattice law.
pub(crate) fn tilted_dist(dist: &LatticeDist, lambda: f64) -> Result<LatticeDist> {
    let (_, exps) = tilted_exponents(dist, lambda);
    let z = neumaier_sum(exps.iter().copied());
    LatticeDist::new(dist.step(), dist.offset(), exps.iter().map(|e| e / z).collect())
}

/// Solves `d/dlambda log E[e^(lambda X)] = target_mean` for `lambda >= 0`.
///
/// Newton steps are kept inside a bisection bracket that is grown by
/// doubling until the tilted mean passes the target.
pub fn cgf_and_tilt(dist: &LatticeDist, target_mean: f64) -> Result<(f64, f64)> {
    let (mean, max) = (dist.mean(), dist.max_point());
    let width = (max - dist.min_point()).max(dist.step());
    let tol = TILT_RESIDUAL * width;
    ensure!(target_mean.is_finite(), Domain, "target mean must be finite");
    if (target_mean - mean).abs() <= tol {
        return Ok((0.0, 0.0));
    }
    ensure!(
        target_mean > mean && target_mean < max,
        Domain,
        "target mean {target_mean} must lie strictly between the mean {mean} and the largest support point {max}"
    );
    let mut lo = 0.0;
    let mut hi = 1.0 / width;
    loop {
        let (_, m, _) = cgf_moments(dist, hi);
        if m >= target_mean {
            break;
        }
        lo = hi;
        hi *= 2.0;
        ensure!(
            hi.is_finite() && hi < 1e300,
            Domain,
            "target mean {target_mean} is not attainable"
        );
    }
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..TILT_MAX_ITER {
        let (_, m, v) = cgf_moments(dist, lambda);
        let r = m - target_mean;
        if r.abs() <= tol {
            break;
        }
        if r > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        let newton = lambda - r / v;
        lambda = if v > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let (cgf, m, _) = cgf_moments(dist, lambda);
    ensure!(
        (m - target_mean).abs() <= tol.max(1e-6 * width),
        Numeric,
        "tilt did not converge: mean {m} vs target {target_mean}"
    );
    Ok((lambda, cgf))
}

/// Smallest index sum `s` with `n * offset + s * step >= threshold`.
pub(crate) fn threshold_index(dist: &LatticeDist, n: u64, threshold: f64) -> i64 {
    let raw = (threshold - n as f64 * dist.offset()) / dist.step();
    (raw - 1e-9).ceil() as i64
}

#[derive(Default)]
struct TiltAcc {
    hits: u64,
    tail: LogMoments,
    all: LogMoments,
}

impl TiltAcc {
    fn merge(a: Self, b: Self) -> Self {
        Self {
            hits: a.hits + b.hits,
            tail: LogMoments::merge(a.tail, b.tail),
            all: LogMoments::merge(a.all, b.all),
        }
    }
}

/// Importance sampling under the exponentially tilted lattice law whose
/// mean is `threshold / n`; each draw of the sum `S` carries the weight
/// `exp(-lambda S + n Lambda(lambda))`.
pub fn tilted_is_estimate(dist: &LatticeDist, n: u64, threshold: f64, samples: u64, seed: u64) -> Result<Estimate> {
    ensure!(n >= 1, Parameter, "n must be at least 1");
    ensure!(samples >= 1, Parameter, "samples must be at least 1");
    ensure!(threshold.is_finite(), Parameter, "threshold must be finite");
    let nf = n as f64;
    let s_min = threshold_index(dist, n, threshold);
    let top = (dist.len() as i64 - 1) * n as i64;
    let mut diag = Diagnostics::default();
    let result = |log_prob: f64, std_err: f64| EstimateResult {
        n,
        y: threshold,
        log_prob,
        std_err,
        samples,
        estimator: Estimator::TiltedIs,
        seed,
    };
    if s_min > top {
        diag.notes.push("threshold above the largest attainable sum".into());
        return Ok(Estimate {
            result: result(f64::NEG_INFINITY, 0.0),
            diagnostics: diag,
        });
    }
    if s_min == top {
        // The limiting tilt puts all mass on the top point: every draw hits
        // and carries the same weight.
        let last = *dist.masses().last().expect("non-empty");
        diag.notes
            .push("infinite tilt: the only path is every summand at its maximum".into());
        diag.hits = Some(samples);
        return Ok(Estimate {
            result: result(nf * last.ln(), 0.0),
            diagnostics: diag,
        });
    }
    let target = threshold / nf;
    let (lambda, cgf) = if target <= dist.mean() {
        (0.0, 0.0)
    } else {
        cgf_and_tilt(dist, target)?
    };
    let tilted = tilted_dist(dist, lambda)?;
    let (h, o) = (dist.step(), dist.offset());
    let acc = run_batches(
        seed,
        0,
        samples,
        |rng, len| {
            let mut acc = TiltAcc::default();
            for _ in 0..len {
                let s: i64 = (0..n).map(|_| tilted.sample_index(rng) as i64).sum();
                let log_w = -lambda * (nf * o + h * s as f64) + nf * cgf;
                acc.all.push(log_w);
                if s >= s_min {
                    acc.hits += 1;
                    acc.tail.push(log_w);
                } else {
                    acc.tail.push(f64::NEG_INFINITY);
                }
            }
            acc
        },
        TiltAcc::merge,
    );
    let (log_prob, std_err) = acc.tail.log_mean();
    let (log_w, se_w) = acc.all.log_mean();
    diag.hits = Some(acc.hits);
    diag.lambda = Some(lambda);
    diag.cgf = Some(cgf);
    diag.weight_mean = Some((log_w.exp(), se_w * log_w.exp()));
    Ok(Estimate {
        result: result(log_prob.min(0.0), std_err),
        diagnostics: diag,
    })
}
