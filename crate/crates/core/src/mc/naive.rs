use super::{run_batches, Diagnostics, Estimate, EstimateResult, Estimator};
use crate::error::{ensure, Result};
use crate::model::{BoundedSampler, SemiexpFamily, TruncationParams};

/// Sampler for one summand: the family itself or its truncation at
/// `N^beta c` (the truncation's own `n_index` is replaced by `n`).
pub(crate) fn summand_sampler<'a>(
    family: &'a SemiexpFamily,
    trunc: Option<&TruncationParams>,
    n: u64,
) -> Result<BoundedSampler<'a>> {
    let upper = match trunc {
        Some(t) => {
            t.validate()?;
            t.with_n(n).cutoff()
        }
        None => f64::INFINITY,
    };
    BoundedSampler::new(family, upper)
}

pub(crate) fn check_common(n: u64, alpha: f64, y: f64, samples: u64) -> Result<f64> {
    ensure!(n >= 1, Parameter, "N must be at least 1");
    ensure!(samples >= 1, Parameter, "samples must be at least 1");
    ensure!(alpha.is_finite(), Parameter, "alpha must be finite");
    ensure!(y.is_finite(), Parameter, "y must be finite");
    Ok((n as f64).powf(alpha) * y)
}

/// Fraction of `samples` replicate row sums `Y_1 + ... + Y_N` reaching `N^alpha y`.
pub fn naive_estimate(
    family: &SemiexpFamily,
    trunc: Option<&TruncationParams>,
    n: u64,
    alpha: f64,
    y: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let x = check_common(n, alpha, y, samples)?;
    let sampler = summand_sampler(family, trunc, n)?;
    let hits: u64 = run_batches(
        seed,
        0,
        samples,
        |rng, len| {
            (0..len)
                .filter(|_| {
                    let s: f64 = (0..n).map(|_| sampler.draw(rng)).sum();
                    s >= x
                })
                .count() as u64
        },
        |a, b| a + b,
    );
    let (log_prob, std_err) = if hits == 0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let p = hits as f64 / samples as f64;
        (p.ln(), ((1.0 - p) / hits as f64).sqrt())
    };
    Ok(Estimate {
        result: EstimateResult {
            n,
            y,
            log_prob,
            std_err,
            samples,
            estimator: Estimator::Naive,
            seed,
        },
        diagnostics: Diagnostics {
            hits: Some(hits),
            ..Default::default()
        },
    })
}
