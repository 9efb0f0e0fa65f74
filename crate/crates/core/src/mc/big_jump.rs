//! Stratification on the number of big summands.
//!
//! With `u` the jump threshold and `m` the number of summands at or above
//! it, `P(T >= x) = sum_m P(Bin(N, p_u) = m) P(T >= x | m big)`. In every
//! stratum one summand is integrated out analytically given the others:
//!
//! * `m = 0`: the largest summand (conditional Monte Carlo in the style of
//!   Asmussen and Kroese), `N P(max(M', x - S') <= Z < u) / P(Z < u)` over the
//!   other `N - 1`;
//! * `m >= 1`: one big summand, `P(max(u, x - S') <= Z < U) / P(u <= Z < U)`.

use rand::Rng;

use super::naive::check_common;
use super::{log_binomial_pmf, log_sum_exp, run_batches, Diagnostics, Estimate, EstimateResult, Estimator, LogMoments};
use crate::error::{ensure, Error, Result};
use crate::model::{BoundedSampler, FamilyKind, SemiexpFamily, TruncationParams};
use crate::phase::{classify, Regime};
use crate::rates::{thresholds, transition_rate, RateParams};
use crate::scalar::rel_eq;

/// Strata whose binomial weight drops below this fraction of the running
/// total end the sum.
const STRATUM_REL_CUTOFF: f64 = 1e-3;
const MAX_STRATA: u64 = 64;

/// Regime at `(alpha, beta)` and the jump threshold `u*` used for it.
///
/// `u* = x` in the maximal-jump regime and `u* = theta(y) x` on the
/// transition line (`x` when `theta(y) = 0`). In the regimes where jumps
/// saturate at the cap `U`, `u* = min(x, U / 2)`.
pub fn jump_threshold(
    family: &SemiexpFamily,
    trunc: Option<&TruncationParams>,
    n: u64,
    alpha: f64,
    y: f64,
) -> Result<(Regime, f64)> {
    ensure!(y > 0.0 && y.is_finite(), Parameter, "y must be positive, got {y}");
    let model = *family.params();
    let x = (n as f64).powf(alpha) * y;
    let regime = match trunc {
        Some(t) => classify(alpha, t.beta, &model, t.c, Some(y))?.regime,
        None => {
            ensure!(alpha > 0.5, Domain, "alpha must exceed 1/2, got {alpha}");
            let b0 = 1.0 / (1.0 + model.epsilon);
            if rel_eq(alpha, b0, 1e-12) {
                Regime::Transition1
            } else if alpha < b0 {
                Regime::Gaussian
            } else {
                Regime::MaxJump
            }
        }
    };
    let cap = trunc.map_or(f64::INFINITY, |t| t.with_n(n).cutoff());
    let u = match regime {
        Regime::MaxJump => x,
        Regime::Transition1 => {
            let rp = RateParams::new(model, None)?;
            let theta = if y > thresholds(&rp)?.y1 {
                transition_rate(&rp, y)?.theta.unwrap_or(1.0)
            } else {
                1.0
            };
            x * theta
        }
        Regime::Transition2 | Regime::TruncMaxJump | Regime::T0 => x.min(cap / 2.0),
        other => {
            return Err(Error::Precondition(format!(
                "big-jump splitting needs a jump regime, got {other}"
            )))
        }
    };
    Ok((regime, u))
}

/// [`big_jump_split_with_threshold`] with the threshold from [`jump_threshold`].
pub fn big_jump_split_estimate(
    family: &SemiexpFamily,
    trunc: Option<&TruncationParams>,
    n: u64,
    alpha: f64,
    y: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let (_, u) = jump_threshold(family, trunc, n, alpha, y)?;
    big_jump_split_with_threshold(family, trunc, n, alpha, y, u, samples, seed)
}

/// Stratified estimate of `P(T >= N^alpha y)` with jump threshold `u_star`;
/// `samples` replicates are spent on each stratum.
#[allow(clippy::too_many_arguments)]
pub fn big_jump_split_with_threshold(
    family: &SemiexpFamily,
    trunc: Option<&TruncationParams>,
    n: u64,
    alpha: f64,
    y: f64,
    u_star: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let x = check_common(n, alpha, y, samples)?;
    ensure!(
        family.kind() != FamilyKind::Lattice,
        Precondition,
        "big-jump splitting needs a continuous family"
    );
    ensure!(
        u_star > 0.0 && !u_star.is_nan(),
        Parameter,
        "jump threshold must be positive, got {u_star}"
    );
    let cap = match trunc {
        Some(t) => {
            t.validate()?;
            t.with_n(n).cutoff()
        }
        None => f64::INFINITY,
    };
    let u = u_star.min(cap);
    let nf = n as f64;
    let mut diag = Diagnostics {
        jump_threshold: Some(u),
        ..Default::default()
    };
    let finish = |log_prob: f64, std_err: f64, used: u64, diag: Diagnostics| Estimate {
        result: EstimateResult {
            n,
            y,
            log_prob,
            std_err,
            samples: samples * used.max(1),
            estimator: Estimator::BigJumpSplit,
            seed,
        },
        diagnostics: diag,
    };
    if x >= nf * cap {
        diag.notes.push("threshold not reachable below the cap".into());
        return Ok(finish(f64::NEG_INFINITY, 0.0, 0, diag));
    }

    let log_norm = if cap.is_finite() { family.log_cdf(cap) } else { 0.0 };
    let log_below = family.log_cdf(u);
    let log_pu = family.log_prob_between(u, cap) - log_norm;
    let log_1mpu = log_below - log_norm;
    let small = BoundedSampler::new(family, u)?;
    let log_big = family.log_prob_between(u, cap);
    let max_m = if log_pu == f64::NEG_INFINITY {
        0
    } else {
        n.min(MAX_STRATA - 1)
    };

    let mut contributions: Vec<(f64, f64)> = Vec::new();
    let mut log_total = f64::NEG_INFINITY;
    let mut used = 0;
    let mut stopped_at = None;
    for m in 0..=max_m {
        let lw = log_binomial_pmf(n, m, log_pu, log_1mpu);
        if m > 0 && lw < STRATUM_REL_CUTOFF.ln() + log_total {
            stopped_at = Some(m);
            break;
        }
        let acc = run_batches(
            seed,
            m as u32,
            samples,
            |rng, len| {
                let mut acc = LogMoments::default();
                for _ in 0..len {
                    acc.push(stratum_draw(family, &small, n, m, x, u, cap, log_below, log_big, rng));
                }
                acc
            },
            LogMoments::merge,
        );
        let (lp, se) = acc.log_mean();
        used += 1;
        diag.strata.push((m, lw, lp));
        if lp == f64::NEG_INFINITY {
            // Nothing hit: bound the stratum by the rule of three.
            diag.widened = true;
            let bound = lw + (3.0 / samples as f64).ln();
            contributions.push((f64::NEG_INFINITY, bound));
        } else {
            let lc = lw + lp;
            log_total = log_sum_exp([log_total, lc]);
            contributions.push((lc, if se.is_finite() { lc + se.ln() } else { f64::INFINITY }));
        }
        if m == max_m && m < n {
            stopped_at = Some(m + 1);
        }
    }
    diag.bias_bound = Some(match stopped_at {
        Some(m) => binomial_tail(n, m, log_pu, log_1mpu).exp(),
        None => 0.0,
    });
    if log_total == f64::NEG_INFINITY {
        return Ok(finish(f64::NEG_INFINITY, f64::INFINITY, used, diag));
    }
    // Relative standard error from the absolute per-stratum errors.
    let log_var = log_sum_exp(contributions.iter().map(|&(_, ls)| 2.0 * ls));
    let std_err = (0.5 * log_var - log_total).exp();
    Ok(finish(log_total.min(0.0), std_err, used, diag))
}

/// Log of one conditional-probability sample in stratum `m`.
#[allow(clippy::too_many_arguments)]
fn stratum_draw<R: Rng + ?Sized>(
    family: &SemiexpFamily,
    small: &BoundedSampler<'_>,
    n: u64,
    m: u64,
    x: f64,
    u: f64,
    cap: f64,
    log_below: f64,
    log_big: f64,
    rng: &mut R,
) -> f64 {
    if m == 0 {
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        for _ in 1..n {
            let v = small.draw(rng);
            sum += v;
            max = max.max(v);
        }
        let lo = max.max(x - sum);
        if lo >= u {
            return f64::NEG_INFINITY;
        }
        (n as f64).ln() + family.log_prob_between(lo, u) - log_below
    } else {
        let mut sum = 0.0;
        for _ in 0..(n - m) {
            sum += small.draw(rng);
        }
        for _ in 1..m {
            sum += family
                .draw_between(u, cap, rng)
                .expect("stratum bounds validated by the caller");
        }
        let lo = u.max(x - sum);
        if lo >= cap {
            return f64::NEG_INFINITY;
        }
        family.log_prob_between(lo, cap) - log_big
    }
}

/// `ln P(Bin(n, p) >= m)`.
fn binomial_tail(n: u64, m: u64, log_p: f64, log_1mp: f64) -> f64 {
    let mut terms = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for j in m..=n {
        let t = log_binomial_pmf(n, j, log_p, log_1mp);
        best = best.max(t);
        terms.push(t);
        if t < best - 50.0 {
            break;
        }
    }
    log_sum_exp(terms)
}
