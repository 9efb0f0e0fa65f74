use serde::{Deserialize, Serialize};

use super::EstimateResult;
use crate::error::{ensure, Result};

const B_MIN: f64 = 1e-3;
const B_MAX: f64 = 4.0;
const B_GRID: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: u64,
    pub log_prob: f64,
    pub std_err: f64,
    /// `log_prob / n^s`.
    pub ratio: f64,
    /// Standard error of `ratio`.
    pub ratio_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub limit_estimate: f64,
    /// Fitted `a` and `b` in `r_n = r_inf + a n^(-b)`.
    pub amplitude: f64,
    pub decay: f64,
    pub speed_exponent: f64,
    /// Rows sorted by `n`.
    pub per_n_ratios: Vec<RatioRow>,
    /// Ratios change direction by more than their noise.
    pub unreliable: bool,
}

/// Least-squares `(r_inf, a, residual)` for fixed `b`.
fn linear_fit(pts: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let k = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|&(n, _)| n.powf(-b)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(pts).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r = my - a * mx;
    let res = xs.iter().zip(pts).map(|(x, p)| (p.1 - r - a * x).powi(2)).sum();
    (r, a, res)
}

/// Extrapolates `log_prob / n^s` to `n -> infinity` by fitting
/// `r_inf + a n^(-b)` (`b > 0`) to the three largest `n`.
pub fn slope_fit(results: &[EstimateResult], speed_exponent: f64) -> Result<SlopeFit> {
    ensure!(
        results.len() >= 3,
        Precondition,
        "slope_fit needs at least 3 results, got {}",
        results.len()
    );
    ensure!(
        speed_exponent.is_finite() && speed_exponent > 0.0,
        Parameter,
        "speed exponent must be positive"
    );
    let mut rows: Vec<&EstimateResult> = results.iter().collect();
    rows.sort_by_key(|r| r.n);
    ensure!(
        rows.windows(2).all(|w| w[0].n < w[1].n),
        Precondition,
        "slope_fit needs distinct n"
    );
    let (y0, est0) = (rows[0].y, rows[0].estimator);
    ensure!(
        rows.iter()
            .all(|r| (r.y - y0).abs() <= 1e-12 * y0.abs().max(1.0) && r.estimator == est0),
        Precondition,
        "slope_fit needs a common y and estimator"
    );
    ensure!(
        rows.iter().all(|r| r.log_prob.is_finite()),
        Precondition,
        "slope_fit needs finite log probabilities"
    );
    let table: Vec<RatioRow> = rows
        .iter()
        .map(|r| {
            let scale = (r.n as f64).powf(speed_exponent);
            RatioRow {
                n: r.n,
                log_prob: r.log_prob,
                std_err: r.std_err,
                ratio: r.log_prob / scale,
                ratio_err: r.std_err / scale,
            }
        })
        .collect();

    let diffs: Vec<(f64, f64)> = table
        .windows(2)
        .map(|w| {
            (
                w[1].ratio - w[0].ratio,
                2.0 * (w[0].ratio_err.powi(2) + w[1].ratio_err.powi(2)).sqrt(),
            )
        })
        .collect();
    let up = diffs.iter().any(|&(d, noise)| d > noise);
    let down = diffs.iter().any(|&(d, noise)| d < -noise);
    let unreliable = up && down;

    let pts: Vec<(f64, f64)> = table[table.len() - 3..].iter().map(|r| (r.n as f64, r.ratio)).collect();
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let (limit, amplitude, decay) = if flat {
        (pts[0].1, 0.0, 1.0)
    } else {
        let objective = |lb: f64| linear_fit(&pts, lb.exp()).2;
        let (lo, hi) = (B_MIN.ln(), B_MAX.ln());
        let grid: Vec<f64> = (0..=B_GRID)
            .map(|i| lo + (hi - lo) * i as f64 / B_GRID as f64)
            .collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .expect("grid");
        let step = (hi - lo) / B_GRID as f64;
        let lb = golden(&objective, (best - step).max(lo), (best + step).min(hi));
        let b = lb.exp();
        let (r, a, _) = linear_fit(&pts, b);
        (r, a, b)
    };
    Ok(SlopeFit {
        limit_estimate: limit,
        amplitude,
        decay,
        speed_exponent,
        per_n_ratios: table,
        unreliable,
    })
}

fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}
