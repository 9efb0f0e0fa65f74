use serde::{Deserialize, Serialize};

use super::{moments, tail_log_prob, FamilyKind, SemiexpFamily, TruncationParams};
use crate::error::{ensure, Result};

/// Number of log-spaced tail points checked per row.
const TAIL_POINTS: usize = 17;
const H1_BAND: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Every checked tail point lies beyond the truncation level.
    Censored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: u64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Range of `ln P(Y >= y) / (-q y^(1-eps))` over the checked points.
    pub h1_raw_min: f64,
    pub h1_raw_max: f64,
    /// Same ratio after removing the constant sign mass (`ln 1/2` for the
    /// symmetric family). Centering is not corrected.
    pub h1_min: f64,
    pub h1_max: f64,
    /// Tail points at or beyond the cutoff (probability zero).
    pub censored_points: usize,
    /// `E[Y^2] / N^(alpha(1+eps) - 1)`.
    pub h2_ratio: f64,
    /// `E|Y|^(2+gamma) / N^(gamma(1-alpha))`.
    pub h2plus_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub alpha: f64,
    pub rows: Vec<AuditRow>,
    pub h1: Verdict,
    pub h2: Verdict,
    pub h2plus: Verdict,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        [self.h1, self.h2, self.h2plus]
            .iter()
            .all(|v| matches!(v, Verdict::Pass | Verdict::Censored))
    }
}

fn sign_log_mass(family: &SemiexpFamily) -> f64 {
    match family.kind() {
        FamilyKind::Symmetric => -std::f64::consts::LN_2,
        FamilyKind::OneSidedCentered | FamilyKind::Lattice => 0.0,
    }
}

/// Finite-grid diagnostics for the tail and moment assumptions.
///
/// The tail ratio is checked on `[N^(alpha eps), N^alpha]`; the moment
/// ratios should vanish as `N` grows.
pub fn audit_assumptions(
    family: &SemiexpFamily,
    trunc: Option<&TruncationParams>,
    alpha: f64,
    n_grid: &[u64],
) -> Result<AuditReport> {
    ensure!(!n_grid.is_empty(), Precondition, "n_grid must be nonempty");
    ensure!(
        n_grid.windows(2).all(|w| w[0] < w[1]) && n_grid[0] >= 1,
        Precondition,
        "n_grid must be increasing positive integers"
    );
    ensure!(alpha > 0.0 && alpha.is_finite(), Parameter, "alpha must be positive");
    let p = family.params();
    let k = 1.0 - p.epsilon;
    let shift = sign_log_mass(family);

    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let nf = n as f64;
        let row_trunc = trunc.map(|t| t.with_n(n));
        let (y_lo, y_hi) = (nf.powf(alpha * p.epsilon), nf.powf(alpha));
        let mut raw = (f64::INFINITY, f64::NEG_INFINITY);
        let mut corrected = (f64::INFINITY, f64::NEG_INFINITY);
        let mut censored = 0;
        for i in 0..TAIL_POINTS {
            let y = if y_hi > y_lo {
                y_lo * (y_hi / y_lo).powf(i as f64 / (TAIL_POINTS - 1) as f64)
            } else {
                y_lo
            };
            let lp = tail_log_prob(family, row_trunc.as_ref(), y)?;
            if lp == f64::NEG_INFINITY {
                censored += 1;
                continue;
            }
            let scale = -p.q * y.powf(k);
            let r = lp / scale;
            let rc = (lp - shift) / scale;
            raw = (raw.0.min(r), raw.1.max(r));
            corrected = (corrected.0.min(rc), corrected.1.max(rc));
        }
        let m = moments(family, row_trunc.as_ref())?;
        rows.push(AuditRow {
            n,
            y_lo,
            y_hi,
            h1_raw_min: raw.0,
            h1_raw_max: raw.1,
            h1_min: corrected.0,
            h1_max: corrected.1,
            censored_points: censored,
            h2_ratio: m.second_moment() / nf.powf(alpha * (1.0 + p.epsilon) - 1.0),
            h2plus_ratio: m.abs_moment_2_gamma / nf.powf(p.gamma * (1.0 - alpha)),
        });
    }

    let last = rows.last().expect("nonempty");
    let h1 = if last.censored_points == TAIL_POINTS {
        Verdict::Censored
    } else if last.h1_min >= H1_BAND.0 && last.h1_max <= H1_BAND.1 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let h2 = vanishing(rows.iter().map(|r| r.h2_ratio), alpha * (1.0 + p.epsilon) - 1.0);
    let h2plus = vanishing(rows.iter().map(|r| r.h2plus_ratio), p.gamma * (1.0 - alpha));
    Ok(AuditReport {
        alpha,
        rows,
        h1,
        h2,
        h2plus,
    })
}

/// A ratio sequence "vanishes" when it is nonincreasing and ends strictly
/// below where it started; a single row falls back to the sign of the
/// normalizing exponent.
fn vanishing<I: Iterator<Item = f64>>(ratios: I, exponent: f64) -> Verdict {
    let v: Vec<f64> = ratios.collect();
    let ok = if v.len() < 2 {
        exponent > 0.0
    } else {
        v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) && v[v.len() - 1] < v[0]
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}
