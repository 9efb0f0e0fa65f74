use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::lattice::{neumaier_sum, LatticeDist};
use crate::model::{FamilyKind, SemiexpFamily, TruncationParams};

const LOWER_CLIP: f64 = 1e-12;
const MIN_POINTS: usize = 16;
const MAX_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub dist: LatticeDist,
    /// Bound on the Kolmogorov distance between the lattice law and the
    /// truncated law: twice the largest cell mass plus the folded mass.
    pub bound: f64,
    /// Mass below the first cell, folded into it.
    pub folded_mass: f64,
    /// Offset change that re-centres the lattice at zero.
    pub shift: f64,
}

impl Discretization {
    /// The lattice as a family carrying the original tail constants.
    pub fn family(&self, source: &SemiexpFamily) -> Result<SemiexpFamily> {
        let p = source.params();
        SemiexpFamily::lattice(self.dist.clone(), p.epsilon, p.q, p.gamma)
    }
}

/// Point `L` with `P(Y < L) = target` (in log form), found by bracketing on the
/// negative axis and bisection.
fn lower_quantile(family: &SemiexpFamily, log_target: f64) -> f64 {
    if family.support_min().is_finite() {
        return family.support_min();
    }
    let mut hi = 0.0;
    let mut lo = -1.0;
    while family.log_cdf(lo) > log_target {
        hi = lo;
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if family.log_cdf(mid) > log_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Lattice approximation of `Y | Y < N^beta c` on cells `[k h, (k+1) h)`.
///
/// Cell masses are exact differences of the closed-form CDF. The lower tail
/// below the `1e-12` quantile is folded into the first cell, and the lattice
/// is shifted so that its mean is zero.
pub fn discretize(family: &SemiexpFamily, trunc: &TruncationParams, n: u64, h: f64) -> Result<Discretization> {
    ensure!(h > 0.0 && h.is_finite(), Parameter, "step must be positive, got {h}");
    ensure!(n >= 1, Parameter, "N must be at least 1");
    ensure!(
        family.kind() != FamilyKind::Lattice,
        Parameter,
        "discretize needs a continuous family"
    );
    trunc.validate()?;
    let cap = trunc.with_n(n).cutoff();
    let log_norm = family.log_cdf(cap);
    ensure!(log_norm.is_finite(), Parameter, "the truncation removes all mass");
    let clip = lower_quantile(family, LOWER_CLIP.ln() + log_norm);
    ensure!(clip < cap, Parameter, "truncation level {cap} is below the support");
    let k_lo = (clip / h).floor() as i64;
    let k_hi = (cap / h).ceil() as i64 - 1;
    let count = (k_hi - k_lo + 1).max(0) as usize;
    ensure!(
        count >= MIN_POINTS,
        Parameter,
        "step {h} is too coarse: {count} support points, at least {MIN_POINTS} needed"
    );
    ensure!(count <= MAX_POINTS, Resource, "step {h} gives {count} support points");
    let edge = |k: i64| (k as f64 * h).min(cap);
    let mut masses: Vec<f64> = (k_lo..=k_hi)
        .map(|k| {
            let lo = if k == k_lo { f64::NEG_INFINITY } else { edge(k) };
            (family.log_prob_between(lo, edge(k + 1)) - log_norm).exp()
        })
        .collect();
    let folded_mass = (family.log_cdf(edge(k_lo)) - log_norm).exp();
    let total = neumaier_sum(masses.iter().copied());
    for m in &mut masses {
        *m /= total;
    }
    let raw = LatticeDist::new(h, k_lo as f64 * h, masses)?;
    let shift = -raw.mean();
    let max_cell = raw.masses().iter().copied().fold(0.0, f64::max);
    let dist = LatticeDist::new(h, raw.offset() + shift, raw.masses().to_vec())?;
    Ok(Discretization {
        dist,
        bound: 2.0 * max_cell + folded_mass,
        folded_mass,
        shift,
    })
}
