//! Brute-force minimization used to verify the closed forms.
//!
//! Continuous infima are found by a uniform scan followed by golden-section
//! refinement around every discrete local minimum of the scan. Jump counts
//! are searched exhaustively, with the big jump constrained to the
//! saturation level, so this path shares no algebra with the closed forms.

use super::{transition_objective, RateId, RateParams};
use crate::error::{ensure, Error, Result};
use crate::scalar::Real;

const GOLDEN_WIDTH: f64 = 1e-12;
const GOLDEN_MAX_ITER: usize = 200;

fn golden<T: Real, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> T {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let tol = T::tolerance(GOLDEN_WIDTH);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(a)).min(f(b))
}

/// Minimum of `f` over `[a, b]`.
pub(crate) fn grid_min<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, resolution: usize) -> T {
    if b <= a {
        return f(a);
    }
    let n = resolution.max(3);
    let denom = T::lit((n - 1) as f64);
    let xs: Vec<T> = (0..n).map(|i| a + (b - a) * T::lit(i as f64) / denom).collect();
    let fs: Vec<T> = xs.iter().map(|&x| f(x)).collect();
    let mut best = fs.iter().copied().fold(T::infinity(), T::min);
    for i in 0..n {
        let left = if i == 0 { T::infinity() } else { fs[i - 1] };
        let right = if i + 1 == n { T::infinity() } else { fs[i + 1] };
        if fs[i] <= left && fs[i] <= right {
            let lo = xs[i.saturating_sub(1)];
            let hi = xs[(i + 1).min(n - 1)];
            best = best.min(golden(&f, lo, hi));
        }
    }
    best
}

/// Brute-force value of an infimum-defined rate at `y`.
pub fn rate_oracle_grid<T: Real>(id: RateId, params: &RateParams<T>, y: T, resolution: usize) -> Result<T> {
    params.validate()?;
    ensure!(
        y >= T::zero() && y.is_finite(),
        Domain,
        "oracle argument must be finite and >= 0"
    );
    ensure!(resolution >= 2, Parameter, "grid resolution must be at least 2");
    if y == T::zero() {
        return Ok(T::zero());
    }
    let one = T::one();
    let q = params.model.q;
    let e = params.model.epsilon;
    let k = one - e;
    let two_s2 = T::lit(2.0) * params.model.sigma2;
    match id {
        RateId::Transition => Ok(grid_min(
            |t| transition_objective(params, y, t),
            T::zero(),
            one,
            resolution,
        )),
        RateId::Transition3 => {
            let c = params.c.ok_or_else(|| Error::Parameter("transition3 needs c".into()))?;
            let slope = q * y * c.powf(-e);
            Ok(grid_min(
                |t| slope * (one - t) + t * t * y * y / two_s2,
                T::zero(),
                one,
                resolution,
            ))
        }
        RateId::Transition2 => {
            let c = params.c.ok_or_else(|| Error::Parameter("transition2 needs c".into()))?;
            let per_jump = q * c.powf(k);
            let kmax = (y / c).ceil().to_u64().unwrap_or(0) + 1;
            let mut best = T::infinity();
            for j in 0..=kmax {
                let jf = T::lit(j as f64);
                let rest = y - jf * c;
                // one free summand cannot exceed the saturation level
                if rest > c {
                    continue;
                }
                let cost = jf * per_jump + q * rest.max(T::zero()).powf(k);
                best = best.min(cost);
            }
            Ok(best)
        }
        RateId::T0 => {
            let c = params.c.ok_or_else(|| Error::Parameter("t0 needs c".into()))?;
            let per_jump = q * c.powf(k);
            let kmax = (y / c).ceil().to_u64().unwrap_or(0) + 1;
            let mut best = T::infinity();
            for j in 0..=kmax {
                let jf = T::lit(j as f64);
                let base = jf * per_jump;
                if base >= best {
                    break;
                }
                let rest = y - jf * c;
                let inner = if rest <= T::zero() {
                    T::zero()
                } else {
                    let cap = (c / rest).min(one);
                    grid_min(|t| transition_objective(params, rest, t), T::zero(), cap, resolution)
                };
                best = best.min(base + inner);
            }
            Ok(best)
        }
        other => Err(Error::Parameter(format!(
            "no oracle for {other}: only transition, transition2, transition3 and t0 are infimum-defined"
        ))),
    }
}
