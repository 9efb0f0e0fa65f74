//! Thin wrapper over double-exponential quadrature with a convergence check.

use crate::error::{Error, Result};

/// Integrates `f` over `[a, b]` (finite) to the requested absolute error.
/// Interior kinks must be split by the caller.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let out = quadrature::double_exponential::integrate(&f, a, b, abs_tol);
    if !out.integral.is_finite() || out.error_estimate > abs_tol {
        return Err(Error::Numeric(format!(
            "quadrature on [{a}, {b}] did not converge: estimate {}, error {:e} > {:e} after {} evaluations",
            out.integral, out.error_estimate, abs_tol, out.num_function_evaluations
        )));
    }
    Ok(out.integral)
}

/// Sums `integrate` over consecutive breakpoints, dropping empty pieces.
pub(crate) fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64) -> Result<f64> {
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| integrate(&f, w[0], w[1], abs_tol / pieces))
        .sum()
}
