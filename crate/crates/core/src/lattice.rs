//! Finite distributions supported on an arithmetic grid `offset + j * step`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Probability masses on the points `offset + j * step`, `j = 0..masses.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRepr", into = "LatticeRepr")]
pub struct LatticeDist {
    step: f64,
    offset: f64,
    masses: Vec<f64>,
    mean: f64,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LatticeRepr {
    step: f64,
    offset: f64,
    masses: Vec<f64>,
}

impl TryFrom<LatticeRepr> for LatticeDist {
    type Error = crate::Error;
    fn try_from(r: LatticeRepr) -> Result<Self> {
        LatticeDist::new(r.step, r.offset, r.masses)
    }
}

impl From<LatticeDist> for LatticeRepr {
    fn from(d: LatticeDist) -> Self {
        LatticeRepr {
            step: d.step,
            offset: d.offset,
            masses: d.masses,
        }
    }
}

pub(crate) const MASS_TOL: f64 = 1e-12;

impl LatticeDist {
    pub fn new(step: f64, offset: f64, masses: Vec<f64>) -> Result<Self> {
        ensure!(
            step > 0.0 && step.is_finite(),
            Parameter,
            "lattice step must be positive, got {step}"
        );
        ensure!(offset.is_finite(), Parameter, "lattice offset must be finite");
        ensure!(!masses.is_empty(), Parameter, "lattice needs at least one point");
        ensure!(
            masses.iter().all(|&m| m >= 0.0 && m.is_finite()),
            Parameter,
            "lattice masses must be nonnegative"
        );
        let total = neumaier_sum(masses.iter().copied());
        ensure!(
            (total - 1.0).abs() <= MASS_TOL,
            Parameter,
            "lattice masses sum to {total}, expected 1"
        );
        let mean = neumaier_sum(masses.iter().enumerate().map(|(j, &m)| m * (offset + j as f64 * step)));
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|&m| {
                acc += m;
                acc
            })
            .collect();
        Ok(Self {
            step,
            offset,
            masses,
            mean,
            cumulative,
        })
    }

    /// Symmetric two-point law on `{-1, +1}`.
    pub fn two_point() -> Self {
        Self::new(2.0, -1.0, vec![0.5, 0.5]).expect("valid two-point law")
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        self.offset + j as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.masses.iter().enumerate().map(|(j, &m)| (self.point(j), m))
    }

    /// Largest support point carrying positive mass.
    pub fn max_point(&self) -> f64 {
        let j = self.masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        self.point(j)
    }

    /// Smallest support point carrying positive mass.
    pub fn min_point(&self) -> f64 {
        let j = self.masses.iter().position(|&m| m > 0.0).unwrap_or(0);
        self.point(j)
    }

    pub fn variance(&self) -> f64 {
        neumaier_sum(self.points().map(|(x, m)| m * (x - self.mean).powi(2)))
    }

    pub fn moment_abs(&self, p: f64) -> f64 {
        neumaier_sum(self.points().map(|(x, m)| m * x.abs().powf(p)))
    }

    /// Tolerance used when comparing a threshold with grid points.
    #[inline]
    pub(crate) fn grid_tol(&self) -> f64 {
        self.step * 1e-9
    }

    /// `P(X >= t)`, treating points within `1e-9 * step` of `t` as equal to it.
    pub fn sf(&self, t: f64) -> f64 {
        let tol = self.grid_tol();
        neumaier_sum(self.points().filter(|&(x, _)| x >= t - tol).map(|(_, m)| m))
    }

    /// `P(X < t)`.
    pub fn cdf_below(&self, t: f64) -> f64 {
        let tol = self.grid_tol();
        neumaier_sum(self.points().filter(|&(x, _)| x < t - tol).map(|(_, m)| m))
    }

    /// Inverse-CDF draw of a support index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let last = self.cumulative.len() - 1;
        let idx = self.cumulative.partition_point(|&c| c <= u * self.cumulative[last]);
        idx.min(last)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.point(self.sample_index(rng))
    }
}

/// Compensated summation (Neumaier variant of Kahan).
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_masses() {
        assert!(LatticeDist::new(1.0, 0.0, vec![0.5, 0.4]).is_err());
        assert!(LatticeDist::new(1.0, 0.0, vec![1.5, -0.5]).is_err());
        assert!(LatticeDist::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(LatticeDist::new(1.0, 0.0, vec![]).is_err());
    }

    #[test]
    fn two_point_moments() {
        let d = LatticeDist::two_point();
        assert_eq!(d.mean(), 0.0);
        assert_eq!(d.variance(), 1.0);
        assert_eq!(d.moment_abs(2.5), 1.0);
        assert_eq!(d.sf(1.0), 0.5);
        assert_eq!(d.sf(-1.0), 1.0);
        assert_eq!(d.sf(1.5), 0.0);
        assert_eq!(d.max_point(), 1.0);
        assert_eq!(d.min_point(), -1.0);
    }

    #[test]
    fn json_round_trip_revalidates() {
        let d = LatticeDist::two_point();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"step":2.0,"offset":-1.0,"masses":[0.5,0.5]}"#);
        let back: LatticeDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<LatticeDist>(r#"{"step":1.0,"offset":0.0,"masses":[0.3]}"#).is_err());
    }

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(xs), 1.0);
    }
}
