//! Regime classification over the `(alpha, beta)` plane.
//!
//! The deviation level is `N^alpha y` and the truncation level `N^beta c`.
//! With `b0 = 1/(1+eps)` the plane splits into Gaussian, maximal-jump and
//! truncated regimes along the lines `alpha = b0`, `alpha = beta`,
//! `alpha = 1 - beta eps` and `alpha = beta + 1`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fmt::sig_digits;
use crate::model::ModelParams;
use crate::rates::RateId;
use crate::scalar::{rel_eq, Real};

const BOUNDARY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Gaussian,
    Transition1,
    MaxJump,
    Transition2,
    TruncMaxJump,
    Transition3,
    T0,
    Trivial,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::Gaussian,
        Regime::Transition1,
        Regime::MaxJump,
        Regime::Transition2,
        Regime::TruncMaxJump,
        Regime::Transition3,
        Regime::T0,
        Regime::Trivial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Gaussian => "gaussian",
            Regime::Transition1 => "transition1",
            Regime::MaxJump => "max_jump",
            Regime::Transition2 => "transition2",
            Regime::TruncMaxJump => "trunc_max_jump",
            Regime::Transition3 => "transition3",
            Regime::T0 => "t0",
            Regime::Trivial => "trivial",
        }
    }

    /// Rate function governing the regime; `None` for the trivial regime.
    pub fn rate_id(&self) -> Option<RateId> {
        match self {
            Regime::Gaussian => Some(RateId::Gaussian),
            Regime::Transition1 => Some(RateId::Transition),
            Regime::MaxJump => Some(RateId::MaxJump),
            Regime::Transition2 => Some(RateId::Transition2),
            Regime::TruncMaxJump => Some(RateId::TruncMaxJump),
            Regime::Transition3 => Some(RateId::Transition3),
            Regime::T0 => Some(RateId::T0),
            Regime::Trivial => None,
        }
    }

    /// Exponent `s` of the speed `N^s`.
    pub fn speed_exponent<T: Real>(&self, alpha: T, beta: T, epsilon: T) -> Option<T> {
        let one = T::one();
        match self {
            Regime::Gaussian => Some(T::lit(2.0) * alpha - one),
            Regime::Transition1 | Regime::T0 => Some((one - epsilon) / (one + epsilon)),
            Regime::MaxJump | Regime::Transition2 => Some(alpha * (one - epsilon)),
            Regime::TruncMaxJump => Some(alpha - beta * epsilon),
            Regime::Transition3 => Some(one - T::lit(2.0) * beta * epsilon),
            Regime::Trivial => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown regime {s:?}")))
    }
}

/// Outcome of [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeInfo<T> {
    pub regime: Regime,
    pub speed_exponent: Option<T>,
    pub rate_id: Option<RateId>,
    /// Set on `alpha = beta + 1` when no `y` was supplied. `regime` then
    /// holds the `y < c` outcome.
    pub y_condition: Option<String>,
}

impl<T: Real> RegimeInfo<T> {
    /// Regime label, `trunc_max_jump|trivial` on the y-dependent boundary.
    pub fn label(&self) -> String {
        match self.y_condition {
            Some(_) => format!("{}|{}", Regime::TruncMaxJump, Regime::Trivial),
            None => self.regime.to_string(),
        }
    }
}

impl<T: Real> fmt::Display for RegimeInfo<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.regime)?;
        if let Some(s) = self.speed_exponent {
            write!(f, ", speed {}", sig_digits(s.to_f64_lossy(), 12))?;
        }
        if let Some(cond) = &self.y_condition {
            write!(f, " ({cond})")?;
        }
        Ok(())
    }
}

pub const Y_CONDITION: &str = "trunc_max_jump if y < c, trivial if y >= c";

pub fn classify<T: Real>(alpha: T, beta: T, model: &ModelParams<T>, c: T, y: Option<T>) -> Result<RegimeInfo<T>> {
    model.validate()?;
    let half = T::lit(0.5);
    ensure!(
        alpha.is_finite() && alpha > half,
        Domain,
        "alpha must exceed 1/2, got {alpha}"
    );
    ensure!(
        beta.is_finite() && beta > T::zero(),
        Parameter,
        "beta must be positive, got {beta}"
    );
    ensure!(c.is_finite() && c > T::zero(), Parameter, "c must be positive, got {c}");
    if let Some(y) = y {
        ensure!(
            y.is_finite() && y >= T::zero(),
            Parameter,
            "y must be finite and >= 0, got {y}"
        );
    }
    let one = T::one();
    let e = model.epsilon;
    let b0 = one / (one + e);
    let on = |boundary: T| rel_eq(alpha, boundary, BOUNDARY_REL_TOL);
    let top = beta + one;

    let mut y_condition = None;
    let regime = if on(top) {
        match y {
            Some(y) if y >= c => Regime::Trivial,
            Some(_) => Regime::TruncMaxJump,
            None => {
                y_condition = Some(Y_CONDITION.to_string());
                Regime::TruncMaxJump
            }
        }
    } else if alpha > top {
        Regime::Trivial
    } else if rel_eq(beta, b0, BOUNDARY_REL_TOL) {
        if on(b0) {
            Regime::T0
        } else if alpha < b0 {
            Regime::Gaussian
        } else {
            Regime::TruncMaxJump
        }
    } else if beta > b0 {
        if on(b0) {
            Regime::Transition1
        } else if on(beta) {
            Regime::Transition2
        } else if alpha < b0 {
            Regime::Gaussian
        } else if alpha < beta {
            Regime::MaxJump
        } else {
            Regime::TruncMaxJump
        }
    } else {
        let g = one - beta * e;
        if on(g) {
            Regime::Transition3
        } else if alpha < g {
            Regime::Gaussian
        } else {
            Regime::TruncMaxJump
        }
    };
    Ok(RegimeInfo {
        regime,
        speed_exponent: regime.speed_exponent(alpha, beta, e),
        rate_id: regime.rate_id(),
        y_condition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub alpha: f64,
    pub beta: f64,
    pub regime: String,
}

/// A boundary line clipped to the plotted rectangle, as `(alpha, beta)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub name: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramGrid {
    pub cells: Vec<DiagramCell>,
    pub boundaries: Vec<Polyline>,
}

fn axis(range: (f64, f64), resolution: usize) -> Vec<f64> {
    let (lo, hi) = range;
    let d = (resolution - 1) as f64;
    (0..resolution)
        .map(|i| {
            if i + 1 == resolution {
                hi
            } else {
                lo + (hi - lo) * i as f64 / d
            }
        })
        .collect()
}

/// Classifies every node of a `resolution x resolution` grid, alpha-major.
/// Nodes with `alpha <= 1/2` are skipped.
pub fn diagram_grid(
    model: &ModelParams<f64>,
    c: f64,
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    resolution: usize,
) -> Result<DiagramGrid> {
    model.validate()?;
    ensure!(resolution >= 2, Precondition, "resolution must be at least 2");
    for (name, (lo, hi)) in [("alpha", alpha_range), ("beta", beta_range)] {
        ensure!(
            lo.is_finite() && hi.is_finite() && lo < hi,
            Precondition,
            "{name} range must be finite with lo < hi, got [{lo}, {hi}]"
        );
    }
    ensure!(beta_range.0 > 0.0, Precondition, "beta range must be positive");
    let alphas = axis(alpha_range, resolution);
    let betas = axis(beta_range, resolution);
    let mut cells = Vec::with_capacity(resolution * resolution);
    for &alpha in &alphas {
        if alpha <= 0.5 {
            continue;
        }
        for &beta in &betas {
            let info = classify(alpha, beta, model, c, None)?;
            cells.push(DiagramCell {
                alpha,
                beta,
                regime: info.label(),
            });
        }
    }
    Ok(DiagramGrid {
        cells,
        boundaries: boundaries(model.epsilon, alpha_range, beta_range, resolution),
    })
}

fn boundaries(e: f64, alpha_range: (f64, f64), beta_range: (f64, f64), resolution: usize) -> Vec<Polyline> {
    let b0 = 1.0 / (1.0 + e);
    let n = resolution.max(2);
    type Line = (&'static str, (f64, f64), Box<dyn Fn(f64) -> f64>);
    let lines: [Line; 4] = [
        ("alpha=1/(1+eps)", (b0, f64::INFINITY), Box::new(move |_| b0)),
        ("alpha=beta", (b0, f64::INFINITY), Box::new(|b| b)),
        ("alpha=1-beta*eps", (0.0, b0), Box::new(move |b| 1.0 - b * e)),
        ("alpha=beta+1", (0.0, f64::INFINITY), Box::new(|b| b + 1.0)),
    ];
    lines
        .into_iter()
        .map(|(name, (bmin, bmax), f)| {
            let lo = beta_range.0.max(bmin);
            let hi = beta_range.1.min(bmax);
            let points = if lo > hi {
                Vec::new()
            } else {
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .map(|b| [f(b), b])
                    .filter(|[a, _]| *a >= alpha_range.0 && *a <= alpha_range.1)
                    .collect()
            };
            Polyline {
                name: name.to_string(),
                points,
            }
        })
        .collect()
}

impl DiagramGrid {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "beta", "regime"])?;
        for cell in &self.cells {
            w.write_record([
                sig_digits(cell.alpha, 12),
                sig_digits(cell.beta, 12),
                cell.regime.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn boundaries_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.boundaries)?)
    }
}
