use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, Branch, RateEvaluation, RateId, RateParams};
use crate::error::{ensure, Error, Result};
use crate::fmt::sig_digits;
use crate::scalar::Real;

pub const CURVE_HEADER: [&str; 5] = ["y", "value", "theta", "branch", "jumps"];
const DIGITS: usize = 12;

/// Evaluates `id` on the uniform grid `y_min + (y_max - y_min) * i / (n - 1)`.
pub fn emit_curve<T: Real>(
    id: RateId,
    params: &RateParams<T>,
    y_min: T,
    y_max: T,
    n_points: usize,
) -> Result<Vec<RateEvaluation<T>>> {
    params.validate()?;
    ensure!(
        y_min >= T::zero() && y_min < y_max && y_max.is_finite(),
        Precondition,
        "curve range must satisfy 0 <= y_min < y_max, got [{y_min}, {y_max}]"
    );
    ensure!(n_points >= 2, Precondition, "a curve needs at least 2 points");
    if id.needs_c() {
        ensure!(params.c.is_some(), Parameter, "{id} needs the saturation level c");
    }
    let span = y_max - y_min;
    let denom = T::lit((n_points - 1) as f64);
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let y = if i + 1 == n_points {
                y_max
            } else {
                y_min + span * T::lit(i as f64) / denom
            };
            evaluate(id, params, y)
        })
        .collect()
}

/// One CSV row of a curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub y: f64,
    pub value: f64,
    pub theta: Option<f64>,
    pub branch: Branch,
    pub jumps: Option<u64>,
}

impl<T: Real> From<&RateEvaluation<T>> for CurveRow {
    fn from(e: &RateEvaluation<T>) -> Self {
        Self {
            y: e.y.to_f64_lossy(),
            value: e.value.to_f64_lossy(),
            theta: e.theta.map(Real::to_f64_lossy),
            branch: e.branch,
            jumps: e.jumps,
        }
    }
}

/// Writes `y,value,theta,branch,jumps` with 12 significant digits; absent
/// `theta`/`jumps` are empty fields.
pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in rows {
        w.write_record([
            sig_digits(r.y, DIGITS),
            sig_digits(r.value, DIGITS),
            r.theta.map(|t| sig_digits(t, DIGITS)).unwrap_or_default(),
            r.branch.as_str().to_string(),
            r.jumps.map(|j| j.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    ensure!(
        header.iter().eq(CURVE_HEADER.iter().copied()),
        Serialization,
        "unexpected curve header {:?}",
        header
    );
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Serialization(format!("bad number {s:?}: {e}")))
    };
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            ensure!(rec.len() == 5, Serialization, "curve rows have 5 fields");
            Ok(CurveRow {
                y: num(&rec[0])?,
                value: num(&rec[1])?,
                theta: if rec[2].is_empty() { None } else { Some(num(&rec[2])?) },
                branch: rec[3].parse()?,
                jumps: if rec[4].is_empty() {
                    None
                } else {
                    Some(
                        rec[4]
                            .parse()
                            .map_err(|e| Error::Serialization(format!("bad jump count: {e}")))?,
                    )
                },
            })
        })
        .collect()
}
