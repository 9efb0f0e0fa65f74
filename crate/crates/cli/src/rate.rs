use std::io::Write;

use semiexp::rates::{emit_curve, write_curve_csv, CurveRow, RateId};
use semiexp::RateParams;

use crate::args::{count, num, Format, RateArgs};
use crate::output::sink;
use crate::CliResult;

pub fn run(a: &RateArgs) -> CliResult<()> {
    let id: RateId = a.id.parse()?;
    let eps = a.model.eps()?;
    let e = Some(eps);
    let c = a.c.as_deref().map(|s| num("c", s, e)).transpose()?;
    let params = RateParams::from_constants(a.model.q()?, num("sigma2", &a.sigma2, e)?, eps, c)?;
    let points = count("points", &a.points)? as usize;
    let curve = emit_curve(id, &params, num("ymin", &a.ymin, e)?, num("ymax", &a.ymax, e)?, points)?;
    let rows: Vec<CurveRow> = curve.iter().map(CurveRow::from).collect();
    let mut out = sink(a.out.as_deref())?;
    match a.format {
        Format::Csv => write_curve_csv(&rows, &mut out)?,
        Format::Json => {
            for r in &rows {
                writeln!(out, "{}", serde_json::to_string(r).map_err(semiexp::Error::from)?)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
