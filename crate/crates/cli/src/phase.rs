use std::io::Write;

use semiexp::phase::{classify, diagram_grid};
use semiexp::ModelParams;

use crate::args::{count, num, PhaseArgs};
use crate::output::sink;
use crate::{CliError, CliResult};

pub fn run(a: &PhaseArgs) -> CliResult<()> {
    let eps = a.model.eps()?;
    let e = Some(eps);
    let model = ModelParams::new(eps, a.model.q()?, num("sigma2", &a.sigma2, e)?, 1.0)?;
    let c = num("c", &a.c, e)?;
    let mut out = sink(a.out.as_deref())?;
    if a.grid {
        let grid = diagram_grid(
            &model,
            c,
            (num("alpha-min", &a.alpha_min, e)?, num("alpha-max", &a.alpha_max, e)?),
            (num("beta-min", &a.beta_min, e)?, num("beta-max", &a.beta_max, e)?),
            count("resolution", &a.resolution)? as usize,
        )?;
        grid.write_csv(&mut out)?;
        if let Some(path) = &a.boundaries {
            let mut b = sink(Some(path))?;
            writeln!(b, "{}", grid.boundaries_json()?)?;
            b.flush()?;
        }
    } else {
        let need = |name: &str, v: &Option<String>| {
            v.as_deref()
                .ok_or_else(|| CliError::Usage(format!("--{name} is required without --grid")))
                .and_then(|s| num(name, s, e))
        };
        let alpha = need("alpha", &a.alpha)?;
        let beta = need("beta", &a.beta)?;
        let y = a.y.as_deref().map(|s| num("y", s, e)).transpose()?;
        let info = classify(alpha, beta, &model, c, y)?;
        if a.json {
            writeln!(out, "{}", serde_json::to_string(&info).map_err(semiexp::Error::from)?)?;
        } else {
            writeln!(out, "{info}")?;
        }
    }
    out.flush()?;
    Ok(())
}
