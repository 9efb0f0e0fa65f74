use std::io::Write;

use serde::Serialize;

use semiexp::mc::{
    big_jump_split_estimate, discretize, exact_estimate, naive_estimate, slope_fit, tilted_is_estimate, Estimate,
    Estimator, SlopeFit,
};
use semiexp::model::{SemiexpFamily, TruncationParams};
use semiexp::phase::{classify, Regime};
use semiexp::rates::evaluate;
use semiexp::{LatticeDist, RateParams};

use crate::args::{count, num, EstimateArgs, FamilyArg};
use crate::output::sink;
use crate::{CliError, CliResult};

const MIN_BUDGET: u64 = 1_000;

#[derive(Serialize)]
struct Summary<'a> {
    regime: Option<&'a str>,
    /// `-I(y)`, the value the ratios should approach.
    target: Option<f64>,
    slope_fit: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn schedule(s: &str) -> CliResult<Vec<u64>> {
    let ns = s
        .split(',')
        .map(|t| count("n", t.trim()))
        .collect::<CliResult<Vec<u64>>>()?;
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(format!(
            "--n must be increasing positive integers, got {s}"
        )));
    }
    Ok(ns)
}

fn untruncated_regime(alpha: f64, eps: f64) -> CliResult<Regime> {
    if alpha <= 0.5 {
        return Err(CliError::Usage(format!(
            "domain error: alpha must exceed 1/2, got {alpha}"
        )));
    }
    let b0 = 1.0 / (1.0 + eps);
    Ok(if (alpha - b0).abs() <= 1e-12 * b0 {
        Regime::Transition1
    } else if alpha < b0 {
        Regime::Gaussian
    } else {
        Regime::MaxJump
    })
}

pub fn run(a: &EstimateArgs) -> CliResult<()> {
    let eps = a.model.eps()?;
    let e = Some(eps);
    let (q, gamma) = (a.model.q()?, num("gamma", &a.gamma, e)?);
    let family = match a.family {
        FamilyArg::Symmetric => SemiexpFamily::symmetric(eps, q, gamma)?,
        FamilyArg::OneSided => SemiexpFamily::one_sided_centered(eps, q, gamma)?,
        FamilyArg::TwoPoint => SemiexpFamily::lattice(LatticeDist::two_point(), eps, q, gamma)?,
    };
    let trunc = match (&a.beta, &a.c) {
        (Some(b), Some(c)) => Some((num("beta", b, e)?, num("c", c, e)?)),
        (None, None) => None,
        _ => return Err(CliError::Usage("truncation needs both --beta and --c".into())),
    };
    let ns = schedule(&a.n)?;
    let samples = count("samples", &a.samples)?;
    let y = num("y", &a.y, e)?;
    let alpha = a.alpha.as_deref().map(|s| num("alpha", s, e)).transpose()?;
    let threshold = a.threshold.as_deref().map(|s| num("threshold", s, e)).transpose()?;
    let h = num("h", &a.h, e)?;

    let regime = match (&a.regime, alpha) {
        (Some(r), _) => Some(r.parse::<Regime>()?),
        (None, Some(al)) if a.family != FamilyArg::TwoPoint => Some(match trunc {
            Some((beta, c)) => classify(al, beta, family.params(), c, Some(y))?.regime,
            None => untruncated_regime(al, eps)?,
        }),
        _ => None,
    };
    let estimator: Estimator = match (&a.estimator, regime) {
        (Some(s), _) => s.parse()?,
        (None, _) if a.family == FamilyArg::TwoPoint => Estimator::TiltedIs,
        (None, Some(Regime::Gaussian)) => Estimator::Naive,
        (None, Some(_)) => Estimator::BigJumpSplit,
        (None, None) => return Err(CliError::Usage("give --estimator, --regime or --alpha".into())),
    };
    if estimator != Estimator::ExactLattice && samples < MIN_BUDGET {
        return Err(CliError::Usage(format!(
            "--samples must be at least {MIN_BUDGET}, got {samples}"
        )));
    }
    let lattice = matches!(estimator, Estimator::TiltedIs | Estimator::ExactLattice);
    if !(lattice && threshold.is_some()) && alpha.is_none() {
        return Err(CliError::Usage(format!("--alpha is required for {estimator}")));
    }

    let mut out = sink(a.out.as_deref())?;
    let mut results = Vec::with_capacity(ns.len());
    for &n in &ns {
        let row_trunc = trunc.map(|(beta, c)| TruncationParams::new(beta, c, n)).transpose()?;
        let est: Estimate = if lattice {
            let dist = match (family.lattice_dist(), &row_trunc) {
                (Some(d), _) => d.clone(),
                (None, Some(t)) => discretize(&family, t, n, h)?.dist,
                (None, None) => {
                    return Err(CliError::Usage(format!(
                        "{estimator} needs a lattice family or a truncation (--beta, --c)"
                    )))
                }
            };
            let thr = threshold.unwrap_or_else(|| (n as f64).powf(alpha.unwrap_or(0.0)) * y);
            if estimator == Estimator::ExactLattice {
                exact_estimate(&dist, n, thr)?
            } else {
                tilted_is_estimate(&dist, n, thr, samples, a.seed)?
            }
        } else {
            let al = alpha.expect("checked above");
            if estimator == Estimator::Naive {
                naive_estimate(&family, row_trunc.as_ref(), n, al, y, samples, a.seed)?
            } else {
                big_jump_split_estimate(&family, row_trunc.as_ref(), n, al, y, samples, a.seed)?
            }
        };
        if est.result.is_degenerate() {
            eprintln!("semiexp: warning: no hits at n = {n}; log_prob is null");
        }
        writeln!(out, "{}", est.result.to_json_line()?)?;
        results.push(est.result);
    }

    if !a.no_fit && results.len() >= 3 {
        let speed = regime.and_then(|r| {
            let beta = trunc.map_or(0.0, |t| t.0);
            r.speed_exponent(alpha.unwrap_or(0.0), beta, eps)
        });
        let target = regime.and_then(|r| r.rate_id()).and_then(|id| {
            let p = RateParams::new(*family.params(), trunc.map(|t| t.1)).ok()?;
            evaluate(id, &p, y).ok().map(|ev| -ev.value)
        });
        let (fit, reason) = match speed {
            Some(s) => match slope_fit(&results, s) {
                Ok(f) => (Some(f), None),
                Err(err) => (None, Some(err.to_string())),
            },
            None => (None, Some("no speed exponent for this regime".to_string())),
        };
        let summary = Summary {
            regime: regime.map(|r| r.as_str()),
            target,
            slope_fit: fit,
            reason,
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&summary).map_err(semiexp::Error::from)?
        )?;
    }
    out.flush()?;
    Ok(())
}
