//! Verification suites. Every check reports its worst residual against a
//! tolerance; MC residuals are in units of the estimate's standard error.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use semiexp::mc::{discretize, exact_tail_convolution, tilted_is_estimate};
use semiexp::model::{audit_assumptions, SemiexpFamily, TruncationParams, Verdict};
use semiexp::rates::{evaluate, rate_oracle_grid, theta_root, thresholds, RateId};
use semiexp::{LatticeDist, RateParams};

use crate::args::{count, FamilyArg, Suite, VerifyArgs};
use crate::output::sink;
use crate::{CliError, CliResult};

const PARAM_SETS: usize = 20;
const Y_POINTS: usize = 200;
const ORACLE_RESOLUTION: usize = 128;
const TILT_SAMPLES: u64 = 100_000;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

fn check(name: &str, residual: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass: residual <= tolerance,
        residual,
        tolerance,
        detail,
    }
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub pass: bool,
    pub worst_residual: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

fn suite(name: &'static str, checks: Vec<Check>) -> SuiteReport {
    SuiteReport {
        suite: name,
        pass: checks.iter().all(|c| c.pass),
        worst_residual: checks.iter().map(|c| c.residual).fold(0.0, f64::max),
        checks,
    }
}

/// `(eps, q, sigma2, c)` drawn from the seed.
fn param_sets(seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PARAM_SETS)
        .map(|_| {
            (
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.3..3.0),
            )
        })
        .collect()
}

fn rates_suite(seed: u64) -> CliResult<SuiteReport> {
    let sets = param_sets(seed);
    let mut oracle: f64 = 0.0;
    let mut root: f64 = 0.0;
    let mut jump: f64 = 0.0;
    for &(eps, q, s2, c) in &sets {
        let p = RateParams::from_constants(q, s2, eps, Some(c))?;
        let th = thresholds(&p)?;
        let c0 = th.c0.expect("c is set");
        let below = RateParams::from_constants(q, s2, eps, Some(0.6 * c0))?;
        let above = RateParams::from_constants(q, s2, eps, Some(1.6 * c0))?;
        let y_max = 3.0
            * [
                th.y1,
                th.y3.unwrap_or(0.0),
                th.y01.unwrap_or(0.0),
                th.y02.unwrap_or(0.0),
                c,
            ]
            .into_iter()
            .fold(0.0, f64::max);
        for i in 0..Y_POINTS {
            let y = y_max * i as f64 / (Y_POINTS - 1) as f64;
            for (id, params) in [
                (RateId::Transition, &p),
                (RateId::Transition2, &p),
                (RateId::Transition3, &p),
                (RateId::T0, &below),
                (RateId::T0, &above),
            ] {
                let d = evaluate(id, params, y)?.value - rate_oracle_grid(id, params, y, ORACLE_RESOLUTION)?;
                oracle = oracle.max(d.abs());
            }
        }
        let free = RateParams::from_constants(q, s2, eps, None)?;
        let y0 = thresholds(&free)?.y0;
        for i in 0..Y_POINTS {
            let y = y0 * (1.0 + 1e-6) * 1e4f64.powf(i as f64 / (Y_POINTS - 1) as f64);
            let t = theta_root(&free, y)?;
            root = root.max(((1.0 - t) * t.powf(eps) - (1.0 - eps) * q * s2 / y.powf(1.0 + eps)).abs());
        }
        let side = |id, p: &RateParams, y: f64| -> CliResult<f64> {
            let d = 1e-12 * y.max(1.0);
            Ok((evaluate(id, p, y + d)?.value - evaluate(id, p, y - d)?.value).abs())
        };
        let tb = thresholds(&below)?;
        let ta = thresholds(&above)?;
        jump = jump.max(side(RateId::Transition, &below, tb.y1)?);
        jump = jump.max(side(RateId::Transition3, &below, tb.y3.unwrap_or(0.0))?);
        for k in 0..4 {
            jump = jump.max(side(RateId::T0, &below, tb.y01.unwrap_or(0.0) + k as f64 * 0.6 * c0)?);
            jump = jump.max(side(RateId::T0, &above, ta.y02.unwrap_or(0.0) + k as f64 * 1.6 * c0)?);
        }
    }
    let per = format!("{PARAM_SETS} parameter sets x {Y_POINTS} y");
    Ok(suite(
        "rates",
        vec![
            check(
                "oracle_equivalence",
                oracle,
                1e-8,
                format!("max |closed form - grid oracle|, {per}"),
            ),
            check(
                "theta_root_residual",
                root,
                1e-10,
                format!("max root equation residual, {per}"),
            ),
            check("continuity", jump, 1e-8, "max jump across branch boundaries".into()),
        ],
    ))
}

/// `ln P(sum of n signs >= t)` by direct summation of binomial terms.
fn two_point_tail(n: u64, t: f64) -> f64 {
    let heads = ((n as f64 + t) / 2.0).ceil().max(0.0) as u64;
    let ln_choose = |k: u64| -> f64 { (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum() };
    let terms: Vec<f64> = (heads..=n)
        .map(|k| ln_choose(k) - n as f64 * std::f64::consts::LN_2)
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn mc_suite(n: u64, seed: u64) -> CliResult<SuiteReport> {
    let mut checks = Vec::new();
    let two = LatticeDist::two_point();
    let t = (n / 2) as f64;
    let exact = exact_tail_convolution(&two, n, t)?;
    let binom = two_point_tail(n, t);
    checks.push(check(
        "two_point_exact",
        (exact - binom).abs(),
        1e-10,
        format!("convolution {exact:.12} vs binomial {binom:.12} at n = {n}, threshold {t}"),
    ));

    let r = tilted_is_estimate(&two, n, t, TILT_SAMPLES, seed)?.result;
    checks.push(check(
        "two_point_tilted",
        (r.log_prob - exact).abs() / r.std_err,
        3.0,
        format!("tilted {:.6} +- {:.2e} vs exact {exact:.6}", r.log_prob, r.std_err),
    ));

    let sym = SemiexpFamily::symmetric(0.5, 1.0, 1.0)?;
    let trunc = TruncationParams::new(1.0, 8.0, 1)?;
    let disc = discretize(&sym, &trunc, 1, 1.0 / 16.0)?;
    let thr = 0.75 * n as f64 * disc.dist.max_point();
    let exact = exact_tail_convolution(&disc.dist, n, thr)?;
    let r = tilted_is_estimate(&disc.dist, n, thr, TILT_SAMPLES, seed)?.result;
    checks.push(check(
        "truncated_lattice_tilted",
        (r.log_prob - exact).abs() / r.std_err,
        3.0,
        format!(
            "tilted {:.6} +- {:.2e} vs exact {exact:.6} ({} lattice points)",
            r.log_prob,
            r.std_err,
            disc.dist.len()
        ),
    ));
    Ok(suite("mc", checks))
}

fn audit_suite(family: FamilyArg) -> CliResult<SuiteReport> {
    let fam = match family {
        FamilyArg::Symmetric => SemiexpFamily::symmetric(0.5, 1.0, 1.0)?,
        FamilyArg::OneSided => SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0)?,
        FamilyArg::TwoPoint => return Err(CliError::Usage("the audit needs a semiexponential family".into())),
    };
    let report = audit_assumptions(&fam, None, 0.8, &[100, 1_000, 10_000])?;
    let last = report.rows.last().expect("nonempty grid");
    let verdict = |v: Verdict| {
        if matches!(v, Verdict::Pass | Verdict::Censored) {
            0.0
        } else {
            1.0
        }
    };
    let h1 = (last.h1_min - 1.0).abs().max((last.h1_max - 1.0).abs());
    Ok(suite(
        "audit",
        vec![
            check(
                "h1_tail_ratio",
                if report.h1 == Verdict::Censored { 0.0 } else { h1 },
                0.1,
                format!("ratio in [{:.6}, {:.6}] at N = {}", last.h1_min, last.h1_max, last.n),
            ),
            check(
                "h2_moment",
                verdict(report.h2),
                0.0,
                format!("E[Y^2] ratio {:.4e} at N = {}", last.h2_ratio, last.n),
            ),
            check(
                "h2plus_moment",
                verdict(report.h2plus),
                0.0,
                format!("E|Y|^(2+gamma) ratio {:.4e} at N = {}", last.h2plus_ratio, last.n),
            ),
        ],
    ))
}

pub fn run(a: &VerifyArgs) -> CliResult<()> {
    let n = count("n", &a.n)?;
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut suites = Vec::new();
    if matches!(a.suite, Suite::Rates | Suite::All) {
        suites.push(rates_suite(a.seed)?);
    }
    if matches!(a.suite, Suite::Mc | Suite::All) {
        suites.push(mc_suite(n, a.seed)?);
    }
    if matches!(a.suite, Suite::Audit | Suite::All) {
        suites.push(audit_suite(a.family)?);
    }
    let report = Report {
        pass: suites.iter().all(|s| s.pass),
        suites,
    };
    let mut out = sink(a.out.as_deref())?;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).map_err(semiexp::Error::from)?
    )?;
    out.flush()?;
    drop(out);
    first_failure(&report)
}

fn first_failure(report: &Report) -> CliResult<()> {
    match report
        .suites
        .iter()
        .flat_map(|s| s.checks.iter().map(move |c| (s.suite, c)))
        .find(|(_, c)| !c.pass)
    {
        Some((s, c)) => Err(CliError::Check(format!(
            "{s}/{} (residual {:.3e} > {:.3e})",
            c.name, c.residual, c.tolerance
        ))),
        None => Ok(()),
    }
}
