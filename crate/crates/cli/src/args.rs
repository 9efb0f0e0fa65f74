use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "semiexp", version, about = "Large deviations of semiexponential sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a rate function on a y-grid.
    Rate(RateArgs),
    /// Classify a scaling regime, or tabulate the regime diagram.
    Phase(PhaseArgs),
    /// Estimate tail log-probabilities for a schedule of row sizes.
    Estimate(EstimateArgs),
    /// Run a verification suite and report per-check residuals.
    Verify(VerifyArgs),
}

/// Numeric flags are expressions such as `1/(1+eps)`, evaluated against the
/// value of `--eps`.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Tail exponent is `1 - eps`.
    #[arg(long, default_value = "0.5", allow_hyphen_values = true)]
    pub eps: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub q: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// gaussian, max_jump, transition, transition2, trunc_max_jump, transition3 or t0.
    #[arg(long)]
    pub id: String,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, default_value = "2", allow_hyphen_values = true)]
    pub sigma2: String,
    /// Saturation level, required by the truncated rates.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub ymin: String,
    #[arg(long, default_value = "8", allow_hyphen_values = true)]
    pub ymax: String,
    #[arg(long, default_value = "400", allow_hyphen_values = true)]
    pub points: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; relative paths resolve against `SEMIEXP_OUTPUT_DIR`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, default_value = "2", allow_hyphen_values = true)]
    pub sigma2: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub c: String,
    /// Resolves the `alpha = beta + 1` line.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Tabulate the regime of every node of an (alpha, beta) grid as CSV.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value = "0.5", allow_hyphen_values = true)]
    pub alpha_min: String,
    #[arg(long, default_value = "2.5", allow_hyphen_values = true)]
    pub alpha_max: String,
    #[arg(long, default_value = "0.01", allow_hyphen_values = true)]
    pub beta_min: String,
    #[arg(long, default_value = "1.5", allow_hyphen_values = true)]
    pub beta_max: String,
    #[arg(long, default_value = "101", allow_hyphen_values = true)]
    pub resolution: String,
    /// With `--grid`, also write the boundary lines as JSON here.
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
    /// Print the classification as JSON instead of text.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FamilyArg {
    Symmetric,
    OneSided,
    /// Symmetric law on `{-1, +1}`.
    TwoPoint,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Symmetric)]
    pub family: FamilyArg,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub gamma: String,
    /// Truncate at `N^beta c` (needs `--c`).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub y: String,
    /// Raw threshold for the lattice estimators, overriding `N^alpha y`.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    /// Comma-separated increasing row sizes.
    #[arg(long, default_value = "100,1000,10000")]
    pub n: String,
    /// Replicates per row size (per stratum for big_jump_split).
    #[arg(long, default_value = "100000", allow_hyphen_values = true)]
    pub samples: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// naive, tilted_is, big_jump_split or exact_lattice; chosen from the
    /// regime when absent.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Regime whose speed normalizes the ratio table; classified when absent.
    #[arg(long)]
    pub regime: Option<String>,
    /// Lattice step for discretizing a truncated continuous family.
    #[arg(long, default_value = "1/64", allow_hyphen_values = true)]
    pub h: String,
    /// Skip the slope_fit summary line.
    #[arg(long)]
    pub no_fit: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Rates,
    Mc,
    Audit,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Row size for the exact-vs-tilted check.
    #[arg(long, default_value = "32", allow_hyphen_values = true)]
    pub n: String,
    #[arg(long, value_enum, default_value_t = FamilyArg::Symmetric)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Evaluates a numeric flag; `eps` is bound to the model's epsilon.
pub fn num(name: &str, expr: &str, eps: Option<f64>) -> CliResult<f64> {
    let mut ctx = meval::Context::new();
    if let Some(e) = eps {
        ctx.var("eps", e).var("epsilon", e);
    }
    let v = meval::eval_str_with_context(expr, ctx).map_err(|e| CliError::Usage(format!("--{name} {expr:?}: {e}")))?;
    if v.is_nan() {
        return Err(CliError::Usage(format!("--{name} {expr:?} is not a number")));
    }
    Ok(v)
}

pub fn count(name: &str, expr: &str) -> CliResult<u64> {
    let v = num(name, expr, None)?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(CliError::Usage(format!(
            "--{name} must be a nonnegative integer, got {expr}"
        )));
    }
    Ok(v as u64)
}

impl ModelFlags {
    pub fn eps(&self) -> CliResult<f64> {
        num("eps", &self.eps, None)
    }

    pub fn q(&self) -> CliResult<f64> {
        num("q", &self.q, Some(self.eps()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_see_eps() {
        let v = num("alpha", "1/(1+eps)", Some(0.5)).unwrap();
        assert_eq!(v, 1.0 / 1.5);
        assert!(num("alpha", "1/(1+eps)", None).is_err());
        assert_eq!(count("n", "1e4").unwrap(), 10_000);
        assert!(count("n", "2.5").is_err());
        assert!(count("n", "-1").is_err());
    }
}
