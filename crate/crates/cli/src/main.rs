use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zipbf::{execute, Command, OutputFormat, RunConfig};
use zipbf_core::{Backend, IntegrationConfig, PriorSpec};

/// Objective Bayes factors for zero-inflated Poisson versus Poisson models.
#[derive(Parser)]
#[command(name = "zipbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Bayes factor for i.i.d. counts (one count per line).
    Test(Common),
    /// Bayes factor for a log-linear regression (CSV with count, offset and covariate columns).
    TestReg(Common),
    /// Integrability diagnostics for the regression priors.
    Check(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Quad,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Input file.
    input: PathBuf,
    /// jeffreys0, jeffreys1, gamma:a,b (counts) or j0, j1, partial (regression).
    #[arg(long, value_parser = parse_prior)]
    prior: Option<PriorSpec>,
    /// Prior odds Pr(M1)/Pr(M0).
    #[arg(long, default_value_t = 1.0)]
    prior_odds: f64,
    /// Integration backend; chosen by dimension when omitted.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, default_value_t = 65536)]
    mc_samples: usize,
    #[arg(long, env = "ZIPBF_SEED", default_value_t = 0)]
    seed: u64,
    /// Quadrature half-width in standardized coefficient units.
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
    /// Prepend a column of ones to the design.
    #[arg(long)]
    intercept: bool,
    /// Compute even when the integrability check fails.
    #[arg(long)]
    force: bool,
    /// Compute every admissible selection of proper-prior rows.
    #[arg(long)]
    enumerate_selections: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

fn parse_prior(s: &str) -> Result<PriorSpec, String> {
    s.parse().map_err(|e: zipbf_core::Error| e.to_string())
}

fn config(command: Command, c: Common) -> RunConfig {
    let backend = match c.backend {
        None => Backend::Auto,
        Some(BackendArg::Quad) => Backend::Quadrature,
        Some(BackendArg::Mc) => Backend::ImportanceSampling,
    };
    RunConfig {
        command,
        prior: c.prior,
        prior_odds: c.prior_odds,
        integration: IntegrationConfig::default()
            .with_backend(backend)
            .with_mc_samples(c.mc_samples)
            .with_seed(c.seed)
            .with_radius(c.radius),
        input_path: c.input,
        output_format: match c.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Text => OutputFormat::Text,
        },
        intercept: c.intercept,
        force: c.force,
        enumerate_selections: c.enumerate_selections,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match cli.command {
        Sub::Test(c) => config(Command::Test, c),
        Sub::TestReg(c) => config(Command::TestReg, c),
        Sub::Check(c) => config(Command::Check, c),
    };
    match execute(&cfg) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.output.as_bytes());
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
