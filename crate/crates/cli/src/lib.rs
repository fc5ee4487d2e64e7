//! File formats, reporting and command dispatch for the `zipbf` binary.
//!
//! The numerical work lives in [`zipbf_core`]; this crate reads counts files
//! and regression CSVs, picks the computation, and renders JSON or text.

pub mod input;
pub mod report;
pub mod runner;

use std::path::PathBuf;

use zipbf_core::exact::{log_bf_all_zeros, log_bf_gamma, log_bf_jeffreys, log_bf_l1, summarize};
use zipbf_core::numerics::ChunkRunner;
use zipbf_core::rank_deficient::log_bf_rank_deficient_with;
use zipbf_core::regression::log_bf_regression_with;
use zipbf_core::{
    check_integrability, load_regression, Error, IntegrationConfig, PriorSpec, RecommendedPrior, RegPrior,
};

pub use report::{BfReport, CheckReport, RankDeficientBlock};
pub use runner::RayonRunner;

/// Shape parameters of the proper prior used when every count is zero.
pub const ALL_ZEROS_DEFAULT: (f64, f64) = (1.0, 1.0);

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Integrability(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit status: 2 input, 3 integrability refusal, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Integrability(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_)
            | Error::Input(_)
            | Error::AllZeros { .. }
            | Error::DesignRank { .. }
            | Error::Precondition(_) => CliError::Input(msg),
            Error::Integrability(_) => CliError::Integrability(msg),
            Error::Construction(_) | Error::Accuracy { .. } | Error::Numerical(_) => CliError::Numerical(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Test,
    TestReg,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// `None` picks a default: `jeffreys0` for counts, the recommended prior for regressions.
    pub prior: Option<PriorSpec>,
    pub prior_odds: f64,
    pub integration: IntegrationConfig,
    pub input_path: PathBuf,
    pub output_format: OutputFormat,
    pub intercept: bool,
    pub force: bool,
    pub enumerate_selections: bool,
}

impl RunConfig {
    pub fn new(command: Command, input_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            prior: None,
            prior_odds: 1.0,
            integration: IntegrationConfig::default(),
            input_path: input_path.into(),
            output_format: OutputFormat::Json,
            intercept: false,
            force: false,
            enumerate_selections: false,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.prior_odds > 0.0 && self.prior_odds.is_finite()) {
            return Err(CliError::Input(format!("prior odds must be positive, got {}", self.prior_odds)));
        }
        if let Some(p) = &self.prior {
            p.validate()?;
        }
        self.integration.validate()?;
        Ok(())
    }
}

/// A finished command: rendered output plus exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Bf(Box<BfReport>),
    Check(CheckReport),
}

impl Report {
    pub fn render(&self, format: OutputFormat) -> String {
        match (self, format) {
            (Report::Bf(r), OutputFormat::Json) => to_json(r.as_ref()),
            (Report::Check(r), OutputFormat::Json) => to_json(r),
            (Report::Bf(r), OutputFormat::Text) => report::bf_text(r),
            (Report::Check(r), OutputFormat::Text) => report::check_text(r),
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Run a command with the rayon chunk executor and render its output.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    execute_with(cfg, &RayonRunner)
}

pub fn execute_with(cfg: &RunConfig, runner: &dyn ChunkRunner) -> Result<Outcome, CliError> {
    let report = match cfg.command {
        Command::Test => Report::Bf(Box::new(run_test(cfg)?)),
        Command::TestReg => Report::Bf(Box::new(run_test_reg(cfg, runner)?)),
        Command::Check => Report::Check(run_check(cfg)?),
    };
    let exit_code = match &report {
        Report::Check(c) if c.integrability.recommended_prior == RecommendedPrior::None => 3,
        _ => 0,
    };
    Ok(Outcome { output: report.render(cfg.output_format), exit_code })
}

/// Bayes factor for an i.i.d. counts file.
pub fn run_test(cfg: &RunConfig) -> Result<BfReport, CliError> {
    cfg.validate()?;
    let counts = input::parse_counts(&input::read_to_string(&cfg.input_path)?)?;
    let prior = cfg.prior.unwrap_or(PriorSpec::Jeffreys { l: 0 });
    let summary = summarize(&counts)?;
    let mut notices = Vec::new();
    let (bf, prior_label) = if summary.s == 0 {
        let (a, b) = match prior {
            PriorSpec::Gamma { a, b } => (a, b),
            _ => {
                notices.push(format!(
                    "all counts are zero, so an improper prior on the Poisson mean gives an infinite marginal; \
                     using the proper Gamma(a = {}, b = {}) prior instead (override with --prior gamma:a,b)",
                    ALL_ZEROS_DEFAULT.0, ALL_ZEROS_DEFAULT.1
                ));
                ALL_ZEROS_DEFAULT
            }
        };
        (log_bf_all_zeros(summary.n, a, b)?, PriorSpec::Gamma { a, b }.to_string())
    } else {
        let bf = match prior {
            PriorSpec::Jeffreys { l: 0 } => log_bf_jeffreys(&summary)?,
            PriorSpec::Jeffreys { .. } => log_bf_l1(&summary, &cfg.integration)?,
            PriorSpec::Gamma { a, b } => log_bf_gamma(&summary, a, b)?,
            p => {
                return Err(CliError::Input(format!(
                    "prior '{p}' is a regression prior; use jeffreys0, jeffreys1 or gamma:a,b with 'test'"
                )))
            }
        };
        (bf, prior.to_string())
    };
    let bf = bf.with_prior_odds(cfg.prior_odds)?;
    let mut report = BfReport::new("test", prior_label, bf, cfg.integration.seed);
    report.n = Some(summary.n);
    report.k = Some(summary.k);
    report.s = Some(summary.s);
    report.notices = notices;
    Ok(report)
}

fn load(cfg: &RunConfig) -> Result<zipbf_core::RegressionData, CliError> {
    let parsed = input::parse_regression(&input::read_to_string(&cfg.input_path)?, cfg.intercept)?;
    Ok(load_regression(&parsed.counts, parsed.design, parsed.offsets)?)
}

/// Bayes factor for a regression CSV, routed by the integrability check.
pub fn run_test_reg(cfg: &RunConfig, runner: &dyn ChunkRunner) -> Result<BfReport, CliError> {
    cfg.validate()?;
    let data = load(cfg)?;
    let integ = check_integrability(&data);
    let mut notices = Vec::new();

    let requested = match cfg.prior {
        None => match integ.recommended_prior {
            RecommendedPrior::J1 => PriorSpec::RegJeffreys(RegPrior::J1),
            RecommendedPrior::J0 => PriorSpec::RegJeffreys(RegPrior::J0),
            RecommendedPrior::Partial => PriorSpec::PartialJeffreys,
            RecommendedPrior::None => {
                return Err(CliError::Integrability(format!(
                    "no available prior is known to give a finite marginal on this design\n{}",
                    report::verdict_lines(&integ).join("\n")
                )))
            }
        },
        Some(p) if p.is_regression() => p,
        Some(p) => {
            return Err(CliError::Input(format!(
                "prior '{p}' applies to i.i.d. counts; use j0, j1 or partial with 'test-reg'"
            )))
        }
    };
    let chosen = match requested {
        PriorSpec::RegJeffreys(RegPrior::J1) if !integ.j1_condition_ok => {
            notices.push(format!(
                "positive-count rows have rank {} < q = {}, so the j1 prior vanishes; using the partial prior",
                integ.rank_a_plus, integ.q
            ));
            PriorSpec::PartialJeffreys
        }
        p => p,
    };

    let mut forced = false;
    if chosen == PriorSpec::RegJeffreys(RegPrior::J0) && !integ.j0_condition_ok {
        if !cfg.force {
            let alternative = match integ.recommended_prior {
                RecommendedPrior::J1 => ", or use --prior j1",
                RecommendedPrior::Partial => ", or use --prior partial",
                _ => "",
            };
            return Err(CliError::Integrability(format!(
                "refusing the j0 prior: {}\nrerun with --force to compute anyway{alternative}",
                report::verdict_lines(&integ)[1]
            )));
        }
        forced = true;
    }

    let (bf, backend, rank_block) = match chosen {
        PriorSpec::RegJeffreys(j) => {
            let bf = log_bf_regression_with(&data, j, &cfg.integration, forced, runner)?;
            let backend = cfg.integration.resolve_backend(data.q())?;
            (bf, backend, None)
        }
        _ => {
            let res = log_bf_rank_deficient_with(&data, &cfg.integration, cfg.enumerate_selections, runner)?;
            if res.selections.len() > 1 {
                notices.push(
                    "several selections of proper-prior rows were computed; the reported B10 is the first \
                     selection, both means are listed and neither is preferred"
                        .to_string(),
                );
            }
            let block = RankDeficientBlock {
                t: res.t,
                r: res.r,
                deficiency: res.deficiency,
                j_rows: res.j_rows.clone(),
                selections: res.selections.clone(),
                arithmetic_mean_bf: res.arithmetic_mean_bf,
                geometric_mean_bf: res.geometric_mean_bf,
            };
            (res.default_bf(), res.backend, Some(block))
        }
    };
    let bf = bf.with_prior_odds(cfg.prior_odds)?;
    let mut report = BfReport::new("test-reg", chosen.to_string(), bf, cfg.integration.seed);
    report.backend = Some(backend);
    report.integrability = Some(integ);
    report.rank_deficient = rank_block;
    report.notices = notices;
    Ok(report)
}

/// Integrability diagnostics only.
pub fn run_check(cfg: &RunConfig) -> Result<CheckReport, CliError> {
    let data = load(cfg)?;
    Ok(CheckReport::new(check_integrability(&data)))
}
