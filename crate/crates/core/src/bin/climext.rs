use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use climext::data_model::{EnsembleId, Scenario, Variable, ZoneId};
use climext::error::{Error, ErrorKind};
use climext::gevr::ReturnSpec;
use climext::mcmc::{ChainConfig, ModelKind, ProposalScaling};
use climext::pipeline::{self, AggregateStatistic, DeltaMMode, DeltaRequest, RunReport};
use climext::synoptic::FitMethod;
use climext::trend::{ChangePeriod, Window};

/// Non-stationary extremes and means for climate-model ensembles.
#[derive(Debug, Parser)]
#[command(name = "climext", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Retained MCMC draws.
    #[arg(long, global = true, default_value_t = 10_000)]
    iterations: usize,
    /// Burn-in iterations, including the fixed-proposal phase.
    #[arg(long, global = true, default_value_t = 5000)]
    burnin: usize,
    /// Iterations with the fixed random-walk proposal.
    #[arg(long, global = true, default_value_t = 2000)]
    adapt_start: usize,
    /// Return period in years.
    #[arg(long, global = true, default_value_t = 100.0)]
    return_period: f64,
    /// First year of the trend window [default: 2015].
    #[arg(long, global = true)]
    base_year: Option<i32>,
    /// Years in the trend window [default: 86].
    #[arg(long, global = true)]
    span: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Use the undivided proposal scalings 2.38²Σ and 0.1²/4·I.
    #[arg(long, global = true)]
    literal_proposal: bool,
    /// Mean-change functional for `delta --kind m`.
    #[arg(long, global = true, value_enum, default_value_t = MMode::Parametric)]
    delta_m_mode: MMode,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    error_json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MMode {
    Parametric,
    Predictive,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Stat {
    Max,
    Min,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Gevr,
    Nhgr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Q,
    M,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Ml,
    Reml,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile zonal or global annual series from a long-format grid CSV.
    Aggregate {
        grid: PathBuf,
        #[arg(long)]
        gcm: String,
        #[arg(long)]
        variable: Variable,
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        ensemble: EnsembleId,
        #[arg(long, value_enum)]
        statistic: Stat,
        /// Zone codes (GL AN TS TR TN AR); all six when omitted.
        #[arg(long, value_delimiter = ',')]
        zones: Vec<ZoneId>,
        /// Ignore missing cells instead of failing.
        #[arg(long)]
        skip_missing: bool,
        /// Weight zonal means by cos(latitude).
        #[arg(long)]
        cos_latitude: bool,
        /// Apply a centred moving median with this half-width.
        #[arg(long)]
        median_half_window: Option<usize>,
    },
    /// Fit GEVR or NHGR posteriors to annual series files.
    Fit {
        #[arg(required = true)]
        series: Vec<PathBuf>,
        #[arg(long, value_enum)]
        model: Model,
        /// Fail if any input fails (by default only if all do).
        #[arg(long)]
        strict: bool,
    },
    /// Evaluate change functionals over posterior chains.
    Delta {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        strict: bool,
    },
    /// Pool change draws into expected-change and box-whisker tables.
    Summarize {
        #[arg(required = true)]
        deltas: Vec<PathBuf>,
    },
    /// Fit the mixed-effects model to change draws.
    Lmm {
        #[arg(required = true)]
        deltas: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Ml)]
        method: Method,
    },
    /// Generate synthetic data from a JSON spec.
    Simulate { spec: PathBuf },
    /// Run a simulate-fit coverage experiment from a JSON spec.
    Verify {
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        datasets: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
}

impl Common {
    fn chain(&self) -> ChainConfig {
        ChainConfig {
            adapt_start: self.adapt_start,
            burn_in: self.burnin,
            retained: self.iterations,
            seed: self.seed,
            scaling: if self.literal_proposal {
                ProposalScaling::Literal
            } else {
                ProposalScaling::DimensionScaled
            },
            ..ChainConfig::default()
        }
    }

    fn window(&self) -> Result<Option<Window>, Error> {
        if self.base_year.is_none() && self.span.is_none() {
            return Ok(None);
        }
        let d = Window::default();
        let span = self.span.unwrap_or(d.span);
        if span < 2 {
            return Err(Error::InvalidArgument(format!("span must be at least 2, got {span}")));
        }
        Ok(Some(Window::new(self.base_year.unwrap_or(d.base_year), span)))
    }
}

fn run(cli: Cli) -> Result<RunReport, Error> {
    let c = &cli.common;
    let out = &c.out;
    match cli.command {
        Command::Aggregate {
            grid,
            gcm,
            variable,
            scenario,
            ensemble,
            statistic,
            zones,
            skip_missing,
            cos_latitude,
            median_half_window,
        } => {
            let params = pipeline::AggregateParams {
                grid,
                gcm,
                variable,
                scenario,
                ensemble,
                statistic: match statistic {
                    Stat::Max => AggregateStatistic::Max,
                    Stat::Min => AggregateStatistic::Min,
                    Stat::Mean => AggregateStatistic::Mean,
                },
                zones: if zones.is_empty() { ZoneId::ALL.to_vec() } else { zones },
                skip_missing,
                cos_latitude,
                median_half_window,
            };
            pipeline::cmd_aggregate(&params, out)
        }
        Command::Fit { series, model, strict } => {
            let params = pipeline::FitParams {
                inputs: series,
                model: match model {
                    Model::Gevr => ModelKind::Gevr,
                    Model::Nhgr => ModelKind::Nhgr,
                },
                window: c.window()?.unwrap_or_default(),
                chain: c.chain(),
                jobs: c.jobs,
            };
            pipeline::cmd_fit(&params, out)?.into_result(strict)
        }
        Command::Delta { chains, kind, strict } => {
            let params = pipeline::DeltaParams {
                chains,
                kind: match kind {
                    Kind::Q => DeltaRequest::Q,
                    Kind::M => DeltaRequest::M,
                },
                m_mode: match c.delta_m_mode {
                    MMode::Parametric => DeltaMMode::Parametric,
                    MMode::Predictive => DeltaMMode::Predictive,
                    MMode::Both => DeltaMMode::Both,
                },
                return_spec: ReturnSpec::new(c.return_period)?,
                period: ChangePeriod::default(),
                window: c.window()?,
                seed: c.seed,
                jobs: c.jobs,
            };
            pipeline::cmd_delta(&params, out)?.into_result(strict)
        }
        Command::Summarize { deltas } => pipeline::cmd_summarize(&pipeline::SummarizeParams { deltas }, out),
        Command::Lmm { deltas, method } => {
            let method = match method {
                Method::Ml => FitMethod::Ml,
                Method::Reml => FitMethod::Reml,
            };
            pipeline::cmd_lmm(&pipeline::LmmParams { deltas, method }, out)
        }
        Command::Simulate { spec } => pipeline::cmd_simulate(&spec, out),
        Command::Verify { spec, datasets, level } => {
            let params = pipeline::VerifyParams {
                spec,
                chain: c.chain(),
                n_datasets: datasets,
                level,
            };
            pipeline::cmd_verify(&params, out)
        }
    }
}

fn report_error(kind: ErrorKind, message: &str, as_json: bool) {
    if as_json {
        let payload = serde_json::json!({
            "kind": kind.as_str(),
            "exit_code": kind.exit_code(),
            "message": message,
        });
        eprintln!("{payload}");
    } else {
        eprintln!("error: {message}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let as_json = std::env::args().any(|a| a == "--error-json");
            if as_json {
                report_error(ErrorKind::User, &e.to_string(), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(ErrorKind::User.exit_code() as u8);
        }
    };
    let as_json = cli.common.error_json;
    match run(cli) {
        Ok(report) => {
            for (input, e) in &report.failures {
                report_error(e.kind(), &format!("{}: {e}", input.display()), as_json);
            }
            for path in &report.outputs {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(e.kind(), &e.to_string(), as_json);
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
