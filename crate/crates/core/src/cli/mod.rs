//! Batch driver. One campaign per invocation; each writes a JSON report
//! (and optionally CSV) atomically into the output directory.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! configuration errors and 3 when a computation fails.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use commands::{Context, Outcome};
use config::{Format, RunConfig};
use report::{write_atomic, ConstantsManifest, Report, MANIFEST_FILE};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "microlocal", version, about = "Escape-function and commutator-estimate verification campaigns")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report format; overrides `output.formats`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    Nontrap {
        #[command(subcommand)]
        action: NontrapAction,
    },
    Escape {
        #[command(subcommand)]
        action: EscapeAction,
    },
    Quantize {
        #[command(subcommand)]
        action: QuantizeAction,
    },
    Commutator {
        #[command(subcommand)]
        action: CommutatorAction,
    },
    Cascade {
        #[command(subcommand)]
        action: CascadeAction,
    },
    Probe {
        #[command(subcommand)]
        action: ProbeAction,
    },
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum FlowAction {
    /// Integrate the configured initial data and write trajectory CSVs.
    Trace,
}

#[derive(Debug, Subcommand)]
pub enum NontrapAction {
    /// Classify sampled null initial data as escaping or trapped.
    Scan,
}

#[derive(Debug, Subcommand)]
pub enum EscapeAction {
    /// Pointwise sign conditions, R0 search and c1, C0 extraction.
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum QuantizeAction {
    /// Identity, Hermiticity, symbol recovery, calculus and Garding checks.
    Check,
}

#[derive(Debug, Subcommand)]
pub enum CommutatorAction {
    /// Operator commutator inequality per rung and the energy inequality.
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum CascadeAction {
    /// Coherent-state norms along the ladder and the chained inequality.
    Run,
}

#[derive(Debug, Subcommand)]
pub enum ProbeAction {
    /// Hermiticity, quadratic form and resolvent checks of the discrete operator.
    Run,
}

#[derive(Debug, Subcommand)]
pub enum ReportAction {
    /// Combine reports into one summary.
    Merge {
        /// Report files to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    /// `group action`, as written on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            Command::Flow { .. } => "flow trace",
            Command::Nontrap { .. } => "nontrap scan",
            Command::Escape { .. } => "escape verify",
            Command::Quantize { .. } => "quantize check",
            Command::Commutator { .. } => "commutator verify",
            Command::Cascade { .. } => "cascade run",
            Command::Probe { .. } => "probe run",
            Command::Report { .. } => "report merge",
        }
    }

    fn file_stem(&self) -> String {
        self.label().replace(' ', "_")
    }
}

/// Result of one invocation.
#[derive(Debug)]
pub struct RunSummary {
    pub exit: i32,
    pub report: Option<PathBuf>,
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_COMPUTATION,
    }
}

fn formats(common: &Common, cfg: Option<&RunConfig>) -> Vec<Format> {
    match common.format {
        Some(FormatArg::Json) => vec![Format::Json],
        Some(FormatArg::Csv) => vec![Format::Csv],
        None => cfg.map(|c| c.output.formats.clone()).unwrap_or_else(|| vec![Format::Json]),
    }
}

fn write_outputs(dir: &std::path::Path, stem: &str, formats: &[Format], report: &Report, outcome: &Outcome) -> Result<PathBuf> {
    for (name, bytes) in &outcome.artifacts {
        write_atomic(dir, name, bytes)?;
    }
    if let Some(m) = &outcome.manifest {
        let path = dir.join(MANIFEST_FILE);
        let mut merged = if path.exists() {
            ConstantsManifest::load(&path)?
        } else {
            ConstantsManifest::empty()
        };
        merged.merge(m);
        let mut bytes = serde_json::to_vec_pretty(&merged)?;
        bytes.push(b'\n');
        write_atomic(dir, MANIFEST_FILE, &bytes)?;
    }
    if formats.contains(&Format::Csv) {
        write_atomic(dir, &format!("{stem}.csv"), &report.to_csv())?;
    }
    // the JSON report is always written; it is what `report merge` reads
    let name = format!("{stem}.json");
    write_atomic(dir, &name, &report.to_json()?)?;
    Ok(dir.join(name))
}

fn execute(cli: &Cli) -> Result<RunSummary> {
    let stem = cli.command.file_stem();
    let label = cli.command.label();
    if let Command::Report {
        action: ReportAction::Merge { inputs },
    } = &cli.command
    {
        let (checks, result) = commands::report_merge(inputs)?;
        let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let report = Report::new(label, cli.common.seed, serde_json::Value::Null, checks, result);
        let outcome = Outcome::default();
        let path = write_outputs(&out, &stem, &formats(&cli.common, None), &report, &outcome)?;
        return Ok(RunSummary {
            exit: if report.pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
            report: Some(path),
        });
    }

    let path = cli.common.config.as_ref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "a run configuration is required".into(),
    })?;
    let cfg = RunConfig::load(path)?;
    let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let ctx = Context {
        formats: formats(&cli.common, Some(&cfg)),
        seed: cli.common.seed,
        out: out.clone(),
        cfg,
    };
    let outcome = match &cli.command {
        Command::Flow { .. } => commands::flow_trace(&ctx),
        Command::Nontrap { .. } => commands::nontrap_scan(&ctx),
        Command::Escape { .. } => commands::escape_verify(&ctx),
        Command::Quantize { .. } => commands::quantize_check(&ctx),
        Command::Commutator { .. } => commands::commutator_verify(&ctx),
        Command::Cascade { .. } => commands::cascade_run(&ctx),
        Command::Probe { .. } => commands::probe_run(&ctx),
        Command::Report { .. } => unreachable!("handled above"),
    }?;
    let config = serde_json::to_value(&ctx.cfg)?;
    let report = Report::new(label, ctx.seed, config, outcome.checks.clone(), outcome.result.clone());
    let path = write_outputs(&out, &stem, &ctx.formats, &report, &outcome)?;
    Ok(RunSummary {
        exit: if report.pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
        report: Some(path),
    })
}

/// Parses `args` (program name first), runs the campaign and returns the
/// exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let pool = match cli.common.jobs {
        Some(0) => {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_COMPUTATION;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(s) => {
            if let Some(p) = &s.report {
                eprintln!("{}: {} ({})", cli.command.label(), if s.exit == EXIT_PASS { "pass" } else { "FAIL" }, p.display());
            }
            s.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
