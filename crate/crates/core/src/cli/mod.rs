//! Command-line surface. [`run`] parses arguments, runs one subcommand and
//! maps the outcome to an exit status.

mod analyze;
mod commands;
mod report;

pub use report::TABLES as REPORT_TABLES;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{MltError, Result};
use crate::geneassoc::ExpressionMatrix;
use crate::io::{self, LoadedCohort, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const ATLAS_FILE: &str = "atlas.csv";
pub const SC_FILE: &str = "sc.csv";
pub const FC_FILE: &str = "fc.csv";
pub const SCANS_FILE: &str = "scans.jsonl";
pub const EXPRESSION_FILE: &str = "expression.csv";

#[derive(Debug, Parser)]
#[command(name = "mlt", version, about = "Two-layer connectome transport model and analyses")]
pub struct Cli {
    /// Seed for every random choice of the run; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with options for the subcommand; missing keys keep defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core. MLT_THREADS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

/// Where the cohort files live. Individual paths override `--data`.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory with atlas.csv, sc.csv, fc.csv, scans.jsonl, expression.csv.
    #[arg(long, default_value = ".")]
    pub data: PathBuf,
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    #[arg(long)]
    pub sc: Option<PathBuf>,
    #[arg(long)]
    pub fc: Option<PathBuf>,
    #[arg(long)]
    pub scans: Option<PathBuf>,
    #[arg(long)]
    pub expression: Option<PathBuf>,
}

impl DataArgs {
    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.data.join(default))
    }

    pub(crate) fn load(&self, manifest: &mut RunManifest) -> Result<LoadedCohort> {
        let paths = [
            self.path(&self.scans, SCANS_FILE),
            self.path(&self.sc, SC_FILE),
            self.path(&self.fc, FC_FILE),
            self.path(&self.atlas, ATLAS_FILE),
        ];
        for p in &paths {
            manifest.add_input(p)?;
        }
        let [scans, sc, fc, atlas] = paths;
        io::load_cohort(scans, sc, fc, atlas)
    }

    pub(crate) fn load_expression(&self, manifest: &mut RunManifest) -> Result<ExpressionMatrix> {
        let p = self.path(&self.expression, EXPRESSION_FILE);
        manifest.add_input(&p)?;
        io::read_expression(p)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with planted ground truth.
    Synth(commands::SynthArgs),
    /// Train the transport model, with optional cross-validation.
    Fit(commands::FitArgs),
    /// Predict every follow-up scan from its predecessor.
    Predict(commands::PredictArgs),
    /// Per-subject layer contributions under fitted parameters.
    Decompose(commands::DecomposeArgs),
    /// Regional statistics.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCommand),
    /// Bootstrap nonnegative LASSO of a regional map on gene expression.
    Lasso(commands::LassoArgs),
    /// Regional mediation of cognition by the layer contributions.
    Mediate(commands::MediateArgs),
    /// Collect analysis outputs into plot-ready tables.
    Report(report::ReportArgs),
}

/// Settings shared by every subcommand.
pub(crate) struct Ctx {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

impl Ctx {
    /// Defaults overlaid with the keys of `--config`, then the seed override.
    pub(crate) fn options<T: Serialize + DeserializeOwned>(&self, default: T) -> Result<T> {
        let Some(path) = &self.config else {
            return Ok(default);
        };
        let text = std::fs::read_to_string(path).map_err(|e| MltError::io(path, e))?;
        overlay(default, &text, &path.display().to_string())
    }

    pub(crate) fn manifest(&self, command: &str, effective: &impl Serialize, seed: u64) -> Result<RunManifest> {
        let json = serde_json::to_vec(effective)?;
        Ok(RunManifest::new(command, &json, seed))
    }

    pub(crate) fn finish(&self, manifest: &RunManifest) -> Result<()> {
        manifest.write(&self.out)
    }
}

pub(crate) fn overlay<T: Serialize + DeserializeOwned>(default: T, text: &str, source: &str) -> Result<T> {
    let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| MltError::Parse {
        source_name: source.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(MltError::Validation(format!("{source}: config must be a JSON object")));
    };
    let mut base = serde_json::to_value(default)?;
    let obj = base.as_object_mut().expect("options serialize to objects");
    for (k, v) in patch {
        if !obj.contains_key(&k) {
            return Err(MltError::Validation(format!("{source}: unknown config key '{k}'")));
        }
        obj.insert(k, v);
    }
    serde_json::from_value(base).map_err(|e| MltError::Validation(format!("{source}: {e}")))
}

pub(crate) fn pretty(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn thread_count(flag: usize) -> usize {
    match std::env::var("MLT_THREADS").ok().and_then(|s| s.trim().parse().ok()) {
        Some(n) => n,
        None => flag,
    }
}

fn exit_code(e: &MltError) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Parse `argv` (program name first), run it and return the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.threads);
    if threads > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let ctx = Ctx {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
    };
    std::fs::create_dir_all(&ctx.out).map_err(|e| MltError::io(&ctx.out, e))?;
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, &a),
        Command::Fit(a) => commands::fit(&ctx, &a),
        Command::Predict(a) => commands::predict(&ctx, &a),
        Command::Decompose(a) => commands::decompose(&ctx, &a),
        Command::Analyze(a) => analyze::run(&ctx, &a),
        Command::Lasso(a) => commands::lasso(&ctx, &a),
        Command::Mediate(a) => commands::mediate(&ctx, &a),
        Command::Report(a) => report::run(&ctx, &a),
    }
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
