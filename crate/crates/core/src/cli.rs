//! `qswarm` command line.
//!
//! ```text
//! qswarm run --objective ackley --dim 2 --runs 400 --variant both
//! qswarm run --config ackley2d.json --jobs 8
//! qswarm paper-table --runs 50 --emit-traces
//! ```
//!
//! Every invocation writes into a fresh timestamped directory under the
//! output root (`--out`, else `$QSWARM_OUT`, else `qswarm-out`). Exit status
//! is 0 on success, 2 for an invalid configuration and 1 for any other
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfigFile, VariantChoice};
use crate::experiments::{
    comparison_text, run_batch, write_batch_artifacts, write_comparison_csv, ExperimentError, ReportRow, Timing,
    TABLE_ROWS, TABLE_RUNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qswarm", version, about = "Particle swarm optimization with a quadratic surrogate attractor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration, optionally many seeds and both variants.
    Run(RunArgs),
    /// Run the six benchmark configurations with both variants and report
    /// the comparison table.
    PaperTable(TableArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output root; each invocation creates a timestamped directory in it.
    #[arg(long, env = "QSWARM_OUT", default_value = "qswarm-out")]
    pub out: PathBuf,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Leave wall-clock columns empty, making every artifact a pure function
    /// of the configuration.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file; flags given alongside it take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run j uses seed ^ j.
    #[arg(long)]
    pub seed: Option<u64>,
    /// standard, qs or both.
    #[arg(long)]
    pub variant: Option<String>,
    /// Accepted for symmetry with paper-table; `run` always writes traces.
    #[arg(long)]
    pub emit_traces: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Runs per variant and row.
    #[arg(long, default_value_t = TABLE_RUNS)]
    pub runs: usize,
    /// Base seed; run j uses seed ^ j.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write per-iteration band data for every row.
    #[arg(long)]
    pub emit_traces: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID_CONFIG,
            CliError::Experiment(ExperimentError::InvalidSpec { .. }) => EXIT_INVALID_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

/// Parse `args` (including the program name) and execute, returning the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, &mut stdout.lock()),
        Command::PaperTable(args) => cmd_paper_table(&args, &mut stdout.lock()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Merge the config file (if any) with explicit flags.
fn effective_config(args: &RunArgs) -> Result<RunConfigFile, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => match &args.objective {
            Some(name) => RunConfigFile::new(name.clone()),
            None => return Err(ConfigError::invalid("objective", "is required (use --objective or --config)")),
        },
    };
    if let Some(o) = &args.objective {
        cfg.objective = o.clone();
    }
    if let Some(d) = args.dim {
        if d != cfg.dimension {
            // Bounds from the file no longer fit; use the default box.
            cfg.bounds = None;
        }
        cfg.dimension = d;
    }
    if let Some(p) = args.particles {
        cfg.particles = Some(p);
    }
    if let Some(k) = args.iterations {
        cfg.iterations = k;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(v) = &args.variant {
        cfg.variant = v
            .parse::<VariantChoice>()
            .map_err(|e| ConfigError::invalid("variant", e))?;
    }
    cfg.resolve()
}

fn timing(output: &OutputArgs) -> Timing {
    if output.no_timing {
        Timing::Omit
    } else {
        Timing::Include
    }
}

/// A new directory `<root>/<prefix>-<UTC timestamp>[-N]`.
fn create_output_dir(root: &Path, prefix: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{prefix}-{stamp}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let path = root.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

fn write_comparison(dir: &Path, rows: &[ReportRow], timing: Timing) -> Result<String, CliError> {
    let file = io::BufWriter::new(fs::File::create(dir.join("comparison.csv"))?);
    write_comparison_csv(file, rows, timing)?;
    let text = comparison_text(rows, timing);
    fs::write(dir.join("comparison.txt"), &text)?;
    Ok(text)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.output.jobs == 0 {
        return Err(ConfigError::invalid("jobs", "must be at least 1").into());
    }
    let cfg = effective_config(args)?;
    let spec = cfg.batch_spec(args.output.jobs)?;
    let objective = spec
        .benchmark()
        .map_err(|e| ConfigError::invalid("objective", e))?;
    let result = run_batch(&spec, &objective)?;

    let dir = create_output_dir(&args.output.out, "run")?;
    let timing = timing(&args.output);
    fs::write(dir.join("config.echo.json"), cfg.to_json() + "\n")?;
    write_batch_artifacts(&dir, &result, true, timing)?;

    for v in &result.variants {
        let s = &v.summary;
        writeln!(
            out,
            "{:<8} runs {}  mean {:.4e}  median {:.4e}  IQR [{:.3e}, {:.3e}]",
            v.variant, s.runs, s.finals.mean, s.finals.q50, s.finals.q25, s.finals.q75
        )?;
    }
    if let Some(row) = result.comparison() {
        let rows = [ReportRow {
            row,
            runs: spec.runs,
            check: None,
        }];
        let text = write_comparison(&dir, &rows, timing)?;
        writeln!(out)?;
        write!(out, "{text}")?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn cmd_paper_table(args: &TableArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.output.jobs == 0 {
        return Err(ConfigError::invalid("jobs", "must be at least 1").into());
    }
    if args.runs == 0 {
        return Err(ConfigError::invalid("runs", "must be at least 1").into());
    }
    let dir = create_output_dir(&args.output.out, "paper-table")?;
    let timing = timing(&args.output);
    let mut rows = Vec::with_capacity(TABLE_ROWS.len());
    for table_row in TABLE_ROWS {
        let spec = table_row.spec(args.runs, args.seed, args.output.jobs);
        let objective = spec
            .benchmark()
            .map_err(|e| ConfigError::invalid("objective", e))?;
        let result = run_batch(&spec, &objective)?;

        let row_dir = dir.join(table_row.id());
        let mut echo = RunConfigFile::new(spec.objective.clone());
        echo.dimension = spec.dimension();
        echo.bounds = Some(spec.bounds.clone());
        echo.particles = Some(spec.particles);
        echo.iterations = spec.iterations;
        echo.runs = spec.runs;
        echo.seed = spec.base_seed;
        echo.params = spec.params;
        write_batch_artifacts(&row_dir, &result, args.emit_traces, timing)?;
        fs::write(row_dir.join("config.echo.json"), echo.to_json() + "\n")?;

        rows.push(ReportRow {
            row: result.comparison().expect("table rows run both variants"),
            runs: args.runs,
            check: Some(table_row.check),
        });
    }
    let text = write_comparison(&dir, &rows, timing)?;
    if args.runs < TABLE_RUNS {
        writeln!(out, "REDUCED: {} runs per variant (full table uses {TABLE_RUNS})", args.runs)?;
    }
    write!(out, "{text}")?;
    let passed = rows.iter().filter(|r| r.passed() == Some(true)).count();
    writeln!(out, "directional checks passed: {passed}/{}", rows.len())?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}
