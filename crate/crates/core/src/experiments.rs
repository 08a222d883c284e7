//! Seeded multi-run batches, summary statistics and the CSV artifacts built
//! from them.
//!
//! Run `j` of a batch uses seed `base_seed ^ j`. Runs execute on a rayon
//! pool of `jobs` threads and are merged by run index, so every output is
//! independent of the degree of parallelism.
//!
//! Quantiles use linear interpolation between closest ranks (the "type 7"
//! rule): for sorted `x₀ ≤ … ≤ x_{n−1}` and probability `p`, with
//! `h = (n − 1)·p`, `Q(p) = x_⌊h⌋ + (h − ⌊h⌋)·(x_⌊h⌋₊₁ − x_⌊h⌋)`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::objectives::{Benchmark, BenchmarkKind, Bounds, Objective};
use crate::swarm::{run, FallbackCounts, RunRecord, SwarmConfig, SwarmError, SwarmParams, Variant};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid batch: {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("run {run_index} ({variant}, seed {seed}) failed: {source}")]
    Run {
        run_index: usize,
        seed: u64,
        variant: Variant,
        source: SwarmError,
    },
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Seed of run `run_index` in a batch starting from `base_seed`.
pub fn run_seed(base_seed: u64, run_index: usize) -> u64 {
    base_seed ^ run_index as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    /// Label written to the `objective` column.
    pub objective: String,
    pub bounds: Bounds,
    pub variants: Vec<Variant>,
    pub runs: usize,
    pub iterations: usize,
    pub particles: usize,
    pub params: SwarmParams,
    pub base_seed: u64,
    /// Worker threads; output does not depend on it.
    pub jobs: usize,
}

impl BatchSpec {
    /// Batch over a built-in benchmark with its default bounds, both
    /// variants, default parameters and one worker.
    pub fn for_benchmark(kind: BenchmarkKind, dimension: usize, particles: usize, runs: usize) -> Self {
        let bounds = Bounds::symmetric(dimension, kind.default_half_width())
            .expect("built-in benchmark bounds are valid");
        Self {
            objective: kind.name().to_string(),
            bounds,
            variants: vec![Variant::QuadraticSurrogate, Variant::Standard],
            runs,
            iterations: 200,
            particles,
            params: SwarmParams::default(),
            base_seed: 0,
            jobs: 1,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field, reason: &str| {
            Err(ExperimentError::InvalidSpec {
                field,
                reason: reason.to_string(),
            })
        };
        if self.runs == 0 {
            return bad("runs", "must be at least 1");
        }
        if self.variants.is_empty() {
            return bad("variant", "at least one variant is required");
        }
        if self.jobs == 0 {
            return bad("jobs", "must be at least 1");
        }
        Ok(())
    }

    fn swarm_config(&self, variant: Variant, seed: u64) -> SwarmConfig {
        let mut cfg = SwarmConfig::new(self.bounds.clone(), self.particles, self.iterations, variant, seed);
        cfg.params = self.params;
        cfg
    }

    /// The built-in benchmark named by `objective`, on this batch's bounds.
    pub fn benchmark(&self) -> Result<Benchmark, crate::objectives::ObjectiveError> {
        Ok(Benchmark::new(self.objective.parse()?, self.bounds.clone()))
    }
}

/// Mean and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// Type-7 quantile of an already sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn summarize(values: &[f64]) -> Result<Summary, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
    })
}

/// Values below this are raised to it before taking logarithms.
pub const GEOMETRIC_FLOOR: f64 = 1e-300;

/// `exp(mean(ln max(v, GEOMETRIC_FLOOR)))`.
pub fn geometric_mean(values: &[f64]) -> Result<f64, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySample);
    }
    let s: f64 = values.iter().map(|v| v.max(GEOMETRIC_FLOOR).ln()).sum();
    Ok((s / values.len() as f64).exp())
}

/// Cross-run statistics of the global best after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// 1-based: the value after `iteration` iterations.
    pub iteration: usize,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub variant: Variant,
    pub runs: usize,
    pub finals: Summary,
    pub geometric_mean: f64,
    pub mean_wall_time: f64,
    pub mean_evaluations: f64,
    pub fallback_counts: FallbackCounts,
    pub trace: Vec<TracePoint>,
}

impl StatsSummary {
    /// Statistics over records of one variant. Traces shorter than the
    /// longest one are ignored at the missing iterations.
    pub fn from_records(variant: Variant, records: &[RunRecord]) -> Result<Self, ExperimentError> {
        let finals: Vec<f64> = records.iter().map(RunRecord::final_value).collect();
        let summary = summarize(&finals)?;
        let n = records.len() as f64;
        let mut fallback_counts = FallbackCounts::default();
        for r in records {
            fallback_counts.merge(&r.fallback_counts);
        }
        let len = records.iter().map(|r| r.best_value_trace.len()).max().unwrap_or(0);
        let mut trace = Vec::with_capacity(len);
        let mut column = Vec::with_capacity(records.len());
        for k in 0..len {
            column.clear();
            column.extend(records.iter().filter_map(|r| r.best_value_trace.get(k).copied()));
            let s = summarize(&column)?;
            trace.push(TracePoint {
                iteration: k + 1,
                mean: s.mean,
                q25: s.q25,
                q75: s.q75,
                min: column.iter().copied().fold(f64::INFINITY, f64::min),
                max: column.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        Ok(Self {
            variant,
            runs: records.len(),
            finals: summary,
            geometric_mean: geometric_mean(&finals)?,
            mean_wall_time: records.iter().map(|r| r.wall_time).sum::<f64>() / n,
            mean_evaluations: records.iter().map(|r| r.evaluations as f64).sum::<f64>() / n,
            fallback_counts,
            trace,
        })
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    /// Indexed by run.
    pub records: Vec<RunRecord>,
    pub summary: StatsSummary,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub spec: BatchSpec,
    pub variants: Vec<VariantResult>,
}

impl BatchResult {
    pub fn variant(&self, variant: Variant) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    /// Comparison of the surrogate variant against the standard one, when
    /// both were run.
    pub fn comparison(&self) -> Option<ComparisonRow> {
        let qs = self.variant(Variant::QuadraticSurrogate)?;
        let std = self.variant(Variant::Standard)?;
        Some(compare(&qs.summary, &std.summary, RowMeta::from_spec(&self.spec)))
    }
}

/// Run every variant of `spec` on `objective`.
pub fn run_batch<O>(spec: &BatchSpec, objective: &O) -> Result<BatchResult, ExperimentError>
where
    O: Objective + ?Sized,
{
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    let mut variants = Vec::with_capacity(spec.variants.len());
    for &variant in &spec.variants {
        let outcomes: Vec<Result<RunRecord, SwarmError>> = pool.install(|| {
            (0..spec.runs)
                .into_par_iter()
                .map(|j| run(&spec.swarm_config(variant, run_seed(spec.base_seed, j)), objective))
                .collect()
        });
        let mut records = Vec::with_capacity(spec.runs);
        // The lowest failing index is reported, whatever order runs finished in.
        for (run_index, outcome) in outcomes.into_iter().enumerate() {
            records.push(outcome.map_err(|source| ExperimentError::Run {
                run_index,
                seed: run_seed(spec.base_seed, run_index),
                variant,
                source,
            })?);
        }
        let summary = StatsSummary::from_records(variant, &records)?;
        variants.push(VariantResult {
            variant,
            records,
            summary,
        });
    }
    Ok(BatchResult {
        spec: spec.clone(),
        variants,
    })
}

/// Identification of a comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub objective: String,
    pub dimension: usize,
    pub particles: usize,
    pub bounds: String,
}

impl RowMeta {
    pub fn from_spec(spec: &BatchSpec) -> Self {
        Self {
            objective: spec.objective.clone(),
            dimension: spec.dimension(),
            particles: spec.particles,
            bounds: bounds_label(&spec.bounds),
        }
    }
}

/// `±w` for symmetric uniform bounds, the full interval list otherwise.
pub fn bounds_label(bounds: &Bounds) -> String {
    let iv = bounds.intervals();
    let (lo, hi) = iv[0];
    if iv.iter().all(|&b| b == (lo, hi)) && lo == -hi {
        format!("±{hi}")
    } else {
        bounds.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub meta: RowMeta,
    pub mean_qs: f64,
    pub mean_std: f64,
    /// `(mean_qs / mean_std − 1)·100`; `None` when `mean_std` is zero.
    pub rel_diff_pct: Option<f64>,
    pub time_qs: f64,
    pub time_std: f64,
    pub time_rel_diff_pct: Option<f64>,
    pub iqr_qs: (f64, f64),
    pub iqr_std: (f64, f64),
    pub median_qs: f64,
    pub median_std: f64,
}

/// `(a / b − 1)·100`, or `None` when `b` is zero.
pub fn relative_difference_pct(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        None
    } else {
        Some((a / b - 1.0) * 100.0)
    }
}

pub fn compare(qs: &StatsSummary, std: &StatsSummary, meta: RowMeta) -> ComparisonRow {
    ComparisonRow {
        meta,
        mean_qs: qs.finals.mean,
        mean_std: std.finals.mean,
        rel_diff_pct: relative_difference_pct(qs.finals.mean, std.finals.mean),
        time_qs: qs.mean_wall_time,
        time_std: std.mean_wall_time,
        time_rel_diff_pct: relative_difference_pct(qs.mean_wall_time, std.mean_wall_time),
        iqr_qs: (qs.finals.q25, qs.finals.q75),
        iqr_std: (std.finals.q25, std.finals.q75),
        median_qs: qs.finals.q50,
        median_std: std.finals.q50,
    }
}

/// Directional test on medians: `median_qs < factor·median_std`, or `≤`
/// when not strict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalCheck {
    pub factor: f64,
    pub strict: bool,
}

impl DirectionalCheck {
    pub fn passes(&self, median_qs: f64, median_std: f64) -> bool {
        let limit = self.factor * median_std;
        if self.strict {
            median_qs < limit
        } else {
            median_qs <= limit
        }
    }

    pub fn describe(&self) -> String {
        let op = if self.strict { "<" } else { "<=" };
        if self.factor == 1.0 {
            format!("median_qs {op} median_std")
        } else if self.factor < 1.0 {
            format!("median_qs {op} median_std/{}", 1.0 / self.factor)
        } else {
            format!("median_qs {op} {}*median_std", self.factor)
        }
    }
}

/// One configuration of the benchmark table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub kind: BenchmarkKind,
    pub dimension: usize,
    pub particles: usize,
    pub check: DirectionalCheck,
}

impl TableRow {
    pub fn id(&self) -> String {
        format!("{}_{}d", self.kind.name(), self.dimension)
    }

    pub fn spec(&self, runs: usize, base_seed: u64, jobs: usize) -> BatchSpec {
        BatchSpec {
            base_seed,
            jobs,
            ..BatchSpec::for_benchmark(self.kind, self.dimension, self.particles, runs)
        }
    }
}

/// Runs per variant in the full benchmark table.
pub const TABLE_RUNS: usize = 400;

pub const TABLE_ROWS: [TableRow; 6] = [
    TableRow {
        kind: BenchmarkKind::Ackley,
        dimension: 2,
        particles: 6,
        check: DirectionalCheck { factor: 0.1, strict: true },
    },
    TableRow {
        kind: BenchmarkKind::Griewank,
        dimension: 2,
        particles: 6,
        check: DirectionalCheck { factor: 1.0, strict: true },
    },
    TableRow {
        kind: BenchmarkKind::Sphere,
        dimension: 2,
        particles: 6,
        check: DirectionalCheck { factor: 2.0, strict: false },
    },
    TableRow {
        kind: BenchmarkKind::Sphere,
        dimension: 3,
        particles: 10,
        check: DirectionalCheck { factor: 0.1, strict: true },
    },
    TableRow {
        kind: BenchmarkKind::Flower,
        dimension: 2,
        particles: 6,
        check: DirectionalCheck { factor: 0.01, strict: true },
    },
    TableRow {
        kind: BenchmarkKind::Flower,
        dimension: 3,
        particles: 10,
        check: DirectionalCheck { factor: 0.01, strict: true },
    },
];

/// Full-precision scientific notation (17 significant digits), which
/// parses back to the identical `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_else(|| UNDEFINED.to_string())
}

/// Written where a relative difference has a zero denominator.
pub const UNDEFINED: &str = "undefined";

/// Whether wall-clock columns are written. Without them every artifact is
/// a pure function of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Include,
    Omit,
}

impl Timing {
    fn cell(self, v: f64) -> String {
        match self {
            Timing::Include => fmt_num(v),
            Timing::Omit => String::new(),
        }
    }

    fn cell_opt(self, v: Option<f64>) -> String {
        match self {
            Timing::Include => fmt_opt(v),
            Timing::Omit => String::new(),
        }
    }
}

pub const RUNS_HEADER: [&str; 7] = [
    "run_index",
    "seed",
    "variant",
    "objective",
    "final_value",
    "evaluations",
    "wall_time_s",
];

/// `runs.csv`: one row per run, variants in batch order.
pub fn write_runs_csv<W: io::Write>(out: W, result: &BatchResult, timing: Timing) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for v in &result.variants {
        for (j, r) in v.records.iter().enumerate() {
            w.write_record([
                j.to_string(),
                r.seed.to_string(),
                r.variant.to_string(),
                result.spec.objective.clone(),
                fmt_num(r.final_value()),
                r.evaluations.to_string(),
                timing.cell(r.wall_time),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "mean", "q25", "q75"];

/// `trace_<variant>.csv`: the cross-run band of the global-best value.
pub fn write_trace_csv<W: io::Write>(out: W, summary: &StatsSummary) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for t in &summary.trace {
        w.write_record([t.iteration.to_string(), fmt_num(t.mean), fmt_num(t.q25), fmt_num(t.q75)])?;
    }
    w.flush()?;
    Ok(())
}

pub const COMPARISON_HEADER: [&str; 19] = [
    "objective",
    "dimension",
    "particles",
    "bounds",
    "mean_qs",
    "mean_std",
    "rel_diff_pct",
    "time_qs_s",
    "time_std_s",
    "time_rel_diff_pct",
    "q25_qs",
    "q75_qs",
    "q25_std",
    "q75_std",
    "median_qs",
    "median_std",
    "runs",
    "check",
    "check_pass",
];

/// A comparison row with the run count and an optional directional check.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub row: ComparisonRow,
    pub runs: usize,
    pub check: Option<DirectionalCheck>,
}

impl ReportRow {
    pub fn passed(&self) -> Option<bool> {
        self.check.map(|c| c.passes(self.row.median_qs, self.row.median_std))
    }
}

/// `comparison.csv`. Quantiles are type 7.
pub fn write_comparison_csv<W: io::Write>(out: W, rows: &[ReportRow], timing: Timing) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in rows {
        let c = &r.row;
        w.write_record([
            c.meta.objective.clone(),
            c.meta.dimension.to_string(),
            c.meta.particles.to_string(),
            c.meta.bounds.clone(),
            fmt_num(c.mean_qs),
            fmt_num(c.mean_std),
            fmt_opt(c.rel_diff_pct),
            timing.cell(c.time_qs),
            timing.cell(c.time_std),
            timing.cell_opt(c.time_rel_diff_pct),
            fmt_num(c.iqr_qs.0),
            fmt_num(c.iqr_qs.1),
            fmt_num(c.iqr_std.0),
            fmt_num(c.iqr_std.1),
            fmt_num(c.median_qs),
            fmt_num(c.median_std),
            r.runs.to_string(),
            r.check.map(|c| c.describe()).unwrap_or_default(),
            match r.passed() {
                Some(true) => "pass".to_string(),
                Some(false) => "fail".to_string(),
                None => String::new(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map(|p| format!("{p:+.2}%")).unwrap_or_else(|| UNDEFINED.to_string())
}

/// Aligned plain-text version of the comparison rows.
pub fn comparison_text(rows: &[ReportRow], timing: Timing) -> String {
    let mut header = vec![
        "Function", "Np", "Bounds", "Mean Q.S.", "Mean Std.", "Rel. Diff.",
    ];
    if timing == Timing::Include {
        header.extend(["Time Q.S. [s]", "Time Std. [s]", "Rel. Diff."]);
    }
    header.extend(["IQR Q.S.", "IQR Std.", "Check"]);
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let c = &r.row;
        let mut line = vec![
            format!("{} {}D", capitalize(&c.meta.objective), c.meta.dimension),
            c.meta.particles.to_string(),
            c.meta.bounds.clone(),
            format!("{:.3e}", c.mean_qs),
            format!("{:.3e}", c.mean_std),
            pct(c.rel_diff_pct),
        ];
        if timing == Timing::Include {
            line.push(format!("{:.3e}", c.time_qs));
            line.push(format!("{:.3e}", c.time_std));
            line.push(pct(c.time_rel_diff_pct));
        }
        line.push(format!("[{:.1e}, {:.1e}]", c.iqr_qs.0, c.iqr_qs.1));
        line.push(format!("[{:.1e}, {:.1e}]", c.iqr_std.0, c.iqr_std.1));
        line.push(match (r.check, r.passed()) {
            (Some(check), Some(ok)) => format!("{} {}", if ok { "PASS" } else { "FAIL" }, check.describe()),
            _ => "-".to_string(),
        });
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|i| table.iter().map(|row| row[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(s, "{}", "-".repeat(total));
        }
    }
    s
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Write `runs.csv` and, when `traces`, one `trace_<variant>.csv` per
/// variant into `dir`.
pub fn write_batch_artifacts(dir: &Path, result: &BatchResult, traces: bool, timing: Timing) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    write_runs_csv(io::BufWriter::new(std::fs::File::create(dir.join("runs.csv"))?), result, timing)?;
    if traces {
        for v in &result.variants {
            let path = dir.join(format!("trace_{}.csv", v.variant));
            write_trace_csv(io::BufWriter::new(std::fs::File::create(path)?), &v.summary)?;
        }
    }
    Ok(())
}
