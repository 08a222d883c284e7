//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use qswarm::experiments::{run_batch, BatchResult, TABLE_ROWS};
use qswarm::surrogate::{build_design_matrix, fit, minimize};
use qswarm::swarm::ScheduleState;
use qswarm::{required_points, Archive, Swarm, SwarmConfig, SwarmParams, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    // Eigenvalues spread over less than four decades.
    let eig = DVector::from_fn(n, |_, _| 10f64.powf(rng.random_range(-1.0..2.99)));
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

fn cond(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    sv.max() / sv.min()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_coeff = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut failures = 0;
    for trial in 0..1000 {
        let n = 1 + trial % 4;
        let n_q = required_points(n).unwrap();
        let b = random_spd(n, &mut rng);
        assert!(cond(&b) < 1e4);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let c: f64 = rng.random_range(-10.0..10.0);
        let truth = |x: &[f64]| {
            let xv = DVector::from_column_slice(x);
            c + a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() + (xv.transpose() * &b * &xv)[(0, 0)]
        };
        let points = loop {
            let pts: Vec<Vec<f64>> = (0..n_q)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let m = build_design_matrix(&pts).unwrap();
            let dm = DMatrix::from_fn(n_q, n_q, |i, j| m[(i, j)]);
            if cond(&dm) < 1e8 {
                break pts;
            }
        };
        let values: Vec<f64> = points.iter().map(|p| truth(p)).collect();
        let Ok(model) = fit(&points, &values) else {
            failures += 1;
            continue;
        };
        // Expected coefficient vector in design-column order.
        let mut expected = vec![c];
        expected.extend_from_slice(&a);
        for i in 0..n {
            for j in i..n {
                expected.push(if i == j { b[(i, i)] } else { 2.0 * b[(i, j)] });
            }
        }
        let got = model.coefficients();
        let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = got.iter().zip(&expected).fold(0.0f64, |m, (g, e)| m.max((g - e).abs())) / scale;
        worst_coeff = worst_coeff.max(err);

        let Ok(x) = minimize(&model) else {
            failures += 1;
            continue;
        };
        let grad = model.gradient(&x);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(norm);
        if err >= 1e-6 || norm >= 1e-8 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(5),
        format!(
            "1000 quadratics, max coeff rel err {worst_coeff:.2e} (< 1e-6), max |a + 2Bx| {worst_grad:.2e} (< 1e-8), failures {failures}, {:.2}s (< 5s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for stream in 0..1000 {
        let obs: Vec<(Vec<f64>, f64)> = (0..1000)
            .map(|i| {
                let x = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                let u: f64 = rng.random_range(0.0..1.0);
                // Odd streams drift downward, so the archive keeps turning over.
                let f = if stream % 2 == 0 { u } else { u * (1000 - i) as f64 };
                (x, f)
            })
            .collect();
        for cap in [3usize, 6, 10] {
            let mut archive = Archive::new(cap).unwrap();
            for (x, f) in &obs {
                archive.observe(x, *f);
            }
            let mut got: Vec<f64> = archive.sorted_entries().unwrap().iter().map(|e| e.value).collect();
            got.sort_by(f64::total_cmp);
            let mut oracle: Vec<f64> = obs.iter().map(|(_, f)| *f).collect();
            oracle.sort_by(f64::total_cmp);
            oracle.truncate(cap);
            if got != oracle {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!(
            "1000 streams x 1000 observations x capacities {{3,6,10}}, mismatches {mismatches}, {:.2}s (< 5s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let two = required_points(2).unwrap();
    let three = required_points(3).unwrap();
    outcome(two == 6 && three == 10, format!("N_Q(2) = {two} (6), N_Q(3) = {three} (10)"))
}

fn criterion_4() -> Outcome {
    let p = SwarmParams::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let s0 = ScheduleState::at(0, 200, &p);
    let sk = ScheduleState::at(200, 200, &p);
    let table = p.omega0 == 0.72984
        && p.c1_0 == 2.8
        && p.c2_0 == 2.05
        && p.vmax0 == 2.0
        && p.lookback == 52
        && p.tau == 1.2;
    // At k = 0 the v_max ramp evaluates to v_max,0 · e.
    let start = s0.omega == p.omega0
        && s0.c1 == p.c1_0
        && s0.c2 == p.c2_0
        && close(s0.vmax, p.vmax0 * std::f64::consts::E);
    let end = close(sk.omega, 0.22984) && close(sk.c1, 1.8) && close(sk.c2, 3.05) && close(sk.vmax, 2.0);
    outcome(
        table && start && end,
        format!(
            "k=0: w={} c1={} c2={} vmax={:.12}; k=K: w={:.14} c1={:.14} c2={:.14} vmax={:.14}",
            s0.omega, s0.c1, s0.c2, s0.vmax, sk.omega, sk.c1, sk.c2, sk.vmax
        ),
    )
}

fn median(values: &[f64]) -> f64 {
    qswarm::experiments::summarize(values).unwrap().q50
}

fn criterion_5(batches: &[BatchResult], elapsed: Duration) -> (Outcome, Vec<String>) {
    let mut lines = Vec::new();
    let mut all = true;
    for (row, batch) in TABLE_ROWS.iter().zip(batches) {
        let finals = |v: Variant| -> Vec<f64> {
            batch.variant(v).unwrap().records.iter().map(|r| r.final_value()).collect()
        };
        let mq = median(&finals(Variant::QuadraticSurrogate));
        let ms = median(&finals(Variant::Standard));
        let ok = row.check.passes(mq, ms);
        all &= ok;
        lines.push(format!(
            "  {} {:<12} median qs {:.3e}  median std {:.3e}  ratio {:.3e}  ({})",
            if ok { "PASS" } else { "FAIL" },
            row.id(),
            mq,
            ms,
            mq / ms,
            row.check.describe()
        ));
    }
    let passed = lines.iter().filter(|l| l.trim_start().starts_with("PASS")).count();
    (
        outcome(
            all,
            format!(
                "{passed}/6 rows meet their directional threshold, 200 runs/variant, {:.1}s",
                elapsed.as_secs_f64()
            ),
        ),
        lines,
    )
}

fn nonincreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

fn criterion_6(batches: &[BatchResult], extra: &[Vec<f64>]) -> Outcome {
    let mut traces = 0;
    let mut violations = 0;
    for batch in batches {
        for v in &batch.variants {
            for r in &v.records {
                traces += 1;
                violations += usize::from(!nonincreasing(&r.best_value_trace));
            }
        }
    }
    for t in extra {
        traces += 1;
        violations += usize::from(!nonincreasing(t));
    }
    outcome(violations == 0, format!("{traces} traces, {violations} violations"))
}

fn criterion_7() -> (Outcome, Vec<Vec<f64>>) {
    let mut identical = 0;
    let mut traces = Vec::new();
    for seed in 0..20u64 {
        let row = TABLE_ROWS[seed as usize % TABLE_ROWS.len()];
        let spec = row.spec(1, 0, 1);
        let objective = spec.benchmark().unwrap();
        let std_cfg = SwarmConfig::new(spec.bounds.clone(), spec.particles, spec.iterations, Variant::Standard, seed);
        let mut qs_cfg = std_cfg.clone();
        qs_cfg.variant = Variant::QuadraticSurrogate;
        // An archive that can never fill forces the too-few-points fallback
        // on every iteration.
        qs_cfg.archive_capacity = Some(std_cfg.particles * std_cfg.iterations + 1);
        let mut a = Swarm::new(std_cfg, &objective).unwrap();
        let mut b = Swarm::new(qs_cfg, &objective).unwrap();
        let mut same = true;
        let mut fallbacks = 0;
        for _ in 0..spec.iterations {
            a.step().unwrap();
            b.step().unwrap();
            fallbacks += usize::from(b.last_attractor().unwrap().fallback.is_some());
            same &= a.particles() == b.particles();
        }
        same &= fallbacks == spec.iterations
            && a.trace() == b.trace()
            && a.global_best() == b.global_best()
            && a.evaluations() == b.evaluations();
        identical += usize::from(same);
        traces.push(a.trace().to_vec());
        traces.push(b.trace().to_vec());
    }
    (
        outcome(identical == 20, format!("{identical}/20 seeds bit-identical (positions, velocities, bests, traces)")),
        traces,
    )
}

fn collect_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn table_run(root: &Path, jobs: usize) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_qswarm"))
        .args(["paper-table", "--emit-traces", "--no-timing", "--jobs", &jobs.to_string(), "--out"])
        .arg(root)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("exit {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
    }
    let dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    if dirs.len() != 1 {
        return Err(format!("expected one output directory, found {}", dirs.len()));
    }
    Ok(collect_files(&dirs[0]))
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (one, eight) = (tmp.path().join("jobs1"), tmp.path().join("jobs8"));
    let start = Instant::now();
    let a = match table_run(&one, 1) {
        Ok(files) => files,
        Err(e) => return outcome(false, format!("--jobs 1 failed: {e}")),
    };
    let b = match table_run(&eight, 8) {
        Ok(files) => files,
        Err(e) => return outcome(false, format!("--jobs 8 failed: {e}")),
    };
    let csvs = a.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|p| a.get(*p) != b.get(*p))
        .map(|p| p.display().to_string())
        .collect();
    outcome(
        differing.is_empty() && csvs > 6 * 3,
        format!(
            "full table (400 runs/variant/row) at --jobs 1 and --jobs 8: {} files ({csvs} CSV), {} differing{}, {:.1}s",
            a.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" {differing:?}") },
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome, Vec<String>)> = vec![
        (1, criterion_1(), vec![]),
        (2, criterion_2(), vec![]),
        (3, criterion_3(), vec![]),
        (4, criterion_4(), vec![]),
    ];

    let start = Instant::now();
    let batches: Vec<BatchResult> = TABLE_ROWS
        .iter()
        .map(|row| {
            let spec = row.spec(200, 0, 1);
            run_batch(&spec, &spec.benchmark().unwrap()).unwrap()
        })
        .collect();
    let (c5, lines) = criterion_5(&batches, start.elapsed());
    let (c7, forced_traces) = criterion_7();
    let c6 = criterion_6(&batches, &forced_traces);
    results.push((5, c5, lines));
    results.push((6, c6, vec![]));
    results.push((7, c7, vec![]));
    results.push((8, criterion_8(), vec![]));

    let mut failed = 0;
    for (id, o, lines) in &results {
        println!("criterion {id}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for l in lines {
            println!("{l}");
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
