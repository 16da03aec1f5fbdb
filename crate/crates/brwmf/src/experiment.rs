//! Experiment orchestration: replicated seeded runs, CSV/JSON artifacts
//! and the pass/fail summary behind the `brwmf` binary.
//!
//! Replica `r` draws from the ChaCha stream `(master_seed, r)`, so results
//! are bit-reproducible regardless of execution order; replica outputs are
//! collected into a fixed order before writing, so the parallelism degree
//! never changes a byte of the artifacts.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{build_cascade, CascadeTable};
use crate::config::{CheckResult, ExperimentConfig, ExperimentKind, GridSpec, RunManifest};
use crate::math::dot;
use crate::model::ModelSpec;
use crate::pressure::{domain_scan, empirical_pressure, phi, QGrid};
use crate::spectrum::{assemble_spectrum, LdpSlope, SpectrumOptions};
use crate::tree::{run_to_depth, run_to_depth_with_sink, GrowthMode, TreeRun};
use crate::Result;

/// RNG stream for one replica of a run.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

struct KindOutput {
    files: Vec<(String, String)>,
    checks: Vec<CheckResult>,
    flagged: Vec<String>,
    incomplete: bool,
}

impl KindOutput {
    fn new() -> Self {
        KindOutput {
            files: Vec::new(),
            checks: Vec::new(),
            flagged: Vec::new(),
            incomplete: false,
        }
    }

    fn merge(&mut self, other: KindOutput) {
        self.files.extend(other.files);
        self.checks.extend(other.checks);
        self.flagged.extend(other.flagged);
        self.incomplete |= other.incomplete;
    }
}

/// Executes the configured experiment with the given worker count, writes
/// all artifacts plus `manifest.json` under the config's output directory,
/// and returns the manifest.
pub fn run_experiment(config: &ExperimentConfig, parallelism: usize) -> Result<RunManifest> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| crate::BrwError::Config(e.to_string()))?;

    let mut output = KindOutput::new();
    let kinds: Vec<ExperimentKind> = match config.kind {
        ExperimentKind::Full => vec![
            ExperimentKind::Domains,
            ExperimentKind::Pressure,
            ExperimentKind::Cascade,
            ExperimentKind::Spectrum,
        ],
        k => vec![k],
    };
    for kind in kinds {
        let part = match kind {
            ExperimentKind::Domains => run_domains(config)?,
            ExperimentKind::Pressure => pool.install(|| run_pressure(config))?,
            ExperimentKind::Cascade => pool.install(|| run_cascade(config))?,
            ExperimentKind::Spectrum => pool.install(|| run_spectrum(config))?,
            ExperimentKind::Full => unreachable!(),
        };
        output.merge(part);
    }

    std::fs::create_dir_all(&config.output_dir)?;
    let mut outputs = Vec::new();
    for (name, body) in &output.files {
        let path = config.output_dir.join(name);
        std::fs::write(&path, body)?;
        outputs.push(name.clone());
    }
    let passed = output.checks.iter().all(|c| c.passed) && !output.incomplete;
    let manifest = RunManifest {
        config_hash: config.hash(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed,
        replica_streams: (0..config.replicas as u64).collect(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        outputs,
        checks: output.checks,
        passed,
        incomplete: output.incomplete,
        flagged: output.flagged,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(config.output_dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

/// Validates a config file without running anything.
pub fn check_config(path: &Path) -> Result<ExperimentConfig> {
    crate::config::parse_config(path)
}

fn grid_header(prefix: &str, d: usize, out: &mut String) {
    for j in 0..d {
        write!(out, ",{prefix}_{j}").unwrap();
    }
}

fn write_coords(coords: &[f64], out: &mut String) {
    for v in coords {
        write!(out, ",{v}").unwrap();
    }
}

fn run_domains(config: &ExperimentConfig) -> Result<KindOutput> {
    let spec = &config.model;
    let d = spec.dim();
    let grid = config.q_grid.build(d);
    let scan = domain_scan(spec, &grid, &[1.5, 2.0])?;
    let mut csv = String::from("point");
    grid_header("q", d, &mut csv);
    csv.push_str(",in_j,in_omega1,in_cal_j");
    grid_header("alpha", d, &mut csv);
    csv.push('\n');
    let mut worst_slope = f64::NEG_INFINITY;
    for (i, q) in grid.points.iter().enumerate() {
        write!(csv, "{i}").unwrap();
        write_coords(q, &mut csv);
        write!(
            csv,
            ",{},{},{}",
            scan.in_j[i] as u8, scan.in_omega1[i] as u8, scan.in_cal_j[i] as u8
        )
        .unwrap();
        match &scan.alpha_image[i] {
            Some(alpha) => write_coords(alpha, &mut csv),
            None => {
                for _ in 0..d {
                    csv.push(',');
                }
            }
        }
        csv.push('\n');
        if scan.in_cal_j[i] {
            let h = 1e-4;
            let slope = (phi(spec, 1.0 + h, q) - 1.0) / h;
            worst_slope = worst_slope.max(slope);
        }
    }
    let mut out = KindOutput::new();
    out.files.push(("domains.csv".into(), csv));
    out.checks.push(CheckResult {
        name: "phi_slope_negative_at_one".into(),
        passed: worst_slope < 0.0,
        value: worst_slope,
        threshold: 0.0,
    });
    Ok(out)
}

fn run_pressure(config: &ExperimentConfig) -> Result<KindOutput> {
    let spec = config.model.clone();
    let d = spec.dim();
    let grid = config.q_grid.build(d);
    let p_tilde: Vec<f64> = grid.points.iter().map(|q| spec.log_mgf(q)).collect();

    struct ReplicaResult {
        rows: Vec<(usize, Vec<f64>)>, // (level, P_n per q)
        budget_hit: Option<usize>,
    }
    let per_replica: Vec<Result<ReplicaResult>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(config.master_seed, r as u64);
            let mut rows = Vec::new();
            let run = run_to_depth_with_sink(
                &spec,
                config.depth,
                GrowthMode::Stream,
                config.budget,
                &mut rng,
                |frame| {
                    if frame.depth >= 1 {
                        let values = grid
                            .points
                            .iter()
                            .map(|q| empirical_pressure(frame, q))
                            .collect();
                        rows.push((frame.depth, values));
                    }
                },
            )?;
            Ok(ReplicaResult {
                rows,
                budget_hit: run.budget_hit,
            })
        })
        .collect();

    let mut out = KindOutput::new();
    let mut csv = String::from("replica,n");
    grid_header("q", d, &mut csv);
    csv.push_str(",p_n,p_tilde,gap\n");
    let mut final_gap = 0.0f64;
    let mut upper_violation = f64::NEG_INFINITY;
    for (r, result) in per_replica.into_iter().enumerate() {
        let result = result?;
        if let Some(level) = result.budget_hit {
            out.flagged.push(format!(
                "pressure replica {r}: budget exceeded at level {level}"
            ));
            out.incomplete = true;
        }
        for (n, values) in &result.rows {
            for (qi, q) in grid.points.iter().enumerate() {
                let gap = values[qi] - p_tilde[qi];
                write!(csv, "{r},{n}").unwrap();
                write_coords(q, &mut csv);
                writeln!(csv, ",{},{},{gap}", values[qi], p_tilde[qi]).unwrap();
                if *n == config.depth {
                    final_gap = final_gap.max(gap.abs());
                }
                if *n >= 15 {
                    upper_violation = upper_violation.max(gap);
                }
            }
        }
    }
    out.files.push(("pressure.csv".into(), csv));
    out.checks.push(CheckResult {
        name: "pressure_gap_at_final_depth".into(),
        passed: final_gap <= config.tolerances.pressure_gap,
        value: final_gap,
        threshold: config.tolerances.pressure_gap,
    });
    if config.depth >= 15 {
        out.checks.push(CheckResult {
            name: "pressure_upper_bound_n_ge_15".into(),
            passed: upper_violation <= config.tolerances.pressure_upper_slack,
            value: upper_violation,
            threshold: config.tolerances.pressure_upper_slack,
        });
    }
    Ok(out)
}

fn default_lambda_grid() -> GridSpec {
    GridSpec {
        min: -0.2,
        max: 0.2,
        per_axis: 5,
    }
}

/// Re-evaluates the branching recursion and measure additivity in linear
/// space; returns the worst relative error.
fn identity_error(table: &CascadeTable) -> f64 {
    let mut worst = 0.0f64;
    let n = table.depth();
    let nq = table.qgrid.len();
    for k in 0..n {
        let child_frame = table.run.frame(k + 1);
        for qi in 0..nq {
            let q = &table.qgrid.points[qi];
            let p_tilde = table.log_p_tilde[qi];
            let parent_mu = table.measure_weights(k, qi);
            let child_mu = table.measure_weights(k + 1, qi);
            for u in 0..table.run.frame(k).node_count() {
                let recursion: f64 = table
                    .children(k, u)
                    .map(|c| {
                        (dot(q, child_frame.displacement_of(c)) - p_tilde
                            + table.log_y(k + 1, c, qi))
                        .exp()
                    })
                    .sum();
                let stored = table.log_y(k, u, qi).exp();
                worst = worst.max((recursion - stored).abs() / stored);
                let mass: f64 = table.children(k, u).map(|c| child_mu.log_mu[c].exp()).sum();
                let own = parent_mu.log_mu[u].exp();
                worst = worst.max((mass - own).abs() / own);
            }
        }
    }
    worst
}

fn run_cascade(config: &ExperimentConfig) -> Result<KindOutput> {
    let spec = config.model.clone();
    let d = spec.dim();
    let qgrid = config.q_grid.build(d);
    let lambda_grid = config
        .lambda_grid
        .clone()
        .unwrap_or_else(default_lambda_grid)
        .build(d);
    let depth = config.effective_cascade_depth();

    // (q, lambda, L_n, target, z_n)
    type LRow = (Vec<f64>, Vec<f64>, f64, f64, f64);
    struct ReplicaResult {
        l_rows: Vec<LRow>,
        path_rows: String,
        identity_rel: f64,
        budget_hit: Option<usize>,
    }
    let per_replica: Vec<Result<ReplicaResult>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(config.master_seed, r as u64);
            let run = run_to_depth(
                &spec,
                depth,
                GrowthMode::Materialize,
                config.budget,
                &mut rng,
            )?;
            let budget_hit = run.budget_hit;
            let table = build_cascade(run, qgrid.clone())?;
            let mut l_rows = Vec::new();
            for q in &qgrid.points {
                for lambda in &lambda_grid.points {
                    let shifted: Vec<f64> = q.iter().zip(lambda).map(|(a, b)| a + b).collect();
                    let target = spec.log_mgf(&shifted) - spec.log_mgf(q);
                    l_rows.push((
                        q.clone(),
                        lambda.clone(),
                        table.l_n(q, lambda),
                        target,
                        table.z_n(q, lambda),
                    ));
                }
            }
            let mut path_rows = String::new();
            for (qi, q) in qgrid.points.iter().enumerate() {
                for p in 0..config.paths {
                    let path = table.sample_path(qi, &mut rng);
                    for k in 1..path.nodes.len() {
                        write!(path_rows, "{r}").unwrap();
                        write_coords(q, &mut path_rows);
                        write!(path_rows, ",{p},{k}").unwrap();
                        for s in &path.path_sums[k] {
                            write!(path_rows, ",{}", s / k as f64).unwrap();
                        }
                        writeln!(path_rows, ",{},{}", path.log_mu[k], path.log_y[k]).unwrap();
                    }
                }
            }
            Ok(ReplicaResult {
                l_rows,
                path_rows,
                identity_rel: identity_error(&table),
                budget_hit,
            })
        })
        .collect();

    let mut out = KindOutput::new();
    let mut l_csv = String::from("replica");
    grid_header("q", d, &mut l_csv);
    grid_header("lambda", d, &mut l_csv);
    l_csv.push_str(",l_n,target,gap,z_n\n");
    let mut paths_csv = String::from("replica");
    grid_header("q", d, &mut paths_csv);
    paths_csv.push_str(",path,k");
    grid_header("s_over_k", d, &mut paths_csv);
    paths_csv.push_str(",log_mu,log_y\n");
    let mut worst_l_gap = 0.0f64;
    let mut worst_identity = 0.0f64;
    for (r, result) in per_replica.into_iter().enumerate() {
        let result = result?;
        if let Some(level) = result.budget_hit {
            out.flagged.push(format!(
                "cascade replica {r}: budget exceeded at level {level}"
            ));
            out.incomplete = true;
        }
        for (q, lambda, l_n, target, z_n) in &result.l_rows {
            write!(l_csv, "{r}").unwrap();
            write_coords(q, &mut l_csv);
            write_coords(lambda, &mut l_csv);
            writeln!(l_csv, ",{l_n},{target},{},{z_n}", l_n - target).unwrap();
            worst_l_gap = worst_l_gap.max((l_n - target).abs());
        }
        paths_csv.push_str(&result.path_rows);
        worst_identity = worst_identity.max(result.identity_rel);
    }
    out.files.push(("cascade.csv".into(), l_csv));
    out.files.push(("paths.csv".into(), paths_csv));
    out.checks.push(CheckResult {
        name: "cascade_exact_identities".into(),
        passed: worst_identity <= config.tolerances.identity_rel,
        value: worst_identity,
        threshold: config.tolerances.identity_rel,
    });
    out.checks.push(CheckResult {
        name: "l_n_gap".into(),
        passed: worst_l_gap <= config.tolerances.l_gap,
        value: worst_l_gap,
        threshold: config.tolerances.l_gap,
    });
    Ok(out)
}

fn run_spectrum(config: &ExperimentConfig) -> Result<KindOutput> {
    let spec = config.model.clone();
    let d = spec.dim();
    let qgrid = config.q_grid.build(d);
    let fit_from = config.effective_fit_from();

    struct Row {
        replica: usize,
        epsilon: f64,
        alpha: Vec<f64>,
        slope: Option<(f64, f64)>,
        local: Option<(f64, f64)>,
        analytic: f64,
        flagged: Option<String>,
    }
    let jobs: Vec<(usize, f64)> = (0..config.replicas)
        .flat_map(|r| config.epsilons.iter().map(move |&e| (r, e)))
        .collect();
    let per_job: Vec<Result<Vec<Row>>> = jobs
        .par_iter()
        .map(|&(r, epsilon)| {
            // the same stream per replica: every epsilon sees the same tree
            let mut rng = replica_rng(config.master_seed, r as u64);
            let opts = SpectrumOptions {
                hist_depth: config.depth,
                fit_from,
                fit_to: config.depth,
                epsilon,
                cascade_depth: config.effective_cascade_depth(),
                paths: config.paths,
                budget: config.budget,
            };
            let est = assemble_spectrum(&spec, &qgrid, &opts, &mut rng)?;
            Ok(est
                .points
                .into_iter()
                .map(|p| {
                    let (slope, flagged) = match p.ldp {
                        LdpSlope::Fitted { slope, stderr, .. } => (Some((slope, stderr)), None),
                        LdpSlope::EmptyPhase => (
                            None,
                            Some(format!(
                                "spectrum replica {r} eps {epsilon}: empty phase at alpha {:?}",
                                p.alpha
                            )),
                        ),
                    };
                    Row {
                        replica: r,
                        epsilon,
                        alpha: p.alpha,
                        slope,
                        local: p.local_dim,
                        analytic: p.analytic,
                        flagged,
                    }
                })
                .collect())
        })
        .collect();

    let mut out = KindOutput::new();
    let mut csv = String::from("replica,epsilon");
    grid_header("alpha", d, &mut csv);
    csv.push_str(",slope,stderr,local_dim,local_spread,analytic,fit_from,fit_to\n");
    let primary_eps = config.epsilons[0];
    let mut worst = 0.0f64;
    for rows in per_job {
        for row in rows? {
            write!(csv, "{},{}", row.replica, row.epsilon).unwrap();
            write_coords(&row.alpha, &mut csv);
            match row.slope {
                Some((s, se)) => write!(csv, ",{s},{se}").unwrap(),
                None => csv.push_str(",,"),
            }
            match row.local {
                Some((m, sd)) => write!(csv, ",{m},{sd}").unwrap(),
                None => csv.push_str(",,"),
            }
            writeln!(csv, ",{},{},{}", row.analytic, fit_from, config.depth).unwrap();
            if let Some(msg) = row.flagged {
                out.flagged.push(msg);
            }
            if row.epsilon == primary_eps {
                if let Some((s, _)) = row.slope {
                    worst = worst.max((s - row.analytic).abs());
                }
                if let Some((m, _)) = row.local {
                    worst = worst.max((m - row.analytic).abs());
                }
            }
        }
    }
    out.files.push(("spectrum.csv".into(), csv));
    out.checks.push(CheckResult {
        name: "spectrum_estimators_vs_analytic".into(),
        passed: worst <= config.tolerances.spectrum_gap,
        value: worst,
        threshold: config.tolerances.spectrum_gap,
    });
    Ok(out)
}

/// Prints the closed-form `P̃`, `∇P̃` and `P̃*(∇P̃)` tables for a model on
/// a q-grid; backs the `brwmf oracles` subcommand.
pub fn oracle_table(spec: &ModelSpec, grid: &QGrid) -> String {
    let d = spec.dim();
    let mut csv = String::from("point");
    grid_header("q", d, &mut csv);
    csv.push_str(",p_tilde");
    grid_header("grad", d, &mut csv);
    csv.push_str(",conjugate_at_grad\n");
    for (i, q) in grid.points.iter().enumerate() {
        write!(csv, "{i}").unwrap();
        write_coords(q, &mut csv);
        write!(csv, ",{}", spec.log_mgf(q)).unwrap();
        write_coords(&spec.grad_log_mgf(q), &mut csv);
        writeln!(csv, ",{}", crate::legendre::conjugate_at_gradient(spec, q)).unwrap();
    }
    csv
}

/// Keeps a clippy-friendly reference to `TreeRun` for downstream users of
/// this module's public surface.
pub type ExperimentRun = TreeRun;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn small_config(dir: &Path, kind: &str) -> ExperimentConfig {
        let text = format!(
            r#"
kind = "{kind}"
depth = 10
replicas = 2
master_seed = 7
output_dir = "{}"
epsilons = [0.1]
paths = 20
fit_from = 6

[model]
family = "binary_rademacher"

[q_grid]
min = -0.5
max = 0.5
per_axis = 5
"#,
            dir.display()
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn domains_run_writes_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), "domains");
        let manifest = run_experiment(&config, 1).unwrap();
        assert!(manifest.passed);
        assert!(dir.path().join("domains.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn pressure_run_passes_at_modest_depth() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), "pressure");
        config.depth = 14;
        config.tolerances.pressure_gap = 0.2; // shallow run, loose check
        let manifest = run_experiment(&config, 2).unwrap();
        assert!(manifest.passed, "checks: {:?}", manifest.checks);
        let body = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
        assert!(body.starts_with("replica,n,q_0,p_n,p_tilde,gap\n"));
    }

    #[test]
    fn cascade_run_verifies_exact_identities() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path(), "cascade");
        let manifest = run_experiment(&config, 2).unwrap();
        let identity = manifest
            .checks
            .iter()
            .find(|c| c.name == "cascade_exact_identities")
            .unwrap();
        assert!(identity.passed, "identity error {}", identity.value);
    }

    #[test]
    fn spectrum_run_emits_three_way_comparison() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), "spectrum");
        config.depth = 12;
        config.fit_from = Some(8);
        config.tolerances.spectrum_gap = 0.3; // shallow run
        let manifest = run_experiment(&config, 1).unwrap();
        assert!(manifest.passed, "checks: {:?}", manifest.checks);
        let body = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        assert!(body.contains("slope,stderr,local_dim"));
    }

    #[test]
    fn identical_seeds_give_identical_bytes_across_parallelism() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut config_a = small_config(dir_a.path(), "cascade");
        let mut config_b = small_config(dir_b.path(), "cascade");
        config_a.depth = 8;
        config_b.depth = 8;
        run_experiment(&config_a, 1).unwrap();
        run_experiment(&config_b, 8).unwrap();
        for name in ["cascade.csv", "paths.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across parallelism");
        }
    }

    #[test]
    fn budget_exhaustion_is_marked_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path(), "pressure");
        config.budget = 50;
        let manifest = run_experiment(&config, 1).unwrap();
        assert!(manifest.incomplete);
        assert!(!manifest.passed);
        assert!(!manifest.flagged.is_empty());
    }

    #[test]
    fn oracle_table_contains_closed_forms() {
        let table = oracle_table(&ModelSpec::BinaryRademacher, &QGrid::line(0.0, 1.0, 2));
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(&2f64.ln().to_string()));
    }
}
