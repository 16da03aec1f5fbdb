//! Drives the whole pipeline through the config layer, exactly like the
//! `brwmf run` binary: parse a TOML config, execute every stage, and write
//! CSV artifacts plus a JSON manifest with pass/fail checks.
//!
//!     cargo run --example full_experiment

use brwmf::config::parse_config_str;
use brwmf::experiment::run_experiment;

const CONFIG: &str = r#"
kind = "full"
depth = 12
replicas = 2
master_seed = 2024
output_dir = "target/full_experiment_out"
epsilons = [0.1]
paths = 50
fit_from = 7
cascade_depth = 10

[model]
family = "binary_rademacher"

[q_grid]
min = -0.5
max = 0.5
per_axis = 5

[tolerances]
pressure_gap = 0.1
spectrum_gap = 0.25
l_gap = 0.2
"#;

fn main() {
    let config = parse_config_str(CONFIG).unwrap();
    println!("config hash: {}", config.hash());
    let manifest = run_experiment(&config, 4).unwrap();
    for check in &manifest.checks {
        let status = if check.passed { "pass" } else { "FAIL" };
        println!(
            "{status}  {:<35} value = {:>12.6e}  threshold = {:>10.3e}",
            check.name, check.value, check.threshold
        );
    }
    for note in &manifest.flagged {
        println!("flagged: {note}");
    }
    println!(
        "\nwrote {:?} and manifest.json to {} in {:.2}s",
        manifest.outputs,
        config.output_dir.display(),
        manifest.wall_clock_secs
    );
    println!(
        "overall: {}",
        if manifest.passed { "passed" } else { "failed" }
    );
}
