//! Builds the cascade martingale table Y_k(u, q) on a materialized tree and
//! demonstrates the two identities that hold exactly (up to rounding):
//! the branching recursion and the additivity of the induced measure
//! mu([u]) = exp(<q, S_k(u)> - k P~(q)) Y_{n-k}(u, q).
//!
//!     cargo run --example cascade_measure

use brwmf::cascade::build_cascade;
use brwmf::model::ModelSpec;
use brwmf::pressure::QGrid;
use brwmf::tree::{run_to_depth, GrowthMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let spec = ModelSpec::BinaryRademacher;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let run = run_to_depth(&spec, 12, GrowthMode::Materialize, 30_000_000, &mut rng).unwrap();
    let qgrid = QGrid::line(-0.5, 0.5, 5);
    let table = build_cascade(run, qgrid).unwrap();

    println!("root martingale values Y_12(root, q):");
    for (qi, q) in table.qgrid.points.iter().enumerate() {
        println!("  q = {:+.2}: Y = {:.4}", q[0], table.log_y(0, 0, qi).exp());
    }

    // total mass at every level equals the root martingale value
    let qi = table.q_index(&[0.5]).unwrap();
    println!("\ntotal mu_q mass per level (q = 0.5):");
    for k in [1usize, 4, 8, 12] {
        let weights = table.measure_weights(k, qi);
        let total: f64 = weights.log_mu.iter().map(|w| w.exp()).sum();
        println!("  level {k:>2}: {total:.10}");
    }

    // one path sampled from the normalized measure
    let path = table.sample_path(qi, &mut rng);
    println!("\na mu_q-typical path (q = 0.5):");
    println!("{:>4} {:>8} {:>10} {:>10}", "k", "S_k/k", "log mu", "log Y");
    for k in 1..path.nodes.len() {
        println!(
            "{k:>4} {:>8.3} {:>10.4} {:>10.4}",
            path.path_sums[k][0] / k as f64,
            path.log_mu[k],
            path.log_y[k]
        );
    }
    println!(
        "\nthe drift S_k/k tends to grad P~(0.5) = tanh(0.5) = {:.4}",
        0.5f64.tanh()
    );
}
