//! Scans the admissible parameter domains of a planar Gaussian-increment
//! model. For Poisson(1)+1 offspring with isotropic unit Gaussian steps,
//! J = { q : P~(q) - <q, grad P~(q)> > 0 } is the open disc of radius
//! sqrt(2 log 2), and the scan recovers that circle from the generic
//! predicate alone.
//!
//!     cargo run --example domain_scan

use brwmf::model::ModelSpec;
use brwmf::pressure::{domain_scan, find_p_k, QGrid};

fn main() {
    let spec = ModelSpec::ShiftedPoissonGaussian {
        d: 2,
        lambda: 1.0,
        mean: vec![0.0, 0.0],
        sigma: 1.0,
    };
    let grid = QGrid::uniform_box(2, -1.5, 1.5, 31);
    let scan = domain_scan(&spec, &grid, &[1.5, 2.0]).unwrap();

    // ascii picture: rows are q_1, columns q_0; '#' marks the set where
    // the multifractal formalism applies, '.' the rest
    let res = 31;
    for row in (0..res).rev() {
        let mut line = String::new();
        for col in 0..res {
            let idx = col * res + row; // last-axis-fastest layout
            line.push(if scan.in_cal_j[idx] { '#' } else { '.' });
        }
        println!("{line}");
    }
    let radius = (2.0 * 2f64.ln()).sqrt();
    println!("\nanalytic boundary: ||q|| = sqrt(2 log 2) = {radius:.4}");

    let inside: Vec<Vec<f64>> = grid
        .points
        .iter()
        .zip(&scan.in_cal_j)
        .filter(|(_, &ok)| ok)
        .map(|(q, _)| q.clone())
        .collect();
    let sub = QGrid {
        points: inside,
        bounds: grid.bounds.clone(),
        resolution: grid.resolution,
    };
    let p_k = find_p_k(&spec, &sub).unwrap();
    println!("moment exponent with E phi(p, q) < 1 on the scanned set: p = {p_k:.3}");
}
