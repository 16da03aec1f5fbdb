//! Empirical pressure `P_n(q)`, the contraction function `φ(p,q)` and scans
//! of the domains `J`, `𝒥` and `I = ∇P̃(𝒥)`.

use serde::{Deserialize, Serialize};

use crate::math::{dot, LogSumExpAcc};
use crate::model::ModelSpec;
use crate::tree::LevelFrame;
use crate::{BrwError, Result};

/// A finite grid of q vectors, kept with the box it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub points: Vec<Vec<f64>>,
    /// Per-axis `(min, max)` bounds of the generating box.
    pub bounds: Vec<(f64, f64)>,
    /// Points per axis.
    pub resolution: usize,
}

impl QGrid {
    /// Uniform grid over the box `[min, max]^d` with `per_axis` points per
    /// axis, enumerated last-axis-fastest.
    pub fn uniform_box(d: usize, min: f64, max: f64, per_axis: usize) -> Self {
        assert!(per_axis >= 1 && max >= min && d >= 1);
        let axis: Vec<f64> = if per_axis == 1 {
            vec![0.5 * (min + max)]
        } else {
            (0..per_axis)
                .map(|i| min + (max - min) * i as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let mut points = vec![Vec::new()];
        for _ in 0..d {
            let mut next = Vec::with_capacity(points.len() * per_axis);
            for p in &points {
                for a in &axis {
                    let mut q = p.clone();
                    q.push(*a);
                    next.push(q);
                }
            }
            points = next;
        }
        QGrid {
            points,
            bounds: vec![(min, max); d],
            resolution: per_axis,
        }
    }

    /// One-dimensional grid over `[min, max]`.
    pub fn line(min: f64, max: f64, count: usize) -> Self {
        Self::uniform_box(1, min, max, count)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis step length of the generating box (0 for single-point axes).
    pub fn cell_width(&self) -> f64 {
        if self.resolution <= 1 {
            return 0.0;
        }
        self.bounds
            .iter()
            .map(|(lo, hi)| (hi - lo) / (self.resolution - 1) as f64)
            .fold(0.0, f64::max)
    }
}

/// Per-point membership flags for the domains of the analysis.
#[derive(Debug, Clone)]
pub struct DomainScan {
    pub grid: QGrid,
    /// `P̃(q) − ⟨q, ∇P̃(q)⟩ > 0`.
    pub in_j: Vec<bool>,
    /// Moment-finiteness region membership (`Ω¹`).
    pub in_omega1: Vec<bool>,
    /// `𝒥 = J ∩ Ω¹`, pointwise conjunction.
    pub in_cal_j: Vec<bool>,
    /// `∇P̃(q)` for points of `𝒥`, `None` elsewhere.
    pub alpha_image: Vec<Option<Vec<f64>>>,
}

/// The empirical pressure
/// `P_n(q) = (1/n) log Σ_{u ∈ T_n} exp⟨q, S_n(u)⟩`
/// at the frame's depth. Accumulation is max-shifted and in fixed node
/// order, so the value is byte-reproducible.
pub fn empirical_pressure(frame: &LevelFrame, q: &[f64]) -> f64 {
    assert!(frame.depth >= 1, "pressure needs depth >= 1");
    assert_eq!(q.len(), frame.dim);
    let mut acc = LogSumExpAcc::new();
    for u in 0..frame.node_count() {
        acc.add(dot(q, frame.path_sum_of(u)));
    }
    acc.value() / frame.depth as f64
}

/// `φ(p, q) = exp(P̃(pq) − p P̃(q))`, the contraction ratio controlling the
/// L^p convergence of the cascade martingales.
pub fn phi(spec: &ModelSpec, p: f64, q: &[f64]) -> f64 {
    assert!(p >= 1.0, "phi is defined for p >= 1");
    let pq: Vec<f64> = q.iter().map(|x| p * x).collect();
    (spec.log_mgf(&pq) - p * spec.log_mgf(q)).exp()
}

/// Lattice resolution of the `p` search in [`find_p_k`].
const P_LATTICE_STEP: f64 = 1e-3;

/// Finds the largest `p` on a 1e-3 lattice in `(1, 2]` with
/// `sup_{q ∈ K} φ(p, q) < 1`.
///
/// `φ(·, q)` is log-convex with `φ(1, q) = 1` and negative slope at `1⁺`
/// for `q ∈ 𝒥`, so the feasible set is an interval `(1, p_max)` and
/// checking the lattice point itself suffices.
pub fn find_p_k(spec: &ModelSpec, grid: &QGrid) -> Result<f64> {
    let sup_phi = |p: f64| -> f64 {
        grid.points
            .iter()
            .map(|q| phi(spec, p, q))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if sup_phi(2.0) < 1.0 {
        return Ok(2.0);
    }
    let steps = ((2.0 - 1.0) / P_LATTICE_STEP).round() as usize;
    let p_of = |i: usize| 1.0 + i as f64 * P_LATTICE_STEP;
    if sup_phi(p_of(1)) >= 1.0 {
        return Err(BrwError::InfeasibleGrid(
            "phi(p, q) >= 1 already at p = 1.001; some grid point lies outside \
             (or too close to the boundary of) the domain"
                .into(),
        ));
    }
    // bisect for the last feasible lattice index
    let mut lo = 1usize; // feasible
    let mut hi = steps; // infeasible (phi(2) >= 1 checked above)
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if sup_phi(p_of(mid)) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(p_of(lo))
}

/// Classifies every grid point against `J`, `Ω¹` and `𝒥`, attaching
/// `∇P̃(q)` on `𝒥`. Membership uses the closed-form predicates only; grid
/// points are never interpolated.
pub fn domain_scan(spec: &ModelSpec, grid: &QGrid, gamma_probe: &[f64]) -> Result<DomainScan> {
    let mut in_j = Vec::with_capacity(grid.len());
    let mut in_omega1 = Vec::with_capacity(grid.len());
    let mut in_cal_j = Vec::with_capacity(grid.len());
    let mut alpha_image = Vec::with_capacity(grid.len());
    for q in &grid.points {
        let grad = spec.grad_log_mgf(q);
        let j = spec.log_mgf(q) - dot(q, &grad) > 0.0;
        let mut omega = false;
        for &gamma in gamma_probe {
            if spec.moment_gamma_finite(q, gamma)? {
                omega = true;
                break;
            }
        }
        let cal_j = j && omega;
        in_j.push(j);
        in_omega1.push(omega);
        in_cal_j.push(cal_j);
        alpha_image.push(if cal_j { Some(grad) } else { None });
    }
    Ok(DomainScan {
        grid: grid.clone(),
        in_j,
        in_omega1,
        in_cal_j,
        alpha_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{run_to_depth, GrowthMode, DEFAULT_NODE_BUDGET};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spg2() -> ModelSpec {
        ModelSpec::ShiftedPoissonGaussian {
            d: 2,
            lambda: 1.0,
            mean: vec![0.0, 0.0],
            sigma: 1.0,
        }
    }

    #[test]
    fn pressure_at_zero_is_log_node_count_over_n() {
        let spec = spg2();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let run = run_to_depth(&spec, 8, GrowthMode::Stream, 1_000_000, &mut rng).unwrap();
        let frame = run.deepest();
        let p = empirical_pressure(frame, &[0.0, 0.0]);
        let expect = (frame.node_count() as f64).ln() / 8.0;
        assert_eq!(p, expect);
    }

    #[test]
    fn pressure_converges_to_annealed_value_on_binary_model() {
        let spec = ModelSpec::BinaryRademacher;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let run =
            run_to_depth(&spec, 20, GrowthMode::Stream, DEFAULT_NODE_BUDGET, &mut rng).unwrap();
        let p20 = empirical_pressure(run.deepest(), &[1.0]);
        let target = spec.log_mgf(&[1.0]);
        assert!((p20 - target).abs() < 0.05, "P_20 = {p20}, target {target}");
    }

    #[test]
    fn pressure_upper_bound_with_finite_n_slack() {
        let spec = ModelSpec::BinaryRademacher;
        let grid = QGrid::line(-1.0, 1.0, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let run = run_to_depth(
            &spec,
            18,
            GrowthMode::Materialize,
            DEFAULT_NODE_BUDGET,
            &mut rng,
        )
        .unwrap();
        for k in 15..=18 {
            let frame = run.frame(k);
            for q in &grid.points {
                let pn = empirical_pressure(frame, q);
                let pt = spec.log_mgf(q);
                assert!(
                    pn <= pt + 0.1,
                    "n={k} q={q:?}: P_n={pn} > P~+0.1={}",
                    pt + 0.1
                );
            }
        }
    }

    #[test]
    fn phi_is_one_at_p_equal_one() {
        let spec = spg2();
        for q in &QGrid::uniform_box(2, -0.8, 0.8, 5).points {
            assert_eq!(phi(&spec, 1.0, q), 1.0);
        }
    }

    #[test]
    fn phi_closed_form_binary() {
        let spec = ModelSpec::BinaryRademacher;
        let expect = (2f64.ln() + 1f64.cosh().ln() - 2.0 * (2f64.ln() + 0.5f64.cosh().ln())).exp();
        let got = phi(&spec, 2.0, &[0.5]);
        assert!((got - expect).abs() < 1e-14);
        assert!((got - 0.606776).abs() < 1e-4);
    }

    #[test]
    fn phi_at_q_zero_decays_in_p() {
        let spec = spg2();
        for p in [1.2, 1.5, 2.0] {
            let expect = ((1.0 - p) * 2f64.ln()).exp();
            assert!((phi(&spec, p, &[0.0, 0.0]) - expect).abs() < 1e-14);
            assert!(expect < 1.0);
        }
    }

    #[test]
    fn phi_log_convex_in_p() {
        let spec = ModelSpec::BinaryRademacher;
        for q in &QGrid::line(-2.0, 2.0, 9).points {
            let ps = [1.0, 1.25, 1.5, 1.75, 2.0];
            for w in ps.windows(3) {
                let (p1, p2, p3) = (w[0], w[1], w[2]);
                let l1 = phi(&spec, p1, q).ln();
                let l2 = phi(&spec, p2, q).ln();
                let l3 = phi(&spec, p3, q).ln();
                let t = (p2 - p1) / (p3 - p1);
                assert!(l2 <= (1.0 - t) * l1 + t * l3 + 1e-10);
            }
        }
    }

    #[test]
    fn find_p_k_caps_at_two_for_origin() {
        // phi(p, 0) = 2^{1-p} < 1 on (1, 2]
        let spec = ModelSpec::BinaryRademacher;
        let grid = QGrid {
            points: vec![vec![0.0]],
            bounds: vec![(0.0, 0.0)],
            resolution: 1,
        };
        assert_eq!(find_p_k(&spec, &grid).unwrap(), 2.0);
    }

    #[test]
    fn find_p_k_on_interval_grid_is_strictly_contracting() {
        let spec = ModelSpec::BinaryRademacher;
        let grid = QGrid::line(-1.0, 1.0, 21);
        let p = find_p_k(&spec, &grid).unwrap();
        assert!(p > 1.0 && p <= 2.0);
        let sup: f64 = grid
            .points
            .iter()
            .map(|q| phi(&spec, p, q))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(sup < 1.0, "sup phi(p_K, q) = {sup}");
    }

    #[test]
    fn phi_slope_at_one_is_negative_inside_domain() {
        let spec = ModelSpec::BinaryRademacher;
        for q in &QGrid::line(-1.0, 1.0, 21).points {
            let h = 1e-4;
            let slope = (phi(&spec, 1.0 + h, q) - phi(&spec, 1.0, q)) / h;
            assert!(slope < 0.0, "slope at q={q:?} is {slope}");
        }
    }

    #[test]
    fn spg_domain_boundary_is_the_expected_circle() {
        let spec = spg2();
        let grid = QGrid::uniform_box(2, -2.0, 2.0, 41);
        let scan = domain_scan(&spec, &grid, &[2.0]).unwrap();
        let r = (2.0 * 2f64.ln()).sqrt();
        let cell = grid.cell_width();
        for (q, &inside) in grid.points.iter().zip(&scan.in_j) {
            let norm = (q[0] * q[0] + q[1] * q[1]).sqrt();
            if norm < r - cell {
                assert!(inside, "q={q:?} should be in J");
            }
            if norm > r + cell {
                assert!(!inside, "q={q:?} should be outside J");
            }
        }
    }

    #[test]
    fn binary_model_domain_is_everything() {
        let spec = ModelSpec::BinaryRademacher;
        let grid = QGrid::line(-10.0, 10.0, 41);
        let scan = domain_scan(&spec, &grid, &[1.5, 2.0]).unwrap();
        assert!(scan.in_j.iter().all(|&b| b));
        assert!(scan.in_cal_j.iter().all(|&b| b));
        for (flag, alpha) in scan.in_cal_j.iter().zip(&scan.alpha_image) {
            assert_eq!(*flag, alpha.is_some());
        }
    }

    #[test]
    fn origin_in_j_for_supercritical_models() {
        for spec in [ModelSpec::BinaryRademacher, spg2()] {
            let d = spec.dim();
            let grid = QGrid {
                points: vec![vec![0.0; d]],
                bounds: vec![(0.0, 0.0); d],
                resolution: 1,
            };
            let scan = domain_scan(&spec, &grid, &[2.0]).unwrap();
            assert!(scan.in_j[0]);
        }
    }

    #[test]
    fn pressure_is_permutation_stable_via_fixed_order() {
        // evaluating twice on the same frame must agree bitwise
        let spec = spg2();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let run = run_to_depth(&spec, 10, GrowthMode::Stream, 1_000_000, &mut rng).unwrap();
        let a = empirical_pressure(run.deepest(), &[0.4, -0.3]);
        let b = empirical_pressure(run.deepest(), &[0.4, -0.3]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
