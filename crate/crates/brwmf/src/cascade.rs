//! Mandelbrot cascade martingales, cylinder measures and their moment
//! generating functions, built by exact backward recursion on a
//! materialized tree.
//!
//! The table stores `log Y_{n−k}(u, q)` for every node `u` at every level
//! `k ≤ n` across a q-grid. At the leaves `Y_0 = 1`; one level up,
//! `Y_{k+1}(u, q) = Σ_{i=1}^{N_u} e^{⟨q, X_{ui}⟩ − P̃(q)} Y_k(ui, q)`.
//! The limit martingale `Y(u, q)` is replaced by this finite-depth
//! truncation throughout, which makes the cylinder weights an exactly
//! additive measure on level-n cylinders and turns the asymptotic
//! statements into finite-n trend checks.

use rand::Rng;

use crate::math::{dist, dot, LogSumExpAcc};
use crate::pressure::QGrid;
use crate::tree::TreeRun;
use crate::{BrwError, Result};

/// `log Y_{n−k}(u, q)` for all levels, nodes and grid points.
#[derive(Debug, Clone)]
pub struct CascadeTable {
    pub run: TreeRun,
    pub qgrid: QGrid,
    /// `P̃(q)` per grid point.
    pub log_p_tilde: Vec<f64>,
    /// `log_y[k][u * nq + qi]` holds `log Y_{n−k}(u, q_qi)`.
    log_y: Vec<Vec<f64>>,
    /// Start of each node's child block in the next frame, per level.
    child_offsets: Vec<Vec<u32>>,
}

/// Log cylinder weights `log μ_q^{(n)}([u])` for the nodes of one level,
/// at one grid point.
#[derive(Debug, Clone)]
pub struct MeasureWeights {
    pub level: usize,
    pub q_index: usize,
    pub log_mu: Vec<f64>,
}

/// One sampled μ_q-typical path with per-prefix diagnostics.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub q_index: usize,
    /// Node index of the prefix at each level `0..=n`.
    pub nodes: Vec<usize>,
    /// `log μ_q^{(n)}([t_{|k}])` per prefix.
    pub log_mu: Vec<f64>,
    /// `S_k(t)` per prefix.
    pub path_sums: Vec<Vec<f64>>,
    /// `log Y_{n−k}(t_{|k}, q)` per prefix.
    pub log_y: Vec<f64>,
}

/// Builds the cascade table by a backward sweep from the leaves.
///
/// The root value equals the forward definition of `Y_n(q)` exactly, since
/// the branching recursion telescopes the normalized partition sum.
pub fn build_cascade(run: TreeRun, qgrid: QGrid) -> Result<CascadeTable> {
    if !run.is_materialized() {
        return Err(BrwError::NotMaterialized);
    }
    let n = run.completed_depth;
    let d = run.spec.dim();
    for q in &qgrid.points {
        if q.len() != d {
            return Err(BrwError::DimensionMismatch {
                expected: d,
                got: q.len(),
            });
        }
    }
    let nq = qgrid.len();
    let log_p_tilde: Vec<f64> = qgrid.points.iter().map(|q| run.spec.log_mgf(q)).collect();

    // child block offsets: children are parent-major, so each parent's
    // block is contiguous and offsets come from one counting pass
    let mut child_offsets: Vec<Vec<u32>> = Vec::with_capacity(n);
    for k in 0..n {
        let parents = run.frame(k).node_count();
        let child_frame = run.frame(k + 1);
        let mut offsets = vec![0u32; parents + 1];
        for &p in &child_frame.parent_index {
            offsets[p as usize + 1] += 1;
        }
        for i in 0..parents {
            offsets[i + 1] += offsets[i];
        }
        child_offsets.push(offsets);
    }

    let mut log_y: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    log_y[n] = vec![0.0; run.frame(n).node_count() * nq];
    for k in (0..n).rev() {
        let frame = run.frame(k);
        let child_frame = run.frame(k + 1);
        let offsets = &child_offsets[k];
        let child_log_y = std::mem::take(&mut log_y[k + 1]);
        let mut level = vec![0.0; frame.node_count() * nq];
        for u in 0..frame.node_count() {
            let (start, end) = (offsets[u] as usize, offsets[u + 1] as usize);
            for qi in 0..nq {
                let q = &qgrid.points[qi];
                let mut acc = LogSumExpAcc::new();
                for c in start..end {
                    let w = dot(q, child_frame.displacement_of(c)) - log_p_tilde[qi];
                    acc.add(w + child_log_y[c * nq + qi]);
                }
                level[u * nq + qi] = acc.value();
            }
        }
        log_y[k + 1] = child_log_y;
        log_y[k] = level;
    }
    Ok(CascadeTable {
        run,
        qgrid,
        log_p_tilde,
        log_y,
        child_offsets,
    })
}

impl CascadeTable {
    /// Depth of the underlying run.
    pub fn depth(&self) -> usize {
        self.run.completed_depth
    }

    /// Locates `q` as an exact grid point.
    pub fn q_index(&self, q: &[f64]) -> Result<usize> {
        self.qgrid
            .points
            .iter()
            .position(|p| p.as_slice() == q)
            .ok_or_else(|| BrwError::QNotOnGrid(q.to_vec()))
    }

    /// `log Y_{n−k}(u, q_qi)` for node `u` at level `k`.
    pub fn log_y(&self, level: usize, node: usize, q_index: usize) -> f64 {
        self.log_y[level][node * self.qgrid.len() + q_index]
    }

    /// Child index range of node `u` at level `k` in level `k + 1`.
    pub fn children(&self, level: usize, node: usize) -> std::ops::Range<usize> {
        let offsets = &self.child_offsets[level];
        offsets[node] as usize..offsets[node + 1] as usize
    }

    /// Cylinder weights `log μ_q^{(n)}([u]) = ⟨q, S_k(u)⟩ − k P̃(q)
    /// + log Y_{n−k}(u, q)` for all nodes of level `k`.
    pub fn measure_weights(&self, k: usize, q_index: usize) -> MeasureWeights {
        assert!(k <= self.depth());
        let frame = self.run.frame(k);
        let q = &self.qgrid.points[q_index];
        let p_tilde = self.log_p_tilde[q_index];
        let log_mu = (0..frame.node_count())
            .map(|u| dot(q, frame.path_sum_of(u)) - k as f64 * p_tilde + self.log_y(k, u, q_index))
            .collect();
        MeasureWeights {
            level: k,
            q_index,
            log_mu,
        }
    }

    /// Samples one path from the root by the exact conditional child
    /// weights `μ([ui]) / μ([u])`; normalization is exact by additivity.
    pub fn sample_path<R: Rng>(&self, q_index: usize, rng: &mut R) -> SampledPath {
        let n = self.depth();
        let q = &self.qgrid.points[q_index];
        let p_tilde = self.log_p_tilde[q_index];
        let mut nodes = Vec::with_capacity(n + 1);
        let mut log_mu = Vec::with_capacity(n + 1);
        let mut path_sums = Vec::with_capacity(n + 1);
        let mut log_y = Vec::with_capacity(n + 1);
        let mut u = 0usize;
        let mut current_log_mu = self.log_y(0, 0, q_index);
        for k in 0..=n {
            let frame = self.run.frame(k);
            nodes.push(u);
            log_mu.push(current_log_mu);
            path_sums.push(frame.path_sum_of(u).to_vec());
            log_y.push(self.log_y(k, u, q_index));
            if k == n {
                break;
            }
            let child_frame = self.run.frame(k + 1);
            let parent_log_y = self.log_y(k, u, q_index);
            let range = self.children(k, u);
            let draw: f64 = rng.random();
            let mut cum = 0.0;
            let mut chosen = range.end - 1;
            let mut chosen_weight = 0.0;
            for c in range.clone() {
                let w = dot(q, child_frame.displacement_of(c)) - p_tilde
                    + self.log_y(k + 1, c, q_index)
                    - parent_log_y;
                let p = w.exp();
                cum += p;
                if draw < cum {
                    chosen = c;
                    chosen_weight = w;
                    break;
                }
                chosen_weight = w; // falls through to the last child
            }
            current_log_mu += chosen_weight;
            u = chosen;
        }
        SampledPath {
            q_index,
            nodes,
            log_mu,
            path_sums,
            log_y,
        }
    }

    /// `L_n(q, λ) = (1/n) log Σ_{u ∈ T_n} e^{⟨λ, S_n(u)⟩} μ^{(n)}([u])`.
    ///
    /// With the leaf surrogate `Y_0 = 1` the leaf weights collapse, so this
    /// equals `(1/n) log Σ e^{⟨q+λ, S_n(u)⟩} − P̃(q)` and `q`, `λ` need not
    /// lie on the table's grid.
    pub fn l_n(&self, q: &[f64], lambda: &[f64]) -> f64 {
        let n = self.depth();
        assert!(n >= 1);
        let frame = self.run.frame(n);
        let shifted: Vec<f64> = q.iter().zip(lambda).map(|(a, b)| a + b).collect();
        let mut acc = LogSumExpAcc::new();
        for u in 0..frame.node_count() {
            acc.add(dot(&shifted, frame.path_sum_of(u)));
        }
        acc.value() / n as f64 - self.run.spec.log_mgf(q)
    }

    /// `Z_n(q, λ) = Σ_{u ∈ T_n} e^{⟨q+λ, S_n(u)⟩ − n P̃(q+λ)}` with the leaf
    /// surrogate `Y_0 = 1`; satisfies
    /// `Z_n = exp(n L_n − n (P̃(q+λ) − P̃(q)))` exactly.
    pub fn z_n(&self, q: &[f64], lambda: &[f64]) -> f64 {
        let n = self.depth();
        let frame = self.run.frame(n);
        let shifted: Vec<f64> = q.iter().zip(lambda).map(|(a, b)| a + b).collect();
        let mut acc = LogSumExpAcc::new();
        for u in 0..frame.node_count() {
            acc.add(dot(&shifted, frame.path_sum_of(u)));
        }
        (acc.value() - n as f64 * self.run.spec.log_mgf(&shifted)).exp()
    }

    /// Normalized μ_q-mass of `{u at level k : ‖S_k(u)/k − ∇P̃(q)‖ ≥ ε}`
    /// for each level `k = 1..=n`.
    pub fn concentration_mass(&self, q_index: usize, epsilon: f64) -> Vec<f64> {
        let n = self.depth();
        let q = &self.qgrid.points[q_index];
        let target = self.run.spec.grad_log_mgf(q);
        let total = self.log_y(0, 0, q_index);
        let mut masses = Vec::with_capacity(n);
        for k in 1..=n {
            let weights = self.measure_weights(k, q_index);
            let frame = self.run.frame(k);
            let mut acc = LogSumExpAcc::new();
            let mut any = false;
            for u in 0..frame.node_count() {
                let scaled: Vec<f64> = frame.path_sum_of(u).iter().map(|s| s / k as f64).collect();
                if dist(&scaled, &target) >= epsilon {
                    acc.add(weights.log_mu[u]);
                    any = true;
                }
            }
            masses.push(if any {
                (acc.value() - total).exp()
            } else {
                0.0
            });
        }
        masses
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::mean_stderr;
    use crate::model::ModelSpec;
    use crate::tree::{run_to_depth, GrowthMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_table(depth: usize, seed: u64, qgrid: QGrid) -> CascadeTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = run_to_depth(
            &ModelSpec::BinaryRademacher,
            depth,
            GrowthMode::Materialize,
            30_000_000,
            &mut rng,
        )
        .unwrap();
        build_cascade(run, qgrid).unwrap()
    }

    #[test]
    fn y_at_q_zero_counts_population() {
        // binary model: Y_k(u, 0) = #T_k(u) / 2^k = 1 exactly
        let table = binary_table(8, 3, QGrid::line(0.0, 0.0, 1));
        for k in 0..=8 {
            let frame = table.run.frame(k);
            for u in 0..frame.node_count() {
                assert!(table.log_y(k, u, 0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn streaming_build_rejects_non_materialized_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let run = run_to_depth(
            &ModelSpec::BinaryRademacher,
            5,
            GrowthMode::Stream,
            1000,
            &mut rng,
        )
        .unwrap();
        assert!(matches!(
            build_cascade(run, QGrid::line(0.0, 0.0, 1)),
            Err(BrwError::NotMaterialized)
        ));
    }

    #[test]
    fn backward_recursion_matches_forward_brute_force() {
        // Y_2(root, q) from the definition: a direct sum over level-2 nodes
        let spec = ModelSpec::ShiftedPoissonGaussian {
            d: 2,
            lambda: 1.0,
            mean: vec![0.2, -0.1],
            sigma: 0.8,
        };
        let qs = vec![
            vec![0.3, 0.1],
            vec![-0.4, 0.25],
            vec![0.0, -0.6],
            vec![0.55, 0.55],
            vec![-0.2, -0.2],
        ];
        let qgrid = QGrid {
            points: qs.clone(),
            bounds: vec![(-0.6, 0.6); 2],
            resolution: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let run = run_to_depth(&spec, 2, GrowthMode::Materialize, 10_000, &mut rng).unwrap();
        let leaves = run.frame(2).clone();
        let table = build_cascade(run, qgrid).unwrap();
        for (qi, q) in qs.iter().enumerate() {
            let p_tilde = spec.log_mgf(q);
            let forward: f64 = (0..leaves.node_count())
                .map(|u| (dot(q, leaves.path_sum_of(u)) - 2.0 * p_tilde).exp())
                .sum();
            let backward = table.log_y(0, 0, qi).exp();
            let rel = (forward - backward).abs() / forward;
            assert!(
                rel < 1e-12,
                "q={q:?}: forward {forward}, backward {backward}"
            );
        }
    }

    #[test]
    fn branching_recursion_holds_in_linear_space() {
        let table = binary_table(10, 5, QGrid::line(-1.0, 1.0, 5));
        let nq = table.qgrid.len();
        for k in 0..10 {
            let child_frame = table.run.frame(k + 1);
            for u in 0..table.run.frame(k).node_count() {
                for qi in 0..nq {
                    let q = &table.qgrid.points[qi];
                    let recombined: f64 = table
                        .children(k, u)
                        .map(|c| {
                            (dot(q, child_frame.displacement_of(c)) - table.log_p_tilde[qi]
                                + table.log_y(k + 1, c, qi))
                            .exp()
                        })
                        .sum();
                    let stored = table.log_y(k, u, qi).exp();
                    assert!((recombined - stored).abs() / stored < 1e-12);
                }
            }
        }
    }

    #[test]
    fn martingale_mean_is_one() {
        let means: Vec<f64> = (0..2000)
            .map(|r| {
                let table = binary_table(10, 40_000 + r, QGrid::line(1.0, 1.0, 1));
                table.log_y(0, 0, 0).exp()
            })
            .collect();
        let (mean, se) = mean_stderr(&means);
        assert!((mean - 1.0).abs() < 3.0 * se, "E Y_10 = {mean} (se {se})");
    }

    #[test]
    fn one_step_martingale_property() {
        // E[Y_{k+1}(root)] = E[Y_k(root)] = 1 within Monte-Carlo error
        for depth in [4usize, 5] {
            let means: Vec<f64> = (0..800)
                .map(|r| {
                    let table = binary_table(depth, 90_000 + r, QGrid::line(0.7, 0.7, 1));
                    table.log_y(0, 0, 0).exp()
                })
                .collect();
            let (mean, se) = mean_stderr(&means);
            assert!(
                (mean - 1.0).abs() < 3.0 * se,
                "depth {depth}: {mean} ({se})"
            );
        }
    }

    #[test]
    fn measure_additivity_at_every_internal_node() {
        let table = binary_table(8, 6, QGrid::line(-0.8, 0.8, 5));
        for qi in 0..table.qgrid.len() {
            for k in 0..8 {
                let parent = table.measure_weights(k, qi);
                let child = table.measure_weights(k + 1, qi);
                for u in 0..table.run.frame(k).node_count() {
                    let sum: f64 = table.children(k, u).map(|c| child.log_mu[c].exp()).sum();
                    let own = parent.log_mu[u].exp();
                    assert!((sum - own).abs() / own < 1e-12);
                }
            }
        }
    }

    #[test]
    fn total_mass_is_root_martingale_at_every_level() {
        let table = binary_table(9, 7, QGrid::line(-0.5, 0.5, 3));
        for qi in 0..table.qgrid.len() {
            let total = table.log_y(0, 0, qi).exp();
            for k in 0..=9 {
                let weights = table.measure_weights(k, qi);
                let mass: f64 = weights.log_mu.iter().map(|l| l.exp()).sum();
                assert!((mass - total).abs() / total < 1e-12, "k={k} qi={qi}");
            }
        }
    }

    #[test]
    fn weights_at_q_zero_are_uniform_on_binary_model() {
        let table = binary_table(6, 11, QGrid::line(0.0, 0.0, 1));
        for k in 0..=6 {
            let weights = table.measure_weights(k, 0);
            for l in &weights.log_mu {
                assert!((l - (-(k as f64) * 2f64.ln())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_y_values_finite_and_positive() {
        let table = binary_table(10, 13, QGrid::line(-1.5, 1.5, 7));
        for k in 0..=10 {
            let frame = table.run.frame(k);
            for u in 0..frame.node_count() {
                for qi in 0..table.qgrid.len() {
                    assert!(table.log_y(k, u, qi).is_finite());
                }
            }
        }
    }

    #[test]
    fn sampled_paths_are_consistent_chains() {
        let table = binary_table(10, 17, QGrid::line(0.5, 0.5, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20 {
            let path = table.sample_path(0, &mut rng);
            assert_eq!(path.nodes.len(), 11);
            for k in 1..=10 {
                let frame = table.run.frame(k);
                assert_eq!(
                    frame.parent_index[path.nodes[k]] as usize,
                    path.nodes[k - 1]
                );
                // recorded log mu matches the direct cylinder weight
                let weights = table.measure_weights(k, 0);
                assert!((path.log_mu[k] - weights.log_mu[path.nodes[k]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_path_sampling_at_q_zero() {
        let table = binary_table(1, 19, QGrid::line(0.0, 0.0, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            let path = table.sample_path(0, &mut rng);
            counts[path.nodes[1]] += 1;
        }
        let freq = counts[0] as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "child-0 frequency {freq}");
    }

    #[test]
    fn typical_paths_drift_to_gradient() {
        let spec = ModelSpec::BinaryRademacher;
        // sampled paths within one tree share ancestry, so average the
        // drift over several independent trees
        let mut drifts = Vec::new();
        for tree_seed in 23..28 {
            let table = binary_table(18, tree_seed, QGrid::line(0.5, 0.5, 1));
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            for _ in 0..100 {
                let path = table.sample_path(0, &mut rng);
                drifts.push(path.path_sums[18][0] / 18.0);
            }
        }
        let (mean, _) = mean_stderr(&drifts);
        let target = spec.grad_log_mgf(&[0.5])[0];
        assert!((mean - target).abs() < 0.06, "drift {mean} vs {target}");
    }

    #[test]
    fn log_y_along_paths_is_subexponential() {
        let table = binary_table(18, 29, QGrid::line(0.5, 0.5, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 9;
        let mut ratios = Vec::new();
        for _ in 0..100 {
            let path = table.sample_path(0, &mut rng);
            ratios.push(path.log_y[k] / k as f64);
        }
        let (mean, _) = mean_stderr(&ratios);
        assert!(mean.abs() < 0.1, "mean log Y ratio at half depth: {mean}");
    }

    #[test]
    fn l_n_at_lambda_zero_is_log_root_martingale_over_n() {
        let table = binary_table(12, 31, QGrid::line(0.3, 0.3, 1));
        let got = table.l_n(&[0.3], &[0.0]);
        let expect = table.log_y(0, 0, 0) / 12.0;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn l_n_approximates_pressure_increment() {
        let spec = ModelSpec::BinaryRademacher;
        let table = binary_table(20, 38, QGrid::line(0.3, 0.3, 1));
        let got = table.l_n(&[0.3], &[0.2]);
        let target = spec.log_mgf(&[0.5]) - spec.log_mgf(&[0.3]);
        assert!((got - target).abs() < 0.05, "L_20 = {got}, target {target}");
    }

    #[test]
    fn l_n_uniform_gap_shrinks_with_depth() {
        let spec = ModelSpec::BinaryRademacher;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let run = run_to_depth(&spec, 20, GrowthMode::Materialize, 30_000_000, &mut rng).unwrap();
        let sup_gap = |table: &CascadeTable| -> f64 {
            let mut sup = 0.0f64;
            for i in 0..5 {
                for j in 0..5 {
                    let q = [0.1 * i as f64];
                    let lam = [-0.2 + 0.1 * j as f64];
                    let target = spec.log_mgf(&[q[0] + lam[0]]) - spec.log_mgf(&q);
                    sup = sup.max((table.l_n(&q, &lam) - target).abs());
                }
            }
            sup
        };
        let mut truncated = run.clone();
        truncated.frames.truncate(11);
        truncated.completed_depth = 10;
        let table10 = build_cascade(truncated, QGrid::line(0.0, 0.0, 1)).unwrap();
        let table20 = build_cascade(run, QGrid::line(0.0, 0.0, 1)).unwrap();
        let gap10 = sup_gap(&table10);
        let gap20 = sup_gap(&table20);
        assert!(
            gap20 < gap10,
            "gap at n=20 ({gap20}) >= gap at n=10 ({gap10})"
        );
        assert!(gap20 <= 0.05);
    }

    #[test]
    fn z_n_identity_against_l_n() {
        let spec = ModelSpec::BinaryRademacher;
        let table = binary_table(12, 43, QGrid::line(0.0, 0.0, 1));
        for i in 0..5 {
            for j in 0..5 {
                let q = [0.1 * i as f64];
                let lam = [-0.2 + 0.1 * j as f64];
                let n = 12.0;
                let ln = table.l_n(&q, &lam);
                let target = spec.log_mgf(&[q[0] + lam[0]]) - spec.log_mgf(&q);
                let expect = (n * ln - n * target).exp();
                let got = table.z_n(&q, &lam);
                assert!((got - expect).abs() / expect < 1e-10);
            }
        }
    }

    #[test]
    fn z_n_trajectory_has_no_exponential_trend() {
        let spec = ModelSpec::BinaryRademacher;
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let run = run_to_depth(&spec, 20, GrowthMode::Materialize, 30_000_000, &mut rng).unwrap();
        for n in [10usize, 12, 14, 16, 18, 20] {
            let mut partial = run.clone();
            partial.frames.truncate(n + 1);
            partial.completed_depth = n;
            let table = build_cascade(partial, QGrid::line(0.0, 0.0, 1)).unwrap();
            let z = table.z_n(&[0.3], &[0.2]);
            assert!(z.is_finite() && z > 0.0);
            if n == 20 {
                assert!(z.ln().abs() / 20.0 <= 0.1, "Z_20 = {z}");
            }
        }
    }

    #[test]
    fn z_n_at_lambda_zero_is_root_martingale() {
        let table = binary_table(10, 53, QGrid::line(0.4, 0.4, 1));
        let got = table.z_n(&[0.4], &[0.0]);
        let expect = table.log_y(0, 0, 0).exp();
        assert!((got - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn concentration_mass_vanishes_for_huge_radius() {
        let table = binary_table(10, 59, QGrid::line(0.5, 0.5, 1));
        // displacements are +-1, so S_k/k stays within [-1, 1]
        let masses = table.concentration_mass(0, 4.0);
        assert!(masses.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn concentration_mass_monotone_in_epsilon() {
        let table = binary_table(12, 61, QGrid::line(0.5, 0.5, 1));
        let wide = table.concentration_mass(0, 0.3);
        let narrow = table.concentration_mass(0, 0.1);
        for (w, n) in wide.iter().zip(&narrow) {
            assert!(w <= n, "mass not monotone: {w} > {n}");
        }
    }

    #[test]
    fn concentration_decay_bounded_by_rate_gap() {
        let spec = ModelSpec::BinaryRademacher;
        let table = binary_table(20, 67, QGrid::line(0.5, 0.5, 1));
        let masses = table.concentration_mass(0, 0.2);
        let mass20 = masses[19];
        assert!(mass20 > 0.0);
        let rate = mass20.ln() / 20.0;
        let center = spec.grad_log_mgf(&[0.5]);
        let gap = crate::legendre::rate_gap(&spec, &[0.5], &center, 0.2);
        assert!(rate < 0.0, "decay rate {rate} should be negative");
        assert!(
            rate <= gap / 2.0 + 0.1,
            "rate {rate} vs bound {}",
            gap / 2.0 + 0.1
        );
    }

    #[test]
    fn root_martingale_increments_shrink_with_depth() {
        // surrogate for the uniform a.s. convergence: sup over a q-grid of
        // |Y_n - Y_{n-1}| at the root has a negative log-slope over n
        let spec = ModelSpec::BinaryRademacher;
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let run = run_to_depth(&spec, 20, GrowthMode::Materialize, 30_000_000, &mut rng).unwrap();
        let qgrid = QGrid::line(-0.8, 0.8, 9);
        // forward identity: Y_n(root, q) = sum over leaves of
        // exp(<q, S_n(u)> - n P~(q)), identical to the backward value
        let root_y = |n: usize| -> Vec<f64> {
            let frame = run.frame(n);
            qgrid
                .points
                .iter()
                .map(|q| {
                    let p_tilde = spec.log_mgf(q);
                    let mut acc = LogSumExpAcc::new();
                    for u in 0..frame.node_count() {
                        acc.add(dot(q, frame.path_sum_of(u)) - n as f64 * p_tilde);
                    }
                    acc.value().exp()
                })
                .collect()
        };
        let mut sup_diffs = Vec::new();
        let mut prev = root_y(5);
        for n in 6..=20 {
            let cur = root_y(n);
            let sup = cur
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            sup_diffs.push(sup.max(1e-300).ln());
            prev = cur;
        }
        let ns: Vec<f64> = (6..=20).map(|n| n as f64).collect();
        let (slope, _, _) = crate::math::ols(&ns, &sup_diffs);
        assert!(slope < 0.0, "increment log-slope {slope} not negative");
    }
}
