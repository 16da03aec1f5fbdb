//! Multifractal spectrum estimation from level-set counts and from μ_q
//! local dimensions, compared against the analytic `P̃*`.
//!
//! Two independent estimators target the same curve: the growth rate of
//! `N_n(α, ε) = #{u ∈ T_n : ‖S_n(u) − nα‖ ≤ nε}` fitted over a range of
//! levels, and the terminal ratio `−log μ_q([t_{|n}])/n` along sampled
//! μ_q-typical paths at `α = ∇P̃(q)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{build_cascade, CascadeTable, SampledPath};
use crate::legendre::conjugate_at_gradient;
use crate::math::{dist, mean_stderr, ols};
use crate::model::ModelSpec;
use crate::pressure::{domain_scan, QGrid};
use crate::tree::{run_to_depth, GrowthMode, LevelFrame, TreeRun};
use crate::{BrwError, Result};

/// Binning of the α box for one level's streaming histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    /// Per-axis `(min, max)` of the α box.
    pub bounds: Vec<(f64, f64)>,
    /// Uniform bin width on every axis.
    pub bin_width: f64,
}

impl HistogramGrid {
    pub fn new(bounds: Vec<(f64, f64)>, bin_width: f64) -> Self {
        assert!(bin_width > 0.0);
        assert!(bounds.iter().all(|(lo, hi)| hi > lo));
        HistogramGrid { bounds, bin_width }
    }

    fn bins_per_axis(&self) -> Vec<usize> {
        self.bounds
            .iter()
            .map(|(lo, hi)| ((hi - lo) / self.bin_width).ceil() as usize)
            .collect()
    }

    /// Flat bin index of a point, or `None` when outside the box.
    fn bin_of(&self, point: &[f64]) -> Option<usize> {
        let bins = self.bins_per_axis();
        let mut idx = 0usize;
        for j in 0..point.len() {
            let (lo, hi) = self.bounds[j];
            if point[j] < lo || point[j] >= hi {
                return None;
            }
            let b = ((point[j] - lo) / self.bin_width) as usize;
            let b = b.min(bins[j] - 1);
            idx = idx * bins[j] + b;
        }
        Some(idx)
    }

    /// Lower corner of a flat bin index.
    fn corner_of(&self, mut idx: usize) -> Vec<f64> {
        let bins = self.bins_per_axis();
        let d = bins.len();
        let mut corner = vec![0.0; d];
        for j in (0..d).rev() {
            let b = idx % bins[j];
            idx /= bins[j];
            corner[j] = self.bounds[j].0 + b as f64 * self.bin_width;
        }
        corner
    }
}

/// Counts of `S_n(u)/n` per bin for one level.
#[derive(Debug, Clone)]
pub struct LevelHistogram {
    pub level: usize,
    pub grid: HistogramGrid,
    pub counts: Vec<u64>,
    /// Nodes falling outside the α box: reported, never dropped.
    pub overflow: u64,
}

impl LevelHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

/// Single streaming pass over a frame, binning `S_n(u)/n`.
pub fn accumulate_histogram(frame: &LevelFrame, grid: &HistogramGrid) -> LevelHistogram {
    assert!(frame.depth >= 1);
    assert_eq!(grid.bounds.len(), frame.dim);
    let bins: usize = grid.bins_per_axis().iter().product();
    let mut counts = vec![0u64; bins];
    let mut overflow = 0u64;
    let n = frame.depth as f64;
    let mut scaled = vec![0.0; frame.dim];
    for u in 0..frame.node_count() {
        let s = frame.path_sum_of(u);
        for j in 0..frame.dim {
            scaled[j] = s[j] / n;
        }
        match grid.bin_of(&scaled) {
            Some(idx) => counts[idx] += 1,
            None => overflow += 1,
        }
    }
    LevelHistogram {
        level: frame.depth,
        grid: grid.clone(),
        counts,
        overflow,
    }
}

/// Exact `N_n(α, ε)` by direct node testing; the independent oracle for
/// [`ball_count`].
pub fn ball_count_exact(frame: &LevelFrame, alpha: &[f64], epsilon: f64) -> u64 {
    let n = frame.depth as f64;
    let mut count = 0u64;
    let mut scaled = vec![0.0; frame.dim];
    for u in 0..frame.node_count() {
        let s = frame.path_sum_of(u);
        for j in 0..frame.dim {
            scaled[j] = s[j] / n;
        }
        if dist(&scaled, alpha) <= epsilon {
            count += 1;
        }
    }
    count
}

/// `N_n(α, ε)` using the histogram for bins fully inside the ball and exact
/// node re-testing over partially covered bins. Slopes are exponentially
/// sensitive at the ball boundary, so partial bins are never approximated.
pub fn ball_count(hist: &LevelHistogram, frame: &LevelFrame, alpha: &[f64], epsilon: f64) -> u64 {
    assert_eq!(hist.level, frame.depth);
    let d = frame.dim;
    let grid = &hist.grid;
    let w = grid.bin_width;
    // classify bins: nearest / farthest corner distance against epsilon
    let mut full = vec![false; hist.counts.len()];
    let mut partial = vec![false; hist.counts.len()];
    let mut count = 0u64;
    for (idx, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let corner = grid.corner_of(idx);
        let mut near2 = 0.0;
        let mut far2 = 0.0;
        for j in 0..d {
            let lo = corner[j];
            let hi = corner[j] + w;
            let a = alpha[j];
            let near = if a < lo {
                lo - a
            } else if a > hi {
                a - hi
            } else {
                0.0
            };
            let far = (a - lo).abs().max((a - hi).abs());
            near2 += near * near;
            far2 += far * far;
        }
        // bin corners are reconstructed from the flat index, so classify
        // with a pad against rounding; boundary bins fall back to the
        // exact retest below
        let pad = 1e-9;
        if far2.sqrt() <= epsilon - pad {
            full[idx] = true;
            count += c;
        } else if near2.sqrt() <= epsilon + pad {
            partial[idx] = true;
        }
    }
    if partial.iter().any(|&p| p) || hist.overflow > 0 {
        let n = frame.depth as f64;
        let mut scaled = vec![0.0; d];
        for u in 0..frame.node_count() {
            let s = frame.path_sum_of(u);
            for j in 0..d {
                scaled[j] = s[j] / n;
            }
            let retest = match grid.bin_of(&scaled) {
                Some(idx) => partial[idx],
                None => true, // overflow nodes are re-tested too
            };
            if retest && dist(&scaled, alpha) <= epsilon {
                count += 1;
            }
        }
    }
    count
}

/// Outcome of a large-deviation slope fit.
#[derive(Debug, Clone)]
pub enum LdpSlope {
    Fitted {
        slope: f64,
        stderr: f64,
        /// Levels actually used (zero-count levels are trimmed).
        levels: Vec<usize>,
    },
    /// Every count in the range was zero: `P̃*(α) < 0`, the level set is
    /// empty at this α.
    EmptyPhase,
}

/// OLS fit of `log N_n(α, ε)` against `n` over `(level, count)` pairs.
pub fn ldp_slope(counts: &[(usize, u64)]) -> LdpSlope {
    let kept: Vec<(usize, u64)> = counts.iter().filter(|(_, c)| *c > 0).cloned().collect();
    if kept.is_empty() {
        return LdpSlope::EmptyPhase;
    }
    if kept.len() == 1 {
        // degenerate range; report the single-point rate with no stderr
        let (n, c) = kept[0];
        return LdpSlope::Fitted {
            slope: (c as f64).ln() / n as f64,
            stderr: f64::INFINITY,
            levels: vec![n],
        };
    }
    let xs: Vec<f64> = kept.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let (slope, _, stderr) = ols(&xs, &ys);
    LdpSlope::Fitted {
        slope,
        stderr,
        levels: kept.iter().map(|(n, _)| *n).collect(),
    }
}

/// Mean and standard deviation of `−log μ_q([t_{|n}])/n` across paths.
///
/// `diam([t_{|n}]) = e^{−n}` makes the denominator exactly `−n`, so the
/// terminal ratio is the finite-n local dimension at `α = ∇P̃(q)`.
pub fn local_dimension(paths: &[SampledPath]) -> (f64, f64) {
    assert!(!paths.is_empty());
    let ratios: Vec<f64> = paths
        .iter()
        .map(|p| {
            let n = p.nodes.len() - 1;
            -p.log_mu[n] / n as f64
        })
        .collect();
    let (mean, _) = mean_stderr(&ratios);
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / (ratios.len() as f64 - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Knobs for [`assemble_spectrum`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Depth for the level-set histograms (streaming growth to this level).
    pub hist_depth: usize,
    /// Levels used in the slope fit (inclusive).
    pub fit_from: usize,
    pub fit_to: usize,
    /// Ball radius for the counts.
    pub epsilon: f64,
    /// Depth of the materialized cascade used for path sampling.
    pub cascade_depth: usize,
    /// Sampled paths per q.
    pub paths: usize,
    /// Per-level node budget.
    pub budget: usize,
}

/// One α of the assembled spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumPoint {
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ldp: LdpSlope,
    pub local_dim: Option<(f64, f64)>,
    /// Analytic `P̃*(α) = P̃(q) − ⟨q, ∇P̃(q)⟩`.
    pub analytic: f64,
}

/// The three-way spectrum comparison over a q-grid.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub points: Vec<SpectrumPoint>,
    pub epsilon: f64,
    pub fit_levels: (usize, usize),
}

/// Runs both estimators at `α = ∇P̃(q)` for each grid q and attaches the
/// analytic value. The grid must lie in `𝒥`; per-point estimator failures
/// are flagged in the output, not dropped.
pub fn assemble_spectrum<R: Rng>(
    spec: &ModelSpec,
    qgrid: &QGrid,
    opts: &SpectrumOptions,
    rng: &mut R,
) -> Result<SpectrumEstimate> {
    spec.validate()?;
    if opts.fit_from > opts.fit_to || opts.fit_to > opts.hist_depth {
        return Err(BrwError::Config(format!(
            "fit range {}..={} incompatible with hist_depth {}",
            opts.fit_from, opts.fit_to, opts.hist_depth
        )));
    }
    if opts.cascade_depth > opts.hist_depth {
        return Err(BrwError::Config(
            "cascade_depth must not exceed hist_depth".into(),
        ));
    }
    let scan = domain_scan(spec, qgrid, &[1.5, 2.0])?;
    if let Some(pos) = scan.in_cal_j.iter().position(|&b| !b) {
        return Err(BrwError::Config(format!(
            "q-grid point {:?} lies outside the admissible domain",
            qgrid.points[pos]
        )));
    }
    let alphas: Vec<Vec<f64>> = qgrid.points.iter().map(|q| spec.grad_log_mgf(q)).collect();

    // one materialized run serves the slope fits (all levels) and the
    // cascade (truncated to cascade_depth)
    let run = run_to_depth(
        spec,
        opts.hist_depth,
        GrowthMode::Materialize,
        opts.budget,
        rng,
    )?;
    if let Some(level) = run.budget_hit {
        return Err(BrwError::BudgetExceeded {
            level,
            nodes: 0,
            budget: opts.budget,
        });
    }

    let mut counts_per_q: Vec<Vec<(usize, u64)>> = vec![Vec::new(); qgrid.len()];
    for n in opts.fit_from..=opts.fit_to {
        let frame = run.frame(n);
        let hist = histogram_covering(frame, &alphas, opts.epsilon);
        for (qi, alpha) in alphas.iter().enumerate() {
            counts_per_q[qi].push((n, ball_count(&hist, frame, alpha, opts.epsilon)));
        }
    }

    let cascade_run = truncate_run(&run, opts.cascade_depth);
    let table = build_cascade(cascade_run, qgrid.clone())?;
    let mut points = Vec::with_capacity(qgrid.len());
    for (qi, q) in qgrid.points.iter().enumerate() {
        let paths: Vec<SampledPath> = (0..opts.paths)
            .map(|_| table.sample_path(qi, rng))
            .collect();
        let local = if paths.is_empty() {
            None
        } else {
            Some(local_dimension(&paths))
        };
        points.push(SpectrumPoint {
            q: q.clone(),
            alpha: alphas[qi].clone(),
            ldp: ldp_slope(&counts_per_q[qi]),
            local_dim: local,
            analytic: conjugate_at_gradient(spec, q),
        });
    }
    Ok(SpectrumEstimate {
        points,
        epsilon: opts.epsilon,
        fit_levels: (opts.fit_from, opts.fit_to),
    })
}

/// Histogram whose box covers every target ball, with bin width ε/2.
fn histogram_covering(frame: &LevelFrame, alphas: &[Vec<f64>], epsilon: f64) -> LevelHistogram {
    let d = frame.dim;
    let mut bounds = Vec::with_capacity(d);
    for j in 0..d {
        let lo = alphas.iter().map(|a| a[j]).fold(f64::INFINITY, f64::min) - 2.0 * epsilon;
        let hi = alphas
            .iter()
            .map(|a| a[j])
            .fold(f64::NEG_INFINITY, f64::max)
            + 2.0 * epsilon;
        bounds.push((lo, hi));
    }
    accumulate_histogram(frame, &HistogramGrid::new(bounds, epsilon / 2.0))
}

fn truncate_run(run: &TreeRun, depth: usize) -> TreeRun {
    let mut out = run.clone();
    out.frames.truncate(depth + 1);
    out.completed_depth = depth;
    out
}

/// Private helper exposed for the cascade table reuse in experiments.
pub fn cascade_for(run: &TreeRun, depth: usize, qgrid: QGrid) -> Result<CascadeTable> {
    build_cascade(truncate_run(run, depth), qgrid)
}
