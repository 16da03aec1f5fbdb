//! Level-by-level Galton–Watson tree growth with accumulated path sums.
//!
//! Levels are flat parallel arrays with parent indices rather than linked
//! nodes; the access pattern is strictly level-sequential. Children are
//! enumerated parent-major in birth order, so a run is fully determined by
//! the model and the stream.

use std::io::Write;

use rand::Rng;

use crate::model::ModelSpec;
use crate::{BrwError, Result};

/// Default per-level node cap; binary models at depth ~24 fit under it.
pub const DEFAULT_NODE_BUDGET: usize = 30_000_000;

/// One generation of the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFrame {
    pub depth: usize,
    /// Ambient dimension of the path sums.
    pub dim: usize,
    /// Index of each node's parent in the previous frame; empty at the root.
    pub parent_index: Vec<u32>,
    /// `S_n(u)` per node, flat row-major `node_count × dim`.
    pub path_sum: Vec<f64>,
    /// The last step `X_u` per node, same layout; zeros at the root.
    pub displacement: Vec<f64>,
}

impl LevelFrame {
    /// The single-node root frame with `S_0 = 0`.
    pub fn root(dim: usize) -> Self {
        LevelFrame {
            depth: 0,
            dim,
            parent_index: Vec::new(),
            path_sum: vec![0.0; dim],
            displacement: vec![0.0; dim],
        }
    }

    pub fn node_count(&self) -> usize {
        self.path_sum.len() / self.dim
    }

    /// Path sum of node `u` as a slice of length `dim`.
    pub fn path_sum_of(&self, u: usize) -> &[f64] {
        &self.path_sum[u * self.dim..(u + 1) * self.dim]
    }

    pub fn displacement_of(&self, u: usize) -> &[f64] {
        &self.displacement[u * self.dim..(u + 1) * self.dim]
    }
}

/// Whether a run keeps every frame or only visits them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthMode {
    /// Retain all frames; required by the cascade backward recursion.
    Materialize,
    /// Retain only the deepest frame; sinks observe each level as it is
    /// produced. Needed for histogram scans at depths where materializing
    /// would not fit.
    Stream,
}

/// A (possibly partial) realization of the tree down to some depth.
#[derive(Debug, Clone)]
pub struct TreeRun {
    pub spec: ModelSpec,
    /// All frames in materialize mode; only the deepest frame in stream mode.
    pub frames: Vec<LevelFrame>,
    /// Deepest fully generated level.
    pub completed_depth: usize,
    /// Set when growth stopped early: the level that would have exceeded
    /// the node budget.
    pub budget_hit: Option<usize>,
}

impl TreeRun {
    pub fn frame(&self, depth: usize) -> &LevelFrame {
        self.frames
            .iter()
            .find(|f| f.depth == depth)
            .expect("frame at requested depth")
    }

    pub fn deepest(&self) -> &LevelFrame {
        self.frames.last().expect("runs hold at least the root")
    }

    pub fn is_materialized(&self) -> bool {
        self.frames.len() == self.completed_depth + 1
    }
}

/// Grows one level: every node of `frame` receives an independent offspring
/// draw; children are listed parent-major in birth order.
pub fn grow_level<R: Rng>(
    spec: &ModelSpec,
    frame: &LevelFrame,
    budget: usize,
    rng: &mut R,
) -> Result<LevelFrame> {
    let d = spec.dim();
    debug_assert_eq!(frame.dim, d);
    let parents = frame.node_count();
    let mut parent_index = Vec::new();
    let mut path_sum = Vec::new();
    let mut displacement = Vec::new();
    let mut children = 0usize;
    for u in 0..parents {
        let draw = spec.sample_offspring(rng);
        children += draw.n_children;
        if children > budget {
            return Err(BrwError::BudgetExceeded {
                level: frame.depth + 1,
                nodes: children,
                budget,
            });
        }
        let parent_sum = frame.path_sum_of(u);
        for i in 0..draw.n_children {
            parent_index.push(u as u32);
            let x = &draw.displacements[i * d..(i + 1) * d];
            for j in 0..d {
                path_sum.push(parent_sum[j] + x[j]);
            }
            displacement.extend_from_slice(x);
        }
    }
    Ok(LevelFrame {
        depth: frame.depth + 1,
        dim: d,
        parent_index,
        path_sum,
        displacement,
    })
}

/// Grows the tree to depth `n`, invoking `sink` on every frame (root
/// included). On budget exhaustion the run is returned partial, with
/// `budget_hit` naming the level that failed.
pub fn run_to_depth_with_sink<R, F>(
    spec: &ModelSpec,
    n: usize,
    mode: GrowthMode,
    budget: usize,
    rng: &mut R,
    mut sink: F,
) -> Result<TreeRun>
where
    R: Rng,
    F: FnMut(&LevelFrame),
{
    spec.validate()?;
    let mut current = LevelFrame::root(spec.dim());
    sink(&current);
    let mut frames = Vec::new();
    let mut budget_hit = None;
    let mut completed = 0usize;
    for _ in 0..n {
        match grow_level(spec, &current, budget, rng) {
            Ok(next) => {
                sink(&next);
                completed = next.depth;
                if mode == GrowthMode::Materialize {
                    frames.push(std::mem::replace(&mut current, next));
                } else {
                    current = next;
                }
            }
            Err(BrwError::BudgetExceeded { level, .. }) => {
                budget_hit = Some(level);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    frames.push(current);
    Ok(TreeRun {
        spec: spec.clone(),
        frames,
        completed_depth: completed,
        budget_hit,
    })
}

/// Grows the tree to depth `n` with no per-level sink.
pub fn run_to_depth<R: Rng>(
    spec: &ModelSpec,
    n: usize,
    mode: GrowthMode,
    budget: usize,
    rng: &mut R,
) -> Result<TreeRun> {
    run_to_depth_with_sink(spec, n, mode, budget, rng, |_| {})
}

/// Debug dump of a run's frames as CSV:
/// `level,node_index,parent_index,s_0,…,s_{d-1}`.
pub fn dump_frames_csv<W: Write>(run: &TreeRun, out: &mut W) -> Result<()> {
    let d = run.spec.dim();
    write!(out, "level,node_index,parent_index")?;
    for j in 0..d {
        write!(out, ",s_{j}")?;
    }
    writeln!(out)?;
    for frame in &run.frames {
        for u in 0..frame.node_count() {
            let parent = if frame.depth == 0 {
                -1i64
            } else {
                frame.parent_index[u] as i64
            };
            write!(out, "{},{},{}", frame.depth, u, parent)?;
            for v in frame.path_sum_of(u) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
