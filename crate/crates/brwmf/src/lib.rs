//! Simulation and numerical verification toolkit for ℝ^d-valued branching
//! random walks.
//!
//! The crate builds the objects of the multifractal analysis of a branching
//! random walk at desk scale and cross-checks them against closed forms:
//!
//! - [`model`] — built-in reproduction/displacement laws with analytic
//!   log-moment generating function `P̃` and gradient `∇P̃`.
//! - [`tree`] — level-by-level Galton–Watson tree growth with accumulated
//!   path sums `S_n(u)`, in materialized or streaming mode.
//! - [`pressure`] — the empirical pressure `P_n(q)`, the function `φ(p,q)`
//!   and scans of the domains `J`, `𝒥`, `I`.
//! - [`legendre`] — Legendre transforms of `P̃` in ℝ^d by gradient
//!   inversion, spectrum curves and rate-gap bounds.
//! - [`cascade`] — Mandelbrot cascade martingales `Y_k(u,q)` by exact
//!   backward recursion, cylinder measures `μ_q`, typical-path sampling,
//!   and the moment generating functions `L_n(q,λ)`, `Z_n(q,λ)`.
//! - [`spectrum`] — level-set counting histograms, large-deviation slope
//!   fits and local-dimension estimates, assembled against the analytic
//!   spectrum `P̃*(α)`.
//! - [`config`] / [`experiment`] — experiment configs, replicated seeded
//!   runs and CSV/JSON artifact output behind the `brwmf` binary.
//!
//! Every runnable capability has a matching example under `examples/`;
//! start with `cargo run --release --example pressure_convergence`.

pub mod cascade;
pub mod config;
pub mod experiment;
pub mod legendre;
pub mod math;
pub mod model;
pub mod pressure;
pub mod spectrum;
pub mod tree;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum BrwError {
    /// Invalid model or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A level of the tree would exceed the node budget.
    #[error("node budget exceeded while growing level {level}: {nodes} nodes > budget {budget}")]
    BudgetExceeded {
        level: usize,
        nodes: usize,
        budget: usize,
    },
    /// An operation needed a materialized tree run.
    #[error("operation requires a materialized tree run")]
    NotMaterialized,
    /// A q vector was not a column of the cascade table's grid.
    #[error("q = {0:?} is not a point of the cascade table's q-grid")]
    QNotOnGrid(Vec<f64>),
    /// No feasible p for the contraction bound on the supplied grid.
    #[error("no p in (1, 2] with sup_q phi(p, q) < 1 on the grid: {0}")]
    InfeasibleGrid(String),
    /// Dimension mismatch between a vector argument and the model.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BrwError>;
