//! Legendre transforms of `P̃` in ℝ^d by gradient inversion.
//!
//! `P̃*(α) = inf_q (P̃(q) − ⟨q, α⟩)` is computed by solving `∇P̃(q) = α`
//! with a damped Newton iteration on the analytic gradient (Hessian by
//! central finite differences), falling back to backtracking gradient
//! descent when the Newton step does not decrease the objective.

#[cfg(test)]
use crate::math::dist;
use crate::math::{dot, norm, solve_linear};
use crate::model::ModelSpec;

/// Result of one conjugate solve.
#[derive(Debug, Clone)]
pub struct ConjugatePoint {
    pub alpha: Vec<f64>,
    /// The minimizer of `P̃(q) − ⟨q, α⟩`.
    pub q_star: Vec<f64>,
    /// `P̃*(α)`; only an upper bound on the infimum when not converged.
    pub value: f64,
    pub converged: bool,
    /// `‖∇P̃(q_star) − α‖`.
    pub residual: f64,
}

const MAX_ITER: usize = 200;
const HESSIAN_STEP: f64 = 1e-5;
/// Iterates beyond this norm are treated as divergence
/// (`α` outside the closure of `∇P̃`'s range).
const DIVERGENCE_NORM: f64 = 1e3;

fn hessian_fd(spec: &ModelSpec, q: &[f64]) -> Vec<f64> {
    let d = q.len();
    let mut h = vec![0.0; d * d];
    for j in 0..d {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[j] += HESSIAN_STEP;
        qm[j] -= HESSIAN_STEP;
        let gp = spec.grad_log_mgf(&qp);
        let gm = spec.grad_log_mgf(&qm);
        for i in 0..d {
            h[i * d + j] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
        }
    }
    // symmetrize the finite-difference noise
    for i in 0..d {
        for j in i + 1..d {
            let avg = 0.5 * (h[i * d + j] + h[j * d + i]);
            h[i * d + j] = avg;
            h[j * d + i] = avg;
        }
    }
    h
}

/// Computes `P̃*(α)` by inverting the gradient map.
///
/// Converged iff the residual `‖∇P̃(q) − α‖` drops to `tol` within 200
/// iterations; on divergence the best (lowest) objective value seen is
/// returned with `converged = false`.
pub fn conjugate(spec: &ModelSpec, alpha: &[f64], tol: f64) -> ConjugatePoint {
    assert!(tol > 0.0);
    let d = spec.dim();
    assert_eq!(alpha.len(), d);
    let objective = |q: &[f64]| spec.log_mgf(q) - dot(q, alpha);
    let mut q = vec![0.0; d];
    let mut best_q = q.clone();
    let mut best_value = objective(&q);
    for _ in 0..MAX_ITER {
        let grad: Vec<f64> = spec
            .grad_log_mgf(&q)
            .iter()
            .zip(alpha)
            .map(|(g, a)| g - a)
            .collect();
        let residual = norm(&grad);
        let value = objective(&q);
        if value < best_value {
            best_value = value;
            best_q = q.clone();
        }
        if residual <= tol {
            return ConjugatePoint {
                alpha: alpha.to_vec(),
                q_star: q,
                value,
                converged: true,
                residual,
            };
        }
        if norm(&q) > DIVERGENCE_NORM {
            break;
        }
        let newton_step = solve_linear(&hessian_fd(spec, &q), &grad, d)
            .map(|s| s.iter().map(|x| -x).collect::<Vec<f64>>());
        let mut moved = false;
        if let Some(step) = newton_step {
            if let Some(next) = backtrack(&objective, &q, &grad, &step) {
                q = next;
                moved = true;
            }
        }
        if !moved {
            let step: Vec<f64> = grad.iter().map(|g| -g).collect();
            match backtrack(&objective, &q, &grad, &step) {
                Some(next) => q = next,
                None => break, // line search stalled at the current point
            }
        }
    }
    let grad_best: Vec<f64> = spec
        .grad_log_mgf(&best_q)
        .iter()
        .zip(alpha)
        .map(|(g, a)| g - a)
        .collect();
    ConjugatePoint {
        alpha: alpha.to_vec(),
        q_star: best_q,
        value: best_value,
        converged: false,
        residual: norm(&grad_best),
    }
}

/// Armijo backtracking along `step`; `None` when no productive step length
/// remains above 2^-40.
fn backtrack(
    objective: &impl Fn(&[f64]) -> f64,
    q: &[f64],
    grad: &[f64],
    step: &[f64],
) -> Option<Vec<f64>> {
    let f0 = objective(q);
    let slope = dot(grad, step);
    if slope >= 0.0 {
        return None; // not a descent direction
    }
    let mut t = 1.0;
    for _ in 0..40 {
        let cand: Vec<f64> = q.iter().zip(step).map(|(x, s)| x + t * s).collect();
        if objective(&cand) <= f0 + 1e-4 * t * slope {
            return Some(cand);
        }
        t *= 0.5;
    }
    None
}

/// Pointwise conjugation over a list of targets. Non-converged points keep
/// their flag; nothing is dropped.
pub fn spectrum_curve(spec: &ModelSpec, alphas: &[Vec<f64>], tol: f64) -> Vec<ConjugatePoint> {
    alphas.iter().map(|a| conjugate(spec, a, tol)).collect()
}

/// Unit directions used to mesh the sphere in [`rate_gap`].
fn sphere_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere, 64 points
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            (0..64)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / 64.0;
                    let r = (1.0 - z * z).sqrt();
                    let theta = 2.0 * std::f64::consts::PI * i as f64 / golden;
                    vec![r * theta.cos(), r * theta.sin(), z]
                })
                .collect()
        }
        _ => panic!("sphere mesh implemented for d <= 3"),
    }
}

/// `sup L_q*(α)` over `‖α − ∇P̃(q)‖ ≥ radius`, where
/// `L_q*(α) = inf_λ (P̃(q+λ) − P̃(q) − ⟨λ, α⟩)`.
///
/// Substituting `μ = q + λ` gives `L_q*(α) = P̃*(α) + ⟨q, α⟩ − P̃(q)`, and
/// concavity of `L_q*` with interior maximizer at `∇P̃(q)` puts the sup on
/// the sphere `‖α − center‖ = radius`, meshed with a fixed direction set.
/// Non-converged conjugate solves are excluded with a warning.
pub fn rate_gap(spec: &ModelSpec, q: &[f64], ball_center: &[f64], ball_radius: f64) -> f64 {
    assert!(ball_radius >= 0.0);
    let d = spec.dim();
    assert_eq!(q.len(), d);
    assert_eq!(ball_center.len(), d);
    let p_q = spec.log_mgf(q);
    let mut sup = f64::NEG_INFINITY;
    for dir in sphere_directions(d) {
        let alpha: Vec<f64> = ball_center
            .iter()
            .zip(&dir)
            .map(|(c, u)| c + ball_radius * u)
            .collect();
        let point = conjugate(spec, &alpha, 1e-10);
        if !point.converged {
            eprintln!(
                "rate_gap: conjugate solve did not converge at alpha = {alpha:?} \
                 (residual {}); point excluded",
                point.residual
            );
            continue;
        }
        let l_star = point.value + dot(q, &alpha) - p_q;
        if l_star > sup {
            sup = l_star;
        }
    }
    sup
}

/// Convenience: `P̃*(∇P̃(q)) = P̃(q) − ⟨q, ∇P̃(q)⟩`, the closed-form value
/// of the conjugate at a gradient image.
pub fn conjugate_at_gradient(spec: &ModelSpec, q: &[f64]) -> f64 {
    spec.log_mgf(q) - dot(q, &spec.grad_log_mgf(q))
}
