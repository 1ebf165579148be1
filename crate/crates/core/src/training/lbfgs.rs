//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Works on a flat real parameter vector. The two-loop recursion builds the
//! search direction from the last `memory` curvature pairs; the line search
//! enforces both the sufficient-decrease and curvature conditions, so
//! accepted steps never increase the objective and every stored pair has
//! positive `s·y`.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct LbfgsParams {
    pub memory: usize,
    pub max_iters: usize,
    /// Converged when the Euclidean gradient norm drops below this.
    pub grad_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub converged: bool,
}

const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 25;
const MAX_ZOOM: usize = 30;

struct Evaluation {
    step: f64,
    loss: f64,
    slope: f64,
    point: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimize `eval` starting from `x` (updated in place). `eval` returns
/// `(loss, gradient)`; `on_accept` fires after every accepted step with the
/// iteration index and new loss.
pub(crate) fn minimize<F, C>(
    x: &mut [f64],
    params: &LbfgsParams,
    mut eval: F,
    mut on_accept: C,
) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    C: FnMut(usize, f64),
{
    let (mut loss, mut grad) = eval(x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, 1/s·y)
    let mut gamma = 1.0f64;

    for iter in 0..params.max_iters {
        let gnorm = norm(&grad);
        if gnorm <= params.grad_tol || !loss.is_finite() {
            return LbfgsOutcome {
                converged: gnorm <= params.grad_tol,
            };
        }

        // Two-loop recursion for the search direction −H·g.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &q);
            axpy(&mut q, -alpha, y);
            alphas.push(alpha);
        }
        for z in q.iter_mut() {
            *z *= gamma;
        }
        for ((s, y, rho), &alpha) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &q);
            axpy(&mut q, alpha - beta, s);
        }
        let mut direction = q;
        for z in direction.iter_mut() {
            *z = -*z;
        }
        let mut slope0 = dot(&grad, &direction);
        if !(slope0 < 0.0) {
            direction = grad.iter().map(|g| -g).collect();
            slope0 = -gnorm * gnorm;
            history.clear();
            gamma = 1.0;
        }

        let Some(accepted) = wolfe_search(x, loss, slope0, &direction, &mut eval) else {
            // No point satisfying the conditions within the budget; stop.
            return LbfgsOutcome {
                converged: gnorm <= params.grad_tol * 10.0,
            };
        };

        let s: Vec<f64> = accepted
            .point
            .iter()
            .zip(x.iter())
            .map(|(new, old)| new - old)
            .collect();
        let y: Vec<f64> = accepted
            .grad
            .iter()
            .zip(&grad)
            .map(|(new, old)| new - old)
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            gamma = sy / dot(&y, &y).max(f64::MIN_POSITIVE);
            history.push_back((s, y, 1.0 / sy));
            if history.len() > params.memory {
                history.pop_front();
            }
        }

        x.copy_from_slice(&accepted.point);
        loss = accepted.loss;
        grad = accepted.grad;
        on_accept(iter, loss);
    }

    LbfgsOutcome {
        converged: norm(&grad) <= params.grad_tol,
    }
}

/// Strong-Wolfe line search (bracket then zoom, Nocedal & Wright alg. 3.5).
fn wolfe_search<F>(
    x: &[f64],
    loss0: f64,
    slope0: f64,
    direction: &[f64],
    eval: &mut F,
) -> Option<Evaluation>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let probe = |step: f64, eval: &mut F| -> Evaluation {
        let point: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (loss, grad) = eval(&point);
        let slope = dot(&grad, direction);
        Evaluation {
            step,
            loss,
            slope,
            point,
            grad,
        }
    };

    let mut prev_step = 0.0f64;
    let mut prev_loss = loss0;
    let mut step = 1.0f64;
    for i in 0..MAX_LINE_SEARCH {
        let trial = probe(step, eval);
        if !trial.loss.is_finite() {
            // Retreat into the finite region.
            step *= 0.25;
            continue;
        }
        if trial.loss > loss0 + WOLFE_C1 * trial.step * slope0 || (i > 0 && trial.loss >= prev_loss)
        {
            return zoom(prev_step, prev_loss, trial.step, loss0, slope0, direction, x, eval);
        }
        if trial.slope.abs() <= -WOLFE_C2 * slope0 {
            return Some(trial);
        }
        if trial.slope >= 0.0 {
            return zoom(trial.step, trial.loss, prev_step, loss0, slope0, direction, x, eval);
        }
        prev_step = trial.step;
        prev_loss = trial.loss;
        step *= 2.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    mut lo: f64,
    mut loss_lo: f64,
    mut hi: f64,
    loss0: f64,
    slope0: f64,
    direction: &[f64],
    x: &[f64],
    eval: &mut F,
) -> Option<Evaluation>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut fallback: Option<Evaluation> = None;
    for _ in 0..MAX_ZOOM {
        let step = 0.5 * (lo + hi);
        if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
            break;
        }
        let point: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (loss, grad) = eval(&point);
        let slope = dot(&grad, direction);
        let trial = Evaluation {
            step,
            loss,
            slope,
            point,
            grad,
        };
        if !loss.is_finite() || loss > loss0 + WOLFE_C1 * step * slope0 || loss >= loss_lo {
            hi = step;
        } else {
            if slope.abs() <= -WOLFE_C2 * slope0 {
                return Some(trial);
            }
            if slope * (hi - lo) >= 0.0 {
                hi = lo;
            }
            lo = step;
            loss_lo = loss;
            // Keep the best sufficient-decrease point in case the curvature
            // condition is never met within the budget.
            if fallback.as_ref().map_or(true, |f| loss < f.loss) {
                fallback = Some(trial);
            }
        }
    }
    fallback.filter(|f| f.loss < loss0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(target: &mut [f64], scale: f64, source: &[f64]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += scale * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(p: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (p[0], p[1]);
        let loss = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let grad = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (loss, grad)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let params = LbfgsParams {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-10,
        };
        let outcome = minimize(&mut x, &params, rosenbrock, |_, _| {});
        assert!(outcome.converged, "did not converge: {outcome:?}");
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "x = {x:?}");
    }

    #[test]
    fn accepted_steps_never_increase_loss() {
        let mut x = vec![3.0, -2.0, 0.5];
        let params = LbfgsParams {
            memory: 5,
            max_iters: 100,
            grad_tol: 1e-12,
        };
        let mut last = f64::INFINITY;
        minimize(
            &mut x,
            &params,
            |p| {
                let loss: f64 = p.iter().map(|v| v.powi(4) + v.powi(2)).sum();
                let grad = p.iter().map(|v| 4.0 * v.powi(3) + 2.0 * v).collect();
                (loss, grad)
            },
            |_, loss| {
                assert!(loss <= last + 1e-12);
                last = loss;
            },
        );
    }

    #[test]
    fn converges_on_quadratic_in_few_iterations() {
        let mut x = vec![5.0; 20];
        let params = LbfgsParams {
            memory: 10,
            max_iters: 100,
            grad_tol: 1e-9,
        };
        let mut accepts = 0usize;
        let outcome = minimize(
            &mut x,
            &params,
            |p| {
                let loss: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(i, v)| 0.5 * (i + 1) as f64 * v * v)
                    .sum();
                let grad = p
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i + 1) as f64 * v)
                    .collect();
                (loss, grad)
            },
            |_, _| accepts += 1,
        );
        assert!(outcome.converged);
        assert!(accepts < 60, "took {accepts} accepted steps");
        assert!(x.iter().all(|v| v.abs() < 1e-8));
    }
}
