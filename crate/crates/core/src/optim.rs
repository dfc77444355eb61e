//! Deterministic convex minimizers used for classifier training: limited
//! memory BFGS with a strong-Wolfe line search (smooth objectives) and a
//! two-variable working-set dual solver (hinge loss).

/// Outcome of an optimizer call.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const LBFGS_MEMORY: usize = 10;
const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize a smooth convex function with L-BFGS. `eval` writes the gradient
/// into its second argument and returns the value. Fully deterministic.
pub fn lbfgs_minimize<F>(
    x0: Vec<f64>,
    mut eval: F,
    grad_tol: f64,
    rel_obj_tol: f64,
    max_iters: usize,
) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = eval(&x, &mut grad);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    for iter in 0..max_iters {
        if inf_norm(&grad) <= grad_tol {
            return OptimResult {
                x,
                value,
                converged: true,
                iterations: iter,
            };
        }

        // Two-loop recursion for the search direction.
        let mut direction: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let a = rho * dot(&s_hist[i], &direction);
            alphas[i] = a;
            for (d, y) in direction.iter_mut().zip(&y_hist[i]) {
                *d -= a * y;
            }
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            for d in &mut direction {
                *d *= gamma;
            }
        }
        for i in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &direction);
            let a = alphas[i];
            for (d, s) in direction.iter_mut().zip(&s_hist[i]) {
                *d += (a - beta) * s;
            }
        }

        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            // Not a descent direction (numerical breakdown): restart from
            // steepest descent.
            s_hist.clear();
            y_hist.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &direction);
            if slope >= 0.0 {
                return OptimResult {
                    x,
                    value,
                    converged: true,
                    iterations: iter,
                };
            }
        }

        let (step, new_value, new_grad, new_x) =
            wolfe_search(&mut eval, &x, value, &grad, &direction, slope);
        if step == 0.0 {
            // Line search failed to make progress; treat as converged.
            return OptimResult {
                x,
                value,
                converged: inf_norm(&grad) <= grad_tol.max(1e-5),
                iterations: iter,
            };
        }

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == LBFGS_MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }

        let delta = (value - new_value).abs();
        x = new_x;
        grad = new_grad;
        let prev = value;
        value = new_value;
        if delta <= rel_obj_tol * prev.abs().max(1.0) {
            return OptimResult {
                x,
                value,
                converged: true,
                iterations: iter + 1,
            };
        }
    }
    OptimResult {
        x,
        value,
        converged: false,
        iterations: max_iters,
    }
}

/// Strong-Wolfe line search (bracket then bisect). Returns (step, value,
/// gradient, point); step 0.0 signals failure.
fn wolfe_search<F>(
    eval: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    direction: &[f64],
    slope0: f64,
) -> (f64, f64, Vec<f64>, Vec<f64>)
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let probe = |eval: &mut F, step: f64, grad: &mut Vec<f64>| -> (f64, Vec<f64>) {
        let xs: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + step * d).collect();
        let f = eval(&xs, grad);
        (f, xs)
    };

    let mut grad = vec![0.0; n];
    let mut lo = 0.0;
    let mut f_lo = f0;
    let mut step = 1.0;
    let mut bracket: Option<(f64, f64)> = None;

    for i in 0..30 {
        let (f, xs) = probe(eval, step, &mut grad);
        if f > f0 + WOLFE_C1 * step * slope0 || (i > 0 && f >= f_lo) {
            bracket = Some((lo, step));
            break;
        }
        let slope = dot(&grad, direction);
        if slope.abs() <= -WOLFE_C2 * slope0 {
            return (step, f, grad, xs);
        }
        if slope >= 0.0 {
            bracket = Some((step, lo));
            break;
        }
        lo = step;
        f_lo = f;
        step *= 2.0;
    }

    let (mut a, mut b) = match bracket {
        Some(pair) => pair,
        None => return (0.0, f0, g0.to_vec(), x.to_vec()),
    };
    let mut f_a = {
        let (f, _) = probe(eval, a, &mut grad);
        f
    };
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let (f, xs) = probe(eval, mid, &mut grad);
        if f > f0 + WOLFE_C1 * mid * slope0 || f >= f_a {
            b = mid;
        } else {
            let slope = dot(&grad, direction);
            if slope.abs() <= -WOLFE_C2 * slope0 {
                return (mid, f, grad, xs);
            }
            if slope * (b - a) >= 0.0 {
                b = a;
            }
            a = mid;
            f_a = f;
        }
        if (b - a).abs() * inf_norm(direction) < 1e-16 * (1.0 + inf_norm(x)) {
            if f < f0 {
                return (mid, f, grad, xs);
            }
            break;
        }
    }
    (0.0, f0, g0.to_vec(), x.to_vec())
}

/// Result of the dual hinge-loss solve.
#[derive(Debug, Clone)]
pub struct DualResult {
    pub alpha: Vec<f64>,
    /// Dual objective value (equals the primal optimum at convergence).
    pub dual_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Solve max_a  sum a_i - 1/2 sum a_i a_j y_i y_j K_ij  subject to
/// 0 <= a_i <= cost and sum a_i y_i = 0, by repeated optimization over the
/// maximal violating pair. Deterministic.
pub fn smo_solve(
    kernel: &[Vec<f64>],
    labels: &[f64],
    cost: f64,
    tol: f64,
    max_iters: usize,
) -> DualResult {
    let m = labels.len();
    let mut alpha = vec![0.0; m];
    // f_i = sum_j alpha_j y_j K_ij, maintained incrementally.
    let mut f = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        // v_t = y_t - f_t; KKT: max over I_up <= min over I_low (+tol).
        let mut i_up: Option<(usize, f64)> = None;
        let mut i_low: Option<(usize, f64)> = None;
        for t in 0..m {
            let v = labels[t] - f[t];
            let in_up = (labels[t] > 0.0 && alpha[t] < cost) || (labels[t] < 0.0 && alpha[t] > 0.0);
            let in_low =
                (labels[t] > 0.0 && alpha[t] > 0.0) || (labels[t] < 0.0 && alpha[t] < cost);
            if in_up && i_up.is_none_or(|(_, best)| v > best) {
                i_up = Some((t, v));
            }
            if in_low && i_low.is_none_or(|(_, best)| v < best) {
                i_low = Some((t, v));
            }
        }
        let (Some((i, v_i)), Some((j, v_j))) = (i_up, i_low) else {
            converged = true;
            break;
        };
        if v_i - v_j <= tol {
            converged = true;
            break;
        }

        let eta = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(1e-12);
        let mut t_step = (v_i - v_j) / eta;

        // Clip so both multipliers stay in [0, cost].
        let (t_lo_i, t_hi_i) = if labels[i] > 0.0 {
            (-alpha[i], cost - alpha[i])
        } else {
            (alpha[i] - cost, alpha[i])
        };
        let (t_lo_j, t_hi_j) = if labels[j] > 0.0 {
            (alpha[j] - cost, alpha[j])
        } else {
            (-alpha[j], cost - alpha[j])
        };
        let t_lo = t_lo_i.max(t_lo_j);
        let t_hi = t_hi_i.min(t_hi_j);
        t_step = t_step.clamp(t_lo, t_hi);
        if t_step == 0.0 {
            converged = true;
            break;
        }

        alpha[i] += labels[i] * t_step;
        alpha[j] -= labels[j] * t_step;
        // alpha_i y_i changed by +t, alpha_j y_j by -t.
        for t in 0..m {
            f[t] += t_step * (kernel[i][t] - kernel[j][t]);
        }
        iterations += 1;
    }

    let dual_value: f64 = alpha.iter().sum::<f64>()
        - 0.5
            * (0..m)
                .map(|i| alpha[i] * labels[i] * f[i])
                .sum::<f64>();
    DualResult {
        alpha,
        dual_value,
        converged,
        iterations,
    }
}
