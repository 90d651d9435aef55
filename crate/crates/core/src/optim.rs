//! Derivative-free and quasi-Newton minimizers plus a finite-difference
//! Hessian. Objectives may return `+inf` to mark infeasible points; both
//! minimizers only ever move to points that improve on the best value seen,
//! so the returned value never exceeds the value at the start.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop once the spread of objective values across the simplex falls
    /// below this.
    pub value_tolerance: f64,
}

/// Nelder-Mead with the standard coefficients (1, 2, 0.5, 0.5).
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && worst.is_finite() && worst - best <= opts.value_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let toward = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = toward(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = toward(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = toward(0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = toward(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}

/// Central-difference gradient, falling back to a one-sided difference
/// where one neighbour is infeasible.
pub fn gradient<F>(f: &F, x: &[f64], fx: f64, step: f64) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g[i] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - fx) / h,
            (false, true) => (fx - down) / h,
            (false, false) => return None,
        };
    }
    Some(g)
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once one iteration improves the objective by less than this.
    pub value_tolerance: f64,
    pub gradient_step: f64,
}

/// BFGS with finite-difference gradients and a backtracking Armijo line
/// search. When a quasi-Newton direction fails to improve, the inverse
/// Hessian is reset and a steepest-descent step is tried before giving up.
pub fn bfgs<F>(f: F, x0: &[f64], opts: BfgsOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x0);
    if !fx.is_finite() {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            converged: false,
        };
    }
    let grad = |x: &DVector<f64>, fx: f64| {
        gradient(&f, x.as_slice(), fx, opts.gradient_step).map(DVector::from_vec)
    };
    let Some(mut g) = grad(&x, fx) else {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            converged: false,
        };
    };
    let mut inv_h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut step = None;
        for attempt in 0..2 {
            if attempt == 1 {
                inv_h = DMatrix::identity(n, n);
            }
            let mut dir = -(&inv_h * &g);
            let mut slope = g.dot(&dir);
            if !(slope < 0.0) {
                dir = -g.clone();
                slope = -g.norm_squared();
            }
            if slope == 0.0 {
                break;
            }
            let mut t = 1.0;
            for _ in 0..60 {
                let cand = &x + t * &dir;
                let fc = f(cand.as_slice());
                if fc.is_finite() && fc <= fx + 1e-4 * t * slope && fc < fx {
                    step = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            if step.is_some() {
                break;
            }
        }
        let Some((x_new, f_new)) = step else {
            // no descent available at working precision
            converged = true;
            break;
        };
        let improvement = fx - f_new;
        let Some(g_new) = grad(&x_new, f_new) else {
            x = x_new;
            fx = f_new;
            break;
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            inv_h = &left * &inv_h * &right + rho * &s * s.transpose();
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if improvement < opts.value_tolerance {
            converged = true;
            break;
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        converged,
    }
}

/// Hessian by central differences with per-coordinate steps `h`.
/// Returns `None` if any probe is non-finite.
pub fn hessian<F>(f: &F, x: &[f64], h: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let mut probe = x.to_vec();
    let mut at = |moves: &[(usize, f64)]| {
        for &(i, d) in moves {
            probe[i] = x[i] + d;
        }
        let v = f(&probe);
        for &(i, _) in moves {
            probe[i] = x[i];
        }
        v
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let up = at(&[(i, h[i])]);
        let down = at(&[(i, -h[i])]);
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let pp = at(&[(i, h[i]), (j, h[j])]);
            let pm = at(&[(i, h[i]), (j, -h[j])]);
            let mp = at(&[(i, -h[i]), (j, h[j])]);
            let mm = at(&[(i, -h[i]), (j, -h[j])]);
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.iter().all(|v| v.is_finite()).then_some(hess)
}

/// Standard errors from the curvature of a log-likelihood at its maximum:
/// square roots of the diagonal of the inverse negative Hessian.
///
/// Coordinates along which the objective is exactly flat are left out of
/// the inversion and reported as unavailable. If the remaining block is not
/// positive definite, only coordinates with a positive inverse diagonal get
/// a value.
pub fn curvature_std_errors<F>(loglik: &F, theta: &[f64], steps: &[f64]) -> Vec<Option<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = theta.len();
    let Some(h) = hessian(loglik, theta, steps) else {
        return vec![None; n];
    };
    let active: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| h[(i, j)] != 0.0))
        .collect();
    let mut out = vec![None; n];
    if active.is_empty() {
        return out;
    }
    let k = active.len();
    let neg = DMatrix::from_fn(k, k, |a, b| -h[(active[a], active[b])]);
    let inverse = match neg.clone().cholesky() {
        Some(chol) => Some(chol.inverse()),
        None => neg.try_inverse(),
    };
    let Some(inv) = inverse else {
        return out;
    };
    for (a, &i) in active.iter().enumerate() {
        let v = inv[(a, a)];
        if v.is_finite() && v > 0.0 {
            out[i] = Some(v.sqrt());
        }
    }
    out
}
