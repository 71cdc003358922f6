//! Levenberg–Marquardt for small dense least-squares problems with
//! central-difference Jacobians.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOutcome {
    pub x: DVector<f64>,
    /// `‖f(x)‖²` at the returned point.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted step.
    pub trajectory: Vec<f64>,
}

fn jacobian(f: &impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for k in 0..n {
        let h = 1e-7 * x[k].abs().max(1.0);
        let orig = xp[k];
        xp[k] = orig + h;
        let fp = f(&xp);
        xp[k] = orig - h;
        let fm = f(&xp);
        xp[k] = orig;
        j.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// Minimizes `‖f(x)‖²` from `x0`, stopping once the objective drops below
/// `target` or after `max_iters` Jacobian evaluations.
pub(crate) fn minimize(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x0: DVector<f64>,
    max_iters: usize,
    target: f64,
) -> LmOutcome {
    let mut x = x0;
    let mut fx = f(&x);
    let mut obj = fx.norm_squared();
    if !obj.is_finite() {
        return LmOutcome { x, objective: f64::INFINITY, iterations: 0, trajectory: vec![] };
    }
    let mut mu = 1e-3;
    let mut trajectory = vec![obj];
    let mut iterations = 0;
    while iterations < max_iters && obj > target {
        iterations += 1;
        let j = jacobian(&f, &x, fx.len());
        let g = j.transpose() * &fx;
        let h = j.transpose() * &j;
        let mut improved = false;
        while mu < 1e20 {
            let mut damped = h.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += mu * (1.0 + h[(k, k)]);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let xn = &x + &step;
            let fxn = f(&xn);
            let on = fxn.norm_squared();
            if on.is_finite() && on < obj {
                let rel = (obj - on) / obj;
                x = xn;
                fx = fxn;
                obj = on;
                mu = (mu / 3.0).max(1e-15);
                improved = rel > 0.0;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
        trajectory.push(obj);
    }
    LmOutcome { x, objective: obj, iterations, trajectory }
}
