//! Adaptive Dormand–Prince 5(4) reference integrator.

use nalgebra::DVector;
use serde::Serialize;

use super::OdeSystem;
use crate::error::{Error, Result};

pub const DEFAULT_REFERENCE_TOL: f64 = 1e-12;

/// Largest change allowed between the runs at `tol` and `tol/2`, relative to
/// `max(1, |u|)`.
const AGREEMENT: f64 = 1e-10;

const MAX_STEPS: usize = 5_000_000;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceReport {
    pub tol: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Max-norm change between the `tol` and `tol/2` solutions.
    pub halving_change: f64,
}

fn dopri(sys: &OdeSystem, u0: &DVector<f64>, t_final: f64, tol: f64) -> Result<(DVector<f64>, usize, usize)> {
    let mut u = u0.clone();
    if t_final == 0.0 {
        return Ok((u, 0, 0));
    }
    let mut t = 0.0;
    let mut k0 = sys.eval(&u);
    let mut h = (tol.powf(0.2) * 0.1).min(t_final);
    let (mut accepted, mut rejected) = (0, 0);
    while t < t_final {
        if accepted + rejected > MAX_STEPS {
            return Err(Error::Reference(format!("step budget exhausted at t = {t}")));
        }
        let last = t + h >= t_final;
        if last {
            h = t_final - t;
        }
        if h < 1e-14 * t_final.max(1.0) && !last {
            return Err(Error::Reference(format!("step size underflow at t = {t}")));
        }
        let mut k: Vec<DVector<f64>> = vec![k0.clone()];
        for i in 1..7 {
            let mut y = u.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[i][j] != 0.0 {
                    y.axpy(h * A[i][j], kj, 1.0);
                }
            }
            k.push(sys.eval(&y));
        }
        let mut unew = u.clone();
        let mut err = DVector::zeros(u.len());
        for j in 0..7 {
            if j < 6 && A[6][j] != 0.0 {
                unew.axpy(h * A[6][j], &k[j], 1.0);
            }
            err.axpy(h * E[j], &k[j], 1.0);
        }
        let scale: f64 = err
            .iter()
            .zip(u.iter().zip(unew.iter()))
            .map(|(e, (a, b))| e / (tol * (1.0 + a.abs().max(b.abs()))))
            .map(|q| q * q)
            .sum::<f64>()
            / u.len().max(1) as f64;
        let norm = scale.sqrt();
        if !norm.is_finite() {
            return Err(Error::Reference(format!("non-finite solution near t = {t}")));
        }
        if norm <= 1.0 {
            t = if last { t_final } else { t + h };
            u = unew;
            k0 = k.pop().expect("seven stages");
            accepted += 1;
        } else {
            rejected += 1;
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok((u, accepted, rejected))
}

/// Reference state at `t_final` with tolerance `tol`, verified by rerunning
/// at `tol/2` and requiring agreement to `1e-10·max(1, |u|)`.
pub fn reference_solution_with(
    sys: &OdeSystem,
    u0: &DVector<f64>,
    t_final: f64,
    tol: f64,
) -> Result<(DVector<f64>, ReferenceReport)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let (coarse, _, _) = dopri(sys, u0, t_final, tol)?;
    let (fine, steps, rejected) = dopri(sys, u0, t_final, tol / 2.0)?;
    let change = (&fine - &coarse).amax();
    let bound = AGREEMENT * fine.amax().max(1.0);
    if !(change <= bound) {
        return Err(Error::Reference(format!(
            "halving the tolerance changed the answer by {change:e} (allowed {bound:e})"
        )));
    }
    Ok((
        fine,
        ReferenceReport {
            tol,
            steps,
            rejected,
            halving_change: change,
        },
    ))
}

pub fn reference_solution(sys: &OdeSystem, u0: &DVector<f64>, t_final: f64, tol: f64) -> Result<DVector<f64>> {
    reference_solution_with(sys, u0, t_final, tol).map(|(u, _)| u)
}
