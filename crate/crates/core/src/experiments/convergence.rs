use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{integrate_steps, reference_solution, Stepper};
use crate::problems::TestProblem;

/// Reference tolerance for convergence studies. Errors of high-order methods
/// on mild problems reach 1e-13, so the default reference tolerance is too loose.
pub const CONVERGENCE_REFERENCE_TOL: f64 = 1e-14;

/// Errors at or below `ROUNDOFF_FACTOR · ε · |u|` are left out of the fit.
pub const ROUNDOFF_FACTOR: f64 = 1e2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorNorm {
    FirstComponent,
    L2,
    Max,
}

impl ErrorNorm {
    pub fn measure(self, e: &DVector<f64>) -> f64 {
        match self {
            ErrorNorm::FirstComponent => e[0].abs(),
            ErrorNorm::L2 => e.norm(),
            ErrorNorm::Max => e.amax(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first" | "first-component" => Some(ErrorNorm::FirstComponent),
            "l2" => Some(ErrorNorm::L2),
            "max" => Some(ErrorNorm::Max),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSpec {
    pub dts: Vec<f64>,
    pub t_final: f64,
    pub norm: ErrorNorm,
    pub reference_tol: f64,
}

impl ConvergenceSpec {
    /// The time steps and norms used for the catalog's convergence problems.
    pub fn for_problem(p: &TestProblem) -> Result<Self> {
        let dx = p.dx();
        let lambdas = |ls: &[f64]| -> Vec<f64> { ls.iter().map(|l| l * dx.unwrap_or(1.0)).collect() };
        let t_final = p
            .t_final
            .ok_or_else(|| Error::Validation(format!("'{}' has no final time", p.name)))?;
        let (dts, norm) = match p.name.as_str() {
            "example-1.1" | "example-1.1-eps0.1" => (
                [250.0, 350.0, 450.0, 550.0, 650.0].iter().map(|n| 1.0 / n).collect(),
                ErrorNorm::FirstComponent,
            ),
            "example-1.2" => (
                lambdas(&(1..=9).map(|k| k as f64 / 10.0).collect::<Vec<_>>()),
                ErrorNorm::L2,
            ),
            "example-1.3" => (
                lambdas(&[1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0]),
                ErrorNorm::FirstComponent,
            ),
            "example-3.1" => (
                lambdas(&[1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0]),
                ErrorNorm::L2,
            ),
            "example-3.2" => (
                lambdas(&[1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0]),
                ErrorNorm::L2,
            ),
            other => {
                return Err(Error::Validation(format!(
                    "no default convergence setup for '{other}'"
                )))
            }
        };
        Ok(ConvergenceSpec {
            dts,
            t_final,
            norm,
            reference_tol: CONVERGENCE_REFERENCE_TOL,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergencePoint {
    pub dt: f64,
    pub steps: usize,
    /// Final time actually reached, `steps · dt`.
    pub t_final: f64,
    pub error: f64,
    pub in_fit: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceResult {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log error` against `log dt` over the fit window.
    pub slope: f64,
    pub fit_points: usize,
}

impl ConvergenceResult {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            w.serialize(p).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("utf-8")
    }
}

/// Least-squares slope through `(log x, log y)`. NaN with fewer than two points.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs `method` at every step size. The final time is rounded to a whole
/// number of steps (changing it by less than one step), and each run is
/// compared against the exact solution when the problem has one, else
/// against the verified reference integrator at that time.
pub fn run_convergence(method: &dyn Stepper, p: &TestProblem, spec: &ConvergenceSpec) -> Result<ConvergenceResult> {
    let mut points: Vec<ConvergencePoint> = spec
        .dts
        .par_iter()
        .map(|&dt| -> Result<(ConvergencePoint, f64)> {
            let steps = ((spec.t_final / dt).round() as usize).max(1);
            let t_final = steps as f64 * dt;
            let traj = integrate_steps(method, &p.system, &p.u0, dt, steps, steps)?;
            let exact = match &p.exact {
                Some(f) => f(t_final),
                None => reference_solution(&p.system, &p.u0, t_final, spec.reference_tol)?,
            };
            let error = spec.norm.measure(&(traj.final_state() - &exact));
            let floor = ROUNDOFF_FACTOR * f64::EPSILON * spec.norm.measure(&exact).max(exact.amax());
            Ok((
                ConvergencePoint {
                    dt,
                    steps,
                    t_final,
                    error,
                    in_fit: false,
                },
                floor,
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|(mut pt, floor)| {
            pt.in_fit = pt.error > floor && pt.error.is_finite();
            pt
        })
        .collect();
    points.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.in_fit).map(|p| (p.dt, p.error)).collect();
    Ok(ConvergenceResult {
        slope: fit_slope(&fit),
        fit_points: fit.len(),
        points,
    })
}
