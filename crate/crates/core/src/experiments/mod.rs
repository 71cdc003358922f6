//! Experiment drivers: convergence studies and TVD time-step sweeps.
//!
//! Results serialize to CSV (tables) and JSON (sidecars with the full setup).

mod convergence;
mod tvd;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::problems::TestProblem;

pub use convergence::{
    fit_slope, run_convergence, ConvergencePoint, ConvergenceResult, ConvergenceSpec, ErrorNorm, CONVERGENCE_REFERENCE_TOL,
    ROUNDOFF_FACTOR,
};
pub use tvd::{
    compare_csv, predicted_lambda, run_predicted_vs_observed, run_tvd_sweep, CompareRow,
    SweepResult, SweepSample, SweepSpec,
};

/// JSON record of everything a result depends on.
pub fn sidecar(kind: &str, problem: &TestProblem, params: &impl Serialize, seed: Option<u64>) -> Value {
    json!({
        "experiment": kind,
        "problem": problem.name,
        "setup": problem.setup,
        "grid": problem.grid,
        "dt_fe_explicit": problem.dt_fe_explicit,
        "dt_fe_implicit": problem.dt_fe_implicit,
        "k_estimate": problem.k_estimate,
        "parameters": params,
        "seed": seed,
    })
}

/// Header and rows of a CSV file written by this crate.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .enumerate()
        .map(|(i, rec)| {
            rec.map(|rec| rec.iter().map(String::from).collect())
                .map_err(|e| Error::parse(i + 2, e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
