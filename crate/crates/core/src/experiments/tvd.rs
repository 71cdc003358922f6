use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{integrate_steps, Stepper};
use crate::problems::{max_tv_rise, TestProblem};
use crate::ssp::{imex_ssp_radius, ssp_radius, ImexSspQuery, DEFAULT_REL_TOL};
use crate::tableau::{KValue, Method};

#[derive(Clone, Debug, Serialize)]
pub struct SweepSpec {
    pub steps: usize,
    /// A TV rise at or above this counts as a violation.
    pub threshold: f64,
    /// Final bracket width on λ.
    pub width: f64,
    /// Multiplicative step of the coarse ladder.
    pub ladder: f64,
    /// Give up (no violation observed) beyond this λ.
    pub lambda_cap: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            steps: 20,
            threshold: 1e-10,
            width: 1e-12,
            ladder: 1.05,
            lambda_cap: 100.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSample {
    pub lambda: f64,
    pub max_tv_rise: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub method: String,
    pub problem: String,
    /// Every λ probed, in probing order.
    pub samples: Vec<SweepSample>,
    /// Largest λ seen without a violation, bracketed to `width` from above.
    pub lambda_star: Option<f64>,
    pub width: f64,
    pub predicted: Option<f64>,
    pub note: Option<String>,
}

impl SweepResult {
    pub fn samples_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.samples {
            w.serialize(s).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("utf-8")
    }

    /// Observed minus predicted, when both exist.
    pub fn gap(&self) -> Option<f64> {
        Some(self.lambda_star? - self.predicted?)
    }
}

/// Predicted TVD limit in units of `Δt/Δx`: the certified radius times the
/// forward-Euler step. IMEX pairs use the radius at the problem's own `K`.
pub fn predicted_lambda(method: &Method, p: &TestProblem) -> Result<Option<f64>> {
    let Some(dx) = p.dx() else { return Ok(None) };
    match method {
        Method::Imex(pair) => {
            let (Some(fe), Some(k)) = (p.dt_fe_explicit, p.k_estimate) else {
                return Ok(None);
            };
            let r = imex_ssp_radius(ImexSspQuery { pair, k: KValue::finite(k)? }, DEFAULT_REL_TOL)?;
            Ok(Some(r * fe / dx))
        }
        other => {
            let Some(fe) = p.dt_fe_combined() else { return Ok(None) };
            let r = ssp_radius(&other.to_butcher()?, DEFAULT_REL_TOL)?;
            Ok(Some(r * fe / dx))
        }
    }
}

fn rise(method: &dyn Stepper, p: &TestProblem, dx: f64, lambda: f64, steps: usize) -> Result<f64> {
    let traj = integrate_steps(method, &p.system, &p.u0, lambda * dx, steps, 1)?;
    Ok(max_tv_rise(&traj))
}

/// Raises λ on a geometric ladder until the TV rise over the first `steps`
/// steps reaches the threshold, then bisects the last bracket.
pub fn run_tvd_sweep(method: &Method, p: &TestProblem, spec: &SweepSpec) -> Result<SweepResult> {
    let dx = p
        .dx()
        .ok_or_else(|| Error::Validation(format!("'{}' has no spatial grid", p.name)))?;
    let predicted = predicted_lambda(method, p)?;
    let mut samples = Vec::new();
    let mut probe = |lambda: f64| -> Result<bool> {
        let r = rise(method, p, dx, lambda, spec.steps)?;
        samples.push(SweepSample { lambda, max_tv_rise: r });
        Ok(r >= spec.threshold || !r.is_finite())
    };
    let start = match predicted {
        Some(c) if c > 0.0 => (c / 10.0).min(0.1),
        _ => 0.1,
    };
    let (mut lo, mut hi) = (0.0, start);
    let mut violated = probe(start)?;
    while !violated {
        lo = hi;
        hi *= spec.ladder;
        if hi > spec.lambda_cap {
            return Ok(SweepResult {
                method: method.name().into(),
                problem: p.name.clone(),
                samples,
                lambda_star: None,
                width: f64::INFINITY,
                predicted,
                note: Some(format!("no violation observed up to lambda = {}", spec.lambda_cap)),
            });
        }
        violated = probe(hi)?;
    }
    while hi - lo > spec.width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SweepResult {
        method: method.name().into(),
        problem: p.name.clone(),
        samples,
        lambda_star: Some(lo),
        width: hi - lo,
        predicted,
        note: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub kind: String,
    pub omega: f64,
    pub predicted: Option<f64>,
    pub observed: Option<f64>,
    /// Observed λ over the explicit baseline's observed λ at the same ω.
    pub ratio: Option<f64>,
}

/// Predicted and observed TVD limits for every method on every wavespeed.
/// `build` makes the problem for a given ω; `baseline` names the method the
/// ratio column is taken against.
pub fn run_predicted_vs_observed(
    methods: &[Method],
    omegas: &[f64],
    build: impl Fn(f64) -> Result<TestProblem> + Sync,
    baseline: Option<&str>,
    spec: &SweepSpec,
) -> Result<Vec<CompareRow>> {
    let cells: Vec<(usize, f64)> = (0..methods.len())
        .flat_map(|i| omegas.iter().map(move |&w| (i, w)))
        .collect();
    let mut rows: Vec<CompareRow> = cells
        .par_iter()
        .map(|&(i, omega)| -> Result<CompareRow> {
            let p = build(omega)?;
            let res = run_tvd_sweep(&methods[i], &p, spec)?;
            Ok(CompareRow {
                method: methods[i].name().into(),
                kind: methods[i].class().into(),
                omega,
                predicted: res.predicted,
                observed: res.lambda_star,
                ratio: None,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.omega.total_cmp(&b.omega).then_with(|| a.method.cmp(&b.method)));
    if let Some(base) = baseline {
        for i in 0..rows.len() {
            let reference = rows
                .iter()
                .find(|r| r.method == base && r.omega == rows[i].omega)
                .and_then(|r| r.observed);
            rows[i].ratio = match (rows[i].observed, reference) {
                (Some(o), Some(b)) => Some(o / b),
                _ => None,
            };
        }
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("utf-8")
}
