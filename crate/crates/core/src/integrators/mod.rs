//! Fixed-step time stepping for explicit, diagonally implicit and IMEX methods.
//!
//! Implicit stages solve `y = w + h·P(y)`. Linear parts are solved directly;
//! everything else goes through Newton's method.

mod reference;
mod system;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tableau::{ButcherTableau, ImexTableau, Method, ShuOsherForm, Structure};

pub use reference::{reference_solution, reference_solution_with, ReferenceReport, DEFAULT_REFERENCE_TOL};
pub use system::{Circulant, JacobianFn, LinearOp, OdeSystem, Part, RhsFn};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

/// Per-step solver diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    /// Newton updates summed over the stages (a direct linear solve counts as one).
    pub newton_iterations: usize,
    pub max_stage_residual: f64,
}

impl StepStats {
    fn absorb(&mut self, iters: usize, residual: f64) {
        self.newton_iterations += iters;
        self.max_stage_residual = self.max_stage_residual.max(residual);
    }
}

/// Solves `y = w + h·P(y)`, returning `(y, iterations, relative residual)`.
pub fn solve_stage(part: &Part, w: &DVector<f64>, h: f64) -> Result<(DVector<f64>, usize, f64)> {
    if h == 0.0 {
        return Ok((w.clone(), 0, 0.0));
    }
    let rel = |y: &DVector<f64>, r: &DVector<f64>| r.amax() / y.amax().max(1.0);
    if let Some(op) = part.linear_op() {
        let y = op
            .solve_shifted(h, w)
            .ok_or_else(|| Error::Singular(format!("I − {h}·M is singular")))?;
        let res = &y - w - op.apply(&y) * h;
        return Ok((y.clone(), 1, rel(&y, &res)));
    }
    let n = w.len();
    let mut y = w.clone();
    let mut residual = &y - w - part.eval(&y) * h;
    let mut iterations = 0;
    loop {
        let r = rel(&y, &residual);
        if !r.is_finite() {
            return Err(Error::NewtonFailure { iterations, residual: r });
        }
        if r <= NEWTON_TOL {
            return Ok((y, iterations, r));
        }
        if iterations == NEWTON_MAX_ITERS {
            return Err(Error::NewtonFailure { iterations, residual: r });
        }
        let j = DMatrix::identity(n, n) - part.jacobian(&y) * h;
        let delta = j
            .lu()
            .solve(&residual)
            .ok_or_else(|| Error::Singular("Newton matrix".into()))?;
        y -= delta;
        residual = &y - w - part.eval(&y) * h;
        iterations += 1;
    }
}

/// Anything that advances a state by one step.
pub trait Stepper: Sync {
    fn step_with_stats(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, StepStats)>;

    fn step(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        self.step_with_stats(sys, u, dt).map(|(u, _)| u)
    }
}

fn require_dirk(t: &ButcherTableau) -> Result<()> {
    if t.structure() == Structure::Full {
        return Err(Error::Validation(format!(
            "'{}' is fully implicit; only explicit and diagonally implicit tableaux can be stepped",
            t.name()
        )));
    }
    Ok(())
}

impl Stepper for ButcherTableau {
    /// Steps `u' = F + G` (or `F`) with the tableau.
    fn step_with_stats(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, StepStats)> {
        require_dirk(self)?;
        let part = sys.combined();
        let (a, b) = (self.a(), self.b());
        let s = self.stages();
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut stats = StepStats::default();
        for i in 0..s {
            let mut w = u.clone();
            for (j, kj) in k.iter().enumerate() {
                if a[(i, j)] != 0.0 {
                    w.axpy(dt * a[(i, j)], kj, 1.0);
                }
            }
            let (y, it, res) = solve_stage(&part, &w, dt * a[(i, i)])?;
            stats.absorb(it, res);
            k.push(part.eval(&y));
        }
        let mut out = u.clone();
        for (j, kj) in k.iter().enumerate() {
            out.axpy(dt * b[j], kj, 1.0);
        }
        Ok((out, stats))
    }
}

impl Stepper for ImexTableau {
    /// `F` is treated explicitly and `G` implicitly.
    fn step_with_stats(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, StepStats)> {
        let g = sys.g().ok_or_else(|| {
            Error::Validation("IMEX stepping needs a split system with both F and G".into())
        })?;
        let f = sys.f();
        let (a, b) = (self.explicit().a(), self.explicit().b());
        let (at, bt) = (self.implicit().a(), self.implicit().b());
        let s = self.stages();
        let mut kf: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut kg: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut stats = StepStats::default();
        for i in 0..s {
            let mut w = u.clone();
            for j in 0..i {
                if a[(i, j)] != 0.0 {
                    w.axpy(dt * a[(i, j)], &kf[j], 1.0);
                }
                if at[(i, j)] != 0.0 {
                    w.axpy(dt * at[(i, j)], &kg[j], 1.0);
                }
            }
            let (y, it, res) = solve_stage(g, &w, dt * at[(i, i)])?;
            stats.absorb(it, res);
            kf.push(f.eval(&y));
            kg.push(g.eval(&y));
        }
        let mut out = u.clone();
        for j in 0..s {
            out.axpy(dt * b[j], &kf[j], 1.0);
            out.axpy(dt * bt[j], &kg[j], 1.0);
        }
        Ok((out, stats))
    }
}

impl Stepper for ShuOsherForm {
    /// Direct recursion `y_i = v_i u + Σ_j (α_ij y_j + Δt β_ij F(y_j))`.
    fn step_with_stats(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, StepStats)> {
        let (alpha, beta, v) = (self.alpha(), self.beta(), self.v());
        let s = self.stages();
        let upper = (0..s).any(|i| ((i + 1)..s).any(|j| alpha[(i, j)] != 0.0 || beta[(i, j)] != 0.0));
        if upper {
            return Err(Error::Validation(
                "Shu–Osher stepping needs lower-triangular alpha and beta".into(),
            ));
        }
        let part = sys.combined();
        let mut ys: Vec<DVector<f64>> = Vec::with_capacity(s + 1);
        let mut ks: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut stats = StepStats::default();
        for i in 0..=s {
            let mut w = u * v[i];
            for j in 0..i.min(s) {
                w.axpy(alpha[(i, j)], &ys[j], 1.0);
                w.axpy(dt * beta[(i, j)], &ks[j], 1.0);
            }
            if i == s {
                return Ok((w, stats));
            }
            let d = 1.0 - alpha[(i, i)];
            if d == 0.0 {
                return Err(Error::Singular(format!("alpha_{0}{0} = 1", i + 1)));
            }
            let (y, it, res) = solve_stage(&part, &(w / d), dt * beta[(i, i)] / d)?;
            stats.absorb(it, res);
            ks.push(part.eval(&y));
            ys.push(y);
        }
        unreachable!()
    }
}

impl Stepper for Method {
    fn step_with_stats(&self, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, StepStats)> {
        match self {
            Method::Butcher(t) => t.step_with_stats(sys, u, dt),
            Method::Imex(t) => t.step_with_stats(sys, u, dt),
            Method::ShuOsher(t) => t.step_with_stats(sys, u, dt),
        }
    }
}

pub fn step_rk(t: &ButcherTableau, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    t.step(sys, u, dt)
}

pub fn step_imex(pair: &ImexTableau, sys: &OdeSystem, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    pair.step(sys, u, dt)
}

/// Snapshots of a fixed-step run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// One entry per step taken, snapshot or not.
    pub diagnostics: Vec<StepStats>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("a trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |u| u.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",u_{i}"));
        }
        out.push('\n');
        for (t, u) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:e}"));
            for v in u.iter() {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Reads the output of [`Trajectory::to_csv`]. Diagnostics are not stored
    /// in the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty trajectory CSV"))?;
        let n = header.split(',').count().saturating_sub(1);
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if vals.len() != n + 1 {
                return Err(Error::parse(i + 1, format!("expected {} fields, got {}", n + 1, vals.len())));
            }
            times.push(vals[0]);
            states.push(DVector::from_column_slice(&vals[1..]));
        }
        if times.is_empty() {
            return Err(Error::parse(2, "trajectory CSV has no rows"));
        }
        Ok(Trajectory {
            times,
            states,
            diagnostics: Vec::new(),
        })
    }
}

/// Number of steps of size `dt` from `0` to `t_final`; rejects a partial final step.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("t_final must be nonnegative, got {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::Domain(format!(
            "t_final = {t_final} is not a whole number of steps of {dt}"
        )));
    }
    Ok(n as usize)
}

/// Integrates from `t = 0` to `t_final` in equal steps, keeping every
/// `stride`-th state plus the last one.
pub fn integrate(
    method: &dyn Stepper,
    sys: &OdeSystem,
    u0: &DVector<f64>,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory> {
    let n = step_count(dt, t_final)?;
    integrate_steps(method, sys, u0, dt, n, stride)
}

pub fn integrate_steps(
    method: &dyn Stepper,
    sys: &OdeSystem,
    u0: &DVector<f64>,
    dt: f64,
    steps: usize,
    stride: usize,
) -> Result<Trajectory> {
    if u0.len() != sys.dim() {
        return Err(Error::Validation(format!(
            "initial state has {} components, system has {}",
            u0.len(),
            sys.dim()
        )));
    }
    let stride = stride.max(1);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        diagnostics: Vec::with_capacity(steps),
    };
    let mut u = u0.clone();
    for k in 1..=steps {
        let (next, stats) = method
            .step_with_stats(sys, &u, dt)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        u = next;
        traj.diagnostics.push(stats);
        if k % stride == 0 || k == steps {
            traj.times.push(k as f64 * dt);
            traj.states.push(u.clone());
        }
    }
    Ok(traj)
}
