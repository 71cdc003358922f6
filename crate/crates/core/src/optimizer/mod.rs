//! Searches for methods with large SSP radius under order-condition
//! constraints.
//!
//! An outer search on `r` calls an inner feasibility solve: a least-squares
//! problem in the coefficients and slacks `σ`, with the order residuals and
//! `g(x) − σ²` for each SSP (and optional stability) inequality `g(x) ≥ 0`,
//! solved by Levenberg–Marquardt. A trial `r` is accepted
//! when the inner objective drops below `1e-16`. The outer search halves `r`
//! from 1 until a feasible point appears, grows it by 25% per step with warm
//! starts, then bisects the last bracket. With stability targets each start
//! is first run without them; the targets are then raised gradually from what
//! that optimum attains, and the halving begins from where they are met. Every start runs its own search with
//! its own RNG stream, so results do not depend on thread count
//! and adding starts can only improve the best certified radius.

mod lm;
mod spec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{imex_conditions, rk_conditions, ConditionSet};
use crate::error::{Error, Result};
use crate::ssp::{self, ImexSspQuery, DEFAULT_REL_TOL};
use crate::stability::{imaginary_axis_extent, real_axis_crossing, StabilityFunction};
use crate::tableau::{stacked_matrix, ButcherTableau, ImexTableau, KValue, Method, MethodInfo, Structure};

pub use spec::parse_search_spec;

/// Inner objective below which a trial radius counts as feasible.
pub const INNER_ACCEPT: f64 = 1e-16;

/// Penalty entries used when a resolvent is singular at a trial point.
const SINGULAR_PENALTY: f64 = 1e3;

/// Sample points per axis and per spacing for stability co-constraints.
const CO_SAMPLES: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImexSearch {
    pub p_e: usize,
    pub p_i: usize,
    pub implicit_linear: bool,
    pub k: KValue,
}

/// Minimum stability extents; zero disables a constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CoConstraints {
    pub min_real: f64,
    pub min_imag: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Budget {
    pub multistarts: usize,
    /// Jacobian evaluations per inner solve.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { multistarts: 8, max_iters: 200, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub equality: f64,
    pub feasibility: f64,
    /// Absolute width at which the outer bisection stops.
    pub outer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { equality: 1e-10, feasibility: 1e-12, outer: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchSpec {
    pub s: usize,
    /// Structure of `A`, or of `Ã` for IMEX searches (the explicit part is
    /// always explicit). An IMEX `sdirk` part has `ã₁₁ = 0` and one shared
    /// value on the rest of the diagonal.
    pub structure: Structure,
    pub p: usize,
    pub p_lin: usize,
    pub imex: Option<ImexSearch>,
    pub co_constraints: Option<CoConstraints>,
    pub budget: Budget,
    pub tolerances: Tolerances,
}

impl SearchSpec {
    pub fn rk(s: usize, structure: Structure, p: usize, p_lin: usize) -> Self {
        SearchSpec {
            s,
            structure,
            p,
            p_lin,
            imex: None,
            co_constraints: None,
            budget: Budget::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn imex(s: usize, p_e: usize, p_i: usize, p_lin: usize, k: KValue) -> Self {
        SearchSpec {
            imex: Some(ImexSearch { p_e, p_i, implicit_linear: false, k }),
            ..SearchSpec::rk(s, Structure::Dirk, p_e.min(p_i), p_lin)
        }
    }

    pub fn with_budget(mut self, multistarts: usize, max_iters: usize, seed: u64) -> Self {
        self.budget = Budget { multistarts, max_iters, seed };
        self
    }

    pub fn with_co_constraints(mut self, min_real: f64, min_imag: f64) -> Self {
        self.co_constraints = Some(CoConstraints { min_real, min_imag });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.s == 0 || self.s > 12 {
            return Err(Error::Domain(format!("stage count must be in 1..=12, got {}", self.s)));
        }
        if self.p == 0 || self.p > 6 {
            return Err(Error::Domain(format!("nonlinear order must be in 1..=6, got {}", self.p)));
        }
        if self.p > self.p_lin {
            return Err(Error::Domain(format!(
                "nonlinear order {} exceeds linear order {}",
                self.p, self.p_lin
            )));
        }
        if self.budget.multistarts == 0 {
            return Err(Error::Domain("at least one start is required".into()));
        }
        if let Some(im) = self.imex {
            if self.structure == Structure::Explicit || self.structure == Structure::Full {
                return Err(Error::Domain("the implicit part of an IMEX search must be dirk or sdirk".into()));
            }
            if im.p_e.min(im.p_i) != self.p {
                return Err(Error::Domain("p must equal min(p_e, p_i) for IMEX searches".into()));
            }
        }
        if let Some(co) = self.co_constraints {
            if !(co.min_real >= 0.0 && co.min_imag >= 0.0) {
                return Err(Error::Domain("stability targets must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn cap(&self) -> f64 {
        if self.imex.is_none() && self.structure == Structure::Explicit {
            self.s as f64 + 1.0
        } else {
            4.0 * (self.s as f64 + 1.0)
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    A(usize, usize),
    B(usize),
    At(usize, usize),
    Bt(usize),
    /// One value shared by the diagonal of `A` (or of `Ã` from the given row).
    SharedDiag { implicit: bool, from: usize },
}

struct Layout {
    s: usize,
    imex: bool,
    slots: Vec<Slot>,
}

struct Coeffs {
    a: DMatrix<f64>,
    b: DVector<f64>,
    at: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl Layout {
    fn new(spec: &SearchSpec) -> Self {
        let s = spec.s;
        let mut slots = Vec::new();
        let part = |slots: &mut Vec<Slot>, structure: Structure, implicit: bool, diag_from: usize| {
            for i in 0..s {
                for j in 0..s {
                    let free = match structure {
                        Structure::Explicit => j < i,
                        Structure::Dirk => j <= i,
                        Structure::Sdirk => j < i,
                        Structure::Full => true,
                    };
                    if free {
                        slots.push(if implicit { Slot::At(i, j) } else { Slot::A(i, j) });
                    }
                }
            }
            if structure == Structure::Sdirk {
                slots.push(Slot::SharedDiag { implicit, from: diag_from });
            }
            for i in 0..s {
                slots.push(if implicit { Slot::Bt(i) } else { Slot::B(i) });
            }
        };
        match spec.imex {
            None => part(&mut slots, spec.structure, false, 0),
            Some(_) => {
                part(&mut slots, Structure::Explicit, false, 0);
                part(&mut slots, spec.structure, true, 1);
            }
        }
        Layout { s, imex: spec.imex.is_some(), slots }
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn decode(&self, x: &DVector<f64>) -> Coeffs {
        let s = self.s;
        let mut a = DMatrix::zeros(s, s);
        let mut b = DVector::zeros(s);
        let mut at = DMatrix::zeros(s, s);
        let mut bt = DVector::zeros(s);
        for (slot, &v) in self.slots.iter().zip(x.iter()) {
            match *slot {
                Slot::A(i, j) => a[(i, j)] = v,
                Slot::B(i) => b[i] = v,
                Slot::At(i, j) => at[(i, j)] = v,
                Slot::Bt(i) => bt[i] = v,
                Slot::SharedDiag { implicit, from } => {
                    let m = if implicit { &mut at } else { &mut a };
                    for i in from..s {
                        m[(i, i)] = v;
                    }
                }
            }
        }
        Coeffs { a, b, at: self.imex.then_some((at, bt)) }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let hi = 2.0 / self.s as f64;
        DVector::from_iterator(
            self.len(),
            self.slots.iter().map(|slot| match slot {
                Slot::A(i, j) | Slot::At(i, j) if i == j => 1.0 - rng.random_range(0.0..1.0),
                Slot::SharedDiag { .. } => 1.0 - rng.random_range(0.0..1.0),
                _ => rng.random_range(0.0..hi),
            }),
        )
    }
}

struct Problem<'a> {
    spec: &'a SearchSpec,
    layout: Layout,
    conditions: ConditionSet,
    /// Indices of inequality entries that are not identically zero.
    active: Vec<usize>,
}

/// Samples in `(0, target]`: geometric (dense near the origin) and uniform.
fn co_points(target: f64) -> impl Iterator<Item = f64> {
    let geometric = (0..CO_SAMPLES).map(move |k| target * 1e-3f64.powf(k as f64 / (CO_SAMPLES - 1) as f64));
    let uniform = (1..CO_SAMPLES).map(move |k| target * k as f64 / CO_SAMPLES as f64);
    geometric.chain(uniform)
}

impl<'a> Problem<'a> {
    fn new(spec: &'a SearchSpec, conditions: ConditionSet) -> Self {
        let layout = Layout::new(spec);
        let mut p = Problem { spec, layout, conditions, active: Vec::new() };
        // Structural zeros survive the triangular solves exactly, so one
        // random point identifies them.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let x = p.layout.random(&mut rng);
        let g = p.inequalities(&x, 0.37).expect("random point is nonsingular");
        p.active = (0..g.len()).filter(|&k| g[k] != 0.0).collect();
        p
    }

    fn equalities(&self, c: &Coeffs) -> Vec<f64> {
        let tilde = c.at.as_ref().map(|(at, bt)| (at, bt));
        self.conditions
            .residuals_raw(&c.a, &c.b, tilde)
            .expect("layout matches condition set")
    }

    /// All quantities that must be nonnegative at radius `r`, or `None` if
    /// the resolvent is singular.
    fn inequalities(&self, x: &DVector<f64>, r: f64) -> Option<Vec<f64>> {
        let c = self.layout.decode(x);
        let mut g = Vec::new();
        match (&c.at, self.spec.imex) {
            (Some((at, bt)), Some(im)) => {
                let s = stacked_matrix(&c.a, &c.b);
                let st = stacked_matrix(at, bt);
                let (re, p, q) = ssp::imex_parts(&s, &st, r, r * im.k.inverse())?;
                g.extend(re.iter());
                g.extend(p.iter());
                if im.k != KValue::Infinite {
                    g.extend(q.iter());
                }
            }
            _ => {
                let xm = ssp::rk_resolvent(&stacked_matrix(&c.a, &c.b), r)?;
                g.extend(xm.iter());
                for i in 0..xm.nrows() {
                    g.push(1.0 - r * xm.row(i).sum());
                }
            }
        }
        if let Some(co) = self.spec.co_constraints {
            let (a, b) = match &c.at {
                Some((at, bt)) => (at.clone(), bt.clone()),
                None => (c.a.clone(), c.b.clone()),
            };
            let f = StabilityFunction::new(&ButcherTableau::new(a, b).ok()?);
            for (target, dir) in [(co.min_real, Complex64::new(-1.0, 0.0)), (co.min_imag, Complex64::new(0.0, 1.0))] {
                if target > 0.0 {
                    g.extend(co_points(target).map(|t| (1.0 - f.modulus(dir * t)).max(-SINGULAR_PENALTY)));
                }
            }
        }
        Some(g)
    }

    /// Order residuals followed by `g_k − σ_k²` for the active inequalities;
    /// `full` holds the coefficients and then the slacks `σ`.
    fn residuals(&self, full: &DVector<f64>, r: f64) -> DVector<f64> {
        let n = self.layout.len();
        let x = full.rows(0, n).into_owned();
        let mut out = self.equalities(&self.layout.decode(&x));
        match self.inequalities(&x, r) {
            Some(g) => {
                for (k, &idx) in self.active.iter().enumerate() {
                    let sigma = full[n + k];
                    out.push(g[idx] - sigma * sigma);
                }
            }
            None => out.extend(std::iter::repeat_n(SINGULAR_PENALTY, self.active.len())),
        }
        DVector::from_vec(out)
    }

    /// Inner solve at `r` from coefficients `x0`; slacks start at `√max(g, 0)`.
    fn solve(&self, x0: DVector<f64>, r: f64, iters: usize, target: f64) -> lm::LmOutcome {
        let n = self.layout.len();
        let g = self.inequalities(&x0, r);
        let slacks = self.active.iter().map(|&k| g.as_ref().map_or(0.0, |g| g[k].max(0.0).sqrt()));
        let full = DVector::from_iterator(n + self.active.len(), x0.iter().copied().chain(slacks));
        let mut out = lm::minimize(|v| self.residuals(v, r), full, iters, target);
        out.x = out.x.rows(0, n).into_owned();
        out
    }

    /// Final cleanup at `r`: inequalities within a threshold of their bound
    /// are imposed as equalities and the rest keep slacks, so the system is
    /// nondegenerate and converges quickly onto the boundary. Thresholds
    /// shrink until the resulting system is solvable. An accepted trial can
    /// sit slightly beyond the true optimum (the inner objective tends to zero
    /// continuously there), so `r` is backed off if needed.
    fn polish(&self, x0: &DVector<f64>, r: f64, iters: usize) -> Option<DVector<f64>> {
        [0.0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3].iter().find_map(|&back| {
            let r = r * (1.0 - back);
            [1e-6, 1e-9, 0.0]
                .iter()
                .find_map(|&th| self.polish_with(x0, r, iters, th))
        })
    }

    fn polish_with(&self, x0: &DVector<f64>, r: f64, iters: usize, threshold: f64) -> Option<DVector<f64>> {
        let n = self.layout.len();
        let g0 = self.inequalities(x0, r)?;
        let (tight, loose): (Vec<usize>, Vec<usize>) =
            self.active.iter().partition(|&&k| g0[k] < threshold || g0[k] < 0.0);
        let f = |full: &DVector<f64>| {
            let x = full.rows(0, n).into_owned();
            let mut out = self.equalities(&self.layout.decode(&x));
            match self.inequalities(&x, r) {
                Some(g) => {
                    out.extend(tight.iter().map(|&k| g[k]));
                    out.extend(loose.iter().enumerate().map(|(i, &k)| g[k] - full[n + i] * full[n + i]));
                }
                None => out.extend(std::iter::repeat_n(SINGULAR_PENALTY, tight.len() + loose.len())),
            }
            DVector::from_vec(out)
        };
        let full = DVector::from_iterator(
            n + loose.len(),
            x0.iter().copied().chain(loose.iter().map(|&k| g0[k].max(0.0).sqrt())),
        );
        let out = lm::minimize(f, full, iters, 1e-30);
        (out.objective < 1e-24).then(|| out.x.rows(0, n).into_owned())
    }

    /// Raises the stability targets by 25% per stage from what `x` already
    /// attains, lowering `r` by 10% whenever a stage fails. Returns the point
    /// and radius that meet the full targets, if reached.
    fn walk_targets(&self, co: CoConstraints, mut x: DVector<f64>, mut r: f64, iters: usize) -> Result<Option<(DVector<f64>, f64)>> {
        let t = self.method(&x, 0.0)?.to_butcher()?;
        let mut reached = [-real_axis_crossing(&t, 1e-8), imaginary_axis_extent(&t, 0.0, 1e-8)];
        let goal = [co.min_real, co.min_imag];
        loop {
            let next: Vec<f64> = (0..2)
                .map(|k| if goal[k] > 0.0 { (reached[k].max(goal[k] / 64.0) * 1.25).min(goal[k]) } else { 0.0 })
                .collect();
            let stage_spec = SearchSpec {
                co_constraints: Some(CoConstraints { min_real: next[0], min_imag: next[1] }),
                ..self.spec.clone()
            };
            let stage = Problem::new(&stage_spec, self.conditions.clone());
            loop {
                let out = stage.solve(x.clone(), r, iters, 1e-24);
                if out.objective < INNER_ACCEPT {
                    x = out.x;
                    break;
                }
                r *= 0.9;
                if r < self.spec.tolerances.outer {
                    return Ok(None);
                }
            }
            reached = [next[0], next[1]];
            if next[0] >= goal[0] && next[1] >= goal[1] {
                return Ok(Some((x, r)));
            }
        }
    }

    fn method(&self, x: &DVector<f64>, certified: f64) -> Result<Method> {
        let c = self.layout.decode(x);
        let mut info = MethodInfo {
            p: Some(self.spec.p),
            p_lin: Some(self.spec.p_lin),
            ssp_coefficient: Some(certified),
            ..Default::default()
        };
        match (c.at, self.spec.imex) {
            (Some((at, bt)), Some(im)) => {
                info.name = Some(format!("opt-imex-s{}-pe{}-pi{}-plin{}", self.spec.s, im.p_e, im.p_i, self.spec.p_lin));
                info.p = None;
                info.p_e = Some(im.p_e);
                info.p_i = Some(im.p_i);
                info.k_designed = Some(im.k);
                Ok(ImexTableau::from_matrices(c.a, c.b, at, bt)?.with_info(info).into())
            }
            _ => {
                info.name = Some(format!(
                    "opt-{}-s{}-p{}-plin{}",
                    self.spec.structure, self.spec.s, self.spec.p, self.spec.p_lin
                ));
                Ok(ButcherTableau::new(c.a, c.b)?.with_info(info).into())
            }
        }
    }

    fn certify(&self, m: &Method) -> Result<f64> {
        match (m, self.spec.imex) {
            (Method::Imex(p), Some(im)) => imex_ssp_radius_or_zero(p, im.k),
            _ => {
                let t = m.to_butcher()?;
                match ssp::ssp_radius(&t, DEFAULT_REL_TOL) {
                    Ok(r) => Ok(r),
                    Err(Error::NonMonotone { .. }) => Ok(0.0),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn max_equality_residual(&self, m: &Method) -> Result<f64> {
        let res = match m {
            Method::Imex(p) => self.conditions.residuals(p)?,
            other => self.conditions.residuals(&other.to_butcher()?)?,
        };
        Ok(res.iter().fold(0.0, |acc, v| acc.max(v.abs())))
    }
}

fn imex_ssp_radius_or_zero(p: &ImexTableau, k: KValue) -> Result<f64> {
    match ssp::imex_ssp_radius(ImexSspQuery { pair: p, k }, DEFAULT_REL_TOL) {
        Ok(r) => Ok(r),
        Err(Error::NonMonotone { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// One inner solve at a trial radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trial {
    pub r: f64,
    pub objective: f64,
    pub iterations: usize,
    pub accepted: bool,
    /// Objective after each accepted LM step.
    pub trajectory: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartLog {
    pub index: usize,
    /// Largest trial radius accepted by the bisection (0 if none).
    pub r_internal: f64,
    pub r_certified: f64,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    #[serde(skip)]
    pub method: Method,
    /// Radius of `method` recomputed from scratch.
    pub r: f64,
    /// The best start's accepted bisection radius.
    pub r_internal: f64,
    pub max_equality_residual: f64,
    pub best_start: usize,
    pub starts: Vec<StartLog>,
    pub termination: String,
    pub warnings: Vec<String>,
}

struct StartOutcome {
    log: StartLog,
    x: DVector<f64>,
    feasible: bool,
    best_objective: f64,
}

fn run_start(problem: &Problem<'_>, index: usize) -> Result<StartOutcome> {
    let spec = problem.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.budget.seed);
    rng.set_stream(index as u64);
    let iters = spec.budget.max_iters;
    let cap = spec.cap();
    let mut warm = problem.layout.random(&mut rng);
    let mut r = cap.min(1.0);
    // With stability targets, start from this start's unconstrained optimum
    // and walk r down from its radius.
    if let Some(co) = spec.co_constraints {
        let plain_spec = SearchSpec { co_constraints: None, ..spec.clone() };
        let plain = Problem::new(&plain_spec, problem.conditions.clone());
        let out = run_start(&plain, index)?;
        if out.feasible {
            warm = out.x;
            r = out.log.r_internal;
            if let Some((x, r_walk)) = problem.walk_targets(co, warm.clone(), r, iters)? {
                warm = x;
                r = r_walk;
            }
        }
    }
    let mut best_any = (f64::INFINITY, warm.clone());
    let mut feasible: Option<(f64, DVector<f64>)> = None;
    let mut trials = Vec::new();
    // Solves at `r` from the warm start, retrying once from a fresh point.
    let mut attempt = |r: f64, warm: &DVector<f64>, rng: &mut ChaCha8Rng| {
        let mut out = problem.solve(warm.clone(), r, iters, 1e-24);
        if out.objective >= INNER_ACCEPT {
            let fresh = problem.solve(problem.layout.random(rng), r, iters, 1e-24);
            if fresh.objective < out.objective {
                out = fresh;
            }
        }
        let accepted = out.objective < INNER_ACCEPT;
        trials.push(Trial {
            r,
            objective: out.objective,
            iterations: out.iterations,
            accepted,
            trajectory: out.trajectory.clone(),
        });
        if out.objective < best_any.0 {
            best_any = (out.objective, out.x.clone());
        }
        (accepted, out.x)
    };
    // Find some feasible radius by halving down.
    while r > spec.tolerances.outer {
        let (ok, x) = attempt(r, &warm, &mut rng);
        if ok {
            feasible = Some((r, x.clone()));
            warm = x;
            break;
        }
        r *= 0.5;
    }
    if let Some((r0, _)) = feasible {
        let mut lo = r0;
        let mut hi = cap;
        // Continuation upward while the warm start keeps succeeding; a
        // failure from a cold start above `r0` is not trusted as a bound.
        {
            loop {
                let r = (lo * 1.25).min(cap);
                if r <= lo {
                    break;
                }
                let (ok, x) = attempt(r, &warm, &mut rng);
                if !ok {
                    hi = r;
                    break;
                }
                lo = r;
                warm = x.clone();
                feasible = Some((r, x));
                if r >= cap {
                    hi = cap;
                    break;
                }
            }
        }
        while hi - lo > spec.tolerances.outer {
            let r = 0.5 * (lo + hi);
            let (ok, x) = attempt(r, &warm, &mut rng);
            if ok {
                lo = r;
                warm = x.clone();
                feasible = Some((r, x));
            } else {
                hi = r;
            }
        }
    }
    let (x, r_internal, is_feasible) = match feasible {
        Some((r, x)) => {
            let x = problem.polish(&x, r, iters).unwrap_or(x);
            (x, r, true)
        }
        None => (best_any.1.clone(), 0.0, false),
    };
    let r_certified = if is_feasible {
        problem.certify(&problem.method(&x, 0.0)?)?
    } else {
        0.0
    };
    Ok(StartOutcome {
        log: StartLog { index, r_internal, r_certified, trials },
        x,
        feasible: is_feasible,
        best_objective: best_any.0,
    })
}

fn barrier_warnings(spec: &SearchSpec) -> Vec<String> {
    let mut w = Vec::new();
    let explicit = spec.imex.is_none() && spec.structure == Structure::Explicit;
    if explicit && spec.p > 4 {
        w.push(format!("explicit SSP methods of order {} have zero SSP coefficient", spec.p));
    }
    if explicit && spec.p_lin > spec.s {
        w.push(format!("an explicit method with {} stages cannot have linear order {}", spec.s, spec.p_lin));
    }
    w
}

/// Runs the multistart search described in the module docs.
pub fn optimize(spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    let conditions = match spec.imex {
        None => rk_conditions(spec.p, spec.p_lin)?,
        Some(im) => imex_conditions(im.p_e, im.p_i, spec.p_lin, im.implicit_linear)?,
    };
    let problem = Problem::new(spec, conditions);
    let outcomes: Vec<StartOutcome> = (0..spec.budget.multistarts)
        .into_par_iter()
        .map(|k| run_start(&problem, k))
        .collect::<Result<_>>()?;
    let any_feasible = outcomes.iter().any(|o| o.feasible);
    let best = if any_feasible {
        // First index wins ties.
        outcomes
            .iter()
            .filter(|o| o.feasible)
            .fold(None::<&StartOutcome>, |acc, o| match acc {
                Some(a) if a.log.r_certified >= o.log.r_certified => Some(a),
                _ => Some(o),
            })
            .unwrap()
    } else {
        outcomes
            .iter()
            .fold(&outcomes[0], |a, o| if o.best_objective < a.best_objective { o } else { a })
    };
    let r = if any_feasible { best.log.r_certified } else { 0.0 };
    let method = problem.method(&best.x, r)?;
    let max_equality_residual = problem.max_equality_residual(&method)?;
    let mut warnings = barrier_warnings(spec);
    if let (Some(co), true) = (spec.co_constraints, any_feasible) {
        // The constraints are sampled; check the extents properly.
        let t = match &method {
            Method::Imex(p) => p.implicit().clone(),
            other => other.to_butcher()?,
        };
        let real = -real_axis_crossing(&t, 1e-8);
        let imag = imaginary_axis_extent(&t, 0.0, 1e-8);
        if real < co.min_real || imag < co.min_imag {
            warnings.push(format!(
                "stability targets met only at the samples: real extent {real}, imaginary extent {imag}"
            ));
        }
    }
    if any_feasible && max_equality_residual > spec.tolerances.equality {
        warnings.push(format!(
            "order residual {max_equality_residual:e} exceeds the equality tolerance {:e}",
            spec.tolerances.equality
        ));
    }
    let termination = if any_feasible {
        format!("bisection reached width {:e}", spec.tolerances.outer)
    } else {
        format!(
            "no start found a feasible point; best inner objective {:e}",
            best.best_objective
        )
    };
    Ok(SearchResult {
        method,
        r,
        r_internal: if any_feasible { best.log.r_internal } else { 0.0 },
        max_equality_residual,
        best_start: best.log.index,
        starts: outcomes.into_iter().map(|o| o.log).collect(),
        termination,
        warnings,
    })
}

/// [`optimize`] for specs with an IMEX part.
pub fn optimize_imex(spec: &SearchSpec) -> Result<SearchResult> {
    if spec.imex.is_none() {
        return Err(Error::Domain("optimize_imex needs an IMEX spec".into()));
    }
    optimize(spec)
}

/// [`optimize`] with stability-extent constraints.
pub fn co_optimize(spec: &SearchSpec) -> Result<SearchResult> {
    if spec.co_constraints.is_none() {
        return Err(Error::Domain("co_optimize needs stability targets".into()));
    }
    optimize(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_count_free_coefficients() {
        let n = |spec: SearchSpec| Layout::new(&spec).len();
        assert_eq!(n(SearchSpec::rk(3, Structure::Explicit, 2, 2)), 3 + 3);
        assert_eq!(n(SearchSpec::rk(3, Structure::Dirk, 2, 2)), 6 + 3);
        assert_eq!(n(SearchSpec::rk(3, Structure::Sdirk, 2, 2)), 3 + 1 + 3);
        assert_eq!(n(SearchSpec::imex(3, 2, 2, 3, KValue::Infinite)), 3 + 3 + 6 + 3);
    }

    #[test]
    fn shared_diagonal_decodes() {
        let mut spec = SearchSpec::imex(3, 2, 2, 3, KValue::Infinite);
        spec.structure = Structure::Sdirk;
        let l = Layout::new(&spec);
        let x = DVector::from_fn(l.len(), |i, _| i as f64 + 1.0);
        let c = l.decode(&x);
        let (at, _) = c.at.unwrap();
        assert_eq!(at[(0, 0)], 0.0);
        assert_eq!(at[(1, 1)], at[(2, 2)]);
        assert!(at[(1, 1)] != 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(optimize(&SearchSpec::rk(2, Structure::Explicit, 3, 2)).is_err());
        assert!(optimize(&SearchSpec::rk(2, Structure::Explicit, 7, 7)).is_err());
        assert!(optimize(&SearchSpec::rk(0, Structure::Explicit, 1, 1)).is_err());
    }
}

