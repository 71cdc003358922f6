//! Named problem setups used by the experiments and the CLI.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde_json::{json, Value};

use super::{
    buckley_leverett, burgers, spectral_operator, step_profile, upwind_advection, van_der_pol,
    Discretization, Grid1D,
};
use crate::error::{Error, Result};
use crate::integrators::OdeSystem;

pub type ExactFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A system with its initial data and setup metadata.
#[derive(Clone)]
pub struct TestProblem {
    pub name: String,
    pub grid: Option<Grid1D>,
    pub system: OdeSystem,
    pub u0: DVector<f64>,
    pub t_final: Option<f64>,
    /// Forward-Euler limit of the explicit part `F` (of the whole system when unsplit).
    pub dt_fe_explicit: Option<f64>,
    /// Forward-Euler limit of the implicit part `G`.
    pub dt_fe_implicit: Option<f64>,
    /// `dt_fe_implicit / dt_fe_explicit`.
    pub k_estimate: Option<f64>,
    pub exact: Option<ExactFn>,
    /// Free-form description of grid, initial data and parameters.
    pub setup: Value,
}

impl fmt::Debug for TestProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestProblem")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("t_final", &self.t_final)
            .field("k_estimate", &self.k_estimate)
            .finish()
    }
}

impl TestProblem {
    /// Forward-Euler limit for `F + G` together.
    pub fn dt_fe_combined(&self) -> Option<f64> {
        match (self.dt_fe_explicit, self.dt_fe_implicit) {
            (Some(e), Some(i)) => Some(1.0 / (1.0 / e + 1.0 / i)),
            (Some(e), None) => Some(e),
            _ => None,
        }
    }

    pub fn is_split(&self) -> bool {
        self.system.g().is_some()
    }

    pub fn dx(&self) -> Option<f64> {
        self.grid.map(|g| g.dx())
    }
}

const NAMES: &[&str] = &[
    "example-1.1",
    "example-1.1-eps0.1",
    "example-1.2",
    "example-1.3",
    "example-2",
    "example-2-n301",
    "example-3.1",
    "example-3.2",
    "example-4.1",
    "example-4.2-w10",
    "example-4.2-w100",
];

pub fn catalog_names() -> &'static [&'static str] {
    NAMES
}

pub fn catalog() -> Result<Vec<TestProblem>> {
    NAMES.iter().map(|n| problem(n)).collect()
}

/// Looks a problem up by name. `example-4.2-w<ω>` accepts any positive ω.
pub fn problem(name: &str) -> Result<TestProblem> {
    match name {
        "example-1.1" => example_1_1("example-1.1", 10.0),
        "example-1.1-eps0.1" => example_1_1("example-1.1-eps0.1", 0.1),
        "example-1.2" => example_1_2(),
        "example-1.3" => example_1_3(),
        "example-2" => example_2(Grid1D::periodic_with_spacing(-1.0, 1.0, 1.0 / 300.0)?),
        "example-2-n301" => example_2(Grid1D::periodic(-1.0, 1.0, 301)?),
        "example-3.1" => example_3_1(),
        "example-3.2" => example_3_2(),
        "example-4.1" => example_4_1(),
        "example-4.2" => example_4_2(10.0),
        _ => {
            if let Some(w) = name.strip_prefix("example-4.2-w") {
                let omega: f64 = w
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad wavespeed in '{name}'")))?;
                return example_4_2(omega);
            }
            Err(Error::Validation(format!(
                "unknown problem '{name}' (known: {})",
                NAMES.join(", ")
            )))
        }
    }
}

/// Split problems only.
pub fn split_problems() -> Result<Vec<TestProblem>> {
    Ok(catalog()?.into_iter().filter(|p| p.is_split()).collect())
}

fn base(name: &str, grid: Option<Grid1D>, system: OdeSystem, u0: DVector<f64>, setup: Value) -> TestProblem {
    TestProblem {
        name: name.into(),
        grid,
        system,
        u0,
        t_final: None,
        dt_fe_explicit: None,
        dt_fe_implicit: None,
        k_estimate: None,
        exact: None,
        setup,
    }
}

/// Van der Pol. With ε = 10 the solution over [0, 1] is so smooth that
/// fourth-order errors sit at roundoff; the ε = 0.1 variant is stiffer.
fn example_1_1(name: &str, eps: f64) -> Result<TestProblem> {
    let mut p = base(
        name,
        None,
        van_der_pol(eps)?,
        DVector::from_vec(vec![0.5, 0.0]),
        json!({"equation": "van der Pol, u2' = (1/eps)(-u1 + (1 - u1^2) u2)", "epsilon": eps, "u0": [0.5, 0.0]}),
    );
    p.t_final = Some(1.0);
    Ok(p)
}

fn example_1_2() -> Result<TestProblem> {
    let grid = Grid1D::periodic(0.0, 2.0 * PI, 11)?;
    let system = OdeSystem::new(grid.n, spectral_operator(&grid, 1, -1.0)?)?;
    let x = grid.nodes();
    let mut p = base(
        "example-1.2",
        Some(grid),
        system,
        x.map(f64::sin),
        json!({"equation": "u_t + u_x = 0", "space": "Fourier pseudospectral", "domain": [0.0, 2.0 * PI], "n": 11, "ic": "sin(x)"}),
    );
    p.t_final = Some(5.0);
    p.exact = Some(Arc::new(move |t| x.map(|v| (v - t).sin())));
    Ok(p)
}

fn example_1_3() -> Result<TestProblem> {
    let grid = Grid1D::periodic_with_spacing(0.0, 2.0 * PI, PI / 4.0)?;
    let system = OdeSystem::new(grid.n, buckley_leverett(&grid, 1.0 / 3.0)?)?;
    let mut p = base(
        "example-1.3",
        Some(grid),
        system,
        grid.sample(f64::sin),
        json!({"equation": "u_t + f(u)_x = 0, f = u^2/(u^2 + a(1-u)^2)", "a": 1.0 / 3.0, "space": "Fourier pseudospectral", "n": grid.n, "ic": "sin(x)"}),
    );
    p.t_final = Some(2.0);
    Ok(p)
}

/// Upwind advection with speed 1 and the narrow step on `[−0.1, 0.1]`.
pub fn example_2(grid: Grid1D) -> Result<TestProblem> {
    let dx = grid.dx();
    let system = OdeSystem::new(grid.n, upwind_advection(&grid, 1.0)?)?;
    let name = if grid.n == 600 { "example-2" } else { "example-2-n301" };
    let mut p = base(
        name,
        Some(grid),
        system,
        step_profile(&grid, -0.1, 0.1),
        json!({"equation": "u_t + u_x = 0", "space": "first-order upwind", "domain": [-1.0, 1.0], "n": grid.n, "dx": dx, "ic": "1 on [-0.1, 0.1], else 0"}),
    );
    p.dt_fe_explicit = Some(dx);
    Ok(p)
}

fn example_3_1() -> Result<TestProblem> {
    let eps = 0.01;
    let grid = Grid1D::periodic_with_spacing(0.0, 2.0 * PI, PI / 4.0)?;
    let system = OdeSystem::split(
        grid.n,
        spectral_operator(&grid, 1, -1.0)?,
        spectral_operator(&grid, 2, eps)?,
    )?;
    let x = grid.nodes();
    let mut p = base(
        "example-3.1",
        Some(grid),
        system,
        x.map(f64::sin),
        json!({"equation": "u_t + u_x = eps u_xx", "epsilon": eps, "explicit": "-D1 u", "implicit": "eps D2 u", "n": grid.n, "ic": "sin(x)"}),
    );
    p.t_final = Some(5.0);
    p.exact = Some(Arc::new(move |t| x.map(|v| (-eps * t).exp() * (v - t).sin())));
    Ok(p)
}

fn example_3_2() -> Result<TestProblem> {
    let grid = Grid1D::periodic(0.0, 2.0 * PI, 24)?;
    let system = OdeSystem::split(
        grid.n,
        burgers(&grid, Discretization::Spectral)?,
        spectral_operator(&grid, 1, -1.0)?,
    )?;
    let mut p = base(
        "example-3.2",
        Some(grid),
        system,
        grid.sample(f64::sin),
        json!({"equation": "u_t + (u^2/2)_x + u_x = 0", "explicit": "-D1 (u^2/2)", "implicit": "-D1 u", "n": 24, "ic": "sin(x)"}),
    );
    p.t_final = Some(0.8);
    Ok(p)
}

fn example_4_grid() -> Result<Grid1D> {
    Grid1D::periodic(-1.0, 1.0, 301)
}

/// Upwind advection at speed 1 (explicit) plus speed 100 (implicit).
pub fn example_4_1() -> Result<TestProblem> {
    let grid = example_4_grid()?;
    let dx = grid.dx();
    let system = OdeSystem::split(grid.n, upwind_advection(&grid, 1.0)?, upwind_advection(&grid, 100.0)?)?;
    let mut p = base(
        "example-4.1",
        Some(grid),
        system,
        step_profile(&grid, 0.25, 0.5),
        json!({"equation": "u_t + u_x + 100 u_x = 0", "space": "first-order upwind", "n": 301, "dx": dx, "ic": "1 on [1/4, 1/2], else 0"}),
    );
    p.dt_fe_explicit = Some(dx);
    p.dt_fe_implicit = Some(dx / 100.0);
    p.k_estimate = Some(0.01);
    Ok(p)
}

/// Upwind Burgers (explicit) plus upwind advection at speed `omega` (implicit).
pub fn example_4_2(omega: f64) -> Result<TestProblem> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("wavespeed must be positive, got {omega}")));
    }
    let grid = example_4_grid()?;
    let dx = grid.dx();
    let system = OdeSystem::split(
        grid.n,
        burgers(&grid, Discretization::Upwind)?,
        upwind_advection(&grid, omega)?,
    )?;
    let u0 = step_profile(&grid, 0.25, 0.5);
    let umax = u0.amax();
    let mut p = base(
        &format!("example-4.2-w{omega}"),
        Some(grid),
        system,
        u0,
        json!({"equation": "u_t + (u^2/2)_x + omega u_x = 0", "omega": omega, "space": "first-order upwind", "n": 301, "dx": dx, "ic": "1 on [1/4, 1/2], else 0"}),
    );
    p.dt_fe_explicit = Some(dx / umax);
    p.dt_fe_implicit = Some(dx / omega);
    p.k_estimate = Some(umax / omega);
    Ok(p)
}
