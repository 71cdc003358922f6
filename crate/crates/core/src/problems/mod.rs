//! Semidiscretized test problems and the total-variation functional.

mod catalog;

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{Circulant, LinearOp, OdeSystem, Part, Trajectory};

pub use catalog::{catalog, catalog_names, example_2, example_4_1, example_4_2, problem, split_problems, TestProblem};

/// Equidistant 1-D grid. Periodic grids omit the right endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub periodic: bool,
}

impl Grid1D {
    pub fn periodic(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n == 0 {
            return Err(Error::Domain(format!("bad grid [{a}, {b}] with {n} points")));
        }
        Ok(Grid1D { a, b, n, periodic: true })
    }

    /// Periodic grid whose spacing is `dx`; `(b − a)/dx` must be whole.
    pub fn periodic_with_spacing(a: f64, b: f64, dx: f64) -> Result<Self> {
        let n = ((b - a) / dx).round();
        if n < 1.0 || ((b - a) / n - dx).abs() > 1e-12 * dx {
            return Err(Error::Domain(format!("[{a}, {b}] is not a whole number of cells of {dx}")));
        }
        Grid1D::periodic(a, b, n as usize)
    }

    pub fn dx(&self) -> f64 {
        if self.periodic {
            (self.b - self.a) / self.n as f64
        } else {
            (self.b - self.a) / (self.n as f64 - 1.0)
        }
    }

    pub fn nodes(&self) -> DVector<f64> {
        let dx = self.dx();
        DVector::from_fn(self.n, |i, _| self.a + i as f64 * dx)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        self.nodes().map(f)
    }

    fn require_periodic(&self) -> Result<()> {
        if self.periodic {
            Ok(())
        } else {
            Err(Error::Domain("operator needs a periodic grid".into()))
        }
    }
}

/// Step initial data: 1 on `[lo, hi]` (with a little slack for rounding of the nodes), 0 elsewhere.
pub fn step_profile(grid: &Grid1D, lo: f64, hi: f64) -> DVector<f64> {
    let slack = 1e-9 * grid.dx();
    grid.sample(|x| if x >= lo - slack && x <= hi + slack { 1.0 } else { 0.0 })
}

/// First-order upwind `−speed·(u_i − u_{i−1})/Δx` on a periodic grid.
pub fn upwind_advection(grid: &Grid1D, speed: f64) -> Result<Part> {
    grid.require_periodic()?;
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::Domain(format!("upwind speed must be nonnegative, got {speed}")));
    }
    let n = grid.n;
    let mut col = vec![0.0; n];
    let k = speed / grid.dx();
    col[0] -= k;
    col[1 % n] += k;
    Ok(Part::linear(LinearOp::Circulant(Circulant::new(col))))
}

/// First column of the Fourier collocation differentiation matrix; the
/// matrix is circulant with `D_ij = c_{(i−j) mod n}`.
pub fn spectral_derivative_column(grid: &Grid1D, order: usize) -> Result<Vec<f64>> {
    grid.require_periodic()?;
    let n = grid.n;
    if n < 4 {
        return Err(Error::Domain(format!("spectral differentiation needs N ≥ 4, got {n}")));
    }
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let scale = 2.0 * std::f64::consts::PI / (grid.b - grid.a);
    let even = n % 2 == 0;
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let col: Vec<f64> = match order {
        1 => (0..n)
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let x = k as f64 * h / 2.0;
                let kernel = if even { 1.0 / x.tan() } else { 1.0 / x.sin() };
                0.5 * sign(k) * kernel * scale
            })
            .collect(),
        2 => (0..n)
            .map(|k| {
                let v = if k == 0 {
                    if even {
                        -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0
                    } else {
                        -std::f64::consts::PI.powi(2) / (3.0 * h * h) + 1.0 / 12.0
                    }
                } else {
                    let x = k as f64 * h / 2.0;
                    if even {
                        -0.5 * sign(k) / x.sin().powi(2)
                    } else {
                        -0.5 * sign(k) / (x.sin() * x.tan())
                    }
                };
                v * scale * scale
            })
            .collect(),
        _ => return Err(Error::Domain(format!("derivative order must be 1 or 2, got {order}"))),
    };
    Ok(col)
}

pub fn spectral_derivative_matrix(grid: &Grid1D, order: usize) -> Result<DMatrix<f64>> {
    Ok(Circulant::new(spectral_derivative_column(grid, order)?).to_dense())
}

pub fn spectral_operator(grid: &Grid1D, order: usize, factor: f64) -> Result<Part> {
    let col = spectral_derivative_column(grid, order)?;
    Ok(Part::linear(LinearOp::Circulant(Circulant::new(
        col.into_iter().map(|v| v * factor).collect(),
    ))))
}

/// `u₁' = u₂`, `u₂' = (−u₁ + (1 − u₁²)u₂)/ε`.
pub fn van_der_pol(epsilon: f64) -> Result<OdeSystem> {
    if epsilon == 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon must be finite and nonzero, got {epsilon}")));
    }
    let inv = 1.0 / epsilon;
    let part = Part::nonlinear(move |u| {
        DVector::from_vec(vec![u[1], inv * (-u[0] + (1.0 - u[0] * u[0]) * u[1])])
    })
    .with_jacobian(move |u| {
        DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, inv * (-1.0 - 2.0 * u[0] * u[1]), inv * (1.0 - u[0] * u[0])],
        )
    });
    OdeSystem::new(2, part)
}

pub fn buckley_leverett_flux(u: f64, a: f64) -> f64 {
    let u2 = u * u;
    u2 / (u2 + a * (1.0 - u) * (1.0 - u))
}

/// `−D₁ f(u)` with the Buckley–Leverett flux.
pub fn buckley_leverett(grid: &Grid1D, a: f64) -> Result<Part> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let d = Circulant::new(spectral_derivative_column(grid, 1)?);
    Ok(Part::nonlinear(move |u| -d.apply(&u.map(|v| buckley_leverett_flux(v, a)))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    Spectral,
    Upwind,
}

/// Values above `-NEGATIVE_SLACK` count as nonnegative for the upwind Burgers check.
const NEGATIVE_SLACK: f64 = 1e-12;

static BURGERS_WARNED: AtomicBool = AtomicBool::new(false);

/// The Burgers term `−(u²/2)_x`. The upwind form assumes `u ≥ 0` and warns
/// once per process on stderr if it sees a negative value.
pub fn burgers(grid: &Grid1D, disc: Discretization) -> Result<Part> {
    match disc {
        Discretization::Spectral => {
            let d = Circulant::new(spectral_derivative_column(grid, 1)?);
            Ok(Part::nonlinear(move |u| -d.apply(&u.map(|v| 0.5 * v * v))))
        }
        Discretization::Upwind => {
            grid.require_periodic()?;
            let inv_dx = 1.0 / grid.dx();
            Ok(Part::nonlinear(move |u| {
                let n = u.len();
                if u.iter().any(|&v| v < -NEGATIVE_SLACK) && !BURGERS_WARNED.swap(true, Ordering::Relaxed) {
                    eprintln!("warning: upwind Burgers flux evaluated with negative u; the scheme assumes u >= 0");
                }
                DVector::from_fn(n, |i, _| {
                    let l = u[(i + n - 1) % n];
                    -inv_dx * 0.5 * (u[i] * u[i] - l * l)
                })
            }))
        }
    }
}

/// Periodic total variation `Σ |u_{i+1} − u_i|`, wrap pair included.
pub fn total_variation(u: &DVector<f64>) -> f64 {
    let n = u.len();
    (0..n).map(|i| (u[(i + 1) % n] - u[i]).abs()).sum()
}

/// Largest TV increase between consecutive states. `-inf` for fewer than two.
pub fn max_tv_rise_states(states: &[DVector<f64>]) -> f64 {
    states
        .windows(2)
        .map(|w| total_variation(&w[1]) - total_variation(&w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_tv_rise(traj: &Trajectory) -> f64 {
    max_tv_rise_states(&traj.states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spectral_odd_and_even() {
        for n in [8, 11, 24, 25] {
            let g = Grid1D::periodic(0.0, 2.0 * PI, n).unwrap();
            let x = g.nodes();
            let d1 = spectral_derivative_matrix(&g, 1).unwrap();
            let d2 = spectral_derivative_matrix(&g, 2).unwrap();
            let s = x.map(f64::sin);
            assert!((&d1 * &s - x.map(f64::cos)).amax() < 1e-12, "D1 n={n}");
            assert!((&d2 * &s + &s).amax() < 1e-11, "D2 n={n}");
            let c2 = x.map(|v| (2.0 * v).cos());
            assert!((&d2 * &c2 + &c2 * 4.0).amax() < 1e-10, "D2 cos2x n={n}");
            if n % 2 == 1 {
                assert!((&d1 * &d1 - &d2).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn spectral_scaling_on_other_intervals() {
        let g = Grid1D::periodic(-1.0, 1.0, 16).unwrap();
        let x = g.nodes();
        let d1 = spectral_derivative_matrix(&g, 1).unwrap();
        let u = x.map(|v| (PI * v).sin());
        assert!((&d1 * &u - x.map(|v| PI * (PI * v).cos())).amax() < 1e-11);
    }

    #[test]
    fn bad_order() {
        let g = Grid1D::periodic(0.0, 1.0, 8).unwrap();
        assert!(spectral_derivative_matrix(&g, 3).is_err());
        assert!(spectral_derivative_matrix(&Grid1D::periodic(0.0, 1.0, 3).unwrap(), 1).is_err());
    }

    #[test]
    fn grid_with_spacing() {
        let g = Grid1D::periodic_with_spacing(-1.0, 1.0, 1.0 / 300.0).unwrap();
        assert_eq!(g.n, 600);
        assert!(Grid1D::periodic_with_spacing(0.0, 1.0, 0.3).is_err());
    }
}
