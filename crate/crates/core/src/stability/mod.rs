//! Linear stability function `R(z) = 1 + z bᵀ(I − zA)⁻¹e` and region metrics.

mod family;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tableau::ButcherTableau;

pub use family::{construct_shu_osher_pair_family, family_gamma, SDIRK_LIKE_BETA};

/// `|R| ≤ 1 + STABLE_SLACK` counts as stable, absorbing roundoff on curves
/// where `|R| = 1` exactly.
pub const STABLE_SLACK: f64 = 1e-12;

/// Largest distance from the origin searched along an axis.
pub const AXIS_CAP: f64 = 1e7;

/// Smallest axis offset sampled; `|R|` agrees with `|e^z|` to high order
/// closer in than this, so nothing is decided there.
const AXIS_START: f64 = 1e-3;

/// Ratio between consecutive axis samples.
const AXIS_RATIO: f64 = 1.002;

/// Precomputed data for evaluating `R(z)` of one tableau.
pub struct StabilityFunction {
    a: DMatrix<Complex64>,
    b: DVector<Complex64>,
}

impl StabilityFunction {
    pub fn new(t: &ButcherTableau) -> Self {
        StabilityFunction {
            a: t.a().map(|v| Complex64::new(v, 0.0)),
            b: t.b().map(|v| Complex64::new(v, 0.0)),
        }
    }

    /// `R(z)`, or `None` at a pole (`I − zA` singular).
    pub fn eval(&self, z: Complex64) -> Option<Complex64> {
        let s = self.b.len();
        let m = DMatrix::<Complex64>::identity(s, s) - &self.a * z;
        let e = DMatrix::from_element(s, 1, Complex64::new(1.0, 0.0));
        let x = linalg::solve(&m, &e)?;
        let bx: Complex64 = (0..s).map(|i| self.b[i] * x[(i, 0)]).sum();
        Some(Complex64::new(1.0, 0.0) + z * bx)
    }

    /// `|R(z)|`, infinite at poles.
    pub fn modulus(&self, z: Complex64) -> f64 {
        self.eval(z).map_or(f64::INFINITY, |r| r.norm())
    }

    fn stable(&self, z: Complex64) -> bool {
        self.modulus(z) <= 1.0 + STABLE_SLACK
    }
}

/// `R(z)` for a single point; `None` at a pole.
pub fn stability_function(t: &ButcherTableau, z: Complex64) -> Option<Complex64> {
    StabilityFunction::new(t).eval(z)
}

/// Geometric samples `AXIS_START · AXIS_RATIO^k` up to the cap.
fn axis_samples() -> impl Iterator<Item = f64> {
    std::iter::successors(Some(AXIS_START), |x| Some(x * AXIS_RATIO)).take_while(|x| *x <= AXIS_CAP)
}

/// Scans outward along the samples and bisects the first stable-to-unstable
/// transition to width `tol`. Returns `INFINITY` if no transition is found
/// and zero if the first sample is already unstable.
fn extent(tol: f64, stable: impl Fn(f64) -> bool) -> f64 {
    let mut last = 0.0;
    for x in axis_samples() {
        if !stable(x) {
            if last == 0.0 {
                return 0.0;
            }
            let (mut lo, mut hi) = (last, x);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if stable(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
        last = x;
    }
    if stable(AXIS_CAP) {
        f64::INFINITY
    } else {
        last
    }
}

/// Leftmost `x < 0` such that `|R| ≤ 1` on all of `[x, 0]` (sampled), or
/// `-∞` if the region reaches the search cap. Zero when the method is unstable
/// immediately left of the origin.
pub fn real_axis_crossing(t: &ButcherTableau, tol: f64) -> f64 {
    let f = StabilityFunction::new(t);
    -extent(tol, |x| f.stable(Complex64::new(-x, 0.0)))
}

/// Largest `y` such that every `iy'` with `0 ≤ y' ≤ y` has a stable point
/// within `proximity` to its left (sampled). `proximity = 0` is the strict
/// imaginary axis.
pub fn imaginary_axis_extent(t: &ButcherTableau, proximity: f64, tol: f64) -> f64 {
    let f = StabilityFunction::new(t);
    const OFFSETS: usize = 8;
    extent(tol, |y| {
        (0..=OFFSETS).any(|k| {
            let x = -proximity * k as f64 / OFFSETS as f64;
            f.stable(Complex64::new(x, y))
        })
    })
}

/// Sample plan for the A-stability check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ASampleSpec {
    /// Points per sign on the log sweep of the imaginary axis `1e-6 ≤ |y| ≤ 1e6`.
    pub axis_points: usize,
    /// Random points in the open left half-plane with log-uniform modulus.
    pub interior_points: usize,
    pub seed: u64,
}

impl Default for ASampleSpec {
    fn default() -> Self {
        ASampleSpec { axis_points: 2000, interior_points: 4000, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ASampleVerdict {
    pub a_stable_sampled: bool,
    pub spec: ASampleSpec,
    /// Sample with the largest `|R|`.
    pub worst_z: (f64, f64),
    pub worst_modulus: f64,
}

/// Sampled (not proved) A-stability: `|R(z)| ≤ 1 + 1e-12` on every sample.
pub fn is_a_stable_sampled(t: &ButcherTableau, spec: ASampleSpec) -> ASampleVerdict {
    let f = StabilityFunction::new(t);
    let mut pts = Vec::with_capacity(2 * spec.axis_points + spec.interior_points);
    let n = spec.axis_points.max(2);
    for k in 0..n {
        let y = 10f64.powf(-6.0 + 12.0 * k as f64 / (n - 1) as f64);
        pts.push(Complex64::new(0.0, y));
        pts.push(Complex64::new(0.0, -y));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.interior_points {
        let rho = 10f64.powf(rng.random_range(-6.0..6.0));
        let theta = rng.random_range(std::f64::consts::FRAC_PI_2..1.5 * std::f64::consts::PI);
        pts.push(Complex64::from_polar(rho, theta));
    }
    let (worst_modulus, worst) = pts
        .par_iter()
        .map(|&z| (f.modulus(z), z))
        .reduce(|| (f64::NEG_INFINITY, Complex64::new(0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
    ASampleVerdict {
        a_stable_sampled: worst_modulus <= 1.0 + STABLE_SLACK,
        spec,
        worst_z: (worst.re, worst.im),
        worst_modulus,
    }
}

/// Rectangle `[re_min, re_max] × [im_min, im_max]` sampled at `nx × ny` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(re: (f64, f64), im: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Domain("grid needs at least 2 nodes per axis".into()));
        }
        if !(re.0 < re.1 && im.0 < im.1) {
            return Err(Error::Domain("grid bounds must be increasing".into()));
        }
        Ok(Grid { re_min: re.0, re_max: re.1, im_min: im.0, im_max: im.1, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        (self.re_max - self.re_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.im_max - self.im_min) / (self.ny - 1) as f64
    }

    fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.re_min + i as f64 * self.dx(), self.im_min + j as f64 * self.dy())
    }
}

/// Points of the contour `|R(z)| = 1` on `grid`: the interpolated crossings
/// on cell edges, i.e. the vertices marching squares would join. Rows are
/// evaluated in parallel; output order is deterministic.
pub fn region_boundary(t: &ButcherTableau, grid: &Grid) -> Vec<Complex64> {
    let f = StabilityFunction::new(t);
    // Level function, clamped so poles still register as a sign change.
    let field: Vec<Vec<f64>> = (0..grid.ny)
        .into_par_iter()
        .map(|j| {
            (0..grid.nx)
                .map(|i| {
                    let (x, y) = grid.node(i, j);
                    (f.modulus(Complex64::new(x, y)) - 1.0).min(1e300)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let crossing = |v0: f64, v1: f64| -> Option<f64> {
        ((v0 <= 0.0) != (v1 <= 0.0)).then(|| v0 / (v0 - v1))
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.node(i, j);
            let v = field[j][i];
            if i + 1 < grid.nx {
                if let Some(s) = crossing(v, field[j][i + 1]) {
                    out.push(Complex64::new(x + s.clamp(0.0, 1.0) * grid.dx(), y));
                }
            }
            if j + 1 < grid.ny {
                if let Some(s) = crossing(v, field[j + 1][i]) {
                    out.push(Complex64::new(x, y + s.clamp(0.0, 1.0) * grid.dy()));
                }
            }
        }
    }
    out
}

pub fn boundary_csv(points: &[Complex64]) -> String {
    let mut s = String::from("re,im\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p.re, p.im));
    }
    s
}

fn signed_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Summary metrics; infinite extents serialize as `"inf"` / `"-inf"`.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityMetrics {
    #[serde(serialize_with = "signed_inf")]
    pub real_crossing: f64,
    #[serde(serialize_with = "signed_inf")]
    pub imag_extent: f64,
    pub a_stable_sampled: bool,
}

pub fn stability_metrics(t: &ButcherTableau, proximity: f64, tol: f64) -> StabilityMetrics {
    StabilityMetrics {
        real_crossing: real_axis_crossing(t, tol),
        imag_extent: imaginary_axis_extent(t, proximity, tol),
        a_stable_sampled: is_a_stable_sampled(t, ASampleSpec::default()).a_stable_sampled,
    }
}
