//! Small dense helpers shared by the analysis modules.
//!
//! Everything here works on `nalgebra` dense matrices. Triangular systems are
//! solved by substitution so that structural zeros stay exactly zero.

use nalgebra::{ComplexField, DMatrix};

/// Pivot ratio below which a matrix is reported as singular.
const PIVOT_RATIO: f64 = 1e-15;

pub(crate) fn is_lower_triangular<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| ((i + 1)..m.ncols()).all(|j| m[(i, j)].is_zero()))
}

pub(crate) fn is_upper_triangular<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)].is_zero()))
}

fn diag_ok<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    let mags: Vec<f64> = (0..m.nrows())
        .map(|i| m[(i, i)].clone().modulus())
        .collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    max > 0.0 && mags.iter().all(|&d| d.is_finite() && d > PIVOT_RATIO * max)
}

/// Solves `m * x = rhs`, returning `None` when `m` is (numerically) singular.
pub(crate) fn solve<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, rhs: &DMatrix<T>) -> Option<DMatrix<T>> {
    if m.nrows() == 0 {
        return Some(rhs.clone());
    }
    let x = if is_lower_triangular(m) {
        if !diag_ok(m) {
            return None;
        }
        m.solve_lower_triangular(rhs)?
    } else if is_upper_triangular(m) {
        if !diag_ok(m) {
            return None;
        }
        m.solve_upper_triangular(rhs)?
    } else {
        let lu = m.clone().lu();
        if !diag_ok(&lu.u()) {
            return None;
        }
        lu.solve(rhs)?
    };
    x.iter()
        .all(|v| v.clone().modulus().is_finite())
        .then_some(x)
}

/// Solves `x * m = k` for `x`, i.e. returns `k * m^{-1}`.
pub(crate) fn solve_right<T: ComplexField<RealField = f64>>(k: &DMatrix<T>, m: &DMatrix<T>) -> Option<DMatrix<T>> {
    solve(&m.transpose(), &k.transpose()).map(|x| x.transpose())
}

/// Entries with magnitude below this are treated as structural zeros.
pub const ZERO_THRESHOLD: f64 = 1e-14;
