//! Runge–Kutta and IMEX method representations.
//!
//! A [`ButcherTableau`] is the canonical `(A, b)` description of a method; the
//! abscissas `c = A e` are always derived. A [`ShuOsherForm`] rewrites a method
//! as convex combinations of forward-Euler steps, and an [`ImexTableau`] pairs
//! an explicit tableau with a diagonally implicit one of the same size.

mod format;
mod shu_osher;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_method, parse_method, save_method, write_method, Method};
pub use shu_osher::{
    butcher_to_canonical_shu_osher, shu_osher_to_butcher, AdmissibilityViolation, ShuOsherForm,
    SspCoefficientReport, CONSISTENCY_TOLERANCE,
};

/// Coupling pattern of the stage matrix `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Strictly lower triangular.
    Explicit,
    /// Lower triangular.
    Dirk,
    /// Lower triangular with all nonzero diagonal entries equal.
    Sdirk,
    Full,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Explicit => "explicit",
            Structure::Dirk => "dirk",
            Structure::Sdirk => "sdirk",
            Structure::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "explicit" => Some(Structure::Explicit),
            "dirk" => Some(Structure::Dirk),
            "sdirk" => Some(Structure::Sdirk),
            "full" => Some(Structure::Full),
            _ => None,
        }
    }

    /// Whether a matrix of structure `self` also satisfies `other`.
    pub fn satisfies(self, other: Structure) -> bool {
        use Structure::*;
        matches!(
            (self, other),
            (_, Full)
                | (Explicit, Explicit)
                | (Explicit | Dirk | Sdirk, Dirk)
                | (Explicit | Sdirk, Sdirk)
        )
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ratio of the implicit component's forward-Euler radius to the explicit one.
///
/// `K = ∞` is kept distinct from any float so the implicit-part SSP
/// constraints can be removed exactly rather than scaled by a tiny number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KValue {
    Finite(f64),
    Infinite,
}

impl KValue {
    pub fn finite(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(KValue::Finite(k))
        } else if k == f64::INFINITY {
            Ok(KValue::Infinite)
        } else {
            Err(Error::Domain(format!("K must be positive, got {k}")))
        }
    }

    /// `1/K`, which is zero for `K = ∞`.
    pub fn inverse(self) -> f64 {
        match self {
            KValue::Finite(k) => 1.0 / k,
            KValue::Infinite => 0.0,
        }
    }

    pub fn from_inverse(inv: f64) -> Result<Self> {
        if inv == 0.0 {
            Ok(KValue::Infinite)
        } else {
            KValue::finite(1.0 / inv)
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "Inf" | "INF" | "∞") {
            return Ok(KValue::Infinite);
        }
        let v = parse_number(t).ok_or_else(|| Error::Domain(format!("invalid K value '{s}'")))?;
        KValue::finite(v)
    }
}

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KValue::Finite(k) => write!(f, "{k}"),
            KValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Parses a decimal or a `p/q` fraction.
pub(crate) fn parse_number(tok: &str) -> Option<f64> {
    if let Some((n, d)) = tok.split_once('/') {
        let n: f64 = n.parse().ok()?;
        let d: f64 = d.parse().ok()?;
        (d != 0.0).then_some(n / d)
    } else {
        let v: f64 = tok.parse().ok()?;
        v.is_finite().then_some(v)
    }
}

/// Optional descriptive data carried alongside a method.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: Option<String>,
    pub p: Option<usize>,
    pub p_lin: Option<usize>,
    pub p_e: Option<usize>,
    pub p_i: Option<usize>,
    pub ssp_coefficient: Option<f64>,
    pub k_designed: Option<KValue>,
}

impl MethodInfo {
    pub fn named(name: impl Into<String>) -> Self {
        MethodInfo {
            name: Some(name.into()),
            ..Default::default()
        }
    }
}

/// A Runge–Kutta method in Butcher form.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    structure: Structure,
    info: MethodInfo,
}

fn diagonal_is_single_valued(a: &DMatrix<f64>) -> bool {
    let nonzero: Vec<f64> = (0..a.nrows())
        .map(|i| a[(i, i)])
        .filter(|d| *d != 0.0)
        .collect();
    match nonzero.first() {
        None => false,
        Some(&d0) => nonzero
            .iter()
            .all(|d| (d - d0).abs() <= 1e-12 * d0.abs().max(1.0)),
    }
}

/// The tightest structure class satisfied by `a`.
pub fn infer_structure(a: &DMatrix<f64>) -> Structure {
    let n = a.nrows();
    let lower = (0..n).all(|i| ((i + 1)..n).all(|j| a[(i, j)] == 0.0));
    if !lower {
        return Structure::Full;
    }
    if (0..n).all(|i| a[(i, i)] == 0.0) {
        Structure::Explicit
    } else if diagonal_is_single_valued(a) {
        Structure::Sdirk
    } else {
        Structure::Dirk
    }
}

impl ButcherTableau {
    /// Builds a tableau, inferring the tightest structure class.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dims(&a, &b)?;
        let structure = infer_structure(&a);
        Ok(ButcherTableau {
            a,
            b,
            structure,
            info: MethodInfo::default(),
        })
    }

    /// Builds a tableau declared as `structure`, rejecting matrices that violate it.
    pub fn with_structure(a: DMatrix<f64>, b: DVector<f64>, structure: Structure) -> Result<Self> {
        check_dims(&a, &b)?;
        let actual = infer_structure(&a);
        if !actual.satisfies(structure) {
            return Err(Error::Validation(format!(
                "matrix A is {actual} but was declared {structure}"
            )));
        }
        Ok(ButcherTableau {
            a,
            b,
            structure,
            info: MethodInfo::default(),
        })
    }

    pub fn from_rows(a: &[&[f64]], b: &[f64]) -> Result<Self> {
        let s = b.len();
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::Validation(format!(
                "A must be {s}x{s} to match b of length {s}"
            )));
        }
        let m = DMatrix::from_fn(s, s, |i, j| a[i][j]);
        ButcherTableau::new(m, DVector::from_column_slice(b))
    }

    pub fn with_info(mut self, info: MethodInfo) -> Self {
        self.info = info;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.info.name = Some(name.into());
        self
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Abscissas `c = A e`.
    pub fn c(&self) -> DVector<f64> {
        self.a.column_sum()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn info(&self) -> &MethodInfo {
        &self.info
    }

    pub fn info_mut(&mut self) -> &mut MethodInfo {
        &mut self.info
    }

    pub fn name(&self) -> &str {
        self.info.name.as_deref().unwrap_or("unnamed")
    }

    pub fn is_explicit(&self) -> bool {
        self.structure == Structure::Explicit
    }

    /// True when every stage couples only to itself and earlier stages.
    pub fn is_diagonally_implicit(&self) -> bool {
        self.structure != Structure::Full
    }

    /// The `(s+1)×(s+1)` matrix `[[A, 0], [bᵀ, 0]]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        stacked_matrix(&self.a, &self.b)
    }
}

/// Stacks `A` and `bᵀ` into the square matrix `[[A, 0], [bᵀ, 0]]`.
pub fn stacked_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let s = b.len();
    let mut m = DMatrix::zeros(s + 1, s + 1);
    m.view_mut((0, 0), (s, s)).copy_from(a);
    for j in 0..s {
        m[(s, j)] = b[j];
    }
    m
}

fn check_dims(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    let s = b.len();
    if s == 0 {
        return Err(Error::Validation("a method needs at least one stage".into()));
    }
    if a.nrows() != s || a.ncols() != s {
        return Err(Error::Validation(format!(
            "A is {}x{} but b has length {s}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Validation("coefficients must be finite".into()));
    }
    Ok(())
}

/// An additive (IMEX) Runge–Kutta pair: explicit `(A, b)` and implicit `(Ã, b̃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImexTableau {
    explicit: ButcherTableau,
    implicit: ButcherTableau,
    info: MethodInfo,
}

impl ImexTableau {
    pub fn new(explicit: ButcherTableau, implicit: ButcherTableau) -> Result<Self> {
        if explicit.stages() != implicit.stages() {
            return Err(Error::Validation(format!(
                "explicit part has {} stages, implicit part has {}",
                explicit.stages(),
                implicit.stages()
            )));
        }
        if !explicit.is_explicit() {
            return Err(Error::Validation(
                "explicit part must be strictly lower triangular".into(),
            ));
        }
        if !implicit.is_diagonally_implicit() {
            return Err(Error::Validation(
                "implicit part must be lower triangular".into(),
            ));
        }
        Ok(ImexTableau {
            explicit,
            implicit,
            info: MethodInfo::default(),
        })
    }

    pub fn from_matrices(
        a: DMatrix<f64>,
        b: DVector<f64>,
        at: DMatrix<f64>,
        bt: DVector<f64>,
    ) -> Result<Self> {
        ImexTableau::new(ButcherTableau::new(a, b)?, ButcherTableau::new(at, bt)?)
    }

    pub fn with_info(mut self, info: MethodInfo) -> Self {
        self.info = info;
        self
    }

    pub fn stages(&self) -> usize {
        self.explicit.stages()
    }

    pub fn explicit(&self) -> &ButcherTableau {
        &self.explicit
    }

    pub fn implicit(&self) -> &ButcherTableau {
        &self.implicit
    }

    pub fn info(&self) -> &MethodInfo {
        &self.info
    }

    pub fn info_mut(&mut self) -> &mut MethodInfo {
        &mut self.info
    }

    pub fn name(&self) -> &str {
        self.info.name.as_deref().unwrap_or("unnamed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_inference() {
        let fe = ButcherTableau::from_rows(&[&[0.0]], &[1.0]).unwrap();
        assert_eq!(fe.structure(), Structure::Explicit);
        let mid = ButcherTableau::from_rows(&[&[0.5]], &[1.0]).unwrap();
        assert_eq!(mid.structure(), Structure::Sdirk);
        let dirk =
            ButcherTableau::from_rows(&[&[0.0, 0.0], &[0.5, 0.25]], &[0.5, 0.5]).unwrap();
        assert_eq!(dirk.structure(), Structure::Sdirk);
        let dirk2 =
            ButcherTableau::from_rows(&[&[0.1, 0.0], &[0.5, 0.25]], &[0.5, 0.5]).unwrap();
        assert_eq!(dirk2.structure(), Structure::Dirk);
        let full =
            ButcherTableau::from_rows(&[&[0.25, -0.1], &[0.5, 0.25]], &[0.5, 0.5]).unwrap();
        assert_eq!(full.structure(), Structure::Full);
    }

    #[test]
    fn declared_structure_is_checked() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.5, 0.0]);
        let b = DVector::from_column_slice(&[0.5, 0.5]);
        assert!(ButcherTableau::with_structure(a.clone(), b.clone(), Structure::Explicit).is_err());
        assert!(ButcherTableau::with_structure(a, b, Structure::Dirk).is_ok());
    }

    #[test]
    fn abscissas_are_row_sums() {
        let t = ButcherTableau::from_rows(
            &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.25, 0.25, 0.0]],
            &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        )
        .unwrap();
        assert_eq!(t.c().as_slice(), &[0.0, 1.0, 0.5]);
        let s = t.stacked();
        assert_eq!(s.nrows(), 4);
        assert!((0..4).all(|i| s[(i, 3)] == 0.0));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let a = DMatrix::zeros(3, 3);
        let b = DVector::from_column_slice(&[0.5, 0.5]);
        assert!(matches!(ButcherTableau::new(a, b), Err(Error::Validation(_))));
    }

    #[test]
    fn imex_requires_matching_stage_counts() {
        let e = ButcherTableau::from_rows(&[&[0.0]], &[1.0]).unwrap();
        let i = ButcherTableau::from_rows(&[&[0.5, 0.0], &[0.5, 0.5]], &[0.5, 0.5]).unwrap();
        assert!(ImexTableau::new(e, i).is_err());
    }

    #[test]
    fn k_value_parsing() {
        assert_eq!(KValue::parse("inf").unwrap(), KValue::Infinite);
        assert_eq!(KValue::parse("0.1").unwrap(), KValue::Finite(0.1));
        assert_eq!(KValue::parse("1/100").unwrap(), KValue::Finite(0.01));
        assert!(KValue::parse("-1").is_err());
        assert_eq!(KValue::Infinite.inverse(), 0.0);
    }
}
