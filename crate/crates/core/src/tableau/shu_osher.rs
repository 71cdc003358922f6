use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ButcherTableau, MethodInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, ZERO_THRESHOLD};

/// Maximum allowed deviation from `v_i + Σ_j α_ij = 1`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-13;

/// A Runge–Kutta method written as
/// `y_i = v_i uⁿ + Σ_j (α_ij y_j + Δt β_ij F(y_j))`, with row `s+1` giving `uⁿ⁺¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShuOsherForm {
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
    v: DVector<f64>,
    r: Option<f64>,
    info: MethodInfo,
}

impl ShuOsherForm {
    pub fn new(
        alpha: DMatrix<f64>,
        beta: DMatrix<f64>,
        v: DVector<f64>,
        r: Option<f64>,
    ) -> Result<Self> {
        let s = alpha.ncols();
        if s == 0 {
            return Err(Error::Validation("a method needs at least one stage".into()));
        }
        if alpha.nrows() != s + 1 || beta.nrows() != s + 1 || beta.ncols() != s {
            return Err(Error::Validation(format!(
                "alpha and beta must both be {}x{s}; got {}x{} and {}x{}",
                s + 1,
                alpha.nrows(),
                alpha.ncols(),
                beta.nrows(),
                beta.ncols()
            )));
        }
        if v.len() != s + 1 {
            return Err(Error::Validation(format!(
                "v must have length {}, got {}",
                s + 1,
                v.len()
            )));
        }
        if let Some(r) = r {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("r must be a nonnegative number, got {r}")));
            }
        }
        for i in 0..=s {
            let dev = (v[i] + alpha.row(i).sum() - 1.0).abs();
            if dev > CONSISTENCY_TOLERANCE {
                return Err(Error::Validation(format!(
                    "row {} violates v_i + sum_j alpha_ij = 1 (off by {dev:e})",
                    i + 1
                )));
            }
        }
        Ok(ShuOsherForm {
            alpha,
            beta,
            v,
            r,
            info: MethodInfo::default(),
        })
    }

    /// Canonical form at scaling `r`: `β = α / r`, with `v` from consistency
    /// when not supplied.
    pub fn canonical(alpha: DMatrix<f64>, r: f64, v: Option<DVector<f64>>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!(
                "a canonical form needs a positive r, got {r}"
            )));
        }
        let beta = &alpha / r;
        let v = v.unwrap_or_else(|| consistency_v(&alpha));
        ShuOsherForm::new(alpha, beta, v, Some(r))
    }

    pub fn with_info(mut self, info: MethodInfo) -> Self {
        self.info = info;
        self
    }

    pub fn stages(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn r(&self) -> Option<f64> {
        self.r
    }

    pub fn info(&self) -> &MethodInfo {
        &self.info
    }

    pub fn info_mut(&mut self) -> &mut MethodInfo {
        &mut self.info
    }

    /// Checks the convex-combination premise: `v, α, β ≥ 0` and `β_ij = 0`
    /// wherever `α_ij = 0`.
    pub fn admissibility_violations(&self) -> Vec<AdmissibilityViolation> {
        let mut out = Vec::new();
        for i in 0..self.v.len() {
            if self.v[i] < -ZERO_THRESHOLD {
                out.push(AdmissibilityViolation::NegativeV { row: i + 1, value: self.v[i] });
            }
        }
        for i in 0..self.alpha.nrows() {
            for j in 0..self.alpha.ncols() {
                let (a, b) = (self.alpha[(i, j)], self.beta[(i, j)]);
                if a < -ZERO_THRESHOLD {
                    out.push(AdmissibilityViolation::NegativeAlpha { row: i + 1, col: j + 1, value: a });
                }
                if b < -ZERO_THRESHOLD {
                    out.push(AdmissibilityViolation::NegativeBeta { row: i + 1, col: j + 1, value: b });
                }
                if b > ZERO_THRESHOLD && a.abs() <= ZERO_THRESHOLD {
                    out.push(AdmissibilityViolation::BetaWithoutAlpha { row: i + 1, col: j + 1, value: b });
                }
            }
        }
        out
    }

    /// `min α_ij/β_ij` over `β_ij > 0`; zero when the form is not admissible.
    pub fn ssp_coefficient(&self) -> SspCoefficientReport {
        let violations = self.admissibility_violations();
        if !violations.is_empty() {
            return SspCoefficientReport { value: 0.0, violations };
        }
        let mut value = f64::INFINITY;
        for (a, b) in self.alpha.iter().zip(self.beta.iter()) {
            if *b > ZERO_THRESHOLD {
                value = value.min(a / b);
            }
        }
        SspCoefficientReport { value, violations }
    }
}

/// Result of reading the SSP coefficient off a Shu–Osher form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SspCoefficientReport {
    pub value: f64,
    pub violations: Vec<AdmissibilityViolation>,
}

/// An entry that breaks the convex-combination premise. Indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AdmissibilityViolation {
    NegativeV { row: usize, value: f64 },
    NegativeAlpha { row: usize, col: usize, value: f64 },
    NegativeBeta { row: usize, col: usize, value: f64 },
    BetaWithoutAlpha { row: usize, col: usize, value: f64 },
}

fn consistency_v(alpha: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(alpha.nrows(), |i, _| 1.0 - alpha.row(i).sum())
}

/// Converts a Butcher tableau into its canonical Shu–Osher form at scaling `r`:
/// `β = [A; bᵀ](I + rA)⁻¹`, `α = rβ`, `v = 1 − α e`.
pub fn butcher_to_canonical_shu_osher(t: &ButcherTableau, r: f64) -> Result<ShuOsherForm> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("r must be nonnegative, got {r}")));
    }
    let s = t.stages();
    let mut k = DMatrix::zeros(s + 1, s);
    k.view_mut((0, 0), (s, s)).copy_from(t.a());
    for j in 0..s {
        k[(s, j)] = t.b()[j];
    }
    let g = DMatrix::identity(s, s) + t.a() * r;
    let beta = linalg::solve_right(&k, &g)
        .ok_or_else(|| Error::Singular(format!("I + rA is singular at r = {r}")))?;
    let alpha = &beta * r;
    let v = consistency_v(&alpha);
    let form = ShuOsherForm {
        alpha,
        beta,
        v,
        r: Some(r),
        info: t.info().clone(),
    };
    Ok(form)
}

/// Recovers the Butcher tableau of a Shu–Osher form by eliminating the
/// stage-to-stage couplings: `A = (I − α₁)⁻¹β₁`, `b = β₂ + α₂A`, where the
/// subscripts denote the first `s` rows and the final row.
pub fn shu_osher_to_butcher(so: &ShuOsherForm) -> Result<ButcherTableau> {
    let s = so.stages();
    let alpha_top = so.alpha.rows(0, s).into_owned();
    let beta_top = so.beta.rows(0, s).into_owned();
    let m = DMatrix::identity(s, s) - alpha_top;
    let a = linalg::solve(&m, &beta_top)
        .ok_or_else(|| Error::Singular("stage-coupling matrix I - alpha is singular".into()))?;
    let alpha_last = so.alpha.row(s);
    let beta_last = so.beta.row(s);
    let b_row = beta_last + alpha_last * &a;
    let b = DVector::from_iterator(s, b_row.iter().cloned());
    Ok(ButcherTableau::new(a, b)?.with_info(so.info.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssprk33() -> ButcherTableau {
        ButcherTableau::from_rows(
            &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.25, 0.25, 0.0]],
            &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        )
        .unwrap()
    }

    #[test]
    fn r_zero_is_identity_conversion() {
        let t = ssprk33();
        let so = butcher_to_canonical_shu_osher(&t, 0.0).unwrap();
        assert!(so.alpha().iter().all(|&x| x == 0.0));
        assert!(so.v().iter().all(|&x| x == 1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(so.beta()[(i, j)], t.a()[(i, j)]);
            }
            assert_eq!(so.beta()[(3, i)], t.b()[i]);
        }
        let back = shu_osher_to_butcher(&so).unwrap();
        assert_eq!(back.a(), t.a());
        assert_eq!(back.b(), t.b());
    }

    #[test]
    fn ssprk33_canonical_form_at_one() {
        let so = butcher_to_canonical_shu_osher(&ssprk33(), 1.0).unwrap();
        let v = [1.0, 0.0, 0.75, 1.0 / 3.0];
        for i in 0..4 {
            assert!((so.v()[i] - v[i]).abs() < 1e-15, "v[{i}] = {}", so.v()[i]);
        }
        let mut expected = DMatrix::zeros(4, 3);
        expected[(1, 0)] = 1.0;
        expected[(2, 1)] = 0.25;
        expected[(3, 2)] = 2.0 / 3.0;
        assert!((so.alpha() - &expected).abs().max() < 1e-15);
        assert!((so.beta() - &expected).abs().max() < 1e-15);
        let report = so.ssp_coefficient();
        assert!(report.violations.is_empty());
        assert!((report.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_form_recovers_ssprk33() {
        let mut alpha = DMatrix::zeros(4, 3);
        alpha[(1, 0)] = 1.0;
        alpha[(2, 1)] = 0.25;
        alpha[(3, 2)] = 2.0 / 3.0;
        let so = ShuOsherForm::new(
            alpha.clone(),
            alpha,
            DVector::from_column_slice(&[1.0, 0.0, 0.75, 1.0 / 3.0]),
            Some(1.0),
        )
        .unwrap();
        let t = shu_osher_to_butcher(&so).unwrap();
        let want = ssprk33();
        assert!((t.a() - want.a()).abs().max() < 1e-15);
        assert!((t.b() - want.b()).abs().max() < 1e-15);
    }

    #[test]
    fn inadmissible_forms_have_zero_coefficient() {
        let alpha = DMatrix::from_row_slice(2, 1, &[0.0, 1.5]);
        let beta = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let so = ShuOsherForm::new(alpha, beta, DVector::from_column_slice(&[1.0, -0.5]), None)
            .unwrap();
        let rep = so.ssp_coefficient();
        assert_eq!(rep.value, 0.0);
        assert_eq!(
            rep.violations,
            vec![AdmissibilityViolation::NegativeV { row: 2, value: -0.5 }]
        );
    }

    #[test]
    fn zero_beta_gives_infinite_coefficient() {
        let alpha = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let beta = DMatrix::zeros(2, 1);
        let so = ShuOsherForm::new(alpha, beta, DVector::from_column_slice(&[1.0, 0.0]), None)
            .unwrap();
        assert_eq!(so.ssp_coefficient().value, f64::INFINITY);
    }

    #[test]
    fn beta_without_alpha_is_flagged() {
        let alpha = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let beta = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let so = ShuOsherForm::new(alpha, beta, DVector::from_column_slice(&[1.0, 1.0]), None)
            .unwrap();
        let rep = so.ssp_coefficient();
        assert_eq!(rep.value, 0.0);
        assert!(matches!(
            rep.violations[0],
            AdmissibilityViolation::BetaWithoutAlpha { row: 2, col: 1, .. }
        ));
    }

    #[test]
    fn negative_r_and_singular_g_rejected() {
        let t = ssprk33();
        assert!(matches!(
            butcher_to_canonical_shu_osher(&t, -1.0),
            Err(Error::Domain(_))
        ));
        let bad = ButcherTableau::from_rows(&[&[-0.5]], &[1.0]).unwrap();
        assert!(matches!(
            butcher_to_canonical_shu_osher(&bad, 2.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let alpha = DMatrix::from_row_slice(2, 1, &[0.0, 0.5]);
        let beta = DMatrix::zeros(2, 1);
        let res = ShuOsherForm::new(alpha, beta, DVector::from_column_slice(&[1.0, 0.4]), None);
        assert!(matches!(res, Err(Error::Validation(_))));
    }
}
