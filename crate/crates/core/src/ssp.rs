//! Radius of absolute monotonicity for RK methods and the K-dependent SSP
//! radius of IMEX pairs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tableau::{stacked_matrix, ButcherTableau, ImexTableau, KValue};

/// Allowed negativity of witness entries (and excess of the row-sum bound).
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Entries this close to a constraint boundary are reported as binding.
const BINDING_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// `S(I+rS)⁻¹` and `rS(I+rS)⁻¹`.
    Rk { s_resolvent: Vec<Vec<f64>>, r_s_resolvent: Vec<Vec<f64>> },
    /// `Re`, `P = rRS` and `Q = r̃RS̃` with `R = (I + rS + r̃S̃)⁻¹`.
    Imex { re: Vec<f64>, p: Vec<Vec<f64>>, q: Vec<Vec<f64>> },
}

/// One near-active constraint; indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Binding {
    pub constraint: &'static str,
    pub row: usize,
    pub col: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SspCertificate {
    pub r: f64,
    pub feasible: bool,
    /// Why the point is infeasible, when it is.
    pub reason: Option<String>,
    pub witness: Option<Witness>,
    pub binding: Vec<Binding>,
}

impl SspCertificate {
    fn singular(r: f64) -> Self {
        SspCertificate {
            r,
            feasible: false,
            reason: Some("singular".into()),
            witness: None,
            binding: Vec::new(),
        }
    }

    /// Binding constraints as CSV `constraint,row,col,value`.
    pub fn binding_csv(&self) -> String {
        let mut out = String::from("constraint,row,col,value\n");
        for b in &self.binding {
            let col = b.col.map(|c| c.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{:e}\n", b.constraint, b.row, col, b.value));
        }
        out
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `S(I + rS)⁻¹`, or `None` when `I + rS` is singular.
pub(crate) fn rk_resolvent(stacked: &DMatrix<f64>, r: f64) -> Option<DMatrix<f64>> {
    let n = stacked.nrows();
    let m = DMatrix::identity(n, n) + stacked * r;
    linalg::solve_right(stacked, &m)
}

/// `(Re, P, Q)` for the IMEX conditions, or `None` when singular.
pub(crate) fn imex_parts(
    s: &DMatrix<f64>,
    st: &DMatrix<f64>,
    r: f64,
    rt: f64,
) -> Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    let m = DMatrix::identity(n, n) + s * r + st * rt;
    let rhs = {
        let mut rhs = DMatrix::zeros(n, 2 * n + 1);
        rhs.view_mut((0, 0), (n, n)).copy_from(&(s * r));
        rhs.view_mut((0, n), (n, n)).copy_from(&(st * rt));
        rhs.column_mut(2 * n).fill(1.0);
        rhs
    };
    let x = linalg::solve(&m, &rhs)?;
    Some((
        x.column(2 * n).into_owned(),
        x.columns(0, n).into_owned(),
        x.columns(n, n).into_owned(),
    ))
}

fn check_entries(
    name: &'static str,
    m: &DMatrix<f64>,
    tol: f64,
    binding: &mut Vec<Binding>,
) -> Option<String> {
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v < -tol && worst.is_none_or(|w| v < w.2) {
                worst = Some((i, j, v));
            }
            if v != 0.0 && v.abs() <= BINDING_TOLERANCE {
                binding.push(Binding { constraint: name, row: i + 1, col: Some(j + 1), value: v });
            }
        }
    }
    worst.map(|(i, j, v)| format!("{name}[{},{}] = {v:e} < 0", i + 1, j + 1))
}

fn check_r(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("r must be a nonnegative number, got {r}")))
    }
}

/// Tests `S(I+rS)⁻¹ ≥ 0` and `‖rS(I+rS)⁻¹‖_∞ ≤ 1`, both up to `tol`.
pub fn is_absolutely_monotonic(t: &ButcherTableau, r: f64, tol: f64) -> Result<SspCertificate> {
    check_r(r)?;
    let stacked = t.stacked();
    let Some(x) = rk_resolvent(&stacked, r) else {
        return Ok(SspCertificate::singular(r));
    };
    let rx = &x * r;
    let mut binding = Vec::new();
    let mut reason = check_entries("S(I+rS)^-1", &x, tol, &mut binding);
    for i in 0..rx.nrows() {
        let sum: f64 = rx.row(i).iter().map(|v| v.abs()).sum();
        if sum > 1.0 + tol && reason.is_none() {
            reason = Some(format!("row {} of rS(I+rS)^-1 sums to {sum}", i + 1));
        }
        if r > 0.0 && (1.0 - sum).abs() <= BINDING_TOLERANCE {
            binding.push(Binding { constraint: "rowsum", row: i + 1, col: None, value: sum });
        }
    }
    Ok(SspCertificate {
        r,
        feasible: reason.is_none(),
        reason,
        witness: Some(Witness::Rk { s_resolvent: rows(&x), r_s_resolvent: rows(&rx) }),
        binding,
    })
}

/// An IMEX pair together with the forward-Euler radius ratio `K`.
#[derive(Clone, Copy, Debug)]
pub struct ImexSspQuery<'a> {
    pub pair: &'a ImexTableau,
    pub k: KValue,
}

/// Tests `Re ≥ 0`, `P ≥ 0`, `Q ≥ 0` with `r̃ = r/K`. At `K = ∞` the `S̃`
/// terms vanish and `Q` is identically zero.
pub fn imex_is_feasible(q: ImexSspQuery<'_>, r: f64, tol: f64) -> Result<SspCertificate> {
    check_r(r)?;
    let e = q.pair.explicit();
    let i = q.pair.implicit();
    let s = stacked_matrix(e.a(), e.b());
    let st = stacked_matrix(i.a(), i.b());
    let Some((re, p, qm)) = imex_parts(&s, &st, r, r * q.k.inverse()) else {
        return Ok(SspCertificate::singular(r));
    };
    let mut binding = Vec::new();
    let re_m = DMatrix::from_column_slice(re.len(), 1, re.as_slice());
    let reason = check_entries("Re", &re_m, tol, &mut binding)
        .into_iter()
        .chain(check_entries("P", &p, tol, &mut binding))
        .chain(check_entries("Q", &qm, tol, &mut binding))
        .next();
    Ok(SspCertificate {
        r,
        feasible: reason.is_none(),
        reason,
        witness: Some(Witness::Imex { re: re.iter().copied().collect(), p: rows(&p), q: rows(&qm) }),
        binding,
    })
}

/// Largest `r` with `feasible(r)`, assuming feasibility is monotone.
///
/// Brackets by doubling from 1 up to `cap` (beyond which the radius is
/// reported as infinite), bisects to relative width `rel_tol`, then samples
/// below the result to check monotonicity.
pub(crate) fn bisect_radius(
    cap: f64,
    rel_tol: f64,
    mut feasible: impl FnMut(f64) -> bool,
) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol must be positive, got {rel_tol}")));
    }
    if !feasible(rel_tol) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if feasible(1.0) {
        let mut lo = 1.0;
        loop {
            let next = 2.0 * lo;
            if next > cap {
                if feasible(cap) {
                    return Ok(f64::INFINITY);
                }
                break (lo, cap);
            }
            if !feasible(next) {
                break (lo, next);
            }
            lo = next;
        }
    } else {
        (rel_tol, 1.0)
    };
    let infeasible_at = hi;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for k in 1..8 {
        let x = lo * k as f64 / 8.0;
        if !feasible(x) {
            return Err(Error::NonMonotone { feasible: lo, infeasible: x });
        }
    }
    debug_assert!(infeasible_at >= hi);
    Ok(lo)
}

fn cap_for(stages: usize) -> f64 {
    4.0 * (stages as f64 + 1.0)
}

/// SSP coefficient of a Runge–Kutta method; infinite if feasibility persists
/// to `4(s+1)`.
pub fn ssp_radius(t: &ButcherTableau, rel_tol: f64) -> Result<f64> {
    let stacked = t.stacked();
    bisect_radius(cap_for(t.stages()), rel_tol, |r| {
        rk_feasible(&stacked, r, FEASIBILITY_TOLERANCE)
    })
}

pub(crate) fn rk_feasible(stacked: &DMatrix<f64>, r: f64, tol: f64) -> bool {
    match rk_resolvent(stacked, r) {
        None => false,
        Some(x) => {
            x.iter().all(|&v| v >= -tol)
                && (0..x.nrows()).all(|i| r * x.row(i).iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + tol)
        }
    }
}

pub(crate) fn imex_feasible(s: &DMatrix<f64>, st: &DMatrix<f64>, r: f64, k: KValue, tol: f64) -> bool {
    match imex_parts(s, st, r, r * k.inverse()) {
        None => false,
        Some((re, p, q)) => re.iter().chain(p.iter()).chain(q.iter()).all(|&v| v >= -tol),
    }
}

/// SSP radius `r` of an IMEX pair for a given `K`; the implicit part then
/// allows `r̃ = r/K`.
pub fn imex_ssp_radius(q: ImexSspQuery<'_>, rel_tol: f64) -> Result<f64> {
    let e = q.pair.explicit();
    let i = q.pair.implicit();
    let s = stacked_matrix(e.a(), e.b());
    let st = stacked_matrix(i.a(), i.b());
    bisect_radius(cap_for(q.pair.stages()), rel_tol, |r| {
        imex_feasible(&s, &st, r, q.k, FEASIBILITY_TOLERANCE)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe() -> ButcherTableau {
        ButcherTableau::from_rows(&[&[0.0]], &[1.0]).unwrap()
    }

    #[test]
    fn forward_euler_boundary() {
        let t = fe();
        assert!(is_absolutely_monotonic(&t, 1.0, FEASIBILITY_TOLERANCE).unwrap().feasible);
        let c = is_absolutely_monotonic(&t, 1.0 + 1e-6, FEASIBILITY_TOLERANCE).unwrap();
        assert!(!c.feasible);
        assert!(c.reason.unwrap().contains("row"));
        assert!((ssp_radius(&t, 1e-12).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn implicit_midpoint_radius() {
        let t = ButcherTableau::from_rows(&[&[0.5]], &[1.0]).unwrap();
        assert!(is_absolutely_monotonic(&t, 2.0, FEASIBILITY_TOLERANCE).unwrap().feasible);
        assert!(!is_absolutely_monotonic(&t, 2.001, FEASIBILITY_TOLERANCE).unwrap().feasible);
        assert!((ssp_radius(&t, 1e-11).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn singular_resolvent_is_infeasible() {
        // I + rS singular at r = 2 for A = [-1/2].
        let t = ButcherTableau::from_rows(&[&[-0.5]], &[1.0]).unwrap();
        let c = is_absolutely_monotonic(&t, 2.0, 0.0).unwrap();
        assert!(!c.feasible);
        assert_eq!(c.reason.as_deref(), Some("singular"));
        assert!(is_absolutely_monotonic(&t, -1.0, 0.0).is_err());
    }

    #[test]
    fn unbounded_radius_is_infinite() {
        // Backward Euler is absolutely monotonic for every r.
        let t = ButcherTableau::from_rows(&[&[1.0]], &[1.0]).unwrap();
        assert_eq!(ssp_radius(&t, 1e-10).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bisection_flags_non_monotone_oracles() {
        let e = bisect_radius(100.0, 1e-10, |r| r <= 1e-3 || (2.0..=3.0).contains(&r)).unwrap();
        assert!((e - 1e-3).abs() < 1e-12);
        let err = bisect_radius(100.0, 1e-10, |r| !(0.3..0.4).contains(&r) && r <= 3.0);
        assert!(matches!(err, Err(Error::NonMonotone { .. })));
    }

    #[test]
    fn imex_zero_radius_is_trivially_feasible() {
        let t = fe();
        let pair = ImexTableau::new(t, ButcherTableau::from_rows(&[&[1.0]], &[1.0]).unwrap()).unwrap();
        let q = ImexSspQuery { pair: &pair, k: KValue::Finite(1.0) };
        let c = imex_is_feasible(q, 0.0, 0.0).unwrap();
        assert!(c.feasible);
        match c.witness.unwrap() {
            Witness::Imex { re, p, q } => {
                assert_eq!(re, vec![1.0, 1.0]);
                assert!(p.iter().chain(&q).flatten().all(|v| *v == 0.0));
            }
            _ => panic!("wrong witness"),
        }
    }
}
