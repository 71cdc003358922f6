//! The one-parameter family of implicit partners for SSPRK(3,3) with `b̃ = b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tableau::{ButcherTableau, ImexTableau, MethodInfo};

/// `β = √3/6 + 1/2`, where both nonzero diagonal entries of `Ã` coincide.
pub const SDIRK_LIKE_BETA: f64 = 0.788_675_134_594_812_9;

/// `γ(β) = (2β² − 3β/2 + 1/3) / (2 − 4β)`.
pub fn family_gamma(beta: f64) -> Result<f64> {
    let den = 2.0 - 4.0 * beta;
    if den.abs() < 1e-12 {
        return Err(Error::Domain(format!("gamma is singular at beta = {beta} (beta = 1/2)")));
    }
    Ok((2.0 * beta * beta - 1.5 * beta + 1.0 / 3.0) / den)
}

/// SSPRK(3,3) paired with
/// `Ã = [[0,0,0],[4γ+2β, 1−4γ−2β, 0],[1/2−β−γ, γ, β]]`, `b̃ = b`.
pub fn construct_shu_osher_pair_family(beta: f64) -> Result<ImexTableau> {
    if !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite, got {beta}")));
    }
    let g = family_gamma(beta)?;
    let b = DVector::from_vec(vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.25, 0.25, 0.0]);
    #[rustfmt::skip]
    let at = DMatrix::from_row_slice(3, 3, &[
        0.0, 0.0, 0.0,
        4.0 * g + 2.0 * beta, 1.0 - 4.0 * g - 2.0 * beta, 0.0,
        0.5 - beta - g, g, beta,
    ]);
    let pair = ImexTableau::new(ButcherTableau::new(a, b.clone())?, ButcherTableau::new(at, b)?)?;
    Ok(pair.with_info(MethodInfo {
        name: Some(format!("ssprk33-family-beta-{beta}")),
        p_e: Some(3),
        p_i: Some(3),
        p_lin: Some(3),
        ..Default::default()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_thirds_gives_the_rational_member() {
        assert!((family_gamma(2.0 / 3.0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        let p = construct_shu_osher_pair_family(2.0 / 3.0).unwrap();
        let want = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0 / 6.0, -1.0 / 3.0, 2.0 / 3.0];
        let at = p.implicit().a();
        for (k, w) in want.iter().enumerate() {
            assert!((at[(k / 3, k % 3)] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn sdirk_like_member_has_equal_diagonal() {
        assert!((SDIRK_LIKE_BETA - (3f64.sqrt() / 6.0 + 0.5)).abs() < 1e-16);
        let at = construct_shu_osher_pair_family(SDIRK_LIKE_BETA).unwrap().implicit().a().clone();
        assert!((at[(1, 1)] - at[(2, 2)]).abs() < 1e-14);
    }

    #[test]
    fn abscissae_agree_and_half_is_rejected() {
        for beta in [0.3, 0.6, 0.9, 2.0] {
            let p = construct_shu_osher_pair_family(beta).unwrap();
            let (c, ct) = (p.explicit().c(), p.implicit().c());
            assert!((c - ct).amax() < 1e-14);
        }
        assert!(matches!(construct_shu_osher_pair_family(0.5), Err(Error::Domain(_))));
    }
}
