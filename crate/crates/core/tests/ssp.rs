use proptest::prelude::*;
use ssp_core::library;
use ssp_core::ssp::{
    imex_is_feasible, imex_ssp_radius, is_absolutely_monotonic, ssp_radius, ImexSspQuery,
    DEFAULT_REL_TOL, FEASIBILITY_TOLERANCE,
};
use ssp_core::tableau::{ButcherTableau, ImexTableau, KValue, Method};

fn rk(name: &str) -> ButcherTableau {
    library::bundled(name).unwrap().to_butcher().unwrap()
}

fn pair(name: &str) -> ImexTableau {
    library::bundled(name).unwrap().into_imex().unwrap()
}

#[test]
fn classic_explicit_radii() {
    assert!(is_absolutely_monotonic(&rk("ssprk33"), 1.0, FEASIBILITY_TOLERANCE).unwrap().feasible);
    for (name, want) in [("forward-euler", 1.0), ("ssprk22", 1.0), ("ssprk33", 1.0), ("ketcheson-ssprk104", 6.0)] {
        let r = ssp_radius(&rk(name), DEFAULT_REL_TOL).unwrap();
        assert!((r - want).abs() < 1e-8, "{name}: {r}");
    }
}

#[test]
fn appendix_dirk_radii() {
    let r = ssp_radius(&rk("lnl-dirk-6-4-6"), DEFAULT_REL_TOL).unwrap();
    assert!((5.128..=5.148).contains(&r), "{r}");
    for (name, printed) in [("lnl-dirk-8-4-9", 4.7350), ("lnl-dirk-10-2-11", 5.2306)] {
        let r = ssp_radius(&rk(name), DEFAULT_REL_TOL).unwrap();
        assert!((r - printed).abs() < 1e-3, "{name}: {r}");
    }
    let r = ssp_radius(&rk("sspirk33"), DEFAULT_REL_TOL).unwrap();
    assert!((r - 4.8284).abs() < 1e-3, "{r}");
}

#[test]
fn radius_dominates_shu_osher_coefficient() {
    for name in library::bundled_names() {
        if let Method::ShuOsher(so) = library::bundled(name).unwrap() {
            let t = Method::from(so.clone());
            let c = so.ssp_coefficient().value;
            let r = ssp_radius(&t.to_butcher().unwrap(), DEFAULT_REL_TOL).unwrap();
            assert!(r >= c - 1e-8, "{name}: radius {r} below form coefficient {c}");
        }
    }
}

#[test]
fn explicit_radius_bounded_by_stage_count() {
    for name in library::bundled_names() {
        let Ok(t) = library::bundled(name).unwrap().to_butcher() else { continue };
        if t.is_explicit() {
            let r = ssp_radius(&t, DEFAULT_REL_TOL).unwrap();
            assert!(r <= t.stages() as f64 + DEFAULT_REL_TOL, "{name}: {r}");
        }
    }
}

#[test]
fn k_infinite_matches_explicit_part() {
    let p = pair("imex-ssprk33-beta23");
    let q = ImexSspQuery { pair: &p, k: KValue::Infinite };
    assert!(imex_is_feasible(q, 1.0, FEASIBILITY_TOLERANCE).unwrap().feasible);
    assert!(!imex_is_feasible(q, 1.001, FEASIBILITY_TOLERANCE).unwrap().feasible);
    let r = imex_ssp_radius(q, DEFAULT_REL_TOL).unwrap();
    let e = ssp_radius(p.explicit(), DEFAULT_REL_TOL).unwrap();
    assert!((r - e).abs() < 1e-9);

    let p = pair("imex-ssprk104-sdirk");
    let r = imex_ssp_radius(ImexSspQuery { pair: &p, k: KValue::Infinite }, DEFAULT_REL_TOL).unwrap();
    assert!((r - 6.0).abs() < 1e-6, "{r}");
}

#[test]
fn k_designed_pairs() {
    let p = pair("imex-k10-s5-p3-plin5");
    let q = ImexSspQuery { pair: &p, k: KValue::from_inverse(10.0).unwrap() };
    assert!(imex_is_feasible(q, 0.152, FEASIBILITY_TOLERANCE).unwrap().feasible);
    let c = imex_is_feasible(q, 0.160, FEASIBILITY_TOLERANCE).unwrap();
    assert!(!c.feasible && c.reason.is_some());

    let p = pair("imex-k100-s5-p3-plin5");
    let q = ImexSspQuery { pair: &p, k: KValue::from_inverse(100.0).unwrap() };
    let r = imex_ssp_radius(q, DEFAULT_REL_TOL).unwrap();
    assert!((r - 1.58e-2).abs() < 1e-4, "{r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn imex_radius_nonincreasing_in_inverse_k(a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let p = pair("imex-k10-s7-p4-plin6");
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r = |inv: f64| {
            imex_ssp_radius(ImexSspQuery { pair: &p, k: KValue::from_inverse(inv).unwrap() }, 1e-9).unwrap()
        };
        prop_assert!(r(hi) <= r(lo) * (1.0 + 1e-8) + 1e-12);
    }
}
