use ssp_core::conditions::rk_conditions;
use ssp_core::optimizer::{co_optimize, optimize, optimize_imex, SearchSpec};
use ssp_core::ssp::{imex_ssp_radius, ssp_radius, ImexSspQuery, DEFAULT_REL_TOL};
use ssp_core::stability::real_axis_crossing;
use ssp_core::tableau::{KValue, Method, Structure};

fn certified(m: &Method, k: Option<KValue>) -> f64 {
    match (m, k) {
        (Method::Imex(p), Some(k)) => imex_ssp_radius(ImexSspQuery { pair: p, k }, DEFAULT_REL_TOL).unwrap(),
        _ => ssp_radius(&m.to_butcher().unwrap(), DEFAULT_REL_TOL).unwrap(),
    }
}

#[test]
fn explicit_two_stage_second_order() {
    let spec = SearchSpec::rk(2, Structure::Explicit, 2, 2).with_budget(4, 100, 1);
    let res = optimize(&spec).unwrap();
    assert!((res.r - 1.0).abs() < 1e-3, "{}", res.r);
    assert!((certified(&res.method, None) - res.r).abs() < 1e-8);
    let rep = rk_conditions(2, 2).unwrap().evaluate(&res.method.to_butcher().unwrap(), 1e-8).unwrap();
    assert!(rep.all_pass());
}

#[test]
fn one_stage_dirk_is_implicit_midpoint() {
    let spec = SearchSpec::rk(1, Structure::Dirk, 2, 2).with_budget(4, 100, 2);
    let res = optimize(&spec).unwrap();
    assert!((res.r - 2.0).abs() < 1e-3, "{}", res.r);
    let t = res.method.to_butcher().unwrap();
    assert!((t.a()[(0, 0)] - 0.5).abs() < 1e-8 && (t.b()[0] - 1.0).abs() < 1e-8);
}

#[test]
fn three_stage_dirk_linear_order_three() {
    let spec = SearchSpec::rk(3, Structure::Dirk, 2, 3).with_budget(8, 200, 3);
    let res = optimize(&spec).unwrap();
    assert!((res.r - 4.83).abs() < 5e-2, "{}", res.r);
    assert!(res.max_equality_residual < 1e-8);
}

#[test]
fn imex_k_infinite_spot_checks() {
    for (s, want) in [(3, 1.0), (4, 2.0)] {
        let spec = SearchSpec::imex(s, 2, 2, 3, KValue::Infinite).with_budget(8, 200, 4);
        let res = optimize_imex(&spec).unwrap();
        assert!((res.r - want).abs() < 1e-2, "s={s}: {}", res.r);
        assert!((certified(&res.method, Some(KValue::Infinite)) - res.r).abs() < 1e-8);
    }
}

#[test]
fn imex_k_ten_spot_check() {
    let k = KValue::from_inverse(10.0).unwrap();
    let spec = SearchSpec::imex(3, 2, 2, 3, k).with_budget(8, 200, 5);
    let res = optimize_imex(&spec).unwrap();
    assert!((res.r - 0.2030).abs() < 1e-2, "{}", res.r);
}

#[test]
fn same_seed_same_result() {
    let spec = SearchSpec::rk(2, Structure::Explicit, 2, 2).with_budget(3, 60, 9);
    let a = optimize(&spec).unwrap();
    let b = optimize(&spec).unwrap();
    assert_eq!(a.r.to_bits(), b.r.to_bits());
    assert_eq!(a.method.to_butcher().unwrap(), b.method.to_butcher().unwrap());
}

#[test]
fn more_starts_never_hurt() {
    let small = SearchSpec::rk(3, Structure::Explicit, 2, 3).with_budget(2, 60, 11);
    let big = SearchSpec::rk(3, Structure::Explicit, 2, 3).with_budget(4, 60, 11);
    assert!(optimize(&big).unwrap().r >= optimize(&small).unwrap().r);
}

#[test]
fn inactive_co_constraint_matches_plain_search() {
    let plain = SearchSpec::rk(3, Structure::Dirk, 2, 3).with_budget(8, 200, 3);
    let co = plain.clone().with_co_constraints(0.0, 0.0);
    let a = optimize(&plain).unwrap().r;
    let b = co_optimize(&co).unwrap().r;
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn unsatisfiable_real_axis_target() {
    let spec = SearchSpec::rk(2, Structure::Explicit, 2, 2).with_budget(2, 60, 1).with_co_constraints(1e6, 0.0);
    let res = co_optimize(&spec).unwrap();
    assert_eq!(res.r, 0.0);
    assert!(res.termination.contains("no start"));
    assert!(real_axis_crossing(&res.method.to_butcher().unwrap(), 1e-6) > -1e6);
}

#[test]
fn attainable_real_axis_target() {
    let spec = SearchSpec::rk(2, Structure::Explicit, 1, 1).with_budget(2, 100, 3).with_co_constraints(3.0, 0.0);
    let res = co_optimize(&spec).unwrap();
    assert!((res.r - 2.0).abs() < 1e-2, "{}", res.r);
    assert!(real_axis_crossing(&res.method.to_butcher().unwrap(), 1e-8) <= -3.0);
    assert!(res.warnings.is_empty(), "{:?}", res.warnings);
}
