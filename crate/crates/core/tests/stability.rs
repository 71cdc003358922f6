use num_complex::Complex64;
use ssp_core::conditions::imex_conditions;
use ssp_core::library;
use ssp_core::stability::{
    construct_shu_osher_pair_family, imaginary_axis_extent, is_a_stable_sampled,
    real_axis_crossing, stability_function, ASampleSpec, StabilityFunction,
};
use ssp_core::tableau::ButcherTableau;

fn rk(name: &str) -> ButcherTableau {
    library::bundled(name).unwrap().to_butcher().unwrap()
}

#[test]
fn ssprk33_crossing_matches_dense_scan() {
    // Independent oracle: a fine uniform scan of the cubic on [-3, 0].
    let mut last_stable = 0.0;
    for k in 0..=3_000_000 {
        let x = -3.0 * k as f64 / 3_000_000.0;
        let r: f64 = 1.0 + x + x * x / 2.0 + x * x * x / 6.0;
        if r.abs() > 1.0 {
            break;
        }
        last_stable = x;
    }
    let got = real_axis_crossing(&rk("ssprk33"), 1e-10);
    assert!((got - last_stable).abs() < 2e-6, "{got} vs {last_stable}");
    assert!((got + 2.5127).abs() < 1e-3);
}

/// Reference values from a 50-digit evaluation of the printed coefficients:
/// the real-axis boundary is at -126541.6168554, and `|R(iy)|` exceeds 1 by
/// about 1e-12 already near y = 0.0142 (1e-4 at y = 0.3).
#[test]
fn ketcheson_partner_region() {
    let pair = library::bundled("imex-ssprk104-sdirk").unwrap().into_imex().unwrap();
    let x = real_axis_crossing(pair.implicit(), 1e-6);
    assert!((x + 126_541.616_855).abs() < 1e-3, "{x}");
    let y = imaginary_axis_extent(pair.implicit(), 0.0, 1e-9);
    assert!(y > 0.01 && y < 0.02, "{y}");
}

#[test]
fn consistent_methods_have_unit_r_at_zero() {
    for name in library::bundled_names() {
        let Ok(t) = library::bundled(name).unwrap().to_butcher() else { continue };
        let r = stability_function(&t, Complex64::new(0.0, 0.0)).unwrap();
        assert!((r - 1.0).norm() < 1e-13, "{name}");
    }
}

/// `R(z) − Σ_{k≤q} z^k/k!` decays like `z^{q+1}`.
#[test]
fn stability_function_matches_exponential_to_linear_order() {
    for (name, q) in [("ketcheson-ssprk104", 4), ("lnl-dirk-6-4-6", 6), ("sspirk33", 3)] {
        let f = StabilityFunction::new(&rk(name));
        let err = |h: f64| {
            let z = Complex64::new(-h, 0.5 * h);
            let mut taylor = Complex64::new(0.0, 0.0);
            let mut term = Complex64::new(1.0, 0.0);
            for k in 0..=q {
                taylor += term;
                term = term * z / (k + 1) as f64;
            }
            (f.eval(z).unwrap() - taylor).norm()
        };
        let (h1, h2) = (0.4, 0.2);
        let slope = (err(h1) / err(h2)).ln() / 2f64.ln();
        assert!(slope >= q as f64 + 0.7, "{name}: slope {slope}");
    }
}

#[test]
fn family_members_are_third_order_and_a_stable() {
    for beta in [0.6, 2.0 / 3.0, 0.8] {
        let p = construct_shu_osher_pair_family(beta).unwrap();
        let rep = imex_conditions(3, 3, 3, false).unwrap().evaluate(&p, 1e-12).unwrap();
        assert!(rep.all_pass(), "beta {beta}: {}", rep.max_abs());
        assert!(is_a_stable_sampled(p.implicit(), ASampleSpec::default()).a_stable_sampled, "beta {beta}");
    }
    let nice = library::bundled("imex-ssprk33-beta23").unwrap().into_imex().unwrap();
    assert!(is_a_stable_sampled(nice.implicit(), ASampleSpec::default()).a_stable_sampled);
    // Below 1/2 the family loses A-stability.
    let p = construct_shu_osher_pair_family(0.3).unwrap();
    assert!(!is_a_stable_sampled(p.implicit(), ASampleSpec::default()).a_stable_sampled);
}
