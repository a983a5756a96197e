use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use tpdo_core::diffcalc::MultiIndex;
use tpdo_core::grid::{FrequencyWindow, TorusGrid};
use tpdo_core::symbols::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bracket(k: f64) -> f64 {
    (1.0 + k * k).sqrt()
}

fn presets() -> Vec<(&'static str, ToroidalSymbol)> {
    vec![
        ("one", ToroidalSymbol::new(1, SymbolOrder::default(), |_, _| c(1.0, 0.0))),
        ("bracket^-1", ToroidalSymbol::new(1, SymbolOrder::with_m(-1.0), |_, xi| c(1.0 / bracket(xi[0] as f64), 0.0))),
        ("bracket", ToroidalSymbol::new(1, SymbolOrder::with_m(1.0), |_, xi| c(bracket(xi[0] as f64), 0.0))),
        (
            "e^ix bracket^-1",
            ToroidalSymbol::new(1, SymbolOrder::with_m(-1.0), |x, xi| Complex64::from_polar(1.0 / bracket(xi[0] as f64), x[0])),
        ),
    ]
}

#[test]
fn theta_hat_restricts_to_delta() {
    let theta = build_theta();
    for k in -10..=10 {
        let v = theta_hat(&theta, k as f64);
        let target = if k == 0 { 1.0 } else { 0.0 };
        assert!((v.re - target).abs() < 1e-8 && v.im.abs() < 1e-10, "xi={k}: {v}");
    }
    assert!(theta.partition_defect(10_000) < 1e-12);
    let half = theta_hat(&theta, 0.5).re;
    assert!(half > 0.0 && half < 1.0);
}

#[test]
fn theta_hat_decays() {
    let theta = build_theta();
    let scaled: Vec<f64> = (1..=40).map(|k| theta_hat(&theta, k as f64 + 0.5).norm() * bracket(k as f64 + 0.5).powi(6)).collect();
    let worst = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 20.0, "{worst}");
    assert!(scaled[39] < 0.1 * worst);
    for k in [0.5, 3.5, 10.5, 30.5] {
        assert!(phi_alpha(&theta, 1, k).norm() * bracket(k).powi(4) < 10.0);
    }
}

#[test]
fn derivative_of_theta_hat_is_transposed_difference_of_phi() {
    let theta = build_theta();
    let h = 1e-3;
    for k in -3..=3 {
        let xi = k as f64 + 0.25;
        // fourth-order central difference as oracle
        let d = (theta_hat(&theta, xi - 2.0 * h) - theta_hat(&theta, xi - h) * 8.0 + theta_hat(&theta, xi + h) * 8.0
            - theta_hat(&theta, xi + 2.0 * h))
            / (12.0 * h);
        let diff = phi_alpha(&theta, 1, xi) - phi_alpha(&theta, 1, xi - 1.0);
        assert!((d - diff).norm() < 1e-6, "xi={xi}: {d} vs {diff}");
    }
}

#[test]
fn extension_restricts_to_presets() {
    let g = TorusGrid::new(1, 16).unwrap();
    let w = FrequencyWindow::new(1, 8).unwrap();
    for (name, s) in presets() {
        let a = extend_symbol(&s, ThetaHatTable::shared(), ExtensionSettings::with_radius(12)).unwrap();
        let err = a.restriction_error(g, w).unwrap();
        assert!(err < 1e-8, "{name}: {err:e}");
    }
}

#[test]
fn poisson_summation_of_theta_hat() {
    let table = ThetaHatTable::shared();
    let settings = ExtensionSettings::for_tolerance(&table, 1e-10, 1).unwrap();
    let one = ToroidalSymbol::new(1, SymbolOrder::default(), |_, _| c(1.0, 0.0));
    let a = extend_symbol(&one, table, settings).unwrap();
    for xi in [0.0, 0.3, 0.7] {
        let v = a.eval(&[1.0], &[xi]).unwrap();
        assert!((v - 1.0).norm() < 1e-8, "xi={xi}: {v}");
    }
}

#[test]
fn extensions_from_two_bumps_differ_by_a_smoothing_symbol() {
    let shared = ThetaHatTable::shared();
    let other = Arc::new(ThetaFunction::with_scale(2.0, 2.0 * PI / 512.0).unwrap());
    let other_table = Arc::new(ThetaHatTable::new(other, shared.range()).unwrap());
    for (name, s) in presets() {
        let a = extend_symbol(&s, shared.clone(), ExtensionSettings::with_radius(24)).unwrap();
        let b = extend_symbol(&s, other_table.clone(), ExtensionSettings::with_radius(24)).unwrap();
        let gap = |k: f64| (a.eval(&[0.4], &[k]).unwrap() - b.eval(&[0.4], &[k]).unwrap()).norm();
        // integer restrictions agree; off the lattice the gap decays rapidly
        let near = gap(1.5).max(gap(0.5));
        let far = gap(20.5);
        assert!(far < 1e-6 && (far <= 1e-4 * near || near < 1e-6), "{name}: {near:e} -> {far:e}");
        for k in [0.0, 1.0, 5.0] {
            assert!(gap(k) < 1e-8, "{name} at {k}");
        }
    }
}

fn bracket_power_derivative(m: f64, order: u32, t: f64) -> f64 {
    let b2 = 1.0 + t * t;
    match order {
        0 => b2.powf(m / 2.0),
        1 => m * t * b2.powf(m / 2.0 - 1.0),
        2 => m * b2.powf(m / 2.0 - 1.0) + m * (m - 2.0) * t * t * b2.powf(m / 2.0 - 2.0),
        _ => unreachable!(),
    }
}

#[test]
fn restricted_class_constants_are_bounded_by_analytic_ones() {
    let g = TorusGrid::new(1, 64).unwrap();
    let w = FrequencyWindow::new(1, 32).unwrap();
    for m in [-1.0, 0.0, 1.0] {
        let s = ToroidalSymbol::new(1, SymbolOrder::with_m(m), move |_, xi| c(bracket(xi[0] as f64).powf(m), 0.0));
        let table = class_constants(&s, &MultiIndex::new(vec![2]), &MultiIndex::new(vec![0]), g, w).unwrap();
        for entry in table {
            let a = entry.alpha.order();
            let e = m - a as f64;
            let analytic = (-4000..=4000)
                .map(|i| i as f64 / 100.0)
                .map(|t| bracket_power_derivative(m, a, t).abs() * bracket(t).powf(-e))
                .fold(0.0, f64::max);
            // moving xi by at most |alpha| costs the Peetre factor
            let peetre = 2f64.powf(e.abs() / 2.0) * bracket(a as f64).powf(e.abs());
            assert!(entry.constant <= analytic * peetre + 1e-12, "m={m} alpha={a}: {} vs {analytic}", entry.constant);
        }
        if m == 1.0 {
            let first = class_constants(&s, &MultiIndex::new(vec![1]), &MultiIndex::new(vec![0]), g, w).unwrap();
            assert!(first.iter().all(|e| e.constant <= 2.0));
        }
    }
}
