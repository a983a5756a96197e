use std::f64::consts::PI;

use num_complex::Complex64;
use tpdo_core::grid::{forward_transform, FrequencyWindow, GridFunction, SupportBox, TorusGrid};
use tpdo_core::numerics::japanese_bracket;
use tpdo_core::periodise::*;
use tpdo_core::symbols::build_theta;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian(s: f64) -> impl Fn(&[f64]) -> Complex64 + Sync {
    move |x| c((-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp(), 0.0)
}

fn narrow_gaussian(grid: TorusGrid) -> CompactFunction {
    CompactFunction::from_fn(&SupportBox::cube(1, 2.0 * PI).unwrap(), grid.spacing(), gaussian(0.5)).unwrap()
}

// smooth cut-off equal to 1 near 0 and vanishing at |x| >= r
fn cutoff(x: f64, r: f64) -> f64 {
    let t = x.abs() / r;
    if t >= 1.0 {
        0.0
    } else {
        (-t.powi(8) / (1.0 - t * t)).exp()
    }
}

#[test]
fn gaussian_periodisation_matches_euclidean_transform() {
    let g = TorusGrid::new(1, 64).unwrap();
    let u = CompactFunction::from_fn(&SupportBox::cube(1, 8.0).unwrap(), g.spacing(), gaussian(1.0)).unwrap();
    let w = FrequencyWindow::new(1, 16).unwrap();
    let spec = periodised_spectrum(&u, g, w).unwrap();
    for (xi, v) in w.iter().zip(&spec) {
        let k = xi[0] as f64;
        // f^_E(xi) = (2 pi)^{-1} int e^{-x^2/2} e^{-i x xi} dx
        let exact = (-k * k / 2.0).exp() / (2.0 * PI).sqrt();
        assert!((v - exact).norm() < 1e-6, "xi={k}");
    }
}

#[test]
fn coarse_samples_are_fft_interpolated() {
    let fine = TorusGrid::new(1, 128).unwrap();
    let coarse = TorusGrid::new(1, 64).unwrap();
    let u = CompactFunction::from_fn(&SupportBox::cube(1, 8.0).unwrap(), coarse.spacing(), gaussian(1.0)).unwrap();
    let pu = periodise_function(&u, fine, Resampling::AlignedOnly).unwrap();
    let exact = GridFunction::from_fn(fine, |x| {
        (-3..=3).map(|k| gaussian(1.0)(&[x[0] + 2.0 * PI * k as f64])).sum()
    });
    assert!(pu.max_abs_diff(&exact) < 1e-10, "{}", pu.max_abs_diff(&exact));
}

#[test]
fn identity_commutes_with_periodisation() {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = narrow_gaussian(g);
    let one = EuclideanSymbol::periodic(1, |_, _| c(1.0, 0.0));
    let r = verify_p1(&one, &f, g, &QuadratureSettings::default()).unwrap();
    assert!(r.pass && r.discrepancy < 1e-8, "{r:?}");
}

#[test]
fn derivative_commutes_within_budget() {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = narrow_gaussian(g);
    let d = EuclideanSymbol::periodic(1, |_, xi| c(0.0, xi[0]));
    let r = verify_p1(&d, &f, g, &QuadratureSettings::default()).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.budget < 1e-4, "{r:?}");
}

#[test]
fn variable_coefficient_symbols_commute() {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = narrow_gaussian(g);
    let suite = [
        EuclideanSymbol::periodic(1, |x, xi| c(2.0 + x[0].cos(), 0.0) / japanese_bracket(xi)),
        EuclideanSymbol::periodic(1, |x, xi| c(x[0].sin() * xi[0], japanese_bracket(xi))),
    ];
    for a in &suite {
        let r = verify_p1(a, &f, g, &QuadratureSettings::default()).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn refining_the_frequency_step_shrinks_the_discrepancy() {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = narrow_gaussian(g);
    let a = EuclideanSymbol::periodic(1, |x, xi| c(2.0 + x[0].cos(), 0.0) / japanese_bracket(xi));
    let run = |step: f64| {
        let s = QuadratureSettings { step, ..QuadratureSettings::default() };
        verify_p1(&a, &f, g, &s).unwrap().discrepancy
    };
    let (coarse, fine) = (run(0.5), run(0.25));
    assert!(fine <= 0.5 * coarse || fine < 1e-10, "{coarse} -> {fine}");
}

fn residual_for(scale: f64) -> ResidualReport {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = CompactFunction::from_fn(&SupportBox::cube(1, PI).unwrap(), g.spacing(), gaussian(0.3)).unwrap();
    let a0 = EuclideanSymbol::compact(SupportBox::cube(1, PI).unwrap(), move |x, xi| {
        c(cutoff(x[0], PI), 0.0) / (1.0 + xi[0] * xi[0] / (scale * scale))
    });
    let settings = QuadratureSettings { margin: 3.0 * PI, ..QuadratureSettings::default() };
    smoothing_residual(&a0, &f, &settings).unwrap()
}

#[test]
fn smoothing_residual_vanishes_inside() {
    for scale in [1.0, 4.0] {
        let r = residual_for(scale);
        assert!(r.inner_max <= r.budget && r.inner_max < 1e-8, "{r:?}");
        assert!(r.max > 1e-8, "{scale}: {}", r.max);
    }
}

#[test]
fn smoothing_residual_decay_follows_kernel_width() {
    // kernel of (1 + xi^2/s^2)^{-1} decays like e^{-s|z|}
    let slow = residual_for(1.0).decay_ratio();
    let fast = residual_for(4.0).decay_ratio();
    assert!(slow < 0.5, "{slow}");
    assert!(fast <= 1e-3, "{fast}");
}

#[test]
fn zero_symbol_has_zero_residual() {
    let g = TorusGrid::new(1, 32).unwrap();
    let f = CompactFunction::from_fn(&SupportBox::cube(1, 2.0).unwrap(), g.spacing(), gaussian(0.3)).unwrap();
    let a0 = EuclideanSymbol::compact(SupportBox::cube(1, PI).unwrap(), |_, _| c(0.0, 0.0));
    let r = smoothing_residual(&a0, &f, &QuadratureSettings::default()).unwrap();
    assert_eq!(r.max, 0.0);
}

#[test]
fn split_symbol_reproduces_periodised_operator() {
    let g = TorusGrid::new(1, 64).unwrap();
    let f = CompactFunction::from_fn(&SupportBox::cube(1, PI).unwrap(), g.spacing(), gaussian(0.3)).unwrap();
    let a1 = EuclideanSymbol::periodic(1, |x, xi| c(0.0, (1.0 + 0.5 * x[0].sin()) * xi[0]));
    let a0 = EuclideanSymbol::compact(SupportBox::cube(1, PI).unwrap(), |x, xi| {
        c(cutoff(x[0], PI), 0.0) / japanese_bracket(xi).powi(2)
    });
    let r = verify_split(&a1, &a0, &f, g, &QuadratureSettings::default()).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn periodisation_is_onto_band_limited_data() {
    let g = TorusGrid::new(1, 64).unwrap();
    let theta = build_theta();
    let target = GridFunction::from_fn(g, |x| c((3.0 * x[0]).cos(), (x[0]).sin() * 0.5) + 0.25);
    let u = lift_to_compact(&target, &theta).unwrap();
    let back = periodise_function(&u, g, Resampling::AlignedOnly).unwrap();
    assert!(back.max_abs_diff(&target) < 1e-10, "{}", back.max_abs_diff(&target));
    let w = g.full_window();
    let a = forward_transform(&back, w).unwrap();
    let b = forward_transform(&target, w).unwrap();
    assert!(a.coeffs().iter().zip(b.coeffs()).all(|(p, q)| (p - q).norm() < 1e-10));
}

#[test]
fn two_dimensional_periodisation() {
    let g = TorusGrid::new(2, 16).unwrap();
    let u = CompactFunction::from_fn(&SupportBox::cube(2, 8.0).unwrap(), g.spacing(), gaussian(1.0)).unwrap();
    let pu = periodise_function(&u, g, Resampling::AlignedOnly).unwrap();
    let exact = GridFunction::from_fn(g, |x| {
        let mut s = c(0.0, 0.0);
        for k in -2..=2 {
            for l in -2..=2 {
                s += gaussian(1.0)(&[x[0] + 2.0 * PI * k as f64, x[1] + 2.0 * PI * l as f64]);
            }
        }
        s
    });
    assert!(pu.max_abs_diff(&exact) < 1e-12);
}
