use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpdo_core::diffcalc::MultiIndex;
use tpdo_core::grid::{forward_transform, FrequencyWindow, GridFunction, SpectralFunction, inverse_transform, TorusGrid};
use tpdo_core::quantize::*;
use tpdo_core::symbols::{japanese_bracket, SymbolOrder, SymbolTable, ToroidalSymbol, TorusAmplitude};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bracket_inv(xi: &[i64]) -> f64 {
    let v: Vec<f64> = xi.iter().map(|&k| k as f64).collect();
    1.0 / japanese_bracket(&v)
}

fn random_band_limited(grid: TorusGrid, band: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let w = FrequencyWindow::symmetric(grid.dim(), band).unwrap();
    let coeffs = (0..w.len()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    inverse_transform(&SpectralFunction::new(w, coeffs).unwrap(), grid).unwrap()
}

fn random_table(grid: TorusGrid, window: FrequencyWindow, rng: &mut ChaCha8Rng) -> ToroidalSymbol {
    let values = (0..grid.len() * window.len())
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ToroidalSymbol::from_table(SymbolTable::new(grid, window, values).unwrap(), SymbolOrder::default())
}

#[test]
fn quantization_round_trip_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = TorusGrid::new(1, 16).unwrap();
    let w = FrequencyWindow::new(1, 8).unwrap();
    let s0 = random_table(g, w, &mut rng);
    let s1 = symbol_of_operator(|f| apply_symbol_op(&s0, f, w), g, w).unwrap();
    let worst = s0.table().unwrap().values().iter().zip(s1.table().unwrap().values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn matrix_matches_application_and_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = TorusGrid::new(2, 8).unwrap();
    let w = FrequencyWindow::new(2, 4).unwrap();
    let s = random_table(g, w, &mut rng);
    let m = operator_matrix(&s, g, w).unwrap();
    let f = random_band_limited(g, 3, &mut rng);
    let direct = apply_symbol_op(&s, &f, w).unwrap();
    let via_matrix = inverse_transform(&m.apply(&forward_transform(&f, w).unwrap()).unwrap(), g).unwrap();
    assert!(direct.max_abs_diff(&via_matrix) < 1e-12);
    let k = kernel_from_symbol(&s, g, w).unwrap();
    assert!(k.apply(&f).unwrap().max_abs_diff(&direct) < 1e-10);
}

#[test]
fn translation_invariant_kernel() {
    let g = TorusGrid::new(1, 8).unwrap();
    let w = FrequencyWindow::new(1, 4).unwrap();
    let s = ToroidalSymbol::multiplier(1, SymbolOrder::with_m(-1.0), |xi| c(bracket_inv(xi), 0.0));
    let k = kernel_from_symbol(&s, g, w).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            assert!((k.get(i, j) - k.get((i + 1) % 8, (j + 1) % 8)).norm() < 1e-12);
        }
    }
}

#[test]
fn norm_never_exceeds_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = TorusGrid::new(1, 32).unwrap();
    let w = FrequencyWindow::new(1, 16).unwrap();
    for _ in 0..10 {
        let s = random_table(g, w, &mut rng);
        let r = bound_report(&s, g, w).unwrap();
        assert!(r.converged);
        assert!(r.holds(), "{r:?}");
        for _ in 0..3 {
            let f = random_band_limited(g, 8, &mut rng);
            let af = apply_symbol_op(&s, &f, w).unwrap();
            assert!(af.l2_norm() <= r.bound * f.l2_norm() * (1.0 + 1e-12));
        }
    }
    let cosine = ToroidalSymbol::new(1, SymbolOrder::default(), |x, _| c(2.0 + x[0].cos(), 0.0));
    let r = bound_report(&cosine, g, w).unwrap();
    assert!(r.bound >= 3.0 - 1e-12 && r.empirical_norm <= r.bound, "{r:?}");
    assert!(r.empirical_norm > 2.9, "{r:?}");
}

#[test]
fn multiplier_norm_is_sup() {
    let g = TorusGrid::new(1, 32).unwrap();
    let w = FrequencyWindow::new(1, 16).unwrap();
    let s = ToroidalSymbol::multiplier(1, SymbolOrder::with_m(-1.0), |xi| c(bracket_inv(xi), 0.0));
    let r = bound_report(&s, g, w).unwrap();
    assert!((r.empirical_norm - 1.0).abs() < 1e-10);
    assert!((r.bound - 1.0).abs() < 1e-10);
}

#[test]
fn power_iteration_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let w = FrequencyWindow::new(1, 10).unwrap();
    let entries: Vec<Complex64> = (0..400).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let m = OperatorMatrix::new(w, w, entries.clone()).unwrap();
    let est = operator_norm(&m);
    let dense = nalgebra::DMatrix::from_row_slice(20, 20, &entries);
    let svd = dense.singular_values();
    let top = svd.iter().cloned().fold(0.0, f64::max);
    assert!(est.converged);
    assert!((est.value - top).abs() < 1e-6 * top, "{} vs {top}", est.value);
}

#[test]
fn a_alpha_operator_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let g = TorusGrid::new(1, 32).unwrap();
    let w = FrequencyWindow::new(1, 8).unwrap();
    let a = TorusAmplitude::new(1, SymbolOrder::with_m(-1.0), |x, y, xi| {
        c(1.0 + 0.3 * x[0].sin(), 0.2 * (2.0 * y[0]).cos()) * bracket_inv(xi)
    });
    let f = random_band_limited(g, 2, &mut rng);
    for k in 0..=2u32 {
        let alpha = MultiIndex::new(vec![k]);
        let lhs = apply_amplitude_op(&build_a_alpha(&a, &alpha), &f, w).unwrap();
        let rhs = apply_amplitude_op(&difference_amplitude(&a, &alpha), &f, w).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10, "alpha={k}: {}", lhs.max_abs_diff(&rhs));
    }
}

#[test]
fn a_alpha_operator_identity_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let g = TorusGrid::new(2, 12).unwrap();
    let w = FrequencyWindow::new(2, 5).unwrap();
    let a = TorusAmplitude::new(2, SymbolOrder::with_m(-1.0), |x, y, xi| {
        c(1.0 + 0.3 * x[1].sin(), 0.2 * (y[0] - y[1]).cos()) * bracket_inv(xi)
    });
    let f = random_band_limited(g, 1, &mut rng);
    for alpha in MultiIndex::below_order(2, 3) {
        let lhs = apply_amplitude_op(&build_a_alpha(&a, &alpha), &f, w).unwrap();
        let rhs = apply_amplitude_op(&difference_amplitude(&a, &alpha), &f, w).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10, "alpha={alpha}");
    }
}

#[test]
fn y_multiplication_symbol_matches_exact_operator() {
    let g = TorusGrid::new(1, 32).unwrap();
    let w = FrequencyWindow::new(1, 8).unwrap();
    let a = TorusAmplitude::new(1, SymbolOrder::default(), |_, y, _| c(2.0 + y[0].cos(), (2.0 * y[0]).sin()));
    let s = amplitude_to_symbol(&a, 4, g, w).unwrap();
    let exact = symbol_of_operator(
        |f| Ok(f.zip_with(&GridFunction::from_fn(g, |y| c(2.0 + y[0].cos(), (2.0 * y[0]).sin())), |u, v| u * v).unwrap()),
        g,
        w,
    )
    .unwrap();
    let ms = operator_matrix(&s, g, w).unwrap();
    let me = operator_matrix(&exact, g, w).unwrap();
    assert!(ms.max_abs_diff(&me).unwrap() < 1e-8);
}

pub fn outer_discrepancy(a: &TorusAmplitude, m: u32, g: TorusGrid, w: FrequencyWindow) -> f64 {
    let exact = amplitude_matrix(a, g, w).unwrap();
    let approx = operator_matrix(&amplitude_to_symbol(a, m, g, w).unwrap(), g, w).unwrap();
    let k = w.cutoff() as f64;
    w.iter()
        .enumerate()
        .filter(|(_, xi)| xi.iter().map(|v| v.abs()).max().unwrap() as f64 > 2.0 * k / 3.0)
        .map(|(col, _)| exact.column_diff(&approx, col).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn amplitude_reduction_improves_with_order() {
    let g = TorusGrid::new(1, 64).unwrap();
    let w = FrequencyWindow::new(1, 16).unwrap();
    let suite = [
        TorusAmplitude::new(1, SymbolOrder::with_m(-1.0), |_, y, xi| Complex64::from_polar(1.0, -y[0]) * bracket_inv(xi)),
        TorusAmplitude::new(1, SymbolOrder::with_m(-1.0), |_, y, xi| c(2.0 + y[0].cos(), 0.0) * bracket_inv(xi)),
        TorusAmplitude::new(1, SymbolOrder::with_m(-1.0), |_, y, xi| Complex64::from_polar(1.0, y[0]) * bracket_inv(xi)),
    ];
    for a in &suite {
        let d: Vec<f64> = (1..=3).map(|m| outer_discrepancy(a, m, g, w)).collect();
        assert!(d[1] < d[0] && (d[2] < d[1] || d[2] < 1e-12), "{d:?}");
    }
}
