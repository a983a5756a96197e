//! Quantization of symbols and amplitudes on the torus, symbol
//! extraction, amplitude-to-symbol reduction, operator matrices,
//! kernels and L2 bounds.

mod matrix;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diffcalc::{binom, falling_factorial_f64, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::grid::{bin_frequency, bin_spectrum, forward_transform, FftNd, FrequencyWindow, GridFunction, TorusGrid};
use crate::numerics::unravel;
use crate::symbols::{SymbolTable, ToroidalSymbol, TorusAmplitude};

pub use matrix::{
    operator_norm, operator_norm_with, schur_bound, BoundReport, NormEstimate, OperatorMatrix, MAX_MATRIX_ENTRIES,
    NORM_MAX_ITERATIONS, NORM_TOLERANCE,
};
pub(crate) use matrix::full_column;

fn phase(x: &[f64], xi: &[i64]) -> Complex64 {
    let t: f64 = x.iter().zip(xi).map(|(a, &b)| a * b as f64).sum();
    Complex64::from_polar(1.0, t)
}

/// (Af)(x) = sum_{xi in window} sigma(x, xi) f^(xi) e^{i x . xi}.
pub fn apply_symbol_op(sigma: &ToroidalSymbol, f: &GridFunction, window: FrequencyWindow) -> Result<GridFunction> {
    let grid = f.grid();
    check_dim(sigma.dim(), grid.dim())?;
    sigma.require(&window.lattice_box())?;
    let spec = forward_transform(f, window)?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            freqs
                .iter()
                .zip(spec.coeffs())
                .filter(|(_, c)| c.norm_sqr() != 0.0)
                .map(|(xi, c)| sigma.eval(&x, xi) * c * phase(&x, xi))
                .sum()
        })
        .collect();
    GridFunction::new(grid, values)
}

/// sigma_A(x, xi) = e^{-i x . xi} (A e_xi)(x), tabulated on grid x window.
pub fn symbol_of_operator(
    op: impl Fn(&GridFunction) -> Result<GridFunction> + Sync,
    grid: TorusGrid,
    window: FrequencyWindow,
) -> Result<ToroidalSymbol> {
    window.check_grid(&grid)?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let columns = freqs
        .par_iter()
        .map(|xi| {
            let image = op(&GridFunction::exponential(grid, xi))?;
            if image.grid() != grid {
                return Err(Error::InvalidGrid("operator changed the grid".into()));
            }
            Ok((0..grid.len()).map(|i| image.values()[i] * phase(&grid.node(i), xi).conj()).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len() * window.len()];
    for (w, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[i * window.len() + w] = *v;
        }
    }
    Ok(ToroidalSymbol::from_table(SymbolTable::new(grid, window, values)?, Default::default()))
}

/// (Op(a)f)(x) = N^{-n} sum_y sum_{xi in window} a(x, y, xi) e^{i(x - y) . xi} f(y).
pub fn apply_amplitude_op(a: &TorusAmplitude, f: &GridFunction, window: FrequencyWindow) -> Result<GridFunction> {
    let grid = f.grid();
    check_dim(a.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    a.require(&window.lattice_box())?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    // f(y) e^{-i y . xi}, one row per frequency.
    let modulated: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|xi| nodes.iter().zip(f.values()).map(|(y, v)| v * phase(y, xi).conj()).collect())
        .collect();
    let scale = 1.0 / grid.len() as f64;
    let values: Vec<Complex64> = nodes
        .par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (xi, row) in freqs.iter().zip(&modulated) {
                let inner: Complex64 = nodes.iter().zip(row).map(|(y, g)| a.eval(x, y, xi) * g).sum();
                acc += inner * phase(x, xi);
            }
            acc * scale
        })
        .collect();
    GridFunction::new(grid, values)
}

/// a_alpha(x, y, xi) = prod_j (e^{i(y_j - x_j)} - 1)^{alpha_j} a(x, y, xi).
pub fn build_a_alpha(a: &TorusAmplitude, alpha: &MultiIndex) -> TorusAmplitude {
    let inner = a.clone();
    let alpha = alpha.clone();
    let out = TorusAmplitude::new(a.dim(), a.order(), move |x, y, xi| {
        let mut factor = Complex64::new(1.0, 0.0);
        for ((&xj, &yj), &k) in x.iter().zip(y).zip(alpha.entries()) {
            if k > 0 {
                factor *= (Complex64::from_polar(1.0, yj - xj) - 1.0).powu(k);
            }
        }
        factor * inner.eval(x, y, xi)
    });
    match a.domain() {
        Some(d) => out.with_domain(d.clone()),
        None => out,
    }
}

/// Forward difference Delta_xi^alpha a(x, y, xi).
pub fn difference_amplitude(a: &TorusAmplitude, alpha: &MultiIndex) -> TorusAmplitude {
    let inner = a.clone();
    let terms = difference_terms(alpha);
    let out = TorusAmplitude::new(a.dim(), a.order(), move |x, y, xi| {
        let mut p = xi.to_vec();
        terms
            .iter()
            .map(|(beta, w)| {
                for k in 0..xi.len() {
                    p[k] = xi[k] + beta[k];
                }
                inner.eval(x, y, &p) * *w
            })
            .sum()
    });
    match a.domain() {
        Some(d) => {
            let shrink: Vec<i64> = alpha.entries().iter().map(|&k| -(k as i64)).collect();
            let hi: Vec<i64> = d.hi().iter().zip(&shrink).map(|(h, s)| h + s).collect();
            match crate::diffcalc::LatticeBox::new(d.lo().to_vec(), hi) {
                Ok(b) => out.with_domain(b),
                Err(_) => out,
            }
        }
        None => out,
    }
}

/// (beta, (-1)^{|alpha - beta|} C(alpha, beta)) for beta <= alpha.
pub(crate) fn difference_terms(alpha: &MultiIndex) -> Vec<(Vec<i64>, f64)> {
    alpha
        .below()
        .into_iter()
        .map(|beta| {
            let c: f64 = alpha
                .entries()
                .iter()
                .zip(beta.entries())
                .map(|(&a, &b)| binom(a as u64, b as u64) as f64)
                .product();
            let sign = if (alpha.order() - beta.order()) % 2 == 1 { -1.0 } else { 1.0 };
            (beta.entries().iter().map(|&b| b as i64).collect(), sign * c)
        })
        .collect()
}

/// sigma_M(x, xi) = sum_{|alpha| < M} (1/alpha!) Delta_xi^alpha D_y^{(alpha)} a(x, y, xi)|_{y=x}
/// with D_y^{(alpha)} = prod_j prod_{l < alpha_j} (D_{y_j} - l), D = -i d.
/// Tabulated on grid x window; a must be evaluable on the window inflated by M - 1.
pub fn amplitude_to_symbol(a: &TorusAmplitude, order: u32, grid: TorusGrid, window: FrequencyWindow) -> Result<ToroidalSymbol> {
    check_dim(a.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    if order == 0 {
        return Err(Error::InvalidArgument("truncation order M must be at least 1".into()));
    }
    let n = grid.dim();
    let reach = vec![order as i64 - 1; n];
    let inflated = window.lattice_box().extend_hi(&reach);
    a.require(&inflated)?;
    let alphas = MultiIndex::below_order(n, order);
    let inv_fact: Vec<f64> = alphas.iter().map(|al| al.factorial().map(|f| 1.0 / f as f64)).collect::<Result<_>>()?;
    let terms: Vec<Vec<(Vec<i64>, f64)>> = alphas.iter().map(difference_terms).collect();
    let points = grid.points();
    let bins: Vec<Vec<i64>> = (0..grid.len())
        .map(|b| {
            let mut idx = vec![0usize; n];
            unravel(b, points, n, &mut idx);
            idx.iter().map(|&k| bin_frequency(k, points)).collect()
        })
        .collect();
    // eta^{(alpha)} per bin.
    let weights: Vec<Vec<f64>> = alphas
        .iter()
        .map(|al| bins.iter().map(|eta| falling_factorial_f64(eta, al)).collect())
        .collect();
    let plan = FftNd::new(&grid);
    let inflated_points: Vec<Vec<i64>> = inflated.points().collect();
    let wlen = window.len();
    let freqs: Vec<Vec<i64>> = window.iter().collect();

    let rows: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let phases: Vec<Complex64> = bins.iter().map(|eta| phase(&x, eta)).collect();
            // t[alpha][xi'] = D_y^{(alpha)} a(x, ., xi')(x)
            let mut t = vec![vec![Complex64::new(0.0, 0.0); inflated_points.len()]; alphas.len()];
            for (p, xi) in inflated_points.iter().enumerate() {
                let g = GridFunction::from_fn(grid, |y| a.eval(&x, y, xi));
                let spec = bin_spectrum(&g, &plan);
                for (ai, w) in weights.iter().enumerate() {
                    t[ai][p] = spec.iter().zip(w).zip(&phases).map(|((s, &wt), e)| s * e * wt).sum();
                }
            }
            let mut q = vec![0i64; n];
            freqs
                .iter()
                .map(|xi| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (ai, ts) in terms.iter().enumerate() {
                        let mut d = Complex64::new(0.0, 0.0);
                        for (beta, w) in ts {
                            for k in 0..n {
                                q[k] = xi[k] + beta[k];
                            }
                            let p = inflated.index_of(&q).expect("stencil inside inflated window");
                            d += t[ai][p] * *w;
                        }
                        acc += d * inv_fact[ai];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len() * wlen);
    for r in rows {
        values.extend(r);
    }
    Ok(ToroidalSymbol::from_table(SymbolTable::new(grid, window, values)?, a.order()))
}

/// M(omega, xi) = (sigma(., xi) e_xi)^(omega), rows on the full grid window.
pub fn operator_matrix(sigma: &ToroidalSymbol, grid: TorusGrid, window: FrequencyWindow) -> Result<OperatorMatrix> {
    check_dim(sigma.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    sigma.require(&window.lattice_box())?;
    let rows = grid.full_window();
    OperatorMatrix::check_size(rows.len(), window.len())?;
    let plan = FftNd::new(&grid);
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let columns: Vec<Vec<Complex64>> = freqs
        .par_iter()
        .map(|xi| {
            let col = GridFunction::from_fn(grid, |x| sigma.eval(x, xi) * phase(x, xi));
            full_column(&col, &plan, rows)
        })
        .collect();
    OperatorMatrix::from_columns(rows, window, &columns)
}

/// Matrix of Op(a) on inputs with spectrum in `window`; the xi-sum of the
/// quantization runs over the full grid window.
pub fn amplitude_matrix(a: &TorusAmplitude, grid: TorusGrid, window: FrequencyWindow) -> Result<OperatorMatrix> {
    check_dim(a.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    let full = grid.full_window();
    a.require(&full.lattice_box())?;
    OperatorMatrix::check_size(full.len(), window.len())?;
    let plan = FftNd::new(&grid);
    let points = grid.points();
    let zetas: Vec<Vec<i64>> = full.iter().collect();
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    // images[x][xi] = (Op(a) e_xi)(x) = sum_zeta e^{i x zeta} a^_y(x, zeta - xi; zeta)
    let images: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let spectra: Vec<Vec<Complex64>> = zetas
                .iter()
                .map(|z| bin_spectrum(&GridFunction::from_fn(grid, |y| a.eval(&x, y, z)), &plan))
                .collect();
            let mut diff = vec![0i64; x.len()];
            freqs
                .iter()
                .map(|xi| {
                    zetas
                        .iter()
                        .zip(&spectra)
                        .map(|(z, s)| {
                            for k in 0..diff.len() {
                                diff[k] = z[k] - xi[k];
                            }
                            s[crate::grid::bin_index(&diff, points)] * phase(&x, z)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    let columns: Vec<Vec<Complex64>> = (0..freqs.len())
        .into_par_iter()
        .map(|c| {
            let g = GridFunction::from_fn_indexed(grid, |i| images[i][c]);
            full_column(&g, &plan, full)
        })
        .collect();
    OperatorMatrix::from_columns(full, window, &columns)
}

/// Schur-test bound for Op(sigma) on the window; dominates the L2 norm.
pub fn l2_bound_estimate(sigma: &ToroidalSymbol, grid: TorusGrid, window: FrequencyWindow) -> Result<f64> {
    Ok(schur_bound(&operator_matrix(sigma, grid, window)?))
}

/// Bound and power-iteration norm of Op(sigma) on one window.
pub fn bound_report(sigma: &ToroidalSymbol, grid: TorusGrid, window: FrequencyWindow) -> Result<BoundReport> {
    let m = operator_matrix(sigma, grid, window)?;
    let norm = operator_norm(&m);
    Ok(BoundReport { bound: schur_bound(&m), empirical_norm: norm.value, converged: norm.converged, window })
}

/// Band-limited kernel K(x, y) = sum_{xi in window} sigma(x, xi) e^{i(x - y) . xi}
/// sampled on grid x grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl Kernel {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn get(&self, x_index: usize, y_index: usize) -> Complex64 {
        self.values[x_index * self.grid.len() + y_index]
    }

    /// N^{-n} sum_y K(x, y) f(y).
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != self.grid {
            return Err(Error::InvalidGrid("kernel and function grids differ".into()));
        }
        let len = self.grid.len();
        let scale = 1.0 / len as f64;
        let values = self
            .values
            .par_chunks(len)
            .map(|row| row.iter().zip(f.values()).map(|(k, v)| k * v).sum::<Complex64>() * scale)
            .collect();
        GridFunction::new(self.grid, values)
    }
}

pub fn kernel_from_symbol(sigma: &ToroidalSymbol, grid: TorusGrid, window: FrequencyWindow) -> Result<Kernel> {
    check_dim(sigma.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    sigma.require(&window.lattice_box())?;
    let len = grid.len();
    OperatorMatrix::check_size(len, len)?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let nodes: Vec<Vec<f64>> = (0..len).map(|i| grid.node(i)).collect();
    let values: Vec<Complex64> = nodes
        .par_iter()
        .flat_map_iter(|x| {
            let sym: Vec<Complex64> = freqs.iter().map(|xi| sigma.eval(x, xi) * phase(x, xi)).collect();
            let freqs = &freqs;
            nodes.iter().map(move |y| freqs.iter().zip(&sym).map(|(xi, s)| s * phase(y, xi).conj()).sum())
        })
        .collect();
    Ok(Kernel { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::spectral_derivative;
    use crate::symbols::SymbolOrder;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn derivative_symbol() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 8).unwrap();
        let d = ToroidalSymbol::multiplier(1, SymbolOrder::with_m(1.0), |xi| c(0.0, xi[0] as f64));
        let f = GridFunction::exponential(g, &[1]);
        let out = apply_symbol_op(&d, &f, w).unwrap();
        assert!(out.max_abs_diff(&f.map(|v| v * c(0.0, 1.0))) < 1e-13);
        let s = symbol_of_operator(|u| spectral_derivative(u, &MultiIndex::new(vec![1])), g, w).unwrap();
        for xi in -7..8 {
            assert!((s.eval(&[0.3], &[xi]) - c(0.0, xi as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn modulation_shifts() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 4).unwrap();
        let s = ToroidalSymbol::new(1, SymbolOrder::default(), |x, _| Complex64::from_polar(1.0, x[0]));
        let out = apply_symbol_op(&s, &GridFunction::exponential(g, &[2]), w).unwrap();
        assert!(out.max_abs_diff(&GridFunction::exponential(g, &[3])) < 1e-13);
        let m = operator_matrix(&s, g, w).unwrap();
        assert!((m.at(&[3], &[2]) - 1.0).norm() < 1e-14);
        assert!(m.at(&[2], &[2]).norm() < 1e-14);
        assert!((operator_norm(&m).value - 1.0).abs() < 1e-12);
        assert!((schur_bound(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_in_y_multiplies() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 8).unwrap();
        let a = TorusAmplitude::new(1, SymbolOrder::default(), |_, y, _| c(2.0 + y[0].cos(), 0.0));
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * x[0]) + 0.5);
        let out = apply_amplitude_op(&a, &f, w).unwrap();
        let expect = GridFunction::from_fn(g, |x| (2.0 + x[0].cos()) * (Complex64::from_polar(1.0, 2.0 * x[0]) + 0.5));
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn y_independent_amplitude_reduces_exactly() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 6).unwrap();
        let a = TorusAmplitude::new(1, SymbolOrder::default(), |x, _, xi| c(x[0].sin(), 1.0 / (1.0 + xi[0].abs() as f64)));
        for m in 1..4 {
            let s = amplitude_to_symbol(&a, m, g, w).unwrap();
            for xi in w.iter() {
                let x = g.node(5);
                assert!((s.eval(&x, &xi) - a.eval(&x, &x, &xi)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn kernel_of_identity_is_dirichlet() {
        let g = TorusGrid::new(1, 8).unwrap();
        let w = FrequencyWindow::symmetric(1, 2).unwrap();
        let one = ToroidalSymbol::multiplier(1, SymbolOrder::default(), |_| c(1.0, 0.0));
        let k = kernel_from_symbol(&one, g, w).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let t = g.node(i)[0] - g.node(j)[0];
                let dirichlet = (-2..=2).map(|m| (m as f64 * t).cos()).sum::<f64>();
                assert!((k.get(i, j) - dirichlet).norm() < 1e-12);
            }
        }
    }
}
