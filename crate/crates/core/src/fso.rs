//! Fourier series operators
//! Tu(x) = sum_xi e^{i phi(x, xi)} N^{-n} sum_y e^{-i y . xi} a(x, y, xi) u(y),
//! their L2 conditions, and compositions with pseudodifferential operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcalc::{falling_factorial_f64, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::grid::{
    bin_frequency, bin_spectrum, spectral_derivative, FftNd, FrequencyWindow, GridFunction, TorusGrid,
};
use crate::numerics::{central_stencil, cis, unravel};
use crate::quantize::{
    apply_symbol_op, difference_terms, full_column, operator_norm, NormEstimate, OperatorMatrix,
};
use crate::symbols::{ExtendedSymbol, SymbolOrder, ToroidalSymbol, TorusAmplitude};

const TWO_PI: f64 = 2.0 * PI;
/// Dense amplitude tables grid x grid x window are capped at this many entries.
pub const MAX_AMPLITUDE_ENTRIES: usize = 20_000_000;
const GRADIENT_STEP: f64 = 1e-3;
/// Extension tails above this flag a PT expansion.
pub const PT_TAIL_TOLERANCE: f64 = 1e-8;

type PhaseRule = dyn Fn(&[f64], &[i64]) -> f64 + Send + Sync;
type GradientRule = dyn Fn(&[f64], &[i64]) -> Vec<f64> + Send + Sync;

/// Real phase phi(x, xi) on R^n x Z^n with e^{i phi} 2 pi-periodic in x.
///
/// phi(x, xi) - x . d(xi) must be periodic in x, where the drift d is read
/// off the rule as (phi(x + 2 pi e_j) - phi(x)) / 2 pi.
#[derive(Clone)]
pub struct PhaseFunction {
    dim: usize,
    rule: Arc<PhaseRule>,
    gradient: Option<Arc<GradientRule>>,
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseFunction")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl PhaseFunction {
    pub fn new(dim: usize, rule: impl Fn(&[f64], &[i64]) -> f64 + Send + Sync + 'static) -> Self {
        PhaseFunction { dim, rule: Arc::new(rule), gradient: None }
    }

    /// phi(x, xi) = x . xi.
    pub fn linear(dim: usize) -> Self {
        Self::new(dim, |x, xi| x.iter().zip(xi).map(|(a, &b)| a * b as f64).sum()).with_gradient(|_, xi| {
            xi.iter().map(|&k| k as f64).collect()
        })
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64], &[i64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[i64]) -> f64 {
        (self.rule)(x, xi)
    }

    /// d_j(xi) = (phi(2 pi e_j, xi) - phi(0, xi)) / 2 pi.
    pub fn drift(&self, xi: &[i64]) -> Vec<f64> {
        let origin = vec![0.0; self.dim];
        let base = self.eval(&origin, xi);
        (0..self.dim)
            .map(|j| {
                let mut e = origin.clone();
                e[j] = TWO_PI;
                (self.eval(&e, xi) - base) / TWO_PI
            })
            .collect()
    }

    /// phi(., xi) - x . d(xi) on the grid.
    pub fn periodic_part(&self, grid: TorusGrid, xi: &[i64]) -> GridFunction {
        let d = self.drift(xi);
        GridFunction::from_fn(grid, |x| {
            Complex64::new(self.eval(x, xi) - x.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>(), 0.0)
        })
    }

    /// grad_x phi at every grid node: the analytic rule if supplied, else
    /// drift plus the spectral gradient of the periodic part.
    pub fn gradient_on(&self, grid: TorusGrid, xi: &[i64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim, grid.dim())?;
        if let Some(g) = &self.gradient {
            return Ok((0..grid.len()).map(|i| g(&grid.node(i), xi)).collect());
        }
        self.spectral_gradient_on(grid, xi)
    }

    pub fn spectral_gradient_on(&self, grid: TorusGrid, xi: &[i64]) -> Result<Vec<Vec<f64>>> {
        let d = self.drift(xi);
        let periodic = self.periodic_part(grid, xi);
        let parts: Vec<GridFunction> = (0..self.dim)
            .map(|j| spectral_derivative(&periodic, &MultiIndex::unit(self.dim, j)))
            .collect::<Result<_>>()?;
        Ok((0..grid.len()).map(|i| (0..self.dim).map(|j| d[j] + parts[j].values()[i].re).collect()).collect())
    }

    /// grad_x phi at one point: analytic, else fourth-order central differences.
    pub fn gradient_at(&self, x: &[f64], xi: &[i64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(x, xi);
        }
        let (offsets, weights) = central_stencil(1, 4);
        let mut p = x.to_vec();
        (0..self.dim)
            .map(|j| {
                let mut acc = 0.0;
                for (o, w) in offsets.iter().zip(&weights) {
                    p[j] = x[j] + *o as f64 * GRADIENT_STEP;
                    acc += w * self.eval(&p, xi);
                }
                p[j] = x[j];
                acc / GRADIENT_STEP
            })
            .collect()
    }

    /// Delta_xi^beta phi(x, xi).
    pub fn difference(&self, x: &[f64], xi: &[i64], beta: &MultiIndex) -> f64 {
        let mut p = xi.to_vec();
        difference_terms(beta)
            .iter()
            .map(|(b, w)| {
                for k in 0..xi.len() {
                    p[k] = xi[k] + b[k];
                }
                w * self.eval(x, &p)
            })
            .sum()
    }

    /// max |analytic - spectral gradient| over grid x window; None without
    /// an analytic gradient.
    pub fn gradient_consistency(&self, grid: TorusGrid, window: FrequencyWindow) -> Result<Option<f64>> {
        if self.gradient.is_none() {
            return Ok(None);
        }
        let mut worst = 0.0f64;
        for xi in window.iter() {
            let a = self.gradient_on(grid, &xi)?;
            let s = self.spectral_gradient_on(grid, &xi)?;
            for (u, v) in a.iter().zip(&s) {
                for (p, q) in u.iter().zip(v) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
        Ok(Some(worst))
    }
}

/// Psi(x, y, xi) = phi(y, xi) - phi(x, xi) + (x - y) . grad_x phi(x, xi).
pub fn psi_correction(phi: &PhaseFunction, x: &[f64], y: &[f64], xi: &[i64]) -> f64 {
    let g = phi.gradient_at(x, xi);
    phi.eval(y, xi) - phi.eval(x, xi) + x.iter().zip(y).zip(&g).map(|((a, b), c)| (a - b) * c).sum::<f64>()
}

/// Tu on the grid, with the xi-sum over `window`.
pub fn apply_fso(phi: &PhaseFunction, a: &TorusAmplitude, u: &GridFunction, window: FrequencyWindow) -> Result<GridFunction> {
    let grid = u.grid();
    check_dim(phi.dim(), grid.dim())?;
    check_dim(a.dim(), grid.dim())?;
    window.check_grid(&grid)?;
    a.require(&window.lattice_box())?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let modulated: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|xi| nodes.iter().zip(u.values()).map(|(y, v)| v * cis(-dot(y, xi))).collect())
        .collect();
    let scale = 1.0 / grid.len() as f64;
    let values: Vec<Complex64> = nodes
        .par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (xi, row) in freqs.iter().zip(&modulated) {
                let inner: Complex64 = nodes.iter().zip(row).map(|(y, g)| a.eval(x, y, xi) * g).sum();
                acc += inner * cis(phi.eval(x, xi));
            }
            acc * scale
        })
        .collect();
    GridFunction::new(grid, values)
}

fn dot(x: &[f64], xi: &[i64]) -> f64 {
    x.iter().zip(xi).map(|(a, &b)| a * b as f64).sum()
}

/// Matrix of T on inputs with spectrum in `input`; rows on the full grid window.
pub fn fso_matrix(
    phi: &PhaseFunction,
    a: &TorusAmplitude,
    grid: TorusGrid,
    window: FrequencyWindow,
    input: FrequencyWindow,
) -> Result<OperatorMatrix> {
    input.check_grid(&grid)?;
    let rows = grid.full_window();
    OperatorMatrix::check_size(rows.len(), input.len())?;
    let plan = FftNd::new(&grid);
    let freqs: Vec<Vec<i64>> = input.iter().collect();
    let columns = freqs
        .iter()
        .map(|zeta| Ok(full_column(&apply_fso(phi, a, &GridFunction::exponential(grid, zeta), window)?, &plan, rows)))
        .collect::<Result<Vec<_>>>()?;
    OperatorMatrix::from_columns(rows, input, &columns)
}

/// Power-iteration norm of T restricted to `window` (inputs and xi-sum).
pub fn fso_norm_probe(phi: &PhaseFunction, a: &TorusAmplitude, grid: TorusGrid, window: FrequencyWindow) -> Result<NormEstimate> {
    Ok(operator_norm(&fso_matrix(phi, a, grid, window, window)?))
}

/// One row of the L2 condition table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub alpha: MultiIndex,
    /// sup |d_x^alpha a(x, k)|
    pub amplitude: f64,
    /// max_j sup |d_x^alpha Delta_{k_j} phi(x, k)|
    pub phase: f64,
}

/// Measured constants of the L2 boundedness conditions on grid x window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsoConditionsReport {
    pub alpha_cap: u32,
    pub threshold: f64,
    pub table: Vec<ConditionEntry>,
    /// min over x and k != l of |grad phi(x, k) - grad phi(x, l)| / |k - l|.
    pub c_graph: f64,
    /// Number of sampled (k, l) pairs whose ratio is below 1e-12.
    pub degenerate_pairs: usize,
    /// A few degenerate pairs, for inspection.
    pub degenerate_examples: Vec<(Vec<i64>, Vec<i64>)>,
    pub bounded: bool,
    pub pass: bool,
}

const DEGENERATE_RATIO: f64 = 1e-12;

/// Conditions for Tu(x) = sum_k e^{i phi(x, k)} a(x, k) u^(k) with
/// |alpha| <= alpha_cap (default 2n + 1).
pub fn check_fso_l2_conditions(
    phi: &PhaseFunction,
    a: &ToroidalSymbol,
    grid: TorusGrid,
    window: FrequencyWindow,
    alpha_cap: Option<u32>,
    threshold: f64,
) -> Result<FsoConditionsReport> {
    let n = grid.dim();
    check_dim(phi.dim(), n)?;
    check_dim(a.dim(), n)?;
    window.check_grid(&grid)?;
    a.require(&window.lattice_box())?;
    let cap = alpha_cap.unwrap_or(2 * n as u32 + 1);
    let alphas = MultiIndex::below_order(n, cap + 1);
    let freqs: Vec<Vec<i64>> = window.iter().collect();

    let per_freq: Vec<Vec<(f64, f64)>> = freqs
        .par_iter()
        .map(|k| {
            let amp = GridFunction::from_fn(grid, |x| a.eval(x, k));
            // Delta_{k_j} phi = x . (d(k + e_j) - d(k)) + periodic remainder
            let diffs: Vec<(Vec<f64>, GridFunction)> = (0..n)
                .map(|j| {
                    let mut kj = k.clone();
                    kj[j] += 1;
                    let (d0, d1) = (phi.drift(k), phi.drift(&kj));
                    let slope: Vec<f64> = d1.iter().zip(&d0).map(|(p, q)| p - q).collect();
                    let g = GridFunction::from_fn(grid, |x| {
                        let lin: f64 = x.iter().zip(&slope).map(|(a, b)| a * b).sum();
                        Complex64::new(phi.eval(x, &kj) - phi.eval(x, k) - lin, 0.0)
                    });
                    (slope, g)
                })
                .collect();
            alphas
                .iter()
                .map(|alpha| {
                    let amp_sup = spectral_derivative(&amp, alpha).map(|g| g.max_abs()).unwrap_or(f64::INFINITY);
                    let phase_sup = diffs
                        .iter()
                        .map(|(slope, g)| {
                            let periodic = spectral_derivative(g, alpha).unwrap_or_else(|_| g.clone());
                            let mut worst = 0.0f64;
                            for i in 0..grid.len() {
                                let x = grid.node(i);
                                let lin = match alpha.order() {
                                    0 => x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>(),
                                    1 => slope[alpha.first_nonzero().unwrap_or(0)],
                                    _ => 0.0,
                                };
                                worst = worst.max((periodic.values()[i].re + lin).abs());
                            }
                            worst
                        })
                        .fold(0.0, f64::max);
                    (amp_sup, phase_sup)
                })
                .collect()
        })
        .collect();
    let table: Vec<ConditionEntry> = alphas
        .iter()
        .enumerate()
        .map(|(ai, alpha)| ConditionEntry {
            alpha: alpha.clone(),
            amplitude: per_freq.iter().map(|v| v[ai].0).fold(0.0, f64::max),
            phase: per_freq.iter().map(|v| v[ai].1).fold(0.0, f64::max),
        })
        .collect();

    let gradients: Vec<Vec<Vec<f64>>> = freqs.iter().map(|k| phi.gradient_on(grid, k)).collect::<Result<_>>()?;
    let mut c_graph = f64::INFINITY;
    let mut degenerate_pairs = 0;
    let mut degenerate_examples = vec![];
    for (p, k) in freqs.iter().enumerate() {
        for (q, l) in freqs.iter().enumerate().skip(p + 1) {
            let dist = k.iter().zip(l).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt();
            let mut ratio = f64::INFINITY;
            for i in 0..grid.len() {
                let gap = gradients[p][i]
                    .iter()
                    .zip(&gradients[q][i])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                ratio = ratio.min(gap / dist);
            }
            if ratio < DEGENERATE_RATIO {
                degenerate_pairs += 1;
                if degenerate_examples.len() < 8 {
                    degenerate_examples.push((k.clone(), l.clone()));
                }
            }
            c_graph = c_graph.min(ratio);
        }
    }
    if !c_graph.is_finite() {
        c_graph = 0.0;
    }
    let bounded = table.iter().all(|e| e.amplitude.is_finite() && e.phase.is_finite() && e.amplitude <= threshold && e.phase <= threshold);
    Ok(FsoConditionsReport {
        alpha_cap: cap,
        threshold,
        table,
        c_graph,
        degenerate_pairs,
        degenerate_examples,
        bounded,
        pass: bounded && c_graph > DEGENERATE_RATIO,
    })
}

/// Dense c(x, z, xi) on grid x grid x window.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedAmplitude {
    grid: TorusGrid,
    window: FrequencyWindow,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedAmplitudeJson {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "K")]
    cutoff: usize,
    values: Vec<[f64; 5]>,
}

fn check_amplitude_size(grid: TorusGrid, window: FrequencyWindow) -> Result<()> {
    window.check_grid(&grid)?;
    if grid.dim() == 2 && (window.cutoff() > 8 || grid.points() > 16) {
        return Err(Error::TooLarge("two-dimensional amplitude tables need K <= 8 and N <= 16".into()));
    }
    if grid.dim() > 2 {
        return Err(Error::TooLarge("amplitude tables support n <= 2".into()));
    }
    let entries = grid.len().saturating_mul(grid.len()).saturating_mul(window.len());
    if entries > MAX_AMPLITUDE_ENTRIES {
        return Err(Error::TooLarge(format!("{entries} amplitude entries")));
    }
    Ok(())
}

impl TabulatedAmplitude {
    pub fn new(grid: TorusGrid, window: FrequencyWindow, values: Vec<Complex64>) -> Result<Self> {
        check_amplitude_size(grid, window)?;
        let len = grid.len() * grid.len() * window.len();
        if values.len() != len {
            return Err(Error::InvalidArgument(format!("{} amplitude values, expected {len}", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("amplitude value".into()));
        }
        Ok(TabulatedAmplitude { grid, window, values })
    }

    /// Tabulate f(x_index, z_index, xi) over grid x grid x window.
    pub fn from_fn(
        grid: TorusGrid,
        window: FrequencyWindow,
        f: impl Fn(usize, usize, &[i64]) -> Complex64 + Sync,
    ) -> Result<Self> {
        check_amplitude_size(grid, window)?;
        let freqs: Vec<Vec<i64>> = window.iter().collect();
        let len = grid.len();
        let values = (0..len * len)
            .into_par_iter()
            .flat_map_iter(|xz| {
                let (x, z) = (xz / len, xz % len);
                freqs.iter().map(move |xi| (x, z, xi))
            })
            .map(|(x, z, xi)| f(x, z, xi))
            .collect();
        Self::new(grid, window, values)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn window(&self) -> FrequencyWindow {
        self.window
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, x_index: usize, z_index: usize, xi_index: usize) -> Complex64 {
        self.values[(x_index * self.grid.len() + z_index) * self.window.len() + xi_index]
    }

    /// Amplitude reading the table at the nearest grid nodes.
    pub fn to_amplitude(&self) -> TorusAmplitude {
        let table = self.clone();
        TorusAmplitude::new(self.grid.dim(), SymbolOrder::default(), move |x, z, xi| {
            match table.window.index_of(xi) {
                Some(w) => table.get(table.grid.snap(x), table.grid.snap(z), w),
                None => Complex64::new(0.0, 0.0),
            }
        })
        .with_domain(self.window.lattice_box())
    }

    /// max |self - other| over x, z and the frequencies with
    /// |xi|_inf >= lo (all frequencies for lo = 0).
    pub fn max_abs_diff_beyond(&self, other: &TabulatedAmplitude, lo: i64) -> Result<f64> {
        if self.grid != other.grid || self.window != other.window {
            return Err(Error::WindowMismatch("amplitude tables differ in grid or window".into()));
        }
        let wl = self.window.len();
        let mask: Vec<bool> = self.window.iter().map(|xi| xi.iter().map(|v| v.abs()).max().unwrap_or(0) >= lo).collect();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, _)| mask[i % wl])
            .map(|(_, (a, b))| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs_diff(&self, other: &TabulatedAmplitude) -> Result<f64> {
        self.max_abs_diff_beyond(other, 0)
    }

    pub fn to_json(&self) -> Result<String> {
        let wl = self.window.len();
        let len = self.grid.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (xz, w) = (i / wl, i % wl);
                [(xz / len) as f64, (xz % len) as f64, w as f64, v.re, v.im]
            })
            .collect();
        Ok(serde_json::to_string(&TabulatedAmplitudeJson {
            n: self.grid.dim(),
            points: self.grid.points(),
            cutoff: self.window.cutoff(),
            values,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: TabulatedAmplitudeJson = serde_json::from_str(text)?;
        let grid = TorusGrid::new(json.n, json.points)?;
        let window = FrequencyWindow::new(json.n, json.cutoff)?;
        check_amplitude_size(grid, window)?;
        let wl = window.len();
        let len = grid.len();
        let mut values = vec![Complex64::new(0.0, 0.0); len * len * wl];
        let mut seen = vec![false; values.len()];
        for row in &json.values {
            let idx: Vec<usize> = row[..3].iter().map(|&v| v as usize).collect();
            if row[..3].iter().any(|v| v.fract() != 0.0 || *v < 0.0) || idx[0] >= len || idx[1] >= len || idx[2] >= wl {
                return Err(Error::Format(format!("amplitude index {:?} out of range", &row[..3])));
            }
            let at = (idx[0] * len + idx[1]) * wl + idx[2];
            values[at] = Complex64::new(row[3], row[4]);
            seen[at] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("amplitude table is incomplete".into()));
        }
        Self::new(grid, window, values)
    }
}

/// c(x, z, xi) = sum_{eta in input} N^{-n} sum_y e^{i (y - z) . (eta - xi)} a(x, y, xi) p(y, eta).
/// The operator with phase phi and amplitude c equals T o P on inputs with
/// spectrum in `input`.
pub fn compose_tp_direct(
    a: &TorusAmplitude,
    p: &ToroidalSymbol,
    grid: TorusGrid,
    window: FrequencyWindow,
    input: FrequencyWindow,
) -> Result<TabulatedAmplitude> {
    check_dim(a.dim(), grid.dim())?;
    check_dim(p.dim(), grid.dim())?;
    input.check_grid(&grid)?;
    a.require(&window.lattice_box())?;
    p.require(&input.lattice_box())?;
    check_amplitude_size(grid, window)?;
    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let etas: Vec<Vec<i64>> = input.iter().collect();
    // p(y, eta) e^{i y . eta}
    let pe: Vec<Vec<Complex64>> =
        etas.iter().map(|eta| nodes.iter().map(|y| p.eval(y, eta) * cis(dot(y, eta))).collect()).collect();
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let scale = 1.0 / grid.len() as f64;
    let len = grid.len();
    let wl = window.len();
    // blocks[x][xi] = c(x, ., xi)
    let blocks: Vec<Vec<Vec<Complex64>>> = nodes
        .par_iter()
        .map(|x| {
            freqs
                .iter()
                .map(|xi| {
                    let ay: Vec<Complex64> = nodes.iter().map(|y| a.eval(x, y, xi) * cis(-dot(y, xi))).collect();
                    let s: Vec<Complex64> = pe
                        .iter()
                        .map(|row| row.iter().zip(&ay).map(|(u, v)| u * v).sum::<Complex64>() * scale)
                        .collect();
                    nodes
                        .iter()
                        .map(|z| {
                            etas.iter()
                                .zip(&s)
                                .map(|(eta, sv)| {
                                    let t: f64 = z.iter().zip(xi.iter().zip(eta)).map(|(zz, (k, e))| zz * (k - e) as f64).sum();
                                    sv * cis(t)
                                })
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); len * len * wl];
    for (x, per_xi) in blocks.iter().enumerate() {
        for (w, col) in per_xi.iter().enumerate() {
            for (z, v) in col.iter().enumerate() {
                values[(x * len + z) * wl + w] = *v;
            }
        }
    }
    TabulatedAmplitude::new(grid, window, values)
}

/// c_M(x, z, xi) = sum_{|alpha| < M} (1/alpha!) D_y^{(alpha)} [a(x, y, xi) Delta_xi^alpha p(y, xi)]|_{y=z},
/// D_y^{(alpha)} multiplying the y-spectrum at kappa by (-kappa)^{(alpha)}.
pub fn compose_tp_asymptotic(
    a: &TorusAmplitude,
    p: &ToroidalSymbol,
    order: u32,
    grid: TorusGrid,
    window: FrequencyWindow,
) -> Result<TabulatedAmplitude> {
    check_dim(a.dim(), grid.dim())?;
    check_dim(p.dim(), grid.dim())?;
    if order == 0 {
        return Err(Error::InvalidArgument("truncation order M must be at least 1".into()));
    }
    check_amplitude_size(grid, window)?;
    let n = grid.dim();
    a.require(&window.lattice_box())?;
    p.require(&window.lattice_box().extend_hi(&vec![order as i64 - 1; n]))?;
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
    // the shift eta - xi of the inner frequency appears in the y-exponent
    // with a minus sign, so y-frequency kappa carries (-kappa)^{(alpha)}
    let weights: Vec<Vec<f64>> = alphas
        .iter()
        .map(|al| {
            bins.iter()
                .map(|kappa| falling_factorial_f64(&kappa.iter().map(|k| -k).collect::<Vec<_>>(), al))
                .collect()
        })
        .collect();
    let plan = FftNd::new(&grid);
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    // Delta^alpha p(y, xi) per (alpha, xi)
    let dp: Vec<Vec<GridFunction>> = terms
        .iter()
        .map(|ts| {
            freqs
                .iter()
                .map(|xi| {
                    GridFunction::from_fn(grid, |y| {
                        let mut q = xi.clone();
                        ts.iter()
                            .map(|(b, w)| {
                                for k in 0..n {
                                    q[k] = xi[k] + b[k];
                                }
                                p.eval(y, &q) * *w
                            })
                            .sum()
                    })
                })
                .collect()
        })
        .collect();
    let len = grid.len();
    let wl = window.len();
    let blocks: Vec<Vec<Vec<Complex64>>> = (0..len)
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            freqs
                .iter()
                .enumerate()
                .map(|(w, xi)| {
                    let mut total = vec![Complex64::new(0.0, 0.0); len];
                    for (ai, wt) in weights.iter().enumerate() {
                        let g = GridFunction::from_fn_indexed(grid, |yi| a.eval(&x, &grid.node(yi), xi) * dp[ai][w].values()[yi]);
                        let mut spec = bin_spectrum(&g, &plan);
                        for (s, f) in spec.iter_mut().zip(wt) {
                            *s *= *f * inv_fact[ai];
                        }
                        plan.inverse(&mut spec);
                        for (t, s) in total.iter_mut().zip(&spec) {
                            *t += *s;
                        }
                    }
                    total
                })
                .collect()
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); len * len * wl];
    for (x, per_xi) in blocks.iter().enumerate() {
        for (w, col) in per_xi.iter().enumerate() {
            for (z, v) in col.iter().enumerate() {
                values[(x * len + z) * wl + w] = *v;
            }
        }
    }
    TabulatedAmplitude::new(grid, window, values)
}

/// c(x, z, xi) = e^{-i phi(x, xi)} [P (y -> e^{i phi(y, xi)} a(y, z, xi))](x), with P
/// applied over the full grid window. The operator with phase phi and
/// amplitude c equals P o T.
pub fn compose_pt_direct(
    p: &ToroidalSymbol,
    phi: &PhaseFunction,
    a: &TorusAmplitude,
    grid: TorusGrid,
    window: FrequencyWindow,
) -> Result<TabulatedAmplitude> {
    check_dim(p.dim(), grid.dim())?;
    check_dim(phi.dim(), grid.dim())?;
    check_dim(a.dim(), grid.dim())?;
    check_amplitude_size(grid, window)?;
    a.require(&window.lattice_box())?;
    let full = grid.full_window();
    p.require(&full.lattice_box())?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let len = grid.len();
    let wl = window.len();
    // columns[(z, xi)] = c(., z, xi)
    let columns: Vec<Vec<Complex64>> = (0..len * wl)
        .into_par_iter()
        .map(|zw| {
            let (zi, w) = (zw / wl, zw % wl);
            let z = grid.node(zi);
            let xi = &freqs[w];
            let h = GridFunction::from_fn(grid, |y| cis(phi.eval(y, xi)) * a.eval(y, &z, xi));
            let ph = apply_symbol_op(p, &h, full)?;
            Ok((0..len).map(|xi_node| ph.values()[xi_node] * cis(-phi.eval(&grid.node(xi_node), xi))).collect())
        })
        .collect::<Result<_>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); len * len * wl];
    for (zw, col) in columns.iter().enumerate() {
        let (zi, w) = (zw / wl, zw % wl);
        for (x, v) in col.iter().enumerate() {
            values[(x * len + zi) * wl + w] = *v;
        }
    }
    TabulatedAmplitude::new(grid, window, values)
}

/// Truncated PT expansion with the extension tail it relied on.
#[derive(Clone, Debug, PartialEq)]
pub struct PtExpansion {
    pub amplitude: TabulatedAmplitude,
    pub extension_tail: f64,
    pub flagged: bool,
}

/// c_M(x, z, xi) = sum_{|alpha| < M} i^{-|alpha|}/alpha! d_eta^alpha p(x, grad_x phi(x, xi))
///   d_y^alpha [e^{i Psi(x, y, xi)} a(y, z, xi)]|_{y=x}.
///
/// With drift d(xi), psi(y) = phi(y, xi) - y . d, H = e^{i psi} a(., z, xi) and w = d - grad_x phi(x, xi),
/// d_y^alpha [e^{i Psi} a]|_{y=x} = e^{-i psi(x)} sum_{beta <= alpha} C(alpha, beta) (i w)^{alpha - beta} d^beta H(x).
pub fn compose_pt_asymptotic(
    p: &ExtendedSymbol,
    phi: &PhaseFunction,
    a: &TorusAmplitude,
    order: u32,
    grid: TorusGrid,
    window: FrequencyWindow,
) -> Result<PtExpansion> {
    let n = grid.dim();
    check_dim(p.dim(), n)?;
    check_dim(phi.dim(), n)?;
    check_dim(a.dim(), n)?;
    if order == 0 {
        return Err(Error::InvalidArgument("truncation order M must be at least 1".into()));
    }
    check_amplitude_size(grid, window)?;
    a.require(&window.lattice_box())?;
    let alphas = MultiIndex::below_order(n, order);
    let inv_fact: Vec<f64> = alphas.iter().map(|al| al.factorial().map(|f| 1.0 / f as f64)).collect::<Result<_>>()?;
    let freqs: Vec<Vec<i64>> = window.iter().collect();
    let len = grid.len();
    let wl = window.len();
    let nodes: Vec<Vec<f64>> = (0..len).map(|i| grid.node(i)).collect();

    // Per xi: gradient at nodes, psi at nodes, and d_eta^alpha p(x, grad) for every alpha.
    struct PerFreq {
        psi: Vec<f64>,
        w: Vec<Vec<f64>>,
        dp: Vec<Vec<Complex64>>,
    }
    let per_freq: Vec<PerFreq> = freqs
        .par_iter()
        .map(|xi| {
            let grad = phi.gradient_on(grid, xi)?;
            let d = phi.drift(xi);
            let psi: Vec<f64> =
                nodes.iter().map(|x| phi.eval(x, xi) - x.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>()).collect();
            let w: Vec<Vec<f64>> = grad.iter().map(|g| d.iter().zip(g).map(|(dv, gv)| dv - gv).collect()).collect();
            let dp = alphas
                .iter()
                .map(|alpha| {
                    nodes
                        .iter()
                        .zip(&grad)
                        .map(|(x, g)| if alpha.is_zero() { p.eval(x, g) } else { p.derivative(x, g, alpha) })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PerFreq { psi, w, dp })
        })
        .collect::<Result<_>>()?;

    let betas = MultiIndex::below_order(n, order);
    let beta_pos = |b: &MultiIndex| betas.iter().position(|c| c == b).expect("beta below order");
    let i_pow = |k: u32| Complex64::new(0.0, -1.0).powu(k);
    // columns[(z, xi)] = c_M(., z, xi)
    let columns: Vec<Vec<Complex64>> = (0..len * wl)
        .into_par_iter()
        .map(|zw| {
            let (zi, wi) = (zw / wl, zw % wl);
            let z = &nodes[zi];
            let xi = &freqs[wi];
            let pf = &per_freq[wi];
            let h = GridFunction::from_fn_indexed(grid, |yi| cis(pf.psi[yi]) * a.eval(&nodes[yi], z, xi));
            let dh: Vec<GridFunction> = betas.iter().map(|b| spectral_derivative(&h, b)).collect::<Result<_>>()?;
            Ok((0..len)
                .map(|xi_node| {
                    let x = &nodes[xi_node];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (ai, alpha) in alphas.iter().enumerate() {
                        let jet = if alpha.is_zero() {
                            a.eval(x, z, xi)
                        } else {
                            let mut s = Complex64::new(0.0, 0.0);
                            for beta in alpha.below() {
                                let rest = alpha.checked_sub(&beta).expect("beta <= alpha");
                                let mut coeff = Complex64::new(alpha.binomial(&beta) as f64, 0.0);
                                for (j, &r) in rest.entries().iter().enumerate() {
                                    coeff *= Complex64::new(0.0, pf.w[xi_node][j]).powu(r);
                                }
                                s += coeff * dh[beta_pos(&beta)].values()[xi_node];
                            }
                            s * cis(-pf.psi[xi_node])
                        };
                        acc += i_pow(alpha.order()) * inv_fact[ai] * pf.dp[ai][xi_node] * jet;
                    }
                    acc
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); len * len * wl];
    for (zw, col) in columns.iter().enumerate() {
        let (zi, w) = (zw / wl, zw % wl);
        for (x, v) in col.iter().enumerate() {
            values[(x * len + zi) * wl + w] = *v;
        }
    }
    let scale = nodes
        .iter()
        .flat_map(|x| freqs.iter().map(move |xi| (x, xi)))
        .map(|(x, xi)| p.symbol().eval(x, xi).norm())
        .fold(0.0, f64::max);
    let extension_tail = p.tail_weight() * scale;
    Ok(PtExpansion {
        amplitude: TabulatedAmplitude::new(grid, window, values)?,
        extension_tail,
        flagged: extension_tail > PT_TAIL_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_phase_and_amplitude() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = g.full_window();
        let one = TorusAmplitude::new(1, SymbolOrder::default(), |_, _, _| c(1.0, 0.0));
        let u = GridFunction::from_fn(g, |x| c(x[0].sin(), (2.0 * x[0]).cos()));
        let tu = apply_fso(&PhaseFunction::linear(1), &one, &u, w).unwrap();
        assert!(tu.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn drift_and_gradient() {
        let phi = PhaseFunction::new(1, |x, xi| x[0] * xi[0] as f64 + 0.3 * x[0].sin());
        assert!((phi.drift(&[3])[0] - 3.0).abs() < 1e-12);
        let g = TorusGrid::new(1, 32).unwrap();
        let grad = phi.gradient_on(g, &[3]).unwrap();
        for (i, v) in grad.iter().enumerate() {
            assert!((v[0] - 3.0 - 0.3 * g.node(i)[0].cos()).abs() < 1e-12);
        }
        assert!((phi.gradient_at(&[0.4], &[3])[0] - 3.0 - 0.3 * 0.4f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn psi_of_linear_phase_vanishes() {
        let phi = PhaseFunction::linear(2);
        assert!(psi_correction(&phi, &[0.1, 0.2], &[1.0, -3.0], &[4, -2]).abs() < 1e-12);
    }

    #[test]
    fn amplitude_json_round_trip() {
        let g = TorusGrid::new(1, 4).unwrap();
        let w = FrequencyWindow::new(1, 2).unwrap();
        let t = TabulatedAmplitude::from_fn(g, w, |x, z, xi| c(x as f64, z as f64 + xi[0] as f64)).unwrap();
        let back = TabulatedAmplitude::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.get(2, 1, 0), c(2.0, -1.0));
    }
}
