//! Uniform grids on the torus, the toroidal Fourier transform and a
//! trapezoid quadrature for the Euclidean Fourier transform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diffcalc::{LatticeBox, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::numerics::unravel;

pub const MAX_DIM: usize = 3;

/// Grid of N points per axis on [0, 2pi)^n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    points: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!("{points} points per axis; need an even number >= 4")));
        }
        if points.checked_pow(dim as u32).map_or(true, |s| s > 1 << 24) {
            return Err(Error::TooLarge(format!("{points}^{dim} grid nodes")));
        }
        Ok(TorusGrid { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    pub fn node_into(&self, idx: usize, out: &mut [f64]) {
        let mut m = [0usize; MAX_DIM];
        unravel(idx, self.points, self.dim, &mut m[..self.dim]);
        for k in 0..self.dim {
            out[k] = m[k] as f64 * self.spacing();
        }
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.node_into(idx, &mut x);
        x
    }

    pub fn node_indices(&self, idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim];
        unravel(idx, self.points, self.dim, &mut m);
        m
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &m| acc * self.points + m % self.points)
    }

    /// Nearest node to `x`, reduced modulo 2pi.
    pub fn snap(&self, x: &[f64]) -> usize {
        let n = self.points as i64;
        x.iter().take(self.dim).fold(0usize, |acc, &v| {
            let j = (v / self.spacing()).round() as i64;
            acc * self.points + j.rem_euclid(n) as usize
        })
    }

    /// The window -N/2..N/2-1 holding every grid frequency once.
    pub fn full_window(&self) -> FrequencyWindow {
        FrequencyWindow { dim: self.dim, cutoff: self.points / 2, symmetric: false }
    }
}

/// FFT bin of frequency `xi` on an N-point axis.
pub fn fft_bin(xi: i64, points: usize) -> usize {
    xi.rem_euclid(points as i64) as usize
}

/// Signed frequency of an FFT bin in the convention -N/2..N/2-1.
pub fn bin_frequency(bin: usize, points: usize) -> i64 {
    if bin < points / 2 {
        bin as i64
    } else {
        bin as i64 - points as i64
    }
}

/// Truncated frequency set {-K..K-1}^n, or {-K..K}^n when symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyWindow {
    dim: usize,
    cutoff: usize,
    symmetric: bool,
}

impl FrequencyWindow {
    pub fn new(dim: usize, cutoff: usize) -> Result<Self> {
        Self::build(dim, cutoff, false)
    }

    pub fn symmetric(dim: usize, cutoff: usize) -> Result<Self> {
        Self::build(dim, cutoff, true)
    }

    fn build(dim: usize, cutoff: usize, symmetric: bool) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("window dimension {dim}")));
        }
        if cutoff == 0 {
            return Err(Error::InvalidArgument("window cutoff must be positive".into()));
        }
        Ok(FrequencyWindow { dim, cutoff, symmetric })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn lo(&self) -> i64 {
        -(self.cutoff as i64)
    }

    pub fn hi(&self) -> i64 {
        if self.symmetric {
            self.cutoff as i64
        } else {
            self.cutoff as i64 - 1
        }
    }

    pub fn per_axis(&self) -> usize {
        (self.hi() - self.lo() + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn convention(&self) -> &'static str {
        if self.symmetric {
            "negK..K"
        } else {
            "negK..K-1"
        }
    }

    pub fn frequency_into(&self, idx: usize, out: &mut [i64]) {
        let mut m = [0usize; MAX_DIM];
        unravel(idx, self.per_axis(), self.dim, &mut m[..self.dim]);
        for k in 0..self.dim {
            out[k] = self.lo() + m[k] as i64;
        }
    }

    pub fn frequency(&self, idx: usize) -> Vec<i64> {
        let mut xi = vec![0; self.dim];
        self.frequency_into(idx, &mut xi);
        xi
    }

    pub fn contains(&self, xi: &[i64]) -> bool {
        xi.len() == self.dim && xi.iter().all(|&v| v >= self.lo() && v <= self.hi())
    }

    pub fn index_of(&self, xi: &[i64]) -> Option<usize> {
        if !self.contains(xi) {
            return None;
        }
        Some(xi.iter().fold(0, |acc, &v| acc * self.per_axis() + (v - self.lo()) as usize))
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.frequency(i))
    }

    pub fn lattice_box(&self) -> LatticeBox {
        LatticeBox::cube(self.dim, self.lo(), self.hi()).expect("non-empty window")
    }

    /// Reject windows whose frequencies alias on `grid`.
    pub fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        check_dim(grid.dim(), self.dim)?;
        if self.per_axis() > grid.points() {
            return Err(Error::WindowMismatch(format!(
                "window {} with K={} needs more than {} points per axis",
                self.convention(),
                self.cutoff,
                grid.points()
            )));
        }
        Ok(())
    }
}

/// Complex samples on a torus grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("grid function sample".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: TorusGrid, values: Vec<Complex64>) -> Self {
        GridFunction { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        GridFunction { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_into(i, &mut x);
                f(&x)
            })
            .collect();
        GridFunction { grid, values }
    }

    /// Values from a rule on linear node indices.
    pub fn from_fn_indexed(grid: TorusGrid, f: impl Fn(usize) -> Complex64) -> Self {
        GridFunction { grid, values: (0..grid.len()).map(f).collect() }
    }

    /// The exponential e^{i x . xi}.
    pub fn exponential(grid: TorusGrid, xi: &[i64]) -> Self {
        Self::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(xi).map(|(a, &b)| a * b as f64).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        crate::numerics::max_abs_diff(&self.values, &other.values)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("grid functions live on different grids".into()));
        }
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Fourier coefficients over a frequency window.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    window: FrequencyWindow,
    coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn new(window: FrequencyWindow, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != window.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a window of {}",
                coeffs.len(),
                window.len()
            )));
        }
        if coeffs.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("spectral coefficient".into()));
        }
        Ok(SpectralFunction { window, coeffs })
    }

    pub fn zeros(window: FrequencyWindow) -> Self {
        SpectralFunction { window, coeffs: vec![Complex64::new(0.0, 0.0); window.len()] }
    }

    pub fn window(&self) -> FrequencyWindow {
        self.window
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, xi: &[i64]) -> Option<Complex64> {
        self.window.index_of(xi).map(|i| self.coeffs[i])
    }

    pub fn set(&mut self, xi: &[i64], v: Complex64) -> Result<()> {
        let i = self.window.index_of(xi).ok_or_else(|| Error::OutOfDomain {
            point: xi.to_vec(),
            window: self.window.lattice_box().to_string(),
        })?;
        self.coeffs[i] = v;
        Ok(())
    }

    /// (sum |c|^2)^(1/2).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Reusable n-dimensional FFT plans for one grid. Unnormalised.
#[derive(Clone)]
pub(crate) struct FftNd {
    points: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub(crate) fn new(grid: &TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            points: grid.points(),
            dim: grid.dim(),
            fwd: planner.plan_fft_forward(grid.points()),
            inv: planner.plan_fft_inverse(grid.points()),
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.points;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for j in 0..n {
                        line[j] = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        data[base + j * stride] = line[j];
                    }
                }
            }
        }
    }
}

/// Normalised full spectrum in FFT bin order.
pub(crate) fn bin_spectrum(f: &GridFunction, plan: &FftNd) -> Vec<Complex64> {
    let mut data = f.values.clone();
    plan.forward(&mut data);
    let scale = 1.0 / f.grid.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Linear FFT bin of a lattice frequency.
pub(crate) fn bin_index(xi: &[i64], points: usize) -> usize {
    xi.iter().fold(0, |acc, &v| acc * points + fft_bin(v, points))
}

/// f_hat(xi) = N^{-n} sum_j f(x_j) e^{-i x_j . xi} on the window.
pub fn forward_transform(f: &GridFunction, window: FrequencyWindow) -> Result<SpectralFunction> {
    window.check_grid(&f.grid)?;
    let spec = bin_spectrum(f, &FftNd::new(&f.grid));
    let coeffs = window
        .iter()
        .map(|xi| spec[bin_index(&xi, f.grid.points())])
        .collect();
    Ok(SpectralFunction { window, coeffs })
}

/// Synthesis sum_xi F(xi) e^{i x . xi} on the grid nodes.
pub fn inverse_transform(spectrum: &SpectralFunction, grid: TorusGrid) -> Result<GridFunction> {
    spectrum.window.check_grid(&grid)?;
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (xi, c) in spectrum.window.iter().zip(&spectrum.coeffs) {
        data[bin_index(&xi, grid.points())] += *c;
    }
    FftNd::new(&grid).inverse(&mut data);
    Ok(GridFunction { grid, values: data })
}

/// d^beta f, by multiplying the spectrum with (i xi)^beta. The Nyquist mode
/// is dropped along axes differentiated an odd number of times.
pub fn spectral_derivative(f: &GridFunction, beta: &MultiIndex) -> Result<GridFunction> {
    check_dim(f.grid.dim(), beta.dim())?;
    if beta.is_zero() {
        return Ok(f.clone());
    }
    let plan = FftNd::new(&f.grid);
    let mut spec = bin_spectrum(f, &plan);
    let n = f.grid.points();
    let mut bins = vec![0usize; f.grid.dim()];
    for (lin, v) in spec.iter_mut().enumerate() {
        unravel(lin, n, f.grid.dim(), &mut bins);
        let mut factor = Complex64::new(1.0, 0.0);
        for (k, &b) in bins.iter().enumerate() {
            let order = beta.entries()[k];
            if order == 0 {
                continue;
            }
            if b == n / 2 && order % 2 == 1 {
                factor = Complex64::new(0.0, 0.0);
                break;
            }
            factor *= Complex64::new(0.0, bin_frequency(b, n) as f64).powu(order);
        }
        *v *= factor;
    }
    plan.inverse(&mut spec);
    Ok(GridFunction { grid: f.grid, values: spec })
}

/// (N^{-n} sum |f(x_j)|^2)^(1/2).
pub fn l2_norm(f: &GridFunction) -> f64 {
    (f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / f.grid.len() as f64).sqrt()
}

/// Axis-aligned box in R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SupportBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(SupportBox { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        SupportBox::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }
}

/// Quadrature value with a Richardson-style error indicator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtEstimate {
    pub value: Complex64,
    pub error: f64,
}

pub const DEFAULT_FT_STEP: f64 = 2.0 * PI / 256.0;

/// (2pi)^{-n} int f(x) e^{-i x . xi} dx by the trapezoid rule at step `h`
/// (shrunk to divide the box) and at h/2. Returns the h/2 value and the
/// difference between the two as the error indicator.
pub fn euclidean_ft(
    f: &dyn Fn(&[f64]) -> Complex64,
    support: &SupportBox,
    h: f64,
    xi: &[f64],
) -> Result<FtEstimate> {
    let n = support.dim();
    check_dim(n, xi.len())?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature step {h}")));
    }
    let counts: Vec<usize> = (0..n)
        .map(|k| 2 * ((support.hi[k] - support.lo[k]) / h).ceil().max(1.0) as usize + 1)
        .collect();
    let steps: Vec<f64> = (0..n)
        .map(|k| (support.hi[k] - support.lo[k]) / (counts[k] - 1) as f64)
        .collect();
    let total: usize = counts.iter().product();
    let mut fine = Complex64::new(0.0, 0.0);
    let mut coarse = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    for lin in 0..total {
        let mut rem = lin;
        for k in (0..n).rev() {
            idx[k] = rem % counts[k];
            rem /= counts[k];
        }
        let mut w_fine = 1.0;
        let mut w_coarse = 1.0;
        let mut phase = 0.0;
        for k in 0..n {
            x[k] = support.lo[k] + idx[k] as f64 * steps[k];
            let edge = idx[k] == 0 || idx[k] == counts[k] - 1;
            w_fine *= if edge { 0.5 } else { 1.0 };
            w_coarse *= if idx[k] % 2 == 1 {
                0.0
            } else if edge {
                1.0
            } else {
                2.0
            };
            phase -= x[k] * xi[k];
        }
        let v = f(&x);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite(format!("integrand at {x:?}")));
        }
        let term = v * Complex64::from_polar(1.0, phase);
        fine += term * w_fine;
        if w_coarse != 0.0 {
            coarse += term * w_coarse;
        }
    }
    let vol: f64 = steps.iter().product::<f64>() / (2.0 * PI).powi(n as i32);
    let fine = fine * vol;
    let coarse = coarse * vol;
    Ok(FtEstimate { value: fine, error: (fine - coarse).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn transform_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 8).unwrap();
        let f = GridFunction::exponential(g, &[2]);
        let s = forward_transform(&f, w).unwrap();
        for (xi, v) in w.iter().zip(s.coeffs()) {
            let expect = if xi[0] == 2 { 1.0 } else { 0.0 };
            assert!((v - c(expect, 0.0)).norm() < 1e-14);
        }
        let cos = GridFunction::from_fn(g, |x| c(x[0].cos(), 0.0));
        let s = forward_transform(&cos, w).unwrap();
        assert!((s.get(&[1]).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        assert!((s.get(&[-1]).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn aliasing_windows_are_rejected() {
        let g = TorusGrid::new(1, 16).unwrap();
        assert!(FrequencyWindow::new(1, 9).unwrap().check_grid(&g).is_err());
        assert!(FrequencyWindow::symmetric(1, 8).unwrap().check_grid(&g).is_err());
        assert!(FrequencyWindow::new(1, 8).unwrap().check_grid(&g).is_ok());
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = TorusGrid::new(1, 32).unwrap();
        let s3 = GridFunction::from_fn(g, |x| c((3.0 * x[0]).sin(), 0.0));
        let d = spectral_derivative(&s3, &MultiIndex::new(vec![2])).unwrap();
        let expect = s3.map(|v| v * -9.0);
        assert!(d.max_abs_diff(&expect) < 1e-12);
        let e2 = GridFunction::exponential(g, &[2]);
        let d = spectral_derivative(&e2, &MultiIndex::new(vec![1])).unwrap();
        assert!(d.max_abs_diff(&e2.map(|v| v * c(0.0, 2.0))) < 1e-13);
    }

    #[test]
    fn two_dimensional_round_trip() {
        let g = TorusGrid::new(2, 8).unwrap();
        let w = FrequencyWindow::new(2, 4).unwrap();
        let f = GridFunction::from_fn(g, |x| c((x[0] + 2.0 * x[1]).cos(), (3.0 * x[1] - x[0]).sin()));
        let s = forward_transform(&f, w).unwrap();
        let back = inverse_transform(&s, g).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-13);
        assert!((s.get(&[1, 2]).unwrap() - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gaussian_transform_at_zero() {
        let b = SupportBox::cube(1, 8.0).unwrap();
        let est = euclidean_ft(&|x| c((-x[0] * x[0] / 2.0).exp(), 0.0), &b, DEFAULT_FT_STEP, &[0.0]).unwrap();
        assert!((est.value.re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-8);
        assert!(est.value.im.abs() < 1e-12);
    }
}
