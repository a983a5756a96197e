use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bin_index, bin_spectrum, FftNd, FrequencyWindow, GridFunction, SpectralFunction, TorusGrid};

/// Dense entry cap for assembled matrices.
pub const MAX_MATRIX_ENTRIES: usize = 4_000_000;

/// Dense operator on spectral coefficients: (Af)^(omega) = sum_xi M(omega, xi) f^(xi),
/// omega over `rows`, xi over `cols`. Row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    rows: FrequencyWindow,
    cols: FrequencyWindow,
    entries: Vec<Complex64>,
}

impl OperatorMatrix {
    pub fn new(rows: FrequencyWindow, cols: FrequencyWindow, entries: Vec<Complex64>) -> Result<Self> {
        if rows.dim() != cols.dim() {
            return Err(Error::DimensionMismatch { expected: rows.dim(), got: cols.dim() });
        }
        if entries.len() != rows.len() * cols.len() {
            return Err(Error::InvalidArgument(format!(
                "matrix has {} entries, expected {}x{}",
                entries.len(),
                rows.len(),
                cols.len()
            )));
        }
        Ok(OperatorMatrix { rows, cols, entries })
    }

    pub(crate) fn check_size(rows: usize, cols: usize) -> Result<()> {
        if rows.saturating_mul(cols) > MAX_MATRIX_ENTRIES {
            return Err(Error::TooLarge(format!("{rows}x{cols} matrix exceeds {MAX_MATRIX_ENTRIES} entries")));
        }
        Ok(())
    }

    /// Matrix of a linear operator on grid functions, rows on the full
    /// grid window, built column by column from exponentials.
    pub fn from_operator(
        op: impl Fn(&GridFunction) -> Result<GridFunction> + Sync,
        grid: TorusGrid,
        window: FrequencyWindow,
    ) -> Result<Self> {
        window.check_grid(&grid)?;
        let rows = grid.full_window();
        Self::check_size(rows.len(), window.len())?;
        let plan = FftNd::new(&grid);
        let freqs: Vec<Vec<i64>> = window.iter().collect();
        let columns = freqs
            .par_iter()
            .map(|xi| {
                let image = op(&GridFunction::exponential(grid, xi))?;
                Ok(full_column(&image, &plan, rows))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(rows, window, &columns)
    }

    pub fn from_columns(rows: FrequencyWindow, cols: FrequencyWindow, columns: &[Vec<Complex64>]) -> Result<Self> {
        if columns.len() != cols.len() || columns.iter().any(|c| c.len() != rows.len()) {
            return Err(Error::InvalidArgument("column shapes do not match windows".into()));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); rows.len() * cols.len()];
        for (c, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                entries[r * cols.len() + c] = *v;
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> FrequencyWindow {
        self.rows
    }

    pub fn cols(&self) -> FrequencyWindow {
        self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.ncols() + col]
    }

    /// Entry at frequencies (omega, xi), zero when either is outside.
    pub fn at(&self, omega: &[i64], xi: &[i64]) -> Complex64 {
        match (self.rows.index_of(omega), self.cols.index_of(xi)) {
            (Some(r), Some(c)) => self.get(r, c),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.nrows()).map(|r| self.get(r, col)).collect()
    }

    pub fn apply_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let m = self.ncols();
        self.entries
            .chunks(m)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_adjoint_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let m = self.ncols();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for (row, &w) in self.entries.chunks(m).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * w;
            }
        }
        out
    }

    pub fn apply(&self, f: &SpectralFunction) -> Result<SpectralFunction> {
        if f.window() != self.cols {
            return Err(Error::WindowMismatch(format!(
                "input window K={} does not match matrix columns K={}",
                f.window().cutoff(),
                self.cols.cutoff()
            )));
        }
        SpectralFunction::new(self.rows, self.apply_vec(f.coeffs()))
    }

    /// self * other; needs self.cols == other.rows.
    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.cols != other.rows {
            return Err(Error::WindowMismatch("inner windows differ".into()));
        }
        Self::check_size(self.nrows(), other.ncols())?;
        let (k, m) = (self.ncols(), other.ncols());
        let entries: Vec<Complex64> = self
            .entries
            .par_chunks(k)
            .flat_map_iter(|row| {
                (0..m).map(move |c| row.iter().enumerate().map(|(j, a)| a * other.entries[j * m + c]).sum())
            })
            .collect();
        Self::new(self.rows, other.cols, entries)
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::WindowMismatch("matrix windows differ".into()));
        }
        Ok(crate::numerics::max_abs_diff(&self.entries, &other.entries))
    }

    /// max_omega |M(omega, xi) - other(omega, xi)| for one column.
    pub fn column_diff(&self, other: &OperatorMatrix, col: usize) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::WindowMismatch("matrix windows differ".into()));
        }
        Ok((0..self.nrows()).map(|r| (self.get(r, col) - other.get(r, col)).norm()).fold(0.0, f64::max))
    }

    /// CSV with columns omega_index, xi_index, re, im.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega_index", "xi_index", "re", "im"])?;
        for r in 0..self.nrows() {
            for c in 0..self.ncols() {
                let v = self.get(r, c);
                w.write_record(&[r.to_string(), c.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Normalised spectrum of `f` laid out on `rows` (the full grid window).
pub(crate) fn full_column(f: &GridFunction, plan: &FftNd, rows: FrequencyWindow) -> Vec<Complex64> {
    let spec = bin_spectrum(f, plan);
    let n = f.grid().points();
    rows.iter().map(|omega| spec[bin_index(&omega, n)]).collect()
}

/// Schur test bound sqrt(max_row sum |M| * max_col sum |M|).
pub fn schur_bound(m: &OperatorMatrix) -> f64 {
    let (r, c) = (m.nrows(), m.ncols());
    let mut row_sums = vec![0.0f64; r];
    let mut col_sums = vec![0.0f64; c];
    for i in 0..r {
        for j in 0..c {
            let a = m.get(i, j).norm();
            row_sums[i] += a;
            col_sums[j] += a;
        }
    }
    let rmax = row_sums.into_iter().fold(0.0, f64::max);
    let cmax = col_sums.into_iter().fold(0.0, f64::max);
    (rmax * cmax).sqrt()
}

/// Largest singular value estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const NORM_TOLERANCE: f64 = 1e-8;
pub const NORM_MAX_ITERATIONS: usize = 10_000;
const NORM_SEED: u64 = 0x7d0_5eed;

/// Largest singular value by power iteration on M^H M from a fixed-seed
/// start vector. Matrices with at most one nonzero per row and column
/// are handled exactly.
pub fn operator_norm(m: &OperatorMatrix) -> NormEstimate {
    operator_norm_with(m, NORM_TOLERANCE, NORM_MAX_ITERATIONS)
}

pub fn operator_norm_with(m: &OperatorMatrix, tolerance: f64, max_iterations: usize) -> NormEstimate {
    let scale = m.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let cutoff = 1e-14 * scale;
    let cleaned: Vec<Complex64> = m
        .entries
        .iter()
        .map(|v| if v.norm() <= cutoff { Complex64::new(0.0, 0.0) } else { *v })
        .collect();
    if let Some(v) = permutation_norm(&cleaned, m.nrows(), m.ncols()) {
        return NormEstimate { value: v, iterations: 0, converged: true };
    }
    let mat = OperatorMatrix { rows: m.rows, cols: m.cols, entries: cleaned };

    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v: Vec<Complex64> = (0..m.ncols())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut v);
    let mut mu = 0.0;
    let mut last_mu = f64::NAN;
    let mut stagnant = 0;
    for it in 1..=max_iterations {
        let w = mat.apply_adjoint_vec(&mat.apply_vec(&v));
        mu = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let residual = w.iter().zip(&v).map(|(b, a)| (b - a * mu).norm_sqr()).sum::<f64>().sqrt();
        if residual <= tolerance * mu.abs() {
            return NormEstimate { value: mu.max(0.0).sqrt(), iterations: it, converged: true };
        }
        // Clustered top singular values leave the vector wandering while mu is settled.
        if (mu - last_mu).abs() <= 1e-15 * mu.abs() {
            stagnant += 1;
            if stagnant >= 20 {
                return NormEstimate { value: mu.max(0.0).sqrt(), iterations: it, converged: true };
            }
        } else {
            stagnant = 0;
        }
        last_mu = mu;
        v = w;
        if normalize(&mut v) == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true };
        }
    }
    NormEstimate { value: mu.max(0.0).sqrt(), iterations: max_iterations, converged: false }
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for a in v.iter_mut() {
            *a /= n;
        }
    }
    n
}

fn permutation_norm(entries: &[Complex64], rows: usize, cols: usize) -> Option<f64> {
    let mut row_seen = vec![false; rows];
    let mut col_seen = vec![false; cols];
    let mut best = 0.0f64;
    for r in 0..rows {
        for c in 0..cols {
            let v = entries[r * cols + c];
            if v.norm() == 0.0 {
                continue;
            }
            if row_seen[r] || col_seen[c] {
                return None;
            }
            row_seen[r] = true;
            col_seen[c] = true;
            best = best.max(v.norm());
        }
    }
    Some(best)
}

/// Bound against measured norm on one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: f64,
    pub empirical_norm: f64,
    pub converged: bool,
    pub window: FrequencyWindow,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.empirical_norm <= self.bound * (1.0 + 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(k: usize, entries: Vec<Complex64>) -> OperatorMatrix {
        let w = FrequencyWindow::new(1, k).unwrap();
        OperatorMatrix::new(w, w, entries).unwrap()
    }

    #[test]
    fn diagonal_norms() {
        let c = |v: f64| Complex64::new(v, 0.0);
        let mut e = vec![c(0.0); 16];
        for (i, v) in [1.0, 2.0, 3.0, 0.5].iter().enumerate() {
            e[i * 4 + i] = c(*v);
        }
        let m = square(2, e);
        let n = operator_norm(&m);
        assert_eq!(n.value, 3.0);
        assert!(n.converged);
        assert_eq!(schur_bound(&m), 3.0);
    }

    #[test]
    fn all_ones_matrix() {
        let m = square(2, vec![Complex64::new(1.0, 0.0); 16]);
        let n = operator_norm(&m);
        assert!((n.value - 4.0).abs() < 1e-8, "{n:?}");
        assert!((schur_bound(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matmul_and_apply() {
        let w = FrequencyWindow::new(1, 1).unwrap();
        let c = |v: f64| Complex64::new(v, 0.0);
        let a = OperatorMatrix::new(w, w, vec![c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        let p = a.matmul(&a).unwrap();
        assert_eq!(p.entries(), &[c(7.0), c(10.0), c(15.0), c(22.0)]);
        let f = SpectralFunction::new(w, vec![c(1.0), c(-1.0)]).unwrap();
        assert_eq!(a.apply(&f).unwrap().coeffs(), &[c(-1.0), c(-1.0)]);
        let mut buf = vec![];
        a.to_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("omega_index,xi_index,re,im\n0,0,1e0,0e0"));
    }
}
