//! Periodisation of compactly supported functions and symbols, Euclidean
//! quantization by quadrature, and the commutation checks between
//! Euclidean and toroidal quantization.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::grid::{forward_transform, inverse_transform, FrequencyWindow, GridFunction, SupportBox, TorusGrid};
use crate::numerics::{cis, lagrange_weights, unravel};
use crate::quantize::apply_symbol_op;
use crate::symbols::{SymbolOrder, ThetaFunction, ToroidalSymbol};

const TWO_PI: f64 = 2.0 * PI;
const BOUNDARY_TOLERANCE: f64 = 1e-12;
const ALIGN_TOLERANCE: f64 = 1e-9;

/// Samples of a compactly supported function on the lattice points
/// lo + h k, k in [0, counts), of a box in R^n. Row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactFunction {
    lo: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompactFunctionJson {
    n: usize,
    #[serde(rename = "box")]
    bounds: Vec<[f64; 2]>,
    h: f64,
    values: Vec<[f64; 2]>,
}

impl CompactFunction {
    /// Checks that the samples vanish on the box boundary.
    pub fn new(lo: Vec<f64>, h: f64, counts: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let f = Self::from_parts(lo, h, counts, values)?;
        let edge = f.boundary_max();
        if edge > BOUNDARY_TOLERANCE * f.max_abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "compact function is {edge:.2e} on its box boundary; expected zero"
            )));
        }
        Ok(f)
    }

    fn from_parts(lo: Vec<f64>, h: f64, counts: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if lo.is_empty() || lo.len() > 3 || lo.len() != counts.len() {
            return Err(Error::InvalidArgument("box dimension must be 1..=3".into()));
        }
        if !(h > 0.0) || !h.is_finite() || lo.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling step {h}")));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidArgument("at least two samples per axis".into()));
        }
        let len: usize = counts.iter().product();
        if values.len() != len {
            return Err(Error::InvalidArgument(format!("{} samples, expected {len}", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("compact function sample".into()));
        }
        Ok(CompactFunction { lo, h, counts, values })
    }

    /// Samples `f` on the lattice h Z^n over the smallest lattice box
    /// containing `support`.
    pub fn from_fn(support: &SupportBox, h: f64, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling step {h}")));
        }
        let first: Vec<i64> = support.lo.iter().map(|v| (v / h - ALIGN_TOLERANCE).floor() as i64).collect();
        let last: Vec<i64> = support.hi.iter().map(|v| (v / h + ALIGN_TOLERANCE).ceil() as i64).collect();
        let counts: Vec<usize> = first.iter().zip(&last).map(|(a, b)| (b - a + 1) as usize).collect();
        let lo: Vec<f64> = first.iter().map(|&k| k as f64 * h).collect();
        let probe = CompactFunction { lo, h, counts, values: vec![] };
        let values = (0..probe.counts.iter().product())
            .into_par_iter()
            .map(|i| {
                let x = probe.node(i);
                if support.contains(&x) { f(&x) } else { Complex64::new(0.0, 0.0) }
            })
            .collect();
        Self::new(probe.lo, h, probe.counts, values)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.counts).map(|(l, &c)| l + (c - 1) as f64 * self.h).collect()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_box(&self) -> SupportBox {
        SupportBox::new(self.lo.clone(), self.hi()).expect("ordered box")
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mut rest = idx;
        for k in (0..self.dim()).rev() {
            out[k] = self.lo[k] + (rest % self.counts[k]) as f64 * self.h;
            rest /= self.counts[k];
        }
        out
    }

    fn linear(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest sample on the box boundary.
    pub fn boundary_max(&self) -> f64 {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let mut worst = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            let mut rest = i;
            for k in (0..n).rev() {
                idx[k] = rest % self.counts[k];
                rest /= self.counts[k];
            }
            if idx.iter().zip(&self.counts).any(|(&j, &c)| j == 0 || j + 1 == c) {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    /// Trapezoid L1 norm (boundary samples vanish).
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.h.powi(self.dim() as i32)
    }

    /// Value at an arbitrary point by 6-point (quintic) Lagrange
    /// interpolation per axis; zero outside the box.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let n = self.dim();
        let mut weights: Vec<(i64, Vec<f64>)> = Vec::with_capacity(n);
        for k in 0..n {
            let u = (x[k] - self.lo[k]) / self.h;
            if u < -1.0 || u > self.counts[k] as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let base = u.floor() as i64 - 2;
            let nodes: Vec<f64> = (0..6).map(|j| (base + j) as f64).collect();
            weights.push((base, lagrange_weights(u, &nodes)));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; n];
        let mut multi = vec![0usize; n];
        'outer: for lin in 0..6usize.pow(n as u32) {
            unravel(lin, 6, n, &mut idx);
            let mut w = 1.0;
            for k in 0..n {
                let j = weights[k].0 + idx[k] as i64;
                if j < 0 || j >= self.counts[k] as i64 {
                    continue 'outer;
                }
                multi[k] = j as usize;
                w *= weights[k].1[idx[k]];
            }
            acc += self.values[self.linear(&multi)] * w;
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        let json = CompactFunctionJson {
            n: self.dim(),
            bounds: self.lo.iter().zip(self.hi()).map(|(&l, h)| [l, h]).collect(),
            h: self.h,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        };
        Ok(serde_json::to_string(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: CompactFunctionJson = serde_json::from_str(text)?;
        if json.bounds.len() != json.n {
            return Err(Error::Format(format!("box has {} axes, n = {}", json.bounds.len(), json.n)));
        }
        let mut counts = vec![];
        for b in &json.bounds {
            let c = (b[1] - b[0]) / json.h;
            if (c - c.round()).abs() > ALIGN_TOLERANCE * c.abs().max(1.0) {
                return Err(Error::Format("box length is not a multiple of h".into()));
            }
            counts.push(c.round() as usize + 1);
        }
        Self::new(
            json.bounds.iter().map(|b| b[0]).collect(),
            json.h,
            counts,
            json.values.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
        )
    }
}

/// How samples reach the torus grid when the lattices do not align.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Resampling {
    /// Aligned lattices only; anything else is an error.
    #[default]
    AlignedOnly,
    /// Fall back to quintic interpolation.
    Quintic,
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() < ALIGN_TOLERANCE * k).then_some(k as usize)
}

fn on_lattice(x: f64, h: f64) -> bool {
    let r = x / h;
    (r - r.round()).abs() < ALIGN_TOLERANCE * r.abs().max(1.0)
}

/// pu(x) = sum_k u(x + 2 pi k) on the torus grid.
pub fn periodise_function(u: &CompactFunction, grid: TorusGrid, resampling: Resampling) -> Result<GridFunction> {
    check_dim(grid.dim(), u.dim())?;
    let spacing = grid.spacing();
    let aligned_origin = u.lo.iter().all(|&l| on_lattice(l, u.h));
    if aligned_origin {
        if let Some(m) = integer_ratio(spacing, u.h) {
            return Ok(periodise_sampled(u, grid, m));
        }
        if let (Some(m), Some(coarse)) = (integer_ratio(u.h, spacing), integer_ratio(TWO_PI, u.h)) {
            if grid.points() % m == 0 && coarse % 2 == 0 && coarse >= 4 {
                let cg = TorusGrid::new(grid.dim(), coarse)?;
                let pc = periodise_sampled(u, cg, 1);
                let spec = forward_transform(&pc, cg.full_window())?;
                return inverse_transform(&spec, grid);
            }
        }
    }
    match resampling {
        Resampling::Quintic => Ok(periodise_interpolated(u, grid)),
        Resampling::AlignedOnly => Err(Error::InvalidGrid(format!(
            "samples at step {} from {:?} do not align with torus spacing {spacing}; enable interpolation",
            u.h, u.lo
        ))),
    }
}

/// Lattices aligned with torus spacing = m * h.
fn periodise_sampled(u: &CompactFunction, grid: TorusGrid, m: usize) -> GridFunction {
    let n = grid.dim();
    let period = (grid.points() * m) as i64;
    let start: Vec<i64> = u.lo.iter().map(|&l| (l / u.h).round() as i64).collect();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut multi = vec![0usize; n];
    let mut node = vec![0usize; n];
    for (i, v) in u.values.iter().enumerate() {
        if v.norm_sqr() == 0.0 {
            continue;
        }
        unravel_counts(i, &u.counts, &mut multi);
        let mut hit = true;
        for k in 0..n {
            let lattice = (start[k] + multi[k] as i64).rem_euclid(period) as usize;
            if lattice % m != 0 {
                hit = false;
                break;
            }
            node[k] = lattice / m;
        }
        if hit {
            values[grid.linear_index(&node)] += *v;
        }
    }
    GridFunction::from_values_unchecked(grid, values)
}

fn unravel_counts(mut idx: usize, counts: &[usize], out: &mut [usize]) {
    for k in (0..counts.len()).rev() {
        out[k] = idx % counts[k];
        idx /= counts[k];
    }
}

fn periodise_interpolated(u: &CompactFunction, grid: TorusGrid) -> GridFunction {
    let n = grid.dim();
    let lo = u.lo.clone();
    let hi = u.hi();
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|k| (((lo[k] - TWO_PI) / TWO_PI).floor() as i64 - 1, ((hi[k] + TWO_PI) / TWO_PI).ceil() as i64 + 1))
        .collect();
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut shift = vec![0i64; n];
            let widths: Vec<usize> = ranges.iter().map(|(a, b)| (b - a + 1) as usize).collect();
            let total: usize = widths.iter().product();
            let mut pt = x.clone();
            for lin in 0..total {
                let mut rest = lin;
                for k in (0..n).rev() {
                    shift[k] = ranges[k].0 + (rest % widths[k]) as i64;
                    rest /= widths[k];
                }
                for k in 0..n {
                    pt[k] = x[k] + TWO_PI * shift[k] as f64;
                }
                acc += u.eval(&pt);
            }
            acc
        })
        .collect();
    GridFunction::from_values_unchecked(grid, values)
}

type EuclideanRule = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;

/// a(x, xi) on R^n x R^n, either 2 pi-periodic in x or with compact
/// x-support.
#[derive(Clone)]
pub struct EuclideanSymbol {
    dim: usize,
    rule: Arc<EuclideanRule>,
    x_support: Option<SupportBox>,
    periodic: bool,
}

impl fmt::Debug for EuclideanSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EuclideanSymbol")
            .field("dim", &self.dim)
            .field("x_support", &self.x_support)
            .field("periodic", &self.periodic)
            .finish()
    }
}

impl EuclideanSymbol {
    /// Symbol periodic in x.
    pub fn periodic(dim: usize, rule: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        EuclideanSymbol { dim, rule: Arc::new(rule), x_support: None, periodic: true }
    }

    /// Symbol vanishing for x outside `support`.
    pub fn compact(
        support: SupportBox,
        rule: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let s = support.clone();
        EuclideanSymbol {
            dim: support.dim(),
            rule: Arc::new(move |x, xi| if s.contains(x) { rule(x, xi) } else { Complex64::new(0.0, 0.0) }),
            x_support: Some(support),
            periodic: false,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::periodic(dim, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_support(&self) -> Option<&SupportBox> {
        self.x_support.as_ref()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.rule)(x, xi)
    }

    /// a restricted to T^n x Z^n; needs periodicity in x.
    pub fn restrict(&self) -> Result<ToroidalSymbol> {
        if !self.periodic {
            return Err(Error::InvalidArgument("restriction needs a symbol periodic in x".into()));
        }
        let a = self.clone();
        Ok(ToroidalSymbol::new(self.dim, SymbolOrder::default(), move |x, xi| {
            let real: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
            a.eval(x, &real)
        }))
    }

    /// (pa)(x, xi) = sum_k a(x + 2 pi k, xi) as a periodic Euclidean symbol.
    pub fn periodised(&self) -> Result<EuclideanSymbol> {
        let support = self
            .x_support
            .clone()
            .ok_or_else(|| Error::InvalidArgument("periodisation needs compact x-support".into()))?;
        let a = self.clone();
        let n = self.dim;
        Ok(EuclideanSymbol::periodic(n, move |x, xi| {
            let mut acc = Complex64::new(0.0, 0.0);
            let ranges: Vec<(i64, i64)> = (0..n)
                .map(|k| {
                    (((support.lo[k] - x[k]) / TWO_PI).floor() as i64, ((support.hi[k] - x[k]) / TWO_PI).ceil() as i64)
                })
                .collect();
            let widths: Vec<usize> = ranges.iter().map(|(a, b)| (b - a + 1) as usize).collect();
            let mut pt = x.to_vec();
            for lin in 0..widths.iter().product() {
                let mut rest = lin;
                for k in (0..n).rev() {
                    let shift = ranges[k].0 + (rest % widths[k]) as i64;
                    rest /= widths[k];
                    pt[k] = x[k] + TWO_PI * shift as f64;
                }
                acc += a.eval(&pt, xi);
            }
            acc
        }))
    }

    /// self - other, keeping the x-support of self when other is periodic.
    fn minus(&self, other: &EuclideanSymbol) -> EuclideanSymbol {
        let (a, b) = (self.clone(), other.clone());
        EuclideanSymbol {
            dim: self.dim,
            rule: Arc::new(move |x, xi| a.eval(x, xi) - b.eval(x, xi)),
            x_support: None,
            periodic: self.periodic && other.periodic,
        }
    }

    fn plus(&self, other: &EuclideanSymbol) -> EuclideanSymbol {
        let (a, b) = (self.clone(), other.clone());
        EuclideanSymbol {
            dim: self.dim,
            rule: Arc::new(move |x, xi| a.eval(x, xi) + b.eval(x, xi)),
            x_support: None,
            periodic: self.periodic && other.periodic,
        }
    }
}

/// Toroidal symbol of the periodisation of a compact-x symbol.
pub fn periodise_symbol(a0: &EuclideanSymbol) -> Result<ToroidalSymbol> {
    a0.periodised()?.restrict()
}

/// b = a1 restricted + p a0, as one toroidal symbol.
pub fn split_and_periodise(a1: &EuclideanSymbol, a0: &EuclideanSymbol) -> Result<ToroidalSymbol> {
    check_dim(a1.dim(), a0.dim())?;
    a1.plus(&a0.periodised()?).restrict()
}

/// Frequency quadrature for Euclidean quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    /// xi is integrated over [-cutoff, cutoff]^n.
    pub cutoff: f64,
    /// Trapezoid spacing h_xi; the error indicator compares with 2 h_xi.
    pub step: f64,
    /// The output box is the input box grown by this much per side.
    pub margin: f64,
    /// Flag results whose error indicator exceeds this.
    pub tolerance: Option<f64>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { cutoff: 32.0, step: 0.125, margin: TWO_PI, tolerance: None }
    }
}

/// Result of a Euclidean quantization by quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanApplication {
    pub output: CompactFunction,
    /// max |fine - coarse| between steps h_xi and 2 h_xi.
    pub quadrature_error: f64,
    /// max over x of sum |a f^| over the outer half of the xi-box.
    pub truncation_error: f64,
    /// Largest output sample on the output box boundary.
    pub boundary: f64,
    pub flagged: bool,
}

impl EuclideanApplication {
    pub fn error_budget(&self) -> f64 {
        self.quadrature_error + self.truncation_error + self.boundary
    }
}

/// a(X, D) f(x) = int e^{i x . xi} a(x, xi) f^_E(xi) dxi, by trapezoid rules
/// in y (for f^_E) and in xi, on the input lattice grown by the margin.
pub fn apply_euclidean_op(
    a: &EuclideanSymbol,
    f: &CompactFunction,
    settings: &QuadratureSettings,
) -> Result<EuclideanApplication> {
    let n = f.dim();
    check_dim(a.dim(), n)?;
    if !(settings.cutoff > 0.0) || !(settings.step > 0.0) || !(settings.margin >= 0.0) {
        return Err(Error::InvalidArgument("quadrature cutoff, step and margin must be positive".into()));
    }
    let mut half = (settings.cutoff / settings.step).round() as i64;
    half += half % 2;
    let per_axis = (2 * half + 1) as usize;
    let total = per_axis.pow(n as u32);
    if total.saturating_mul(f.len()) > 2_000_000_000 {
        return Err(Error::TooLarge(format!("{total} frequency nodes against {} samples", f.len())));
    }
    let hx = settings.step;
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|lin| {
            let mut idx = vec![0usize; n];
            unravel(lin, per_axis, n, &mut idx);
            idx.iter().map(|&i| (i as i64 - half) as f64 * hx).collect()
        })
        .collect();
    // Trapezoid weights at h_xi and on the even sublattice at 2 h_xi; outer-half mask.
    let mut fine_w = vec![0.0f64; total];
    let mut coarse_w = vec![0.0f64; total];
    let mut outer = vec![false; total];
    let mut idx = vec![0usize; n];
    for lin in 0..total {
        unravel(lin, per_axis, n, &mut idx);
        let mut wf = hx.powi(n as i32);
        let mut wc = (2.0 * hx).powi(n as i32);
        let mut far = false;
        for &i in &idx {
            let k = i as i64 - half;
            if k.abs() == half {
                wf *= 0.5;
                wc *= 0.5;
            }
            if k % 2 != 0 {
                wc = 0.0;
            }
            far |= 2 * k.abs() > half;
        }
        fine_w[lin] = wf;
        coarse_w[lin] = wc;
        outer[lin] = far;
    }
    // f^_E(xi) = (2pi)^{-n} h^n sum_y f(y) e^{-i y . xi}
    let ys: Vec<(Vec<f64>, Complex64)> =
        (0..f.len()).filter(|&i| f.values[i].norm_sqr() != 0.0).map(|i| (f.node(i), f.values[i])).collect();
    let vol = f.h.powi(n as i32) / TWO_PI.powi(n as i32);
    let fhat: Vec<Complex64> = nodes
        .par_iter()
        .map(|xi| {
            ys.iter()
                .map(|(y, v)| v * cis(-y.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>()))
                .sum::<Complex64>()
                * vol
        })
        .collect();

    let steps = (settings.margin / f.h).ceil() as usize;
    let out_lo: Vec<f64> = f.lo.iter().map(|l| l - steps as f64 * f.h).collect();
    let out_counts: Vec<usize> = f.counts.iter().map(|c| c + 2 * steps).collect();
    let shell = CompactFunction { lo: out_lo, h: f.h, counts: out_counts, values: vec![] };
    let out_len: usize = shell.counts.iter().product();
    let active: Vec<usize> = (0..total).filter(|&i| fhat[i].norm_sqr() != 0.0).collect();
    let results: Vec<(Complex64, f64, f64)> = (0..out_len)
        .into_par_iter()
        .map(|i| {
            let x = shell.node(i);
            let mut fine = Complex64::new(0.0, 0.0);
            let mut coarse = Complex64::new(0.0, 0.0);
            let mut tail = 0.0;
            for &j in &active {
                let xi = &nodes[j];
                let t = a.eval(&x, xi) * fhat[j];
                let e = cis(x.iter().zip(xi).map(|(p, q)| p * q).sum::<f64>());
                fine += t * e * fine_w[j];
                coarse += t * e * coarse_w[j];
                if outer[j] {
                    tail += t.norm() * fine_w[j];
                }
            }
            (fine, (fine - coarse).norm(), tail)
        })
        .collect();
    let values: Vec<Complex64> = results.iter().map(|r| r.0).collect();
    let quadrature_error = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let truncation_error = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let output = CompactFunction::from_parts(shell.lo, f.h, shell.counts, values)?;
    let boundary = output.boundary_max();
    let flagged = settings.tolerance.is_some_and(|t| quadrature_error + truncation_error > t);
    Ok(EuclideanApplication { output, quadrature_error, truncation_error, boundary, flagged })
}

/// Discrepancy between two computations of one identity and the error
/// budget it is judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub discrepancy: f64,
    pub budget: f64,
    pub pass: bool,
}

impl CommutationReport {
    fn new(discrepancy: f64, budget: f64) -> Self {
        CommutationReport { discrepancy, budget, pass: discrepancy <= budget }
    }
}

const BUDGET_FACTOR: f64 = 4.0;
const ROUNDOFF_FLOOR: f64 = 1e-11;

/// Largest |sigma(x, xi) p^f(xi)| over the outer two frequency shells of the
/// full grid window: what the torus side loses to its window.
fn torus_tail(sigma: &ToroidalSymbol, pf: &GridFunction) -> Result<f64> {
    let grid = pf.grid();
    let window = grid.full_window();
    let spec = forward_transform(pf, window)?;
    let edge = window.cutoff() as i64 - 2;
    let mut worst = 0.0f64;
    for (xi, c) in window.iter().zip(spec.coeffs()) {
        if xi.iter().any(|v| v.abs() >= edge) {
            for i in (0..grid.len()).step_by((grid.len() / 64).max(1)) {
                worst = worst.max((sigma.eval(&grid.node(i), &xi) * c).norm());
            }
        }
    }
    Ok(worst * window.len() as f64)
}

/// p(a(X, D) f) against a~(X, D)(p f) for a periodic in x.
pub fn verify_p1(
    a: &EuclideanSymbol,
    f: &CompactFunction,
    grid: TorusGrid,
    settings: &QuadratureSettings,
) -> Result<CommutationReport> {
    let restricted = a.restrict()?;
    let app = apply_euclidean_op(a, f, settings)?;
    let lhs = periodise_function(&app.output, grid, Resampling::AlignedOnly)?;
    let pf = periodise_function(f, grid, Resampling::AlignedOnly)?;
    let rhs = apply_symbol_op(&restricted, &pf, grid.full_window())?;
    let scale = rhs.max_abs().max(1.0);
    let budget = BUDGET_FACTOR * (app.error_budget() * periodic_copies(&app.output) + torus_tail(&restricted, &pf)?)
        + ROUNDOFF_FLOOR * scale;
    Ok(CommutationReport::new(lhs.max_abs_diff(&rhs), budget))
}

/// Number of 2 pi-translates of the output box overlapping one period.
fn periodic_copies(u: &CompactFunction) -> f64 {
    u.lo.iter()
        .zip(u.hi())
        .map(|(l, h)| ((h - l) / TWO_PI).ceil() + 1.0)
        .product()
}

/// Samples of R f = a0(X, D) f - (p a0)(X, D) f with summary measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub residual: CompactFunction,
    /// max |R f| on [-pi, pi]^n.
    pub inner_max: f64,
    /// max |R f| over the measured box.
    pub max: f64,
    /// max |R f| at the sample points nearest |x|_inf = 2 pi.
    pub at_two_pi: f64,
    pub budget: f64,
}

impl ResidualReport {
    pub fn decay_ratio(&self) -> f64 {
        if self.max == 0.0 { 0.0 } else { self.at_two_pi / self.max }
    }
}

fn inside_fundamental(b: &SupportBox, slack: f64) -> bool {
    b.lo.iter().all(|&l| l >= -PI - slack) && b.hi.iter().all(|&h| h <= PI + slack)
}

/// R f for a0 and f supported in [-pi, pi]^n, measured on the box of f
/// grown by the quadrature margin.
pub fn smoothing_residual(
    a0: &EuclideanSymbol,
    f: &CompactFunction,
    settings: &QuadratureSettings,
) -> Result<ResidualReport> {
    let support = a0
        .x_support()
        .ok_or_else(|| Error::InvalidArgument("smoothing residual needs compact x-support".into()))?;
    if !inside_fundamental(support, 1e-12) {
        return Err(Error::InvalidArgument("x-support of a0 must lie in [-pi, pi]^n".into()));
    }
    let nonzero: Vec<Vec<f64>> = (0..f.len()).filter(|&i| f.values[i].norm() > 0.0).map(|i| f.node(i)).collect();
    if nonzero.iter().any(|x| x.iter().any(|v| v.abs() > PI + 1e-12)) {
        return Err(Error::InvalidArgument("f must be supported in [-pi, pi]^n".into()));
    }
    let r = a0.minus(&a0.periodised()?);
    let app = apply_euclidean_op(&r, f, settings)?;
    let out = &app.output;
    let mut inner_max = 0.0f64;
    let mut at_two_pi = 0.0f64;
    for i in 0..out.len() {
        let x = out.node(i);
        let v = out.values[i].norm();
        if x.iter().all(|c| c.abs() <= PI + 1e-12) {
            inner_max = inner_max.max(v);
        }
        let rim = x.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if (rim - TWO_PI).abs() <= 0.5 * out.h + 1e-12 {
            at_two_pi = at_two_pi.max(v);
        }
    }
    let budget = BUDGET_FACTOR * (app.quadrature_error + app.truncation_error) + ROUNDOFF_FLOOR;
    Ok(ResidualReport { max: out.max_abs(), residual: app.output, inner_max, at_two_pi, budget })
}

/// Corollary check: p(a(X, D) f) against b~(X, D)(p f) with b~ from
/// `split_and_periodise`; the budget includes the measured p(R f).
pub fn verify_split(
    a1: &EuclideanSymbol,
    a0: &EuclideanSymbol,
    f: &CompactFunction,
    grid: TorusGrid,
    settings: &QuadratureSettings,
) -> Result<CommutationReport> {
    let b = split_and_periodise(a1, a0)?;
    let full = a1.plus(a0);
    let app = apply_euclidean_op(&full, f, settings)?;
    let lhs = periodise_function(&app.output, grid, Resampling::AlignedOnly)?;
    let pf = periodise_function(f, grid, Resampling::AlignedOnly)?;
    let rhs = apply_symbol_op(&b, &pf, grid.full_window())?;
    let residual = smoothing_residual(a0, f, settings)?;
    let pr = periodise_function(&residual.residual, grid, Resampling::AlignedOnly)?;
    let scale = rhs.max_abs().max(1.0);
    let budget = BUDGET_FACTOR * (app.error_budget() * periodic_copies(&app.output) + torus_tail(&b, &pf)?)
        + pr.max_abs()
        + residual.budget
        + ROUNDOFF_FLOOR * scale;
    Ok(CommutationReport::new(lhs.max_abs_diff(&rhs), budget))
}

/// u = g theta with the bump theta, so that p u = g (the translates of
/// theta sum to one). Sampled at the torus spacing over [-2 pi, 2 pi]^n.
pub fn lift_to_compact(g: &GridFunction, theta: &ThetaFunction) -> Result<CompactFunction> {
    let grid = g.grid();
    let h = grid.spacing();
    let n = grid.dim();
    let support = SupportBox::cube(n, TWO_PI)?;
    let points = grid.points();
    CompactFunction::from_fn(&support, h, |x| {
        let node: Vec<usize> = x.iter().map(|v| ((v / h).round() as i64).rem_euclid(points as i64) as usize).collect();
        g.values()[grid.linear_index(&node)] * theta.eval_nd(x)
    })
}

/// Windowed torus spectrum of a periodisation, for comparison with f^_E.
pub fn periodised_spectrum(u: &CompactFunction, grid: TorusGrid, window: FrequencyWindow) -> Result<Vec<Complex64>> {
    let pu = periodise_function(u, grid, Resampling::AlignedOnly)?;
    Ok(forward_transform(&pu, window)?.coeffs().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 { Complex64::new(0.0, 0.0) } else { Complex64::new((-1.0 / (1.0 - r2)).exp(), 0.0) }
    }

    #[test]
    fn lattice_snapping_and_json() {
        let s = SupportBox::cube(1, 1.0).unwrap();
        let u = CompactFunction::from_fn(&s, 0.3, bump).unwrap();
        assert!((u.lo()[0] + 1.2).abs() < 1e-12);
        assert_eq!(u.counts(), &[9]);
        let back = CompactFunction::from_json(&u.to_json().unwrap()).unwrap();
        assert_eq!(back.counts(), u.counts());
        assert!((back.values()[4] - u.values()[4]).norm() < 1e-15);
        assert!((u.eval(&[0.0]) - bump(&[0.0])).norm() < 1e-15);
    }

    #[test]
    fn boundary_must_vanish() {
        let r = CompactFunction::new(vec![0.0], 0.5, vec![3], vec![Complex64::new(1.0, 0.0); 3]);
        assert!(r.is_err());
    }

    #[test]
    fn single_period_periodises_to_itself() {
        let g = TorusGrid::new(1, 32).unwrap();
        let u = CompactFunction::from_fn(&SupportBox::cube(1, 2.0).unwrap(), g.spacing(), bump).unwrap();
        let pu = periodise_function(&u, g, Resampling::AlignedOnly).unwrap();
        for i in 0..32 {
            let x = g.node(i)[0];
            let y = if x > PI { x - TWO_PI } else { x };
            assert!((pu.values()[i] - bump(&[y])).norm() < 1e-15);
        }
    }

    #[test]
    fn two_bumps_overlap() {
        let g = TorusGrid::new(1, 16).unwrap();
        let s = SupportBox::new(vec![-1.0], vec![TWO_PI + 1.0]).unwrap();
        let u = CompactFunction::from_fn(&s, g.spacing(), |x| bump(x) + bump(&[x[0] - TWO_PI])).unwrap();
        let pu = periodise_function(&u, g, Resampling::AlignedOnly).unwrap();
        assert!((pu.values()[0].re - 2.0 * bump(&[0.0]).re).abs() < 1e-15);
    }

    #[test]
    fn misaligned_needs_interpolation() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = CompactFunction::from_fn(&SupportBox::cube(1, 1.0).unwrap(), 0.07, bump).unwrap();
        assert!(periodise_function(&u, g, Resampling::AlignedOnly).is_err());
        let pu = periodise_function(&u, g, Resampling::Quintic).unwrap();
        assert!((pu.values()[1] - bump(&[g.spacing()])).norm() < 1e-4);
    }
}
