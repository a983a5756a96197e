use std::sync::Arc;

use num_complex::Complex64;

use super::MultiIndex;
use crate::error::{check_dim, Result};
use crate::numerics::central_stencil;

/// A smooth function on R^n, with optional analytic partial derivatives.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Complex64;
    fn derivative(&self, _x: &[f64], _alpha: &MultiIndex) -> Option<Complex64> {
        None
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
type DerivFn = Arc<dyn Fn(&[f64], &MultiIndex) -> Complex64 + Send + Sync>;

/// Closure-backed [`SmoothFunction`].
#[derive(Clone)]
pub struct SmoothFn {
    dim: usize,
    value: ValueFn,
    derivative: Option<DerivFn>,
}

impl SmoothFn {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        SmoothFn { dim, value: Arc::new(value), derivative: None }
    }

    pub fn with_derivative(
        mut self,
        d: impl Fn(&[f64], &MultiIndex) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }
}

impl SmoothFunction for SmoothFn {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Complex64 {
        (self.value)(x)
    }
    fn derivative(&self, x: &[f64], alpha: &MultiIndex) -> Option<Complex64> {
        self.derivative.as_ref().map(|d| d(x, alpha))
    }
}

const FD_STEP: f64 = 1e-2;
const FD_ACCURACY: usize = 8;

/// Partial derivative d^alpha p(x); analytic when provided, otherwise a
/// tensor product of central differences. The flag reports the fallback.
pub fn partial_derivative(p: &dyn SmoothFunction, x: &[f64], alpha: &MultiIndex) -> (Complex64, bool) {
    if alpha.is_zero() {
        return (p.value(x), false);
    }
    if let Some(d) = p.derivative(x, alpha) {
        return (d, false);
    }
    let stencils: Vec<(Vec<i64>, Vec<f64>)> = alpha
        .entries()
        .iter()
        .map(|&a| if a == 0 { (vec![0], vec![1.0]) } else { central_stencil(a as usize, FD_ACCURACY) })
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; x.len()];
    let mut pt = x.to_vec();
    'outer: loop {
        let mut w = 1.0;
        for k in 0..x.len() {
            let (off, wt) = &stencils[k];
            pt[k] = x[k] + off[idx[k]] as f64 * FD_STEP;
            w *= wt[idx[k]];
        }
        acc += p.value(&pt) * w;
        for k in (0..x.len()).rev() {
            idx[k] += 1;
            if idx[k] < stencils[k].0.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    let scale = FD_STEP.powi(alpha.order() as i32);
    (acc / scale, true)
}

/// Classical remainder p(xi+theta) - sum_{|alpha|<M} d^alpha p(xi) theta^alpha / alpha!.
pub fn smooth_taylor_remainder(p: &dyn SmoothFunction, xi: &[f64], theta: &[f64], order: u32) -> Result<Complex64> {
    check_dim(p.dim(), xi.len())?;
    check_dim(p.dim(), theta.len())?;
    let target: Vec<f64> = xi.iter().zip(theta).map(|(a, b)| a + b).collect();
    let mut acc = p.value(&target);
    for alpha in MultiIndex::below_order(p.dim(), order) {
        let (d, _) = partial_derivative(p, xi, &alpha);
        acc -= d * monomial(theta, &alpha) / alpha.factorial()? as f64;
    }
    Ok(acc)
}

fn monomial(x: &[f64], alpha: &MultiIndex) -> f64 {
    x.iter().zip(alpha.entries()).map(|(v, &a)| v.powi(a as i32)).product()
}

/// Bound value plus diagnostics about sampling and differentiation.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothBound {
    pub value: f64,
    pub warnings: Vec<String>,
}

/// c_M * max_{|alpha|=M, nu in Q(theta)} |theta^alpha d^{alpha+omega} p(xi+nu)|
/// with c_M = sum_{|alpha|=M} 1/alpha!, the box Q(theta) sampled with
/// `samples_per_axis` points per axis.
pub fn smooth_taylor_remainder_bound(
    p: &dyn SmoothFunction,
    xi: &[f64],
    theta: &[f64],
    order: u32,
    omega: &MultiIndex,
    samples_per_axis: usize,
) -> Result<SmoothBound> {
    let n = p.dim();
    check_dim(n, xi.len())?;
    check_dim(n, theta.len())?;
    check_dim(n, omega.dim())?;
    let samples = samples_per_axis.max(2);
    let alphas = MultiIndex::of_order(n, order);
    let c_m: f64 = alphas
        .iter()
        .map(|a| a.factorial().map(|f| 1.0 / f as f64))
        .sum::<Result<f64>>()?;

    let mut warnings = vec![];
    let mut used_fd = false;
    let mut fine = 0.0f64;
    let mut coarse = 0.0f64;
    let total = samples.pow(n as u32);
    let mut idx = vec![0usize; n];
    for lin in 0..total {
        crate::numerics::unravel(lin, samples, n, &mut idx);
        let nu: Vec<f64> = (0..n)
            .map(|k| xi[k] + theta[k] * idx[k] as f64 / (samples - 1) as f64)
            .collect();
        let on_coarse = idx.iter().all(|&i| i % 2 == 0);
        for alpha in &alphas {
            let (d, fd) = partial_derivative(p, &nu, &alpha.add(omega)?);
            used_fd |= fd;
            let v = (monomial(theta, alpha) * d).norm();
            fine = fine.max(v);
            if on_coarse {
                coarse = coarse.max(v);
            }
        }
    }
    if fine > 0.0 && (fine - coarse) > 1e-2 * fine {
        warnings.push(format!(
            "sampled maximum moved by {:.2e} between {} and {} points per axis; increase sampling",
            fine - coarse,
            (samples + 1) / 2,
            samples
        ));
    }
    if used_fd && order + omega.order() >= 4 {
        warnings.push(format!(
            "derivatives of order {} taken by finite differences; expect roundoff near {:.0e}",
            order + omega.order(),
            f64::EPSILON / FD_STEP.powi((order + omega.order()) as i32)
        ));
    }
    Ok(SmoothBound { value: c_m * fine, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_vanishing_third_order_bound() {
        let p = SmoothFn::new(1, |x: &[f64]| Complex64::new(x[0] * x[0], 0.0));
        let b = smooth_taylor_remainder_bound(&p, &[0.3], &[1.0], 3, &MultiIndex::zeros(1), 17).unwrap();
        assert!(b.value < 1e-6, "{}", b.value);
    }

    #[test]
    fn sine_bound_dominates_remainder() {
        let p = SmoothFn::new(1, |x: &[f64]| Complex64::new(x[0].sin(), 0.0));
        let r = smooth_taylor_remainder(&p, &[0.0], &[0.5], 2).unwrap();
        assert!((r.re - (0.5f64.sin() - 0.5)).abs() < 1e-10);
        let b = smooth_taylor_remainder_bound(&p, &[0.0], &[0.5], 2, &MultiIndex::zeros(1), 17).unwrap();
        assert!(b.value >= r.norm());
        assert!(b.warnings.is_empty(), "{:?}", b.warnings);
    }

    #[test]
    fn constant_bound_is_zero() {
        let p = SmoothFn::new(2, |_: &[f64]| Complex64::new(4.0, 0.0));
        for m in 1..4 {
            let b = smooth_taylor_remainder_bound(&p, &[0.0, 1.0], &[0.5, -0.5], m, &MultiIndex::zeros(2), 9).unwrap();
            assert!(b.value < 1e-9);
        }
    }

    #[test]
    fn analytic_derivatives_are_used() {
        let p = SmoothFn::new(1, |x: &[f64]| Complex64::new(x[0].exp(), 0.0))
            .with_derivative(|x: &[f64], _| Complex64::new(x[0].exp(), 0.0));
        let (d, fd) = partial_derivative(&p, &[1.0], &MultiIndex::new(vec![3]));
        assert!(!fd);
        assert!((d.re - 1f64.exp()).abs() < 1e-15);
        let q = SmoothFn::new(1, |x: &[f64]| Complex64::new(x[0].exp(), 0.0));
        let (d, fd) = partial_derivative(&q, &[1.0], &MultiIndex::new(vec![2]));
        assert!(fd);
        assert!((d.re - 1f64.exp()).abs() < 1e-8);
    }
}
