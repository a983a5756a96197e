//! Difference calculus on Z^n: forward and transposed differences, falling
//! factorials, nested sums and the discrete Taylor theorem.

mod index;
mod smooth;
mod taylor;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{check_dim, Error, Result};

pub use index::{LatticeBox, LatticePoint, MultiIndex, MAX_FACTORIAL_ORDER};
pub(crate) use index::binom;
pub use smooth::{
    partial_derivative, smooth_taylor_remainder, smooth_taylor_remainder_bound, SmoothBound,
    SmoothFn, SmoothFunction,
};
pub use taylor::{
    remainder_bound, remainder_bound_in, taylor_expand, taylor_remainder, StencilRegion,
    TaylorExpansion,
};

/// Values a lattice function may take. Exact rationals and floating point
/// share the same difference code.
pub trait Scalar:
    Clone
    + Send
    + Sync
    + fmt::Debug
    + 'static
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_rational(r: &BigRational) -> Self;
    fn from_i64(v: i64) -> Self;
    fn magnitude(&self) -> f64;
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

type Rule<T> = Arc<dyn Fn(&[i64]) -> T + Send + Sync>;

/// A function Z^n -> T given by a rule, a table on a closed box, or a rule
/// restricted to a declared validity window.
#[derive(Clone)]
pub struct LatticeFunction<T> {
    dim: usize,
    rule: Option<Rule<T>>,
    table: Option<Arc<[T]>>,
    window: Option<LatticeBox>,
}

impl<T: fmt::Debug> fmt::Debug for LatticeFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeFunction")
            .field("dim", &self.dim)
            .field("window", &self.window)
            .field("tabulated", &self.table.is_some())
            .finish()
    }
}

impl<T: Scalar> LatticeFunction<T> {
    /// Rule defined on all of Z^n.
    pub fn from_rule(dim: usize, rule: impl Fn(&[i64]) -> T + Send + Sync + 'static) -> Self {
        LatticeFunction { dim, rule: Some(Arc::new(rule)), table: None, window: None }
    }

    /// Rule valid only on `window`; queries outside fail.
    pub fn from_rule_on(
        window: LatticeBox,
        rule: impl Fn(&[i64]) -> T + Send + Sync + 'static,
    ) -> Self {
        LatticeFunction {
            dim: window.dim(),
            rule: Some(Arc::new(rule)),
            table: None,
            window: Some(window),
        }
    }

    /// Precompute `rule` on `window`.
    pub fn tabulate(window: LatticeBox, rule: impl Fn(&[i64]) -> T) -> Self {
        let values: Vec<T> = window.points().map(|p| rule(&p)).collect();
        LatticeFunction { dim: window.dim(), rule: None, table: Some(values.into()), window: Some(window) }
    }

    /// Table in row-major order over `window`.
    pub fn from_table(window: LatticeBox, values: Vec<T>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::InvalidArgument(format!(
                "table has {} values, window {} needs {}",
                values.len(),
                window,
                window.len()
            )));
        }
        Ok(LatticeFunction { dim: window.dim(), rule: None, table: Some(values.into()), window: Some(window) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> Option<&LatticeBox> {
        self.window.as_ref()
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    pub fn eval(&self, p: &[i64]) -> Result<T> {
        check_dim(self.dim, p.len())?;
        if let Some(w) = &self.window {
            w.require(p)?;
        }
        Ok(self.eval_unchecked(p))
    }

    fn eval_unchecked(&self, p: &[i64]) -> T {
        match (&self.table, &self.rule, &self.window) {
            (Some(t), _, Some(w)) => t[w.index_of(p).expect("validated point")].clone(),
            (_, Some(r), _) => r(p),
            _ => unreachable!("lattice function without rule or table"),
        }
    }

    /// Fail unless every point of `b` may be queried.
    pub fn require(&self, b: &LatticeBox) -> Result<()> {
        check_dim(self.dim, b.dim())?;
        match &self.window {
            Some(w) if !w.contains_box(b) => Err(Error::OutOfDomain {
                point: if w.contains(b.lo()) { b.hi().to_vec() } else { b.lo().to_vec() },
                window: w.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

fn alpha_extent(alpha: &MultiIndex, sign: i64) -> Vec<i64> {
    alpha.entries().iter().map(|&a| sign * a as i64).collect()
}

/// Delta^alpha f(xi) = sum_{beta<=alpha} (-1)^{|alpha-beta|} C(alpha,beta) f(xi+beta).
pub fn forward_difference<T: Scalar>(
    f: &LatticeFunction<T>,
    alpha: &MultiIndex,
    xi: &[i64],
) -> Result<T> {
    check_dim(f.dim(), alpha.dim())?;
    check_dim(f.dim(), xi.len())?;
    f.require(&LatticeBox::stencil(xi, &alpha_extent(alpha, 1)))?;
    let total = alpha.order();
    let mut acc = T::zero();
    let mut p = xi.to_vec();
    for beta in alpha.below() {
        for k in 0..xi.len() {
            p[k] = xi[k] + beta.entries()[k] as i64;
        }
        let c = alpha.binomial(&beta) as i64;
        let c = if (total - beta.order()) % 2 == 1 { -c } else { c };
        acc = acc + T::from_i64(c) * f.eval_unchecked(&p);
    }
    Ok(acc)
}

/// Delta^alpha computed by iterating one-step differences.
pub fn iterated_forward_difference<T: Scalar>(
    f: &LatticeFunction<T>,
    alpha: &MultiIndex,
    xi: &[i64],
) -> Result<T> {
    check_dim(f.dim(), alpha.dim())?;
    check_dim(f.dim(), xi.len())?;
    f.require(&LatticeBox::stencil(xi, &alpha_extent(alpha, 1)))?;
    let mut rem = alpha.entries().to_vec();
    Ok(iterate(f, &mut rem, &mut xi.to_vec(), 1))
}

/// (Delta^alpha)^T f(xi) by iterated backward steps phi(xi) - phi(xi - v_j).
pub fn transpose_difference<T: Scalar>(
    f: &LatticeFunction<T>,
    alpha: &MultiIndex,
    xi: &[i64],
) -> Result<T> {
    check_dim(f.dim(), alpha.dim())?;
    check_dim(f.dim(), xi.len())?;
    f.require(&LatticeBox::stencil(xi, &alpha_extent(alpha, -1)))?;
    let mut rem = alpha.entries().to_vec();
    Ok(iterate(f, &mut rem, &mut xi.to_vec(), -1))
}

fn iterate<T: Scalar>(f: &LatticeFunction<T>, rem: &mut [u32], p: &mut [i64], dir: i64) -> T {
    let Some(j) = rem.iter().position(|&a| a > 0) else {
        return f.eval_unchecked(p);
    };
    rem[j] -= 1;
    let here = iterate(f, rem, p, dir);
    p[j] += dir;
    let there = iterate(f, rem, p, dir);
    p[j] -= dir;
    rem[j] += 1;
    if dir > 0 {
        there - here
    } else {
        here - there
    }
}

/// x^{(gamma)}: x(x-1)...(x-gamma+1) for gamma > 0, 1 for gamma = 0 and
/// prod_{i=gamma+1}^{0} (x-i)^{-1} for gamma < 0.
pub fn falling_factorial_1d(x: i64, gamma: i64) -> Result<BigRational> {
    let mut acc = BigInt::one();
    if gamma >= 0 {
        for i in 0..gamma {
            acc *= x - i;
        }
        return Ok(BigRational::from_integer(acc));
    }
    for i in (gamma + 1)..=0 {
        let f = x - i;
        if f == 0 {
            return Err(Error::DivisionByZero(format!("{x}^({gamma}) has factor ({x}-{i})")));
        }
        acc *= f;
    }
    Ok(BigRational::new(BigInt::one(), acc))
}

/// prod_j xi_j^{(gamma_j)} in exact arithmetic.
pub fn falling_factorial(xi: &[i64], gamma: &[i64]) -> Result<BigRational> {
    check_dim(xi.len(), gamma.len())?;
    let mut acc = BigRational::one();
    for (&x, &g) in xi.iter().zip(gamma) {
        acc *= falling_factorial_1d(x, g)?;
    }
    Ok(acc)
}

/// Floating-point xi^{(alpha)} for a non-negative multi-index.
pub fn falling_factorial_f64(xi: &[i64], alpha: &MultiIndex) -> f64 {
    xi.iter()
        .zip(alpha.entries())
        .map(|(&x, &a)| (0..a as i64).map(|i| (x - i) as f64).product::<f64>())
        .product()
}

/// Falling factorial of a real argument, t(t-1)...(t-k+1).
pub fn falling_factorial_real(t: f64, k: u32) -> f64 {
    (0..k).map(|i| t - i as f64).product()
}

/// Depth-`depth` chain I^{b}_{k_1} I^{k_1}_{k_2} ... 1 with
/// I^b_k = sum_{0<=k<b} for b >= 0 and -sum_{b<=k<0} for b < 0.
pub fn nested_chain(b: i64, depth: u32) -> BigInt {
    let lo = b.min(0);
    let hi = b.max(0);
    let width = (hi - lo + 1) as usize;
    let mut cur = vec![BigInt::one(); width];
    for _ in 0..depth {
        // prefix[i] = sum of cur over [lo, lo+i)
        let mut prefix = Vec::with_capacity(width + 1);
        prefix.push(BigInt::zero());
        for v in &cur {
            let next = prefix.last().unwrap() + v;
            prefix.push(next);
        }
        let zero_at = (-lo) as usize;
        let next: Vec<BigInt> = (0..width)
            .map(|i| {
                if i >= zero_at {
                    &prefix[i] - &prefix[zero_at]
                } else {
                    -(&prefix[zero_at] - &prefix[i])
                }
            })
            .collect();
        cur = next;
    }
    cur[(b - lo) as usize].clone()
}

/// Product over axes of the nested-sum chains; equals theta^{(alpha)}/alpha!.
pub fn nested_sum(theta: &[i64], alpha: &MultiIndex) -> Result<BigRational> {
    check_dim(theta.len(), alpha.dim())?;
    let mut acc = BigInt::one();
    for (&t, &a) in theta.iter().zip(alpha.entries()) {
        acc *= nested_chain(t, a);
    }
    Ok(BigRational::from_integer(acc))
}
