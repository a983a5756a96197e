use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{falling_factorial, forward_difference, LatticeBox, LatticeFunction, MultiIndex, Scalar};
use crate::error::{check_dim, Result};

/// Which lattice points the remainder bound maximises over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StencilRegion {
    /// Points actually visited by the nested-sum representation of the
    /// remainder: for alpha with first nonzero axis m, the points
    /// (eta_1, ..., eta_{m-1}, k, 0, ..., 0) with k between 0 and eta_m
    /// (exclusive of eta_m).
    #[default]
    Path,
    /// The closed box between 0 and eta.
    Box,
}

/// Falling-factorial Taylor polynomial of a lattice function at `center`.
#[derive(Clone, Debug)]
pub struct TaylorExpansion<T> {
    center: Vec<i64>,
    order: u32,
    terms: Vec<(MultiIndex, T)>,
}

impl<T: Scalar> TaylorExpansion<T> {
    pub fn center(&self) -> &[i64] {
        &self.center
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Pairs (alpha, Delta^alpha f(xi) / alpha!) for |alpha| < order.
    pub fn terms(&self) -> &[(MultiIndex, T)] {
        &self.terms
    }

    /// sum_alpha coeff_alpha * eta^{(alpha)}.
    pub fn evaluate(&self, eta: &[i64]) -> Result<T> {
        check_dim(self.center.len(), eta.len())?;
        let mut acc = T::zero();
        for (alpha, c) in &self.terms {
            let g: Vec<i64> = alpha.entries().iter().map(|&a| a as i64).collect();
            acc = acc + c.clone() * T::from_rational(&falling_factorial(eta, &g)?);
        }
        Ok(acc)
    }
}

pub fn taylor_expand<T: Scalar>(
    f: &LatticeFunction<T>,
    xi: &[i64],
    order: u32,
) -> Result<TaylorExpansion<T>> {
    check_dim(f.dim(), xi.len())?;
    let alphas = MultiIndex::below_order(f.dim(), order);
    for a in &alphas {
        let ext: Vec<i64> = a.entries().iter().map(|&v| v as i64).collect();
        f.require(&LatticeBox::stencil(xi, &ext))?;
    }
    let mut terms = Vec::with_capacity(alphas.len());
    for a in alphas {
        let d = forward_difference(f, &a, xi)?;
        let inv = BigRational::new(One::one(), a.factorial_big());
        terms.push((a, d * T::from_rational(&inv)));
    }
    Ok(TaylorExpansion { center: xi.to_vec(), order, terms })
}

/// r_N(xi, eta) = f(xi + eta) - sum_{|alpha|<N} Delta^alpha f(xi) eta^{(alpha)} / alpha!.
pub fn taylor_remainder<T: Scalar>(
    f: &LatticeFunction<T>,
    xi: &[i64],
    eta: &[i64],
    order: u32,
) -> Result<T> {
    check_dim(xi.len(), eta.len())?;
    let expansion = taylor_expand(f, xi, order)?;
    let target: Vec<i64> = xi.iter().zip(eta).map(|(a, b)| a + b).collect();
    Ok(f.eval(&target)? - expansion.evaluate(eta)?)
}

/// Bound on |Delta^omega_xi r_N(xi, eta)| over the default path region.
pub fn remainder_bound<T: Scalar>(
    f: &LatticeFunction<T>,
    xi: &[i64],
    eta: &[i64],
    order: u32,
    omega: &MultiIndex,
) -> Result<f64> {
    remainder_bound_in(f, xi, eta, order, omega, StencilRegion::Path)
}

/// sum_{|alpha|=N} |eta^{(alpha)}| / alpha! * max_{nu} |Delta^{alpha+omega} f(xi+nu)|.
pub fn remainder_bound_in<T: Scalar>(
    f: &LatticeFunction<T>,
    xi: &[i64],
    eta: &[i64],
    order: u32,
    omega: &MultiIndex,
    region: StencilRegion,
) -> Result<f64> {
    let n = f.dim();
    check_dim(n, xi.len())?;
    check_dim(n, eta.len())?;
    check_dim(n, omega.dim())?;

    // Every stencil lies in Q(eta) + [0, N + omega_j] per axis.
    let q = LatticeBox::stencil(xi, eta);
    let grow: Vec<i64> = omega.entries().iter().map(|&w| order as i64 + w as i64).collect();
    let hull = q.extend_hi(&grow);
    f.require(&hull)?;
    let table: Vec<T> = hull.points().map(|p| f.eval(&p)).collect::<Result<_>>()?;

    let mut total = 0.0;
    for alpha in MultiIndex::of_order(n, order) {
        let g: Vec<i64> = alpha.entries().iter().map(|&a| a as i64).collect();
        let weight = falling_factorial(eta, &g)?;
        if weight.is_zero() {
            continue;
        }
        let weight = weight.magnitude() / alpha.factorial_big().to_f64().unwrap_or(f64::INFINITY);
        let diff = alpha.add(omega)?;
        let mut worst = 0.0f64;
        for nu in region_points(&alpha, eta, region) {
            let at: Vec<i64> = xi.iter().zip(&nu).map(|(a, b)| a + b).collect();
            worst = worst.max(table_difference(&hull, &table, &diff, &at).magnitude());
        }
        total += weight * worst;
    }
    Ok(total)
}

fn region_points(alpha: &MultiIndex, eta: &[i64], region: StencilRegion) -> Vec<Vec<i64>> {
    match region {
        StencilRegion::Box => {
            let zeros = vec![0; eta.len()];
            LatticeBox::stencil(&zeros, eta).points().collect()
        }
        StencilRegion::Path => {
            let Some(m) = alpha.first_nonzero() else {
                return vec![vec![0; eta.len()]];
            };
            let range: Vec<i64> = if eta[m] >= 0 { (0..eta[m]).collect() } else { (eta[m]..0).collect() };
            range
                .into_iter()
                .map(|k| {
                    let mut p = vec![0; eta.len()];
                    p[..m].copy_from_slice(&eta[..m]);
                    p[m] = k;
                    p
                })
                .collect()
        }
    }
}

fn table_difference<T: Scalar>(hull: &LatticeBox, table: &[T], alpha: &MultiIndex, at: &[i64]) -> T {
    let total = alpha.order();
    let mut acc = T::zero();
    let mut p = at.to_vec();
    for beta in alpha.below() {
        for k in 0..at.len() {
            p[k] = at[k] + beta.entries()[k] as i64;
        }
        let c = alpha.binomial(&beta) as i64;
        let c = if (total - beta.order()) % 2 == 1 { -c } else { c };
        let v = table[hull.index_of(&p).expect("stencil inside validated hull")].clone();
        acc = acc + T::from_i64(c) * v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn cube() -> LatticeFunction<BigRational> {
        LatticeFunction::from_rule(1, |p: &[i64]| BigRational::from_integer(BigInt::from(p[0].pow(3))))
    }

    #[test]
    fn square_expansion_is_exact() {
        let f = LatticeFunction::from_rule(1, |p: &[i64]| BigRational::from_integer(BigInt::from(p[0] * p[0])));
        let e = taylor_expand(&f, &[0], 3).unwrap();
        let coeffs: Vec<String> = e.terms().iter().map(|(_, c)| c.to_string()).collect();
        assert_eq!(coeffs, vec!["0", "1", "1"]);
        for eta in -5..6 {
            assert_eq!(e.evaluate(&[eta]).unwrap(), BigRational::from_integer(BigInt::from(eta * eta)));
        }
    }

    #[test]
    fn cubic_remainder_and_bounds() {
        let f = cube();
        let r = taylor_remainder(&f, &[0], &[3], 2).unwrap();
        assert_eq!(r, BigRational::from_integer(BigInt::from(24)));
        let zero = MultiIndex::zeros(1);
        assert_eq!(remainder_bound(&f, &[0], &[3], 2, &zero).unwrap(), 54.0);
        assert_eq!(remainder_bound_in(&f, &[0], &[3], 2, &zero, StencilRegion::Box).unwrap(), 72.0);
    }

    #[test]
    fn remainder_vanishes_below_order() {
        let f = LatticeFunction::from_rule(1, |p: &[i64]| Complex::new((p[0] as f64 / 10.0).cos(), (p[0] as f64 / 10.0).sin()));
        for n in 1..4u32 {
            for eta in 0..n as i64 {
                assert!(taylor_remainder(&f, &[2], &[eta], n).unwrap().norm() < 1e-15);
            }
        }
    }

    #[test]
    fn linear_has_zero_second_order_bound() {
        let f = LatticeFunction::from_rule(1, |p: &[i64]| 3.0 * p[0] as f64 - 1.0);
        assert_eq!(remainder_bound(&f, &[1], &[4], 2, &MultiIndex::zeros(1)).unwrap(), 0.0);
    }

    use num_complex::Complex64 as Complex;
}
