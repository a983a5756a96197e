use std::fmt;
use std::ops::Deref;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{check_dim, Error, Result};

/// Largest order for which `factorial` is guaranteed to fit in a `u64`.
pub const MAX_FACTORIAL_ORDER: u32 = 20;

/// Multi-index alpha in N^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// alpha! = prod alpha_j!, exact for |alpha| <= 20.
    pub fn factorial(&self) -> Result<u64> {
        if self.order() > MAX_FACTORIAL_ORDER {
            return Err(Error::InvalidArgument(format!(
                "factorial of {self} exceeds order {MAX_FACTORIAL_ORDER}"
            )));
        }
        Ok(self.0.iter().map(|&a| (1..=a as u64).product::<u64>()).product())
    }

    pub fn factorial_big(&self) -> BigInt {
        let mut acc = BigInt::one();
        for &a in &self.0 {
            for k in 2..=a {
                acc *= k;
            }
        }
        acc
    }

    /// Componentwise comparison beta <= alpha.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// prod_j C(alpha_j, beta_j); zero unless beta <= alpha.
    pub fn binomial(&self, beta: &MultiIndex) -> u64 {
        if !beta.le(self) {
            return 0;
        }
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&a, &b)| binom(a as u64, b as u64))
            .product()
    }

    pub fn checked_sub(&self, beta: &MultiIndex) -> Option<MultiIndex> {
        if !beta.le(self) {
            return None;
        }
        Some(MultiIndex(self.0.iter().zip(&beta.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        check_dim(self.dim(), other.dim())?;
        Ok(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    /// All beta with beta <= alpha, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![];
        let mut cur = vec![0u32; self.dim()];
        loop {
            out.push(MultiIndex(cur.clone()));
            let mut k = self.dim();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < self.0[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
            }
        }
    }

    /// All multi-indices of dimension `dim` with |alpha| = order.
    pub fn of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() + 1 == dim {
                cur.push(left);
                out.push(MultiIndex(cur.clone()));
                cur.pop();
                return;
            }
            for a in (0..=left).rev() {
                cur.push(a);
                rec(dim, left - a, cur, out);
                cur.pop();
            }
        }
        let mut out = vec![];
        if dim == 0 {
            if order == 0 {
                out.push(MultiIndex(vec![]));
            }
            return out;
        }
        rec(dim, order, &mut vec![], &mut out);
        out
    }

    /// All multi-indices with |alpha| < bound.
    pub fn below_order(dim: usize, bound: u32) -> Vec<MultiIndex> {
        (0..bound).flat_map(|k| MultiIndex::of_order(dim, k)).collect()
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.0.iter().position(|&a| a != 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl serde::Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde::Serialize::serialize(self.entries(), s)
    }
}

impl<'de> serde::Deserialize<'de> for MultiIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <Vec<u32> as serde::Deserialize>::deserialize(d).map(MultiIndex::new)
    }
}

pub(crate) fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Lattice point in Z^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(entries: Vec<i64>) -> Self {
        LatticePoint(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }
}

impl Deref for LatticePoint {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Closed integer box prod_j [lo_j, hi_j].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(LatticeBox { lo, hi })
    }

    pub fn cube(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        LatticeBox::new(vec![lo; dim], vec![hi; dim])
    }

    /// Smallest box containing `base + [0, extent]` per axis.
    pub fn stencil(base: &[i64], extent: &[i64]) -> Self {
        let lo = base.iter().zip(extent).map(|(b, e)| b + e.min(&0)).collect();
        let hi = base.iter().zip(extent).map(|(b, e)| b + e.max(&0)).collect();
        LatticeBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn hull(&self, other: &LatticeBox) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    /// Grow the upper corner by `by` per axis.
    pub fn extend_hi(&self, by: &[i64]) -> LatticeBox {
        LatticeBox {
            lo: self.lo.clone(),
            hi: self.hi.iter().zip(by).map(|(h, b)| h + b).collect(),
        }
    }

    /// Grow the lower corner by `by` per axis.
    pub fn extend_lo(&self, by: &[i64]) -> LatticeBox {
        LatticeBox {
            lo: self.lo.iter().zip(by).map(|(l, b)| l - b).collect(),
            hi: self.hi.clone(),
        }
    }

    /// Row-major position of `p`, if inside.
    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for k in 0..self.dim() {
            idx = idx * self.extent(k) + (p[k] - self.lo[k]) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut p = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let e = self.extent(k);
            p[k] = self.lo[k] + (idx % e) as i64;
            idx /= e;
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn require(&self, p: &[i64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { point: p.to_vec(), window: self.to_string() })
        }
    }
}

impl fmt::Display for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.lo.iter().zip(&self.hi).map(|(l, h)| format!("[{l},{h}]")).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_and_binomial() {
        let a = MultiIndex::new(vec![3, 2]);
        assert_eq!(a.order(), 5);
        assert_eq!(a.factorial().unwrap(), 12);
        assert_eq!(a.binomial(&MultiIndex::new(vec![1, 1])), 6);
        assert_eq!(a.binomial(&MultiIndex::new(vec![4, 0])), 0);
        assert_eq!(MultiIndex::new(vec![20]).factorial().unwrap(), 2432902008176640000);
        assert!(MultiIndex::new(vec![11, 10]).factorial().is_err());
        assert_eq!(MultiIndex::new(vec![21]).factorial_big().to_string(), "51090942171709440000");
    }

    #[test]
    fn enumerations() {
        assert_eq!(MultiIndex::new(vec![2, 1]).below().len(), 6);
        assert_eq!(MultiIndex::of_order(2, 3).len(), 4);
        assert_eq!(MultiIndex::of_order(3, 2).len(), 6);
        assert_eq!(MultiIndex::below_order(2, 3).len(), 6);
        assert!(MultiIndex::of_order(3, 4).iter().all(|a| a.order() == 4));
    }

    #[test]
    fn box_indexing_round_trips() {
        let b = LatticeBox::new(vec![-2, 1], vec![1, 3]).unwrap();
        assert_eq!(b.len(), 12);
        for i in 0..b.len() {
            assert_eq!(b.index_of(&b.point(i)), Some(i));
        }
        assert!(b.index_of(&[2, 1]).is_none());
        assert_eq!(b.to_string(), "[-2,1]x[1,3]");
    }
}
