use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::theta::ThetaHatTable;
use super::ToroidalSymbol;
use crate::diffcalc::{LatticeBox, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::grid::{FrequencyWindow, TorusGrid};
use crate::numerics::central_stencil;

pub const DEFAULT_EXTENSION_RADIUS: usize = 12;
const DERIVATIVE_STEP: f64 = 1.0 / 16.0;
const DERIVATIVE_ACCURACY: usize = 4;

/// Truncation radius of the extension sum, with an optional tolerance
/// the neglected tail must meet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionSettings {
    pub radius: usize,
    pub tolerance: Option<f64>,
}

impl Default for ExtensionSettings {
    fn default() -> Self {
        ExtensionSettings { radius: DEFAULT_EXTENSION_RADIUS, tolerance: None }
    }
}

impl ExtensionSettings {
    pub fn with_radius(radius: usize) -> Self {
        ExtensionSettings { radius, tolerance: None }
    }

    /// Smallest radius whose tail weight in dimension `dim` is below `tolerance`.
    pub fn for_tolerance(table: &ThetaHatTable, tolerance: f64, dim: usize) -> Result<Self> {
        let radius = table.radius_for_tolerance(tolerance, dim).ok_or_else(|| {
            Error::Tolerance(format!("no truncation radius reaches tail weight {tolerance:e}"))
        })?;
        Ok(ExtensionSettings { radius, tolerance: Some(tolerance) })
    }
}

/// a(x, xi) = sum_{|eta - round(xi)|_inf <= R} theta_hat(xi - eta) sigma(x, eta)
/// for real xi.
#[derive(Clone)]
pub struct ExtendedSymbol {
    symbol: ToroidalSymbol,
    table: Arc<ThetaHatTable>,
    radius: usize,
    tail: f64,
}

impl fmt::Debug for ExtendedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtendedSymbol")
            .field("symbol", &self.symbol)
            .field("radius", &self.radius)
            .field("tail", &self.tail)
            .finish()
    }
}

pub fn extend_symbol(
    sigma: &ToroidalSymbol,
    table: Arc<ThetaHatTable>,
    settings: ExtensionSettings,
) -> Result<ExtendedSymbol> {
    if settings.radius > table.max_radius() {
        return Err(Error::InvalidArgument(format!(
            "radius {} exceeds theta_hat table range {}",
            settings.radius,
            table.range()
        )));
    }
    let tail = table.tail_weight(settings.radius, sigma.dim());
    if let Some(tol) = settings.tolerance {
        if tail > tol {
            return Err(Error::Tolerance(format!(
                "truncation radius {} leaves tail weight {tail:.2e} above {tol:.2e}",
                settings.radius
            )));
        }
    }
    Ok(ExtendedSymbol { symbol: sigma.clone(), table, radius: settings.radius, tail })
}

impl ExtendedSymbol {
    pub fn symbol(&self) -> &ToroidalSymbol {
        &self.symbol
    }

    pub fn table(&self) -> &Arc<ThetaHatTable> {
        &self.table
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.symbol.dim()
    }

    /// Relative bound on the neglected part of the sum for bounded symbols.
    pub fn tail_weight(&self) -> f64 {
        self.tail
    }

    /// Integer frequencies the sum at `xi` touches.
    pub fn stencil(&self, xi: &[f64]) -> LatticeBox {
        let r = self.radius as i64;
        let lo: Vec<i64> = xi.iter().map(|v| v.round() as i64 - r).collect();
        let hi: Vec<i64> = xi.iter().map(|v| v.round() as i64 + r).collect();
        LatticeBox::new(lo, hi).expect("ordered bounds")
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        let n = self.dim();
        check_dim(n, x.len())?;
        check_dim(n, xi.len())?;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("extension frequency".into()));
        }
        let stencil = self.stencil(xi);
        if let Some(d) = self.symbol.domain() {
            if !d.contains_box(&stencil) {
                return Err(Error::OutOfDomain {
                    point: if d.contains(stencil.lo()) { stencil.hi().to_vec() } else { stencil.lo().to_vec() },
                    window: d.to_string(),
                });
            }
        }
        let width = 2 * self.radius + 1;
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                (0..width)
                    .map(|k| self.table.eval(xi[j] - (stencil.lo()[j] + k as i64) as f64))
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; n];
        let mut eta = stencil.lo().to_vec();
        for lin in 0..width.pow(n as u32) {
            crate::numerics::unravel(lin, width, n, &mut idx);
            let mut w = 1.0;
            for j in 0..n {
                w *= weights[j][idx[j]];
                eta[j] = stencil.lo()[j] + idx[j] as i64;
            }
            if w != 0.0 {
                acc += self.symbol.eval(x, &eta) * w;
            }
        }
        Ok(acc)
    }

    /// d_xi^alpha a(x, xi) by central differences at step 1/16, fourth order.
    pub fn derivative(&self, x: &[f64], xi: &[f64], alpha: &MultiIndex) -> Result<Complex64> {
        check_dim(self.dim(), alpha.dim())?;
        if alpha.is_zero() {
            return self.eval(x, xi);
        }
        let stencils: Vec<(Vec<i64>, Vec<f64>)> = alpha
            .entries()
            .iter()
            .map(|&a| if a == 0 { (vec![0], vec![1.0]) } else { central_stencil(a as usize, DERIVATIVE_ACCURACY) })
            .collect();
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; n];
        let mut pt = xi.to_vec();
        'outer: loop {
            let mut w = 1.0;
            for k in 0..n {
                let (off, wt) = &stencils[k];
                pt[k] = xi[k] + off[idx[k]] as f64 * DERIVATIVE_STEP;
                w *= wt[idx[k]];
            }
            if w != 0.0 {
                acc += self.eval(x, &pt)? * w;
            }
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < stencils[k].0.len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        Ok(acc / DERIVATIVE_STEP.powi(alpha.order() as i32))
    }

    /// max over grid x window of |a(x, xi) - sigma(x, xi)| at integer xi.
    pub fn restriction_error(&self, grid: TorusGrid, window: FrequencyWindow) -> Result<f64> {
        check_dim(self.dim(), grid.dim())?;
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.node(i);
            for xi in window.iter() {
                let real: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
                let d = (self.eval(&x, &real)? - self.symbol.eval(&x, &xi)).norm();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{theta_hat, SymbolOrder};

    #[test]
    fn constant_symbol_extends_to_one() {
        let table = ThetaHatTable::shared();
        let one = ToroidalSymbol::new(1, SymbolOrder::default(), |_, _| Complex64::new(1.0, 0.0));
        let settings = ExtensionSettings::for_tolerance(&table, 1e-9, 1).unwrap();
        let a = extend_symbol(&one, table, settings).unwrap();
        for &xi in &[0.0, 0.3, 0.7, -4.45] {
            assert!((a.eval(&[0.0], &[xi]).unwrap() - 1.0).norm() < 1e-8, "{xi}");
        }
    }

    #[test]
    fn delta_symbol_extends_to_theta_hat() {
        let table = ThetaHatTable::shared();
        let delta = ToroidalSymbol::new(1, SymbolOrder::default(), |_, xi| {
            Complex64::new(if xi[0] == 0 { 1.0 } else { 0.0 }, 0.0)
        });
        let a = extend_symbol(&delta, table.clone(), ExtensionSettings::default()).unwrap();
        for &xi in &[0.0, 0.25, -1.6, 3.3] {
            let expect = theta_hat(table.theta(), xi);
            assert!((a.eval(&[1.0], &[xi]).unwrap() - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn tolerance_and_domain_are_enforced() {
        let table = ThetaHatTable::shared();
        let one = ToroidalSymbol::new(1, SymbolOrder::default(), |_, _| Complex64::new(1.0, 0.0));
        let strict = ExtensionSettings { radius: 2, tolerance: Some(1e-12) };
        assert!(matches!(extend_symbol(&one, table.clone(), strict), Err(Error::Tolerance(_))));
        let boxed = one.with_domain(LatticeBox::cube(1, -20, 20).unwrap());
        let a = extend_symbol(&boxed, table, ExtensionSettings::default()).unwrap();
        assert!(a.eval(&[0.0], &[5.0]).is_ok());
        assert!(matches!(a.eval(&[0.0], &[10.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn derivative_of_linear_symbol() {
        let table = ThetaHatTable::shared();
        let lin = ToroidalSymbol::new(1, SymbolOrder::with_m(1.0), |_, xi| Complex64::new(xi[0] as f64, 0.0));
        let a = extend_symbol(&lin, table, ExtensionSettings::with_radius(30)).unwrap();
        let d = a.derivative(&[0.0], &[0.4], &MultiIndex::new(vec![1])).unwrap();
        assert!((d.re - 1.0).abs() < 1e-6, "{d}");
    }
}
