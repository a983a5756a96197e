//! Toroidal symbols and amplitudes, class-constant estimation, the bump
//! function theta and extension of symbols to real frequencies.

mod extension;
mod theta;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcalc::{binom, LatticeBox, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::grid::{spectral_derivative, FrequencyWindow, GridFunction, TorusGrid};
use crate::numerics::bracket_i;

pub use crate::numerics::japanese_bracket;
pub use extension::{extend_symbol, ExtendedSymbol, ExtensionSettings, DEFAULT_EXTENSION_RADIUS};
pub use theta::{
    build_theta, phi_alpha, phi_alpha_nd, theta_hat, theta_hat_nd, ThetaFunction, ThetaHatTable,
    DEFAULT_THETA_RESOLUTION, THETA_HAT_SPACING, THETA_HAT_STENCIL,
};

/// Declared class S^m_{rho,delta}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolOrder {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
}

impl Default for SymbolOrder {
    fn default() -> Self {
        SymbolOrder { m: 0.0, rho: 1.0, delta: 0.0 }
    }
}

impl SymbolOrder {
    pub fn new(m: f64, rho: f64, delta: f64) -> Self {
        SymbolOrder { m, rho, delta }
    }

    pub fn with_m(m: f64) -> Self {
        SymbolOrder { m, ..Default::default() }
    }

    /// Checks 0 <= delta < rho <= 1.
    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() || !(0.0 <= self.delta && self.delta < self.rho && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "class (m={}, rho={}, delta={}) needs 0 <= delta < rho <= 1",
                self.m, self.rho, self.delta
            )));
        }
        Ok(())
    }

    /// Exponent m - rho|alpha| + delta|beta|.
    pub fn weight_exponent(&self, alpha: u32, beta: u32) -> f64 {
        self.m - self.rho * alpha as f64 + self.delta * beta as f64
    }
}

/// Symbol values on grid nodes x window frequencies, x-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    grid: TorusGrid,
    window: FrequencyWindow,
    values: Vec<Complex64>,
}

impl SymbolTable {
    pub fn new(grid: TorusGrid, window: FrequencyWindow, values: Vec<Complex64>) -> Result<Self> {
        window.check_grid(&grid)?;
        if values.len() != grid.len() * window.len() {
            return Err(Error::InvalidArgument(format!(
                "symbol table has {} values, expected {}",
                values.len(),
                grid.len() * window.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("symbol table entry".into()));
        }
        Ok(SymbolTable { grid, window, values })
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

    pub fn get(&self, x_index: usize, xi_index: usize) -> Complex64 {
        self.values[x_index * self.window.len() + xi_index]
    }
}

type SymbolRule = dyn Fn(&[f64], &[i64]) -> Complex64 + Send + Sync;
type AmplitudeRule = dyn Fn(&[f64], &[f64], &[i64]) -> Complex64 + Send + Sync;

/// sigma(x, xi) on T^n x Z^n.
#[derive(Clone)]
pub struct ToroidalSymbol {
    dim: usize,
    order: SymbolOrder,
    rule: Arc<SymbolRule>,
    domain: Option<LatticeBox>,
    table: Option<Arc<SymbolTable>>,
}

impl fmt::Debug for ToroidalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToroidalSymbol")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("domain", &self.domain)
            .field("tabulated", &self.table.is_some())
            .finish()
    }
}

impl ToroidalSymbol {
    pub fn new(
        dim: usize,
        order: SymbolOrder,
        rule: impl Fn(&[f64], &[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        ToroidalSymbol { dim, order, rule: Arc::new(rule), domain: None, table: None }
    }

    /// Symbol sigma(xi) independent of x.
    pub fn multiplier(
        dim: usize,
        order: SymbolOrder,
        rule: impl Fn(&[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(dim, order, move |_, xi| rule(xi))
    }

    /// Restrict the frequencies at which the rule may be evaluated.
    pub fn with_domain(mut self, domain: LatticeBox) -> Self {
        self.domain = Some(domain);
        self
    }

    /// Tabulated symbol; x is snapped to the nearest grid node.
    pub fn from_table(table: SymbolTable, order: SymbolOrder) -> Self {
        let table = Arc::new(table);
        let t = table.clone();
        let rule = move |x: &[f64], xi: &[i64]| match t.window.index_of(xi) {
            Some(w) => t.get(t.grid.snap(x), w),
            None => Complex64::new(f64::NAN, f64::NAN),
        };
        ToroidalSymbol {
            dim: table.grid.dim(),
            order,
            rule: Arc::new(rule),
            domain: Some(table.window.lattice_box()),
            table: Some(table),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> SymbolOrder {
        self.order
    }

    pub fn domain(&self) -> Option<&LatticeBox> {
        self.domain.as_ref()
    }

    pub fn table(&self) -> Option<&SymbolTable> {
        self.table.as_deref()
    }

    /// Evaluate without the domain check.
    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[i64]) -> Complex64 {
        (self.rule)(x, xi)
    }

    pub fn try_eval(&self, x: &[f64], xi: &[i64]) -> Result<Complex64> {
        check_dim(self.dim, xi.len())?;
        if let Some(d) = &self.domain {
            d.require(xi)?;
        }
        Ok(self.eval(x, xi))
    }

    pub fn require(&self, frequencies: &LatticeBox) -> Result<()> {
        check_dim(self.dim, frequencies.dim())?;
        match &self.domain {
            Some(d) if !d.contains_box(frequencies) => Err(Error::OutOfDomain {
                point: if d.contains(frequencies.lo()) { frequencies.hi().to_vec() } else { frequencies.lo().to_vec() },
                window: d.to_string(),
            }),
            _ => Ok(()),
        }
    }

    pub fn tabulate(&self, grid: TorusGrid, window: FrequencyWindow) -> Result<SymbolTable> {
        check_dim(self.dim, grid.dim())?;
        self.require(&window.lattice_box())?;
        let values: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = grid.node(i);
                window.iter().map(move |xi| self.eval(&x, &xi)).collect::<Vec<_>>()
            })
            .collect();
        SymbolTable::new(grid, window, values)
    }
}

/// a(x, y, xi) on T^n x T^n x Z^n.
#[derive(Clone)]
pub struct TorusAmplitude {
    dim: usize,
    order: SymbolOrder,
    rule: Arc<AmplitudeRule>,
    domain: Option<LatticeBox>,
}

impl fmt::Debug for TorusAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusAmplitude")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("domain", &self.domain)
            .finish()
    }
}

impl TorusAmplitude {
    pub fn new(
        dim: usize,
        order: SymbolOrder,
        rule: impl Fn(&[f64], &[f64], &[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        TorusAmplitude { dim, order, rule: Arc::new(rule), domain: None }
    }

    /// a(x, y, xi) = sigma(x, xi).
    pub fn from_symbol(sigma: &ToroidalSymbol) -> Self {
        let s = sigma.clone();
        TorusAmplitude {
            dim: sigma.dim,
            order: sigma.order,
            rule: Arc::new(move |x, _y, xi| s.eval(x, xi)),
            domain: sigma.domain.clone(),
        }
    }

    pub fn with_domain(mut self, domain: LatticeBox) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> SymbolOrder {
        self.order
    }

    pub fn domain(&self) -> Option<&LatticeBox> {
        self.domain.as_ref()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64], xi: &[i64]) -> Complex64 {
        (self.rule)(x, y, xi)
    }

    pub fn require(&self, frequencies: &LatticeBox) -> Result<()> {
        check_dim(self.dim, frequencies.dim())?;
        match &self.domain {
            Some(d) if !d.contains_box(frequencies) => Err(Error::OutOfDomain {
                point: frequencies.hi().to_vec(),
                window: d.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

/// One entry of a class-constant table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConstant {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub constant: f64,
}

/// sup over grid x window of |Delta^alpha d_x^beta sigma| <xi>^{-(m - rho|alpha| + delta|beta|)}
/// for every alpha <= alpha_max, beta <= beta_max.
pub fn class_constants(
    sigma: &ToroidalSymbol,
    alpha_max: &MultiIndex,
    beta_max: &MultiIndex,
    grid: TorusGrid,
    window: FrequencyWindow,
) -> Result<Vec<ClassConstant>> {
    check_dim(sigma.dim(), alpha_max.dim())?;
    check_dim(sigma.dim(), beta_max.dim())?;
    window.check_grid(&grid)?;
    let reach: Vec<i64> = alpha_max.entries().iter().map(|&a| a as i64).collect();
    sigma.require(&window.lattice_box().extend_hi(&reach))?;
    let order = sigma.order();

    let mut out = vec![];
    for alpha in alpha_max.below() {
        // Delta^alpha sigma(., xi) on the grid, one function per window frequency.
        let diffs: Vec<GridFunction> = window
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|xi| {
                GridFunction::from_fn(grid, |x| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut p = xi.clone();
                    for beta in alpha.below() {
                        for k in 0..xi.len() {
                            p[k] = xi[k] + beta.entries()[k] as i64;
                        }
                        let c = alpha
                            .entries()
                            .iter()
                            .zip(beta.entries())
                            .map(|(&a, &b)| binom(a as u64, b as u64) as f64)
                            .product::<f64>();
                        let sign = if (alpha.order() - beta.order()) % 2 == 1 { -1.0 } else { 1.0 };
                        acc += sigma.eval(x, &p) * (sign * c);
                    }
                    acc
                })
            })
            .collect();
        for beta in beta_max.below() {
            let mut sup = 0.0f64;
            for (xi, d) in window.iter().zip(&diffs) {
                let g = spectral_derivative(d, &beta)?;
                let w = bracket_i(&xi).powf(-order.weight_exponent(alpha.order(), beta.order()));
                sup = sup.max(g.max_abs() * w);
            }
            out.push(ClassConstant { alpha: alpha.clone(), beta, constant: sup });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_validation() {
        assert!(SymbolOrder::new(1.0, 1.0, 0.0).validate().is_ok());
        assert!(SymbolOrder::new(1.0, 0.5, 0.5).validate().is_err());
        assert!(SymbolOrder::new(1.0, 1.5, 0.0).validate().is_err());
    }

    #[test]
    fn tabulated_symbol_round_trip() {
        let g = TorusGrid::new(1, 8).unwrap();
        let w = FrequencyWindow::new(1, 4).unwrap();
        let s = ToroidalSymbol::new(1, SymbolOrder::default(), |x, xi| Complex64::new(x[0], xi[0] as f64));
        let t = s.tabulate(g, w).unwrap();
        let back = ToroidalSymbol::from_table(t, SymbolOrder::default());
        let x = g.node(3);
        assert_eq!(back.eval(&x, &[-2]), s.eval(&x, &[-2]));
        assert!(back.try_eval(&x, &[4]).is_err());
    }

    #[test]
    fn class_constants_of_simple_symbols() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = FrequencyWindow::new(1, 8).unwrap();
        let one = ToroidalSymbol::new(1, SymbolOrder::default(), |_, _| Complex64::new(1.0, 0.0));
        for c in class_constants(&one, &MultiIndex::new(vec![2]), &MultiIndex::new(vec![1]), g, w).unwrap() {
            let expect = if c.alpha.is_zero() && c.beta.is_zero() { 1.0 } else { 0.0 };
            assert!((c.constant - expect).abs() < 1e-12, "{c:?}");
        }
        let wave = ToroidalSymbol::new(1, SymbolOrder::default(), |x, _| Complex64::from_polar(1.0, x[0]));
        for c in class_constants(&wave, &MultiIndex::new(vec![0]), &MultiIndex::new(vec![3]), g, w).unwrap() {
            assert!((c.constant - 1.0).abs() < 1e-12, "{c:?}");
        }
    }
}
