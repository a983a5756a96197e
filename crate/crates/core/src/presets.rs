//! Named presets in the form `name key=value key=value`.
//!
//! Symbols: `const c= ci=`, `bracket m=`, `exp-bracket m= k=`,
//! `cos-bracket m= a= b= k=`, `table path=`.
//! Amplitudes: `const c= ci=`, `y-exp m= k=`, `trig m= b= ax= ay= axy= sxy=`.
//! Phases: `linear`, `shift tau=`, `abs-shift tau=`, `sin eps=`, `sin-decay eps=`, `folded`.
//! Multipliers: `zero`, `linear v=`, `norm`, `bracket`.
//! Euclidean symbols: `const c=`, `derivative`, `var-bracket`, `mixed`, `var-transport a=`,
//! `cutoff-lorentz s= r=`, `cutoff-bracket p= r=`.
//! Initial data: `gaussian s= r=`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::fso::PhaseFunction;
use crate::grid::SupportBox;
use crate::hyperbolic::LatticeMultiplier;
use crate::io::load_symbol;
use crate::numerics::japanese_bracket;
use crate::periodise::{CompactFunction, EuclideanSymbol};
use crate::symbols::{SymbolOrder, ToroidalSymbol, TorusAmplitude};

/// Parsed `name key=value ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresetSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl FromStr for PresetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let name = parts.next().ok_or_else(|| Error::InvalidArgument("empty preset".into()))?.to_string();
        let mut params = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("preset parameter {p:?} is not key=value")))?;
            if params.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::InvalidArgument(format!("preset parameter {k:?} repeated")));
            }
        }
        Ok(PresetSpec { name, params })
    }
}

impl fmt::Display for PresetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl PresetSpec {
    fn allow(&self, keys: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidArgument(format!("preset {:?} takes no parameter {k:?}", self.name))),
            None => Ok(()),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => {
                let parsed = match v.as_str() {
                    "pi" => PI,
                    "-pi" => -PI,
                    _ => v.parse().map_err(|_| Error::InvalidArgument(format!("{key}={v} is not a number")))?,
                };
                if parsed.is_finite() {
                    Ok(parsed)
                } else {
                    Err(Error::NonFinite(format!("preset parameter {key}")))
                }
            }
        }
    }

    fn list(&self, key: &str, default: f64, dim: usize) -> Result<Vec<f64>> {
        match self.params.get(key) {
            None => Ok(vec![default; dim]),
            Some(v) => {
                let vals: Vec<f64> = v
                    .split(',')
                    .map(|s| s.parse().map_err(|_| Error::InvalidArgument(format!("{key}={v} is not a number list"))))
                    .collect::<Result<_>>()?;
                match vals.len() {
                    1 => Ok(vec![vals[0]; dim]),
                    l if l == dim => Ok(vals),
                    l => Err(Error::InvalidArgument(format!("{key} has {l} entries for dimension {dim}"))),
                }
            }
        }
    }

    fn unknown(&self, kind: &str) -> Error {
        Error::InvalidArgument(format!("unknown {kind} preset {:?}", self.name))
    }
}

fn bracket_pow(xi: &[i64], m: f64) -> f64 {
    let s: f64 = xi.iter().map(|&k| (k * k) as f64).sum();
    (1.0 + s).powf(m / 2.0)
}

/// Smooth cut-off equal to 1 at 0 and vanishing for |x| >= r.
pub fn smooth_cutoff(x: f64, r: f64) -> f64 {
    let t = x.abs() / r;
    if t >= 1.0 {
        0.0
    } else {
        (-t.powi(8) / (1.0 - t * t)).exp()
    }
}

pub fn symbol_preset(spec: &str, dim: usize) -> Result<ToroidalSymbol> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "const" => {
            p.allow(&["c", "ci"])?;
            let v = Complex64::new(p.f64("c", 1.0)?, p.f64("ci", 0.0)?);
            Ok(ToroidalSymbol::new(dim, SymbolOrder::default(), move |_, _| v))
        }
        "bracket" => {
            p.allow(&["m"])?;
            let m = p.f64("m", 1.0)?;
            Ok(ToroidalSymbol::new(dim, SymbolOrder::with_m(m), move |_, xi| Complex64::new(bracket_pow(xi, m), 0.0)))
        }
        "exp-bracket" => {
            p.allow(&["m", "k"])?;
            let (m, k) = (p.f64("m", -1.0)?, p.f64("k", 1.0)?);
            Ok(ToroidalSymbol::new(dim, SymbolOrder::with_m(m), move |x, xi| Complex64::from_polar(bracket_pow(xi, m), k * x[0])))
        }
        "cos-bracket" => {
            p.allow(&["m", "a", "b", "k"])?;
            let (m, a, b, k) = (p.f64("m", -1.0)?, p.f64("a", 0.5)?, p.f64("b", 1.0)?, p.f64("k", 1.0)?);
            Ok(ToroidalSymbol::new(dim, SymbolOrder::with_m(m), move |x, xi| {
                Complex64::new((b + a * (k * x[0]).cos()) * bracket_pow(xi, m), 0.0)
            }))
        }
        "table" => {
            p.allow(&["path"])?;
            let path = p.params.get("path").ok_or_else(|| Error::InvalidArgument("table preset needs path=".into()))?;
            let s = load_symbol(Path::new(path))?;
            check_dim(dim, s.dim())?;
            Ok(s)
        }
        _ => Err(p.unknown("symbol")),
    }
}

pub fn amplitude_preset(spec: &str, dim: usize) -> Result<TorusAmplitude> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "const" => {
            p.allow(&["c", "ci"])?;
            let v = Complex64::new(p.f64("c", 1.0)?, p.f64("ci", 0.0)?);
            Ok(TorusAmplitude::new(dim, SymbolOrder::default(), move |_, _, _| v))
        }
        "y-exp" => {
            p.allow(&["m", "k"])?;
            let (m, k) = (p.f64("m", -1.0)?, p.f64("k", 1.0)?);
            Ok(TorusAmplitude::new(dim, SymbolOrder::with_m(m), move |_, y, xi| Complex64::from_polar(bracket_pow(xi, m), k * y[0])))
        }
        "trig" => {
            p.allow(&["m", "b", "ax", "ay", "axy", "sxy"])?;
            let m = p.f64("m", 0.0)?;
            let (b, ax, ay, axy, sxy) = (p.f64("b", 1.0)?, p.f64("ax", 0.0)?, p.f64("ay", 0.0)?, p.f64("axy", 0.0)?, p.f64("sxy", 0.0)?);
            Ok(TorusAmplitude::new(dim, SymbolOrder::with_m(m), move |x, y, xi| {
                let re = b + ax * x[0].cos() + ay * y[0].cos() + axy * (x[0] - y[0]).cos();
                Complex64::new(re, sxy * (x[0] - y[0]).sin()) * bracket_pow(xi, m)
            }))
        }
        _ => Err(p.unknown("amplitude")),
    }
}

fn dot(x: &[f64], xi: &[i64]) -> f64 {
    x.iter().zip(xi).map(|(a, &b)| a * b as f64).sum()
}

fn norm_i(xi: &[i64]) -> f64 {
    xi.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt()
}

pub fn phase_preset(spec: &str, dim: usize) -> Result<PhaseFunction> {
    let p: PresetSpec = spec.parse()?;
    let as_f64 = |xi: &[i64]| xi.iter().map(|&k| k as f64).collect::<Vec<_>>();
    match p.name.as_str() {
        "linear" => {
            p.allow(&[])?;
            Ok(PhaseFunction::linear(dim))
        }
        "shift" => {
            p.allow(&["tau"])?;
            let tau = p.f64("tau", 0.5)?;
            Ok(PhaseFunction::new(dim, move |x, xi| dot(x, xi) + tau * xi.iter().sum::<i64>() as f64)
                .with_gradient(move |_, xi| as_f64(xi)))
        }
        "abs-shift" => {
            p.allow(&["tau"])?;
            let tau = p.f64("tau", 0.5)?;
            Ok(PhaseFunction::new(dim, move |x, xi| dot(x, xi) + tau * norm_i(xi)).with_gradient(move |_, xi| as_f64(xi)))
        }
        "sin" => {
            p.allow(&["eps"])?;
            let eps = p.f64("eps", 0.3)?;
            Ok(PhaseFunction::new(dim, move |x, xi| dot(x, xi) + eps * x[0].sin()).with_gradient(move |x, xi| {
                let mut g = as_f64(xi);
                g[0] += eps * x[0].cos();
                g
            }))
        }
        "sin-decay" => {
            p.allow(&["eps"])?;
            let eps = p.f64("eps", 0.3)?;
            Ok(PhaseFunction::new(dim, move |x, xi| dot(x, xi) + eps * x[0].sin() / bracket_pow(xi, 1.0)).with_gradient(
                move |x, xi| {
                    let mut g = as_f64(xi);
                    g[0] += eps * x[0].cos() / bracket_pow(xi, 1.0);
                    g
                },
            ))
        }
        "folded" => {
            p.allow(&[])?;
            if dim != 1 {
                return Err(Error::InvalidArgument("folded phase x|xi| is one-dimensional".into()));
            }
            Ok(PhaseFunction::new(1, |x, xi| x[0] * xi[0].abs() as f64).with_gradient(|_, xi| vec![xi[0].abs() as f64]))
        }
        _ => Err(p.unknown("phase")),
    }
}

pub fn multiplier_preset(spec: &str, dim: usize) -> Result<LatticeMultiplier> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "zero" => {
            p.allow(&[])?;
            Ok(LatticeMultiplier::zero(dim))
        }
        "linear" => {
            p.allow(&["v"])?;
            Ok(LatticeMultiplier::linear(p.list("v", 1.0, dim)?))
        }
        "norm" => {
            p.allow(&[])?;
            Ok(LatticeMultiplier::norm(dim))
        }
        "bracket" => {
            p.allow(&[])?;
            Ok(LatticeMultiplier::new(dim, |k| bracket_pow(k, 1.0)))
        }
        _ => Err(p.unknown("multiplier")),
    }
}

/// Euclidean multiplier a1(xi) for `periodise_problem`; same names as
/// `multiplier_preset`.
pub fn euclidean_multiplier_preset(spec: &str, dim: usize) -> Result<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "zero" => {
            p.allow(&[])?;
            Ok(Box::new(|_| 0.0))
        }
        "linear" => {
            p.allow(&["v"])?;
            let v = p.list("v", 1.0, dim)?;
            Ok(Box::new(move |xi| xi.iter().zip(&v).map(|(a, b)| a * b).sum()))
        }
        "norm" => {
            p.allow(&[])?;
            Ok(Box::new(|xi| xi.iter().map(|v| v * v).sum::<f64>().sqrt()))
        }
        "bracket" => {
            p.allow(&[])?;
            Ok(Box::new(japanese_bracket))
        }
        _ => Err(p.unknown("multiplier")),
    }
}

pub fn euclidean_symbol_preset(spec: &str, dim: usize) -> Result<EuclideanSymbol> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "const" => {
            p.allow(&["c"])?;
            let c = p.f64("c", 1.0)?;
            Ok(EuclideanSymbol::periodic(dim, move |_, _| Complex64::new(c, 0.0)))
        }
        "derivative" => {
            p.allow(&[])?;
            Ok(EuclideanSymbol::periodic(dim, |_, xi| Complex64::new(0.0, xi[0])))
        }
        "var-bracket" => {
            p.allow(&[])?;
            Ok(EuclideanSymbol::periodic(dim, |x, xi| Complex64::new(2.0 + x[0].cos(), 0.0) / japanese_bracket(xi)))
        }
        "mixed" => {
            p.allow(&[])?;
            Ok(EuclideanSymbol::periodic(dim, |x, xi| Complex64::new(x[0].sin() * xi[0], japanese_bracket(xi))))
        }
        "var-transport" => {
            p.allow(&["a"])?;
            let a = p.f64("a", 0.5)?;
            Ok(EuclideanSymbol::periodic(dim, move |x, xi| Complex64::new(0.0, (1.0 + a * x[0].sin()) * xi[0])))
        }
        "cutoff-lorentz" => {
            p.allow(&["s", "r"])?;
            let (s, r) = (p.f64("s", 1.0)?, p.f64("r", PI)?);
            Ok(EuclideanSymbol::compact(SupportBox::cube(dim, r)?, move |x, xi| {
                let w: f64 = x.iter().map(|&v| smooth_cutoff(v, r)).product();
                Complex64::new(w / (1.0 + xi.iter().map(|v| v * v).sum::<f64>() / (s * s)), 0.0)
            }))
        }
        "cutoff-bracket" => {
            p.allow(&["p", "r"])?;
            let (pw, r) = (p.f64("p", 2.0)?, p.f64("r", PI)?);
            Ok(EuclideanSymbol::compact(SupportBox::cube(dim, r)?, move |x, xi| {
                let w: f64 = x.iter().map(|&v| smooth_cutoff(v, r)).product();
                Complex64::new(w / japanese_bracket(xi).powf(pw), 0.0)
            }))
        }
        _ => Err(p.unknown("Euclidean symbol")),
    }
}

/// Initial data on the lattice h Z^n.
pub fn compact_preset(spec: &str, dim: usize, h: f64) -> Result<CompactFunction> {
    let p: PresetSpec = spec.parse()?;
    match p.name.as_str() {
        "gaussian" => {
            p.allow(&["s", "r"])?;
            let (s, r) = (p.f64("s", 0.5)?, p.f64("r", 2.0 * PI)?);
            CompactFunction::from_fn(&SupportBox::cube(dim, r)?, h, move |x| {
                Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp(), 0.0)
            })
        }
        _ => Err(p.unknown("initial data")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject() {
        let p: PresetSpec = "bracket m=-1".parse().unwrap();
        assert_eq!(p.to_string(), "bracket m=-1");
        assert!("bracket m".parse::<PresetSpec>().is_err());
        assert!("bracket m=1 m=2".parse::<PresetSpec>().is_err());
        assert!(symbol_preset("bracket q=1", 1).is_err());
        assert!(symbol_preset("nonesuch", 1).is_err());
        assert!(symbol_preset("bracket m=x", 1).is_err());
    }

    #[test]
    fn values() {
        let s = symbol_preset("bracket m=-1", 1).unwrap();
        assert!((s.eval(&[0.0], &[3]).re - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let a = amplitude_preset("trig b=1 ay=0.5 sxy=0.2", 1).unwrap();
        assert!((a.eval(&[0.0], &[0.0], &[5]) - Complex64::new(1.5, 0.0)).norm() < 1e-15);
        let v = multiplier_preset("linear v=1,2", 2).unwrap();
        assert_eq!(v.eval(&[3, 1]), 5.0);
        let e = euclidean_symbol_preset("cutoff-lorentz r=pi", 1).unwrap();
        assert_eq!(e.eval(&[4.0], &[0.0]), Complex64::new(0.0, 0.0));
        assert!(phase_preset("folded", 2).is_err());
    }
}
