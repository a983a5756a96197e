//! File formats: grid and spectral functions, tabulated symbols, class
//! constant tables. CSV numbers use Rust's shortest round-trip formatting.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrequencyWindow, GridFunction, SpectralFunction, TorusGrid};
use crate::symbols::{ClassConstant, SymbolOrder, SymbolTable, ToroidalSymbol};

const LAYOUT: &str = "row-major";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionJson {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "K")]
    cutoff: usize,
    layout: String,
    convention: String,
    values: Vec<[f64; 2]>,
}

fn pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|v| [v.re, v.im]).collect()
}

fn complexes(values: &[[f64; 2]]) -> Vec<Complex64> {
    values.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

fn check_header(json: &FunctionJson, window: &FrequencyWindow) -> Result<()> {
    if json.layout != LAYOUT {
        return Err(Error::Format(format!("layout {:?}, expected {LAYOUT:?}", json.layout)));
    }
    if json.convention != window.convention() {
        return Err(Error::Format(format!("convention {:?}, expected {:?}", json.convention, window.convention())));
    }
    Ok(())
}

/// Header (n, N, K = N/2) and node values in row-major order.
pub fn grid_function_to_json(f: &GridFunction) -> Result<String> {
    let grid = f.grid();
    let window = grid.full_window();
    Ok(serde_json::to_string(&FunctionJson {
        n: grid.dim(),
        points: grid.points(),
        cutoff: window.cutoff(),
        layout: LAYOUT.into(),
        convention: window.convention().into(),
        values: pairs(f.values()),
    })?)
}

pub fn grid_function_from_json(text: &str) -> Result<GridFunction> {
    let json: FunctionJson = serde_json::from_str(text)?;
    let grid = TorusGrid::new(json.n, json.points)?;
    check_header(&json, &grid.full_window())?;
    GridFunction::new(grid, complexes(&json.values))
}

/// Header (n, N = 2K, K) and coefficients in window order.
pub fn spectral_to_json(s: &SpectralFunction) -> Result<String> {
    let window = s.window();
    Ok(serde_json::to_string(&FunctionJson {
        n: window.dim(),
        points: 2 * window.cutoff(),
        cutoff: window.cutoff(),
        layout: LAYOUT.into(),
        convention: window.convention().into(),
        values: pairs(s.coeffs()),
    })?)
}

pub fn spectral_from_json(text: &str) -> Result<SpectralFunction> {
    let json: FunctionJson = serde_json::from_str(text)?;
    let window = if json.convention == "negK..K" {
        FrequencyWindow::symmetric(json.n, json.cutoff)?
    } else {
        FrequencyWindow::new(json.n, json.cutoff)?
    };
    check_header(&json, &window)?;
    SpectralFunction::new(window, complexes(&json.values))
}

/// Rows index, re, im.
pub fn values_to_csv<W: Write>(values: &[Complex64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "re", "im"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolTableJson {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "K")]
    cutoff: usize,
    order_m: f64,
    rho: f64,
    delta: f64,
    values: Vec<[f64; 4]>,
}

/// {n, N, K, order_m, rho, delta, values: [[x-index, xi-index, re, im], ...]}.
pub fn symbol_table_to_json(table: &SymbolTable, order: SymbolOrder) -> Result<String> {
    let wl = table.window().len();
    let values = table
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| [(i / wl) as f64, (i % wl) as f64, v.re, v.im])
        .collect();
    Ok(serde_json::to_string(&SymbolTableJson {
        n: table.grid().dim(),
        points: table.grid().points(),
        cutoff: table.window().cutoff(),
        order_m: order.m,
        rho: order.rho,
        delta: order.delta,
        values,
    })?)
}

pub fn symbol_table_from_json(text: &str) -> Result<(SymbolTable, SymbolOrder)> {
    let json: SymbolTableJson = serde_json::from_str(text)?;
    let grid = TorusGrid::new(json.n, json.points)?;
    let window = FrequencyWindow::new(json.n, json.cutoff)?;
    window.check_grid(&grid)?;
    let order = SymbolOrder::new(json.order_m, json.rho, json.delta);
    order.validate()?;
    let wl = window.len();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len() * wl];
    let mut seen = vec![false; values.len()];
    for row in &json.values {
        let (x, k) = (row[0], row[1]);
        if x.fract() != 0.0 || k.fract() != 0.0 || x < 0.0 || k < 0.0 || x as usize >= grid.len() || k as usize >= wl {
            return Err(Error::Format(format!("symbol table index ({x}, {k}) out of range")));
        }
        let at = x as usize * wl + k as usize;
        values[at] = Complex64::new(row[2], row[3]);
        seen[at] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Format("symbol table is incomplete".into()));
    }
    Ok((SymbolTable::new(grid, window, values)?, order))
}

pub fn load_symbol(path: &Path) -> Result<ToroidalSymbol> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (table, order) = symbol_table_from_json(&text)?;
    Ok(ToroidalSymbol::from_table(table, order))
}

/// Rows alpha, beta, constant; multi-indices joined by ';'.
pub fn class_constants_to_csv<W: Write>(table: &[ClassConstant], out: W) -> Result<()> {
    let join = |m: &crate::diffcalc::MultiIndex| m.entries().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "beta", "constant"])?;
    for e in table {
        w.write_record([join(&e.alpha), join(&e.beta), e.constant.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_function_round_trip() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new(x[0], -x[1]));
        let text = grid_function_to_json(&f).unwrap();
        assert!(text.contains("\"layout\":\"row-major\""));
        assert_eq!(grid_function_from_json(&text).unwrap(), f);
        assert!(grid_function_from_json(&text.replace("row-major", "col-major")).is_err());
    }

    #[test]
    fn spectral_round_trip() {
        let w = FrequencyWindow::symmetric(1, 3).unwrap();
        let s = SpectralFunction::new(w, (0..7).map(|i| Complex64::new(i as f64, 1.0)).collect()).unwrap();
        assert_eq!(spectral_from_json(&spectral_to_json(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn symbol_table_round_trip() {
        let g = TorusGrid::new(1, 4).unwrap();
        let w = FrequencyWindow::new(1, 2).unwrap();
        let t = SymbolTable::new(g, w, (0..16).map(|i| Complex64::new(i as f64, 0.5)).collect()).unwrap();
        let order = SymbolOrder::new(-1.0, 1.0, 0.0);
        let (back, o) = symbol_table_from_json(&symbol_table_to_json(&t, order).unwrap()).unwrap();
        assert_eq!((back, o), (t, order));
        let bad = r#"{"n":1,"N":4,"K":2,"order_m":0,"rho":1,"delta":0,"values":[],"extra":1}"#;
        assert!(symbol_table_from_json(bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = vec![];
        values_to_csv(&[Complex64::new(0.5, -1.0)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,re,im\n0,0.5,-1\n");
    }
}
