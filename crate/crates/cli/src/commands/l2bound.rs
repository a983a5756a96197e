//! Schur-test bound against the power-iteration norm, for a preset symbol
//! and for random tabulated symbols.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tpdo_core::grid::{FrequencyWindow, TorusGrid};
use tpdo_core::presets::symbol_preset;
use tpdo_core::quantize::bound_report;
use tpdo_core::symbols::{SymbolOrder, SymbolTable, ToroidalSymbol};

use crate::context::{setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct L2Config {
    preset: Option<String>,
    /// Defaults to 50 without a preset, 0 with one.
    random_tables: Option<usize>,
    /// Multiplier check |norm - max|sigma||.
    tolerance: Option<f64>,
}

#[derive(Serialize)]
struct Case {
    case: String,
    bound: f64,
    norm: f64,
    converged: bool,
    sup: f64,
    multiplier: bool,
    holds: bool,
}

fn measure(name: String, sigma: &ToroidalSymbol, grid: TorusGrid, window: FrequencyWindow, tol: f64) -> Result<Case, Failure> {
    let r = bound_report(sigma, grid, window)?;
    let table = sigma.tabulate(grid, window)?;
    let wl = window.len();
    let values = table.values();
    let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let multiplier = (0..grid.len()).all(|x| (0..wl).all(|k| values[x * wl + k] == values[k]));
    let mut holds = r.converged && r.empirical_norm <= r.bound * (1.0 + 1e-12);
    if multiplier {
        holds &= (r.empirical_norm - sup).abs() < tol;
    }
    Ok(Case { case: name, bound: r.bound, norm: r.empirical_norm, converged: r.converged, sup, multiplier, holds })
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    let (ctx, cfg): (_, L2Config) = setup(o, Defaults { dim: 1, points: 32, cutoff: 16 })?;
    let (grid, window) = (ctx.grid()?, ctx.window()?);
    let tol = cfg.tolerance.unwrap_or(1e-10);
    let random = cfg.random_tables.unwrap_or(if cfg.preset.is_some() { 0 } else { 50 });
    let mut cases = vec![];
    if let Some(p) = &cfg.preset {
        let sigma = symbol_preset(p, ctx.dim).config("preset")?;
        cases.push(measure(p.clone(), &sigma, grid, window, tol)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    for i in 0..random {
        let values = (0..grid.len() * window.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let sigma = ToroidalSymbol::from_table(SymbolTable::new(grid, window, values)?, SymbolOrder::default());
        cases.push(measure(format!("random-{i}"), &sigma, grid, window, tol)?);
    }
    if cases.is_empty() {
        return Err(Failure::Usage("nothing to measure: give a preset or random_tables > 0".into()));
    }
    let failures: Vec<&Case> = cases.iter().filter(|c| !c.holds).collect();
    let pass = failures.is_empty();
    ctx.out.csv(
        "l2bound.csv",
        &["case", "bound", "norm", "converged", "sup", "multiplier", "holds"],
        cases.iter().map(|c| {
            vec![
                c.case.clone(),
                c.bound.to_string(),
                c.norm.to_string(),
                c.converged.to_string(),
                c.sup.to_string(),
                c.multiplier.to_string(),
                c.holds.to_string(),
            ]
        }),
    )?;
    ctx.out.json("report.json", &serde_json::json!({ "cases": &cases, "failures": failures.len(), "pass": pass }))?;
    let summary = match cases.first() {
        Some(c) if cases.len() == 1 => format!("bound {}, norm {}", c.bound, c.norm),
        _ => format!("{} cases, {} failures", cases.len(), failures.len()),
    };
    Ok(Verdict { pass, summary, diagnostics: failures.iter().map(|c| serde_json::to_string(c).unwrap_or_default()).collect() })
}
