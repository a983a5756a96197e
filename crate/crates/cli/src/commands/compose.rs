//! Direct against asymptotic compositions T P and P T, by expansion order.

use serde::{Deserialize, Serialize};
use tpdo_core::fso::{compose_pt_asymptotic, compose_pt_direct, compose_tp_asymptotic, compose_tp_direct, TabulatedAmplitude};
use tpdo_core::presets::{amplitude_preset, phase_preset, symbol_preset};
use tpdo_core::symbols::{extend_symbol, ExtensionSettings, ThetaHatTable};

use crate::context::{setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ComposeConfig {
    /// `tp` (default), `pt` or `tp-trivial`.
    preset: Option<String>,
    amplitude: Option<String>,
    symbol: Option<String>,
    phase: Option<String>,
    orders: Option<Vec<u32>>,
    radius: Option<usize>,
    /// Lower edge |xi|_inf of the outer frequencies; default 2K/3.
    outer: Option<i64>,
    /// Gap allowed in the tp-trivial identity.
    tolerance: Option<f64>,
    /// Write the composed amplitudes as JSON tables.
    write_tables: bool,
}

#[derive(Serialize)]
struct OrderRow {
    order: u32,
    outer_discrepancy: f64,
    discrepancy: f64,
    extension_tail: Option<f64>,
    flagged: bool,
}

#[derive(Serialize)]
struct Report {
    workflow: String,
    amplitude: String,
    symbol: String,
    phase: Option<String>,
    outer: i64,
    rows: Vec<OrderRow>,
    /// tp-trivial only: max |c - a p|.
    trivial_gap: Option<f64>,
    monotone: bool,
    pass: bool,
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    let (ctx, cfg): (_, ComposeConfig) = setup(o, Defaults { dim: 1, points: 64, cutoff: 16 })?;
    let workflow = cfg.preset.clone().unwrap_or_else(|| "tp".into());
    let (a_default, p_default) = match workflow.as_str() {
        "tp" => ("trig b=1 axy=0.3 sxy=0.2", "cos-bracket m=-1 a=0.5 b=1"),
        "pt" => ("trig b=1 ax=0.5 sxy=0.2", "cos-bracket m=-1 a=0.5 b=1"),
        "tp-trivial" => ("trig b=1 ax=0.5", "bracket m=-1"),
        other => return Err(Failure::Usage(format!("unknown compose preset {other:?}"))),
    };
    if workflow != "pt" && cfg.phase.is_some() {
        return Err(Failure::Usage("the T P amplitude does not depend on a phase; drop `phase`".into()));
    }
    let a_spec = cfg.amplitude.clone().unwrap_or_else(|| a_default.into());
    let p_spec = cfg.symbol.clone().unwrap_or_else(|| p_default.into());
    let a = amplitude_preset(&a_spec, ctx.dim).config("amplitude")?;
    let p = symbol_preset(&p_spec, ctx.dim).config("symbol")?;
    let (grid, window) = (ctx.grid()?, ctx.window()?);
    let orders = cfg.orders.clone().unwrap_or_else(|| vec![1, 2, 3]);
    if orders.is_empty() || orders.iter().any(|&m| !(1..=6).contains(&m)) {
        return Err(Failure::Usage("orders must be a non-empty list from 1..=6".into()));
    }
    let outer = cfg.outer.unwrap_or(2 * ctx.cutoff as i64 / 3);
    // size limits surface before any work
    TabulatedAmplitude::from_fn(grid, window, |_, _, _| num_complex::Complex64::new(0.0, 0.0)).config("grid")?;

    let mut rows = vec![];
    let mut tables = vec![];
    let mut trivial_gap = None;
    match workflow.as_str() {
        "pt" => {
            let phase_spec = cfg.phase.clone().unwrap_or_else(|| "sin eps=0.3".into());
            let phi = phase_preset(&phase_spec, ctx.dim).config("phase")?;
            let radius = cfg.radius.unwrap_or(32);
            let table = ThetaHatTable::shared();
            if radius == 0 || radius > table.max_radius() {
                return Err(Failure::Usage(format!("radius must lie in 1..={}", table.max_radius())));
            }
            let ext = extend_symbol(&p, table, ExtensionSettings::with_radius(radius))?;
            let direct = compose_pt_direct(&p, &phi, &a, grid, window)?;
            for &m in &orders {
                let e = compose_pt_asymptotic(&ext, &phi, &a, m, grid, window)?;
                rows.push(OrderRow {
                    order: m,
                    outer_discrepancy: e.amplitude.max_abs_diff_beyond(&direct, outer)?,
                    discrepancy: e.amplitude.max_abs_diff(&direct)?,
                    extension_tail: Some(e.extension_tail),
                    flagged: e.flagged,
                });
                tables.push((m, e.amplitude));
            }
            tables.push((0, direct));
        }
        _ => {
            let direct = compose_tp_direct(&a, &p, grid, window, grid.full_window())?;
            if workflow == "tp-trivial" {
                let expected = TabulatedAmplitude::from_fn(grid, window, |x, z, xi| {
                    let zn = grid.node(z);
                    a.eval(&grid.node(x), &zn, xi) * p.eval(&zn, xi)
                })?;
                trivial_gap = Some(direct.max_abs_diff(&expected)?);
            }
            for &m in &orders {
                let c = compose_tp_asymptotic(&a, &p, m, grid, window)?;
                rows.push(OrderRow {
                    order: m,
                    outer_discrepancy: c.max_abs_diff_beyond(&direct, outer)?,
                    discrepancy: c.max_abs_diff(&direct)?,
                    extension_tail: None,
                    flagged: false,
                });
                tables.push((m, c));
            }
            tables.push((0, direct));
        }
    }

    let monotone = rows.windows(2).all(|w| w[1].outer_discrepancy < w[0].outer_discrepancy);
    let pass = match trivial_gap {
        Some(gap) => gap <= cfg.tolerance.unwrap_or(1e-12) && rows.iter().all(|r| r.discrepancy <= cfg.tolerance.unwrap_or(1e-12)),
        None => monotone && rows.iter().all(|r| !r.flagged),
    };
    ctx.out.csv(
        "compose.csv",
        &["order", "outer_discrepancy", "discrepancy", "extension_tail"],
        rows.iter().map(|r| {
            vec![
                r.order.to_string(),
                r.outer_discrepancy.to_string(),
                r.discrepancy.to_string(),
                r.extension_tail.map(|t| t.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    if cfg.write_tables {
        for (m, t) in &tables {
            let name = if *m == 0 { "amplitude_direct.json".to_string() } else { format!("amplitude_M{m}.json") };
            ctx.out.write(&name, t.to_json()?)?;
        }
    }
    let report = Report {
        workflow: workflow.clone(),
        amplitude: a_spec,
        symbol: p_spec,
        phase: if workflow == "pt" { Some(cfg.phase.unwrap_or_else(|| "sin eps=0.3".into())) } else { None },
        outer,
        rows,
        trivial_gap,
        monotone,
        pass,
    };
    ctx.out.json("report.json", &report)?;
    let gaps: Vec<String> = report.rows.iter().map(|r| format!("M={}: {:.3e}", r.order, r.outer_discrepancy)).collect();
    let summary = match trivial_gap {
        Some(g) => format!("{workflow}, |c - a p| = {g:.3e}"),
        None => format!("{workflow}, outer discrepancies {}", gaps.join(", ")),
    };
    Ok(Verdict { pass, summary, diagnostics: vec![serde_json::to_string(&report).unwrap_or_default()] })
}
