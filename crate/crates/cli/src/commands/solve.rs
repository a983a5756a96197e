//! Hyperbolic evolution on the torus with optional checks: exact transport,
//! L2 conservation and splitting self-convergence.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tpdo_core::grid::{inverse_transform, FrequencyWindow, GridFunction, SpectralFunction, TorusGrid};
use tpdo_core::hyperbolic::{energy, periodise_problem, self_convergence, solve_perturbed, HyperbolicProblem, SnapshotSchedule};
use tpdo_core::presets::{
    compact_preset, euclidean_multiplier_preset, euclidean_symbol_preset, multiplier_preset, symbol_preset, PresetSpec,
};

use crate::context::{setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SolveConfig {
    /// `transport`, `wave` (default) or `perturbed`; supplies defaults for the
    /// fields below.
    preset: Option<String>,
    a1: Option<String>,
    a0: Option<String>,
    /// `random band=` or a compact preset such as `gaussian s= r=`.
    initial: Option<String>,
    t_final: Option<f64>,
    dt: Option<f64>,
    schedule: Option<SnapshotSchedule>,
    /// dt-halving runs for the self-convergence check; 0 skips it.
    convergence_levels: Option<usize>,
    transport_tolerance: Option<f64>,
    norm_tolerance: Option<f64>,
    min_order: Option<f64>,
}

struct Physics {
    a1: &'static str,
    a0: Option<&'static str>,
    initial: &'static str,
    t_final: f64,
    dt: f64,
    levels: usize,
}

fn preset_defaults(name: &str, h: f64) -> Result<Physics, Failure> {
    match name {
        // 16 grid steps, so the shift is node-aligned
        "transport" => Ok(Physics { a1: "linear v=1", a0: None, initial: "random band=16", t_final: 16.0 * h, dt: 1.0 / 64.0, levels: 0 }),
        "wave" => Ok(Physics { a1: "norm", a0: None, initial: "random band=16", t_final: 10.0, dt: 1.0 / 64.0, levels: 0 }),
        "perturbed" => Ok(Physics {
            a1: "norm",
            a0: Some("cos-bracket m=-1 a=0.5 b=0"),
            initial: "random band=8",
            t_final: 1.0,
            dt: 1.0 / 64.0,
            levels: 4,
        }),
        other => Err(Failure::Usage(format!("unknown solve preset {other:?}"))),
    }
}

fn random_band_limited(grid: TorusGrid, band: usize, seed: u64) -> Result<GridFunction, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = FrequencyWindow::symmetric(grid.dim(), band).config("initial")?;
    w.check_grid(&grid).config("initial")?;
    let coeffs = (0..w.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Ok(inverse_transform(&SpectralFunction::new(w, coeffs)?, grid)?)
}

/// f(x - shift h) on the grid.
fn shifted(f: &GridFunction, shift: &[i64]) -> GridFunction {
    let g = f.grid();
    let n = g.points() as i64;
    GridFunction::from_fn_indexed(g, |i| {
        let idx: Vec<usize> = g.node_indices(i).iter().zip(shift).map(|(&a, &s)| (a as i64 - s).rem_euclid(n) as usize).collect();
        f.values()[g.linear_index(&idx)]
    })
}

#[derive(Serialize)]
struct Report {
    a1: String,
    a0: Option<String>,
    initial: String,
    t_final: f64,
    dt: f64,
    steps: usize,
    /// max |u(T) - f(x - v T)| when a1 is linear, a0 absent and v T is node-aligned.
    transport_error: Option<f64>,
    /// max |‖u(t)‖ - ‖f‖| when a0 is absent.
    norm_drift: Option<f64>,
    convergence_dts: Vec<f64>,
    convergence_orders: Vec<f64>,
    convergence_exact: Option<bool>,
    pass: bool,
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    let (ctx, cfg): (_, SolveConfig) = setup(o, Defaults { dim: 1, points: 64, cutoff: 32 })?;
    let grid = ctx.grid()?;
    let h = grid.spacing();
    let base = preset_defaults(cfg.preset.as_deref().unwrap_or("wave"), h)?;
    let a1_spec = cfg.a1.clone().unwrap_or_else(|| base.a1.into());
    let a0_spec = if cfg.a1.is_some() || cfg.a0.is_some() { cfg.a0.clone() } else { base.a0.map(String::from) };
    let initial_spec = cfg.initial.clone().unwrap_or_else(|| base.initial.into());
    let t_final = cfg.t_final.unwrap_or(base.t_final);
    let dt = cfg.dt.unwrap_or(base.dt);
    let levels = cfg.convergence_levels.unwrap_or(base.levels);
    if levels != 0 && levels < 3 {
        return Err(Failure::Usage("convergence_levels must be 0 or at least 3".into()));
    }

    let init: PresetSpec = initial_spec.parse().config("initial")?;
    let problem = if init.name == "random" {
        if let Some(k) = init.params.keys().find(|k| *k != "band") {
            return Err(Failure::Usage(format!("random initial data takes no parameter {k:?}")));
        }
        let band = init.f64("band", 8.0).config("initial")?;
        if band.fract() != 0.0 || band < 0.0 {
            return Err(Failure::Usage(format!("band {band} must be a non-negative integer")));
        }
        let f = random_band_limited(grid, band as usize, ctx.seed)?;
        let a1 = multiplier_preset(&a1_spec, ctx.dim).config("a1")?;
        let a0 = a0_spec.as_deref().map(|s| symbol_preset(s, ctx.dim)).transpose().config("a0")?;
        HyperbolicProblem::new(a1, a0, f, t_final, dt).config("problem")?
    } else {
        // Euclidean data supported in [-pi, pi]^n, periodised
        let f = compact_preset(&initial_spec, ctx.dim, h).config("initial")?;
        let a1 = euclidean_multiplier_preset(&a1_spec, ctx.dim).config("a1")?;
        let a0 = a0_spec.as_deref().map(|s| euclidean_symbol_preset(s, ctx.dim)).transpose().config("a0")?;
        periodise_problem(a1, a0.as_ref(), &f, grid, t_final, dt).config("problem")?
    };
    let problem = problem.with_schedule(cfg.schedule.clone().unwrap_or(SnapshotSchedule::Uniform { count: 4 }));
    problem.schedule.times(t_final).config("schedule")?;

    let trace = solve_perturbed(&problem).map_err(|e| match e {
        tpdo_core::Error::Stability(m) => Failure::Usage(format!("dt too large: {m}")),
        other => other.into(),
    })?;
    let f0 = &problem.initial;

    let mut transport_error = None;
    let a1p: PresetSpec = a1_spec.parse().config("a1")?;
    if problem.a0.is_none() && a1p.name == "linear" {
        let v: Vec<f64> = match a1p.params.get("v") {
            None => vec![1.0; ctx.dim],
            Some(s) => {
                let vals: Vec<f64> = s.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
                if vals.len() == 1 { vec![vals[0]; ctx.dim] } else { vals }
            }
        };
        let steps: Vec<f64> = v.iter().map(|vj| vj * t_final / h).collect();
        if steps.iter().all(|s| (s - s.round()).abs() < 1e-9) {
            let shift: Vec<i64> = steps.iter().map(|s| s.round() as i64).collect();
            transport_error = Some(trace.final_state().max_abs_diff(&shifted(f0, &shift)));
        }
    }
    let norm_drift = problem
        .a0
        .is_none()
        .then(|| energy(&trace).iter().map(|v| (v - f0.l2_norm()).abs()).fold(0.0, f64::max));
    let convergence = if levels >= 3 { Some(self_convergence(&problem, levels)?) } else { None };

    let transport_tol = cfg.transport_tolerance.unwrap_or(1e-10);
    let norm_tol = cfg.norm_tolerance.unwrap_or(1e-12);
    let min_order = cfg.min_order.unwrap_or(1.9);
    let pass = transport_error.map_or(true, |e| e < transport_tol)
        && norm_drift.map_or(true, |d| d < norm_tol)
        && convergence.as_ref().map_or(true, |c| c.exact || c.orders.iter().all(|&p| p >= min_order));

    ctx.out.export("trace.csv", |w| trace.to_csv(w))?;
    ctx.out.export("norms.csv", |w| trace.norms_csv(w))?;
    if let Some(c) = &convergence {
        ctx.out.csv(
            "convergence.csv",
            &["dt", "difference_to_next", "order"],
            c.dts.iter().enumerate().map(|(i, dt)| {
                vec![
                    dt.to_string(),
                    c.differences.get(i).map(|d| d.to_string()).unwrap_or_default(),
                    i.checked_sub(1).and_then(|j| c.orders.get(j)).map(|p| p.to_string()).unwrap_or_default(),
                ]
            }),
        )?;
    }
    let report = Report {
        a1: a1_spec,
        a0: a0_spec,
        initial: initial_spec,
        t_final,
        dt,
        steps: trace.steps.iter().sum(),
        transport_error,
        norm_drift,
        convergence_dts: convergence.as_ref().map(|c| c.dts.clone()).unwrap_or_default(),
        convergence_orders: convergence.as_ref().map(|c| c.orders.clone()).unwrap_or_default(),
        convergence_exact: convergence.as_ref().map(|c| c.exact),
        pass,
    };
    ctx.out.json("report.json", &report)?;
    let mut parts = vec![format!("t = {t_final}")];
    if let Some(e) = transport_error {
        parts.push(format!("transport error {e:.3e}"));
    }
    if let Some(d) = norm_drift {
        parts.push(format!("norm drift {d:.3e}"));
    }
    if let Some(c) = &convergence {
        parts.push(if c.exact { "splitting exact".into() } else { format!("orders {:?}", c.orders) });
    }
    Ok(Verdict { pass, summary: parts.join(", "), diagnostics: vec![serde_json::to_string(&report).unwrap_or_default()] })
}
