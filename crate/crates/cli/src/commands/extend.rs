//! Symbol extension to real frequencies with the theta_hat checks it
//! relies on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tpdo_core::presets::{symbol_preset, PresetSpec};
use tpdo_core::symbols::{build_theta, extend_symbol, theta_hat, ExtensionSettings, SymbolOrder, ThetaHatTable, ToroidalSymbol};

use crate::context::{setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtendConfig {
    preset: Option<String>,
    /// Truncation radius; by default the smallest whose theta_hat tail is
    /// below tolerance / 100.
    radius: Option<usize>,
    tolerance: f64,
    /// Real sample points per unit frequency in extension.csv.
    samples_per_unit: usize,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        ExtendConfig { preset: None, radius: None, tolerance: 1e-8, samples_per_unit: 10 }
    }
}

#[derive(Serialize)]
struct Report {
    preset: String,
    radius: usize,
    tail_weight: f64,
    restriction_error: f64,
    theta_hat_delta_error: f64,
    partition_defect: f64,
    poisson_defect: f64,
    /// For `const` presets: max |extension - c| over the sampled frequencies.
    constant_defect: Option<f64>,
    tolerance: f64,
    pass: bool,
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    let (ctx, cfg): (_, ExtendConfig) = setup(o, Defaults { dim: 1, points: 16, cutoff: 8 })?;
    let preset = cfg.preset.clone().ok_or_else(|| Failure::Usage("extend needs a symbol preset".into()))?;
    let symbol = symbol_preset(&preset, ctx.dim).config("preset")?;
    let (grid, window) = (ctx.grid()?, ctx.window()?);
    if !(cfg.tolerance > 0.0) || cfg.samples_per_unit == 0 {
        return Err(Failure::Usage("tolerance and samples_per_unit must be positive".into()));
    }
    let table = ThetaHatTable::shared();
    let poisson_settings = ExtensionSettings::for_tolerance(&table, 1e-2 * cfg.tolerance, ctx.dim)?;
    let radius = cfg.radius.unwrap_or(poisson_settings.radius);
    if radius == 0 || radius > table.max_radius() {
        return Err(Failure::Usage(format!("radius must lie in 1..={}", table.max_radius())));
    }
    let ext = extend_symbol(&symbol, table.clone(), ExtensionSettings::with_radius(radius))?;
    let restriction_error = ext.restriction_error(grid, window)?;

    let theta = build_theta();
    let hats: Vec<(i64, Complex64)> = (-10..=10).map(|k| (k, theta_hat(&theta, k as f64))).collect();
    let delta = |k: i64| if k == 0 { 1.0 } else { 0.0 };
    let theta_hat_delta_error = hats.iter().map(|(k, v)| (v - delta(*k)).norm()).fold(0.0, f64::max);
    let partition_defect = theta.partition_defect(10_000);

    // sum_eta theta_hat(xi - eta) = 1, with the radius chosen for the tolerance
    let one = ToroidalSymbol::new(ctx.dim, SymbolOrder::default(), |_, _| Complex64::new(1.0, 0.0));
    let unit = extend_symbol(&one, table.clone(), poisson_settings)?;
    let origin = vec![0.0; ctx.dim];
    let mut poisson_defect = 0.0f64;
    for s in [0.0, 0.3, 0.7] {
        let mut xi = vec![0.0; ctx.dim];
        xi[0] = s;
        poisson_defect = poisson_defect.max((unit.eval(&origin, &xi)? - 1.0).norm());
    }

    // samples along the first frequency axis at a few x nodes
    let k = ctx.cutoff as f64;
    let steps = (2.0 * k * cfg.samples_per_unit as f64) as usize;
    let x_nodes: Vec<usize> = (0..4).map(|j| j * grid.len() / 4).collect();
    let mut rows = vec![];
    let mut samples = vec![];
    for &xn in &x_nodes {
        let x = grid.node(xn);
        for s in 0..=steps {
            let mut xi = vec![0.0; ctx.dim];
            xi[0] = -k + s as f64 / cfg.samples_per_unit as f64;
            let v = ext.eval(&x, &xi)?;
            samples.push(v);
            rows.push(vec![xn.to_string(), xi[0].to_string(), v.re.to_string(), v.im.to_string()]);
        }
    }
    let spec: PresetSpec = preset.parse().config("preset")?;
    let constant_defect = if spec.name == "const" {
        let c = Complex64::new(spec.f64("c", 1.0).config("preset")?, spec.f64("ci", 0.0).config("preset")?);
        Some(samples.iter().map(|v| (v - c).norm()).fold(0.0, f64::max))
    } else {
        None
    };

    let tol = cfg.tolerance;
    let pass = restriction_error < tol
        && theta_hat_delta_error < tol
        && partition_defect < 1e-12
        && poisson_defect < tol
        && constant_defect.map_or(true, |d| d < tol);
    ctx.out.csv("extension.csv", &["x_index", "xi", "re", "im"], rows)?;
    ctx.out.csv(
        "theta_hat.csv",
        &["xi", "re", "im", "target"],
        hats.iter().map(|(k, v)| vec![k.to_string(), v.re.to_string(), v.im.to_string(), delta(*k).to_string()]),
    )?;
    let report = Report {
        preset: preset.clone(),
        radius,
        tail_weight: ext.tail_weight(),
        restriction_error,
        theta_hat_delta_error,
        partition_defect,
        poisson_defect,
        constant_defect,
        tolerance: tol,
        pass,
    };
    ctx.out.json("report.json", &report)?;
    let summary = format!("restriction error {restriction_error:.3e}, radius {radius}");
    let diagnostics = vec![serde_json::to_string(&report).unwrap_or_default()];
    Ok(Verdict { pass, summary, diagnostics })
}
