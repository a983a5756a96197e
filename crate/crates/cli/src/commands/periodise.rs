//! Periodisation checks: the spectrum of a periodised Gaussian, commutation
//! of Euclidean and toroidal quantization, and the smoothing residual.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use tpdo_core::grid::FrequencyWindow;
use tpdo_core::periodise::{periodised_spectrum, smoothing_residual, verify_p1, QuadratureSettings};
use tpdo_core::presets::{compact_preset, euclidean_symbol_preset, PresetSpec};

use crate::context::{joined, setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PeriodiseConfig {
    /// Gaussian whose periodised spectrum is compared with its transform.
    spectrum_initial: String,
    /// Frequencies |xi|_inf <= this are compared.
    spectrum_band: i64,
    spectrum_tolerance: f64,
    /// Euclidean symbols (periodic in x) checked against their restrictions.
    symbols: Vec<String>,
    initial: String,
    /// Compactly x-supported symbol for the smoothing residual.
    residual_symbol: String,
    residual_initial: String,
    residual_tolerance: f64,
    xi_cutoff: f64,
    xi_step: f64,
}

impl Default for PeriodiseConfig {
    fn default() -> Self {
        PeriodiseConfig {
            spectrum_initial: "gaussian s=1 r=8".into(),
            spectrum_band: 4,
            spectrum_tolerance: 1e-6,
            symbols: vec!["const".into(), "derivative".into(), "var-bracket".into(), "mixed".into()],
            initial: "gaussian s=0.5".into(),
            residual_symbol: "cutoff-lorentz s=1 r=pi".into(),
            residual_initial: "gaussian s=0.3 r=pi".into(),
            residual_tolerance: 1e-8,
            xi_cutoff: 32.0,
            xi_step: 0.125,
        }
    }
}

#[derive(Serialize)]
struct CommutationRow {
    symbol: String,
    discrepancy: f64,
    budget: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Report {
    spectrum_error: f64,
    commutation: Vec<CommutationRow>,
    residual_inner_max: f64,
    residual_budget: f64,
    residual_max: f64,
    pass: bool,
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    let (ctx, cfg): (_, PeriodiseConfig) = setup(o, Defaults { dim: 1, points: 64, cutoff: 16 })?;
    let grid = ctx.grid()?;
    let h = grid.spacing();
    if !(cfg.xi_cutoff > 0.0) || !(cfg.xi_step > 0.0) || cfg.spectrum_band < 0 {
        return Err(Failure::Usage("xi_cutoff and xi_step must be positive, spectrum_band non-negative".into()));
    }
    let quad = QuadratureSettings { cutoff: cfg.xi_cutoff, step: cfg.xi_step, ..QuadratureSettings::default() };

    // (2 pi)^{-n} int e^{-|x|^2 / 2 s^2} e^{-i x xi} dx = (s / sqrt(2 pi))^n e^{-s^2 |xi|^2 / 2}
    let spec: PresetSpec = cfg.spectrum_initial.parse().config("spectrum_initial")?;
    if spec.name != "gaussian" {
        return Err(Failure::Usage("spectrum_initial must be a gaussian preset".into()));
    }
    let s = spec.f64("s", 0.5).config("spectrum_initial")?;
    let u = compact_preset(&cfg.spectrum_initial, ctx.dim, h).config("spectrum_initial")?;
    let band = FrequencyWindow::symmetric(ctx.dim, cfg.spectrum_band as usize).config("spectrum_band")?;
    band.check_grid(&grid).config("spectrum_band")?;
    let values = periodised_spectrum(&u, grid, band)?;
    let mut rows = vec![];
    let mut spectrum_error = 0.0f64;
    for (xi, v) in band.iter().zip(&values) {
        let k2: f64 = xi.iter().map(|&k| (k * k) as f64).sum();
        let exact = (s / (2.0 * PI).sqrt()).powi(ctx.dim as i32) * (-s * s * k2 / 2.0).exp();
        let err = (v - exact).norm();
        spectrum_error = spectrum_error.max(err);
        rows.push(vec![joined(&xi), v.re.to_string(), v.im.to_string(), exact.to_string(), err.to_string()]);
    }
    ctx.out.csv("spectrum.csv", &["xi", "re", "im", "exact", "error"], rows)?;

    let f = compact_preset(&cfg.initial, ctx.dim, h).config("initial")?;
    let mut commutation = vec![];
    for name in &cfg.symbols {
        let a = euclidean_symbol_preset(name, ctx.dim).config("symbols")?;
        if !a.is_periodic() {
            return Err(Failure::Usage(format!("symbol {name:?} is not periodic in x")));
        }
        let r = verify_p1(&a, &f, grid, &quad)?;
        commutation.push(CommutationRow { symbol: name.clone(), discrepancy: r.discrepancy, budget: r.budget, pass: r.pass });
    }
    ctx.out.csv(
        "commutation.csv",
        &["symbol", "discrepancy", "budget", "pass"],
        commutation.iter().map(|r| vec![r.symbol.clone(), r.discrepancy.to_string(), r.budget.to_string(), r.pass.to_string()]),
    )?;

    let a0 = euclidean_symbol_preset(&cfg.residual_symbol, ctx.dim).config("residual_symbol")?;
    let f0 = compact_preset(&cfg.residual_initial, ctx.dim, h).config("residual_initial")?;
    let residual = smoothing_residual(&a0, &f0, &QuadratureSettings { margin: 3.0 * PI, ..quad }).config("residual")?;
    ctx.out.csv(
        "residual.csv",
        &["x", "re", "im"],
        (0..residual.residual.len()).map(|i| {
            let v = residual.residual.values()[i];
            vec![joined(&residual.residual.node(i)), v.re.to_string(), v.im.to_string()]
        }),
    )?;

    let pass = spectrum_error < cfg.spectrum_tolerance
        && commutation.iter().all(|r| r.pass)
        && residual.inner_max <= residual.budget
        && residual.inner_max < cfg.residual_tolerance;
    let report = Report {
        spectrum_error,
        commutation,
        residual_inner_max: residual.inner_max,
        residual_budget: residual.budget,
        residual_max: residual.max,
        pass,
    };
    ctx.out.json("report.json", &report)?;
    let summary = format!(
        "spectrum error {spectrum_error:.3e}, {} commutation checks, residual on [-pi, pi] {:.3e}",
        report.commutation.len(),
        report.residual_inner_max
    );
    Ok(Verdict { pass, summary, diagnostics: vec![serde_json::to_string(&report).unwrap_or_default()] })
}
