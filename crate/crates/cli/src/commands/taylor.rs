//! Randomized discrete Taylor trials: |Delta^omega r_N| against the remainder
//! bound, and exact vanishing of r_N for polynomials of degree below N.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tpdo_core::diffcalc::{forward_difference, remainder_bound, taylor_remainder, LatticeFunction, MultiIndex, Scalar};
use tpdo_core::presets::PresetSpec;

use crate::context::{joined, setup, ConfigResult, Defaults, Failure, Overrides, Verdict};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TaylorConfig {
    /// `cubic`, `poly d=`, or `wave modes=`.
    preset: String,
    trials: usize,
    max_order: u32,
    max_omega: u32,
    max_eta: i64,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig { preset: "cubic".into(), trials: 200, max_order: 4, max_omega: 2, max_eta: 4 }
    }
}

enum Family {
    Poly(u32),
    Wave(usize),
}

fn family(spec: &str) -> Result<Family, Failure> {
    let p: PresetSpec = spec.parse().config("preset")?;
    let bad = |k: &String| Failure::Usage(format!("preset {:?} takes no parameter {k:?}", p.name));
    match p.name.as_str() {
        "cubic" => match p.params.keys().next() {
            Some(k) => Err(bad(k)),
            None => Ok(Family::Poly(3)),
        },
        "poly" => {
            if let Some(k) = p.params.keys().find(|k| *k != "d") {
                return Err(bad(k));
            }
            let d = p.f64("d", 3.0).config("preset")?;
            if d.fract() != 0.0 || !(0.0..=6.0).contains(&d) {
                return Err(Failure::Usage(format!("poly degree {d} must be an integer in 0..=6")));
            }
            Ok(Family::Poly(d as u32))
        }
        "wave" => {
            if let Some(k) = p.params.keys().find(|k| *k != "modes") {
                return Err(bad(k));
            }
            let m = p.f64("modes", 3.0).config("preset")?;
            if m.fract() != 0.0 || !(1.0..=16.0).contains(&m) {
                return Err(Failure::Usage(format!("wave modes {m} must be an integer in 1..=16")));
            }
            Ok(Family::Wave(m as usize))
        }
        other => Err(Failure::Usage(format!("unknown taylor preset {other:?}"))),
    }
}

/// Integer polynomial sum_e c_e p^e over exponents of total degree <= d.
fn random_poly(dim: usize, degree: u32, rng: &mut ChaCha8Rng) -> Vec<(Vec<u32>, i64)> {
    MultiIndex::below_order(dim, degree + 1)
        .into_iter()
        .map(|e| (e.entries().to_vec(), rng.gen_range(-5i64..=5)))
        .collect()
}

fn poly_value(terms: &[(Vec<u32>, i64)], p: &[i64]) -> BigInt {
    terms
        .iter()
        .map(|(e, c)| e.iter().zip(p).fold(BigInt::from(*c), |acc, (&k, &x)| acc * BigInt::from(x).pow(k)))
        .sum()
}

fn random_wave(dim: usize, modes: usize, rng: &mut ChaCha8Rng) -> LatticeFunction<f64> {
    let coeffs: Vec<(f64, Vec<f64>, f64)> = (0..modes)
        .map(|_| (rng.gen_range(-2.0..2.0), (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect(), rng.gen_range(0.0..6.3)))
        .collect();
    LatticeFunction::from_rule(dim, move |p| {
        coeffs
            .iter()
            .map(|(a, k, s)| a * (k.iter().zip(p).map(|(k, &x)| k * x as f64).sum::<f64>() + s).cos())
            .sum()
    })
}

#[derive(Serialize)]
struct Trial {
    trial: usize,
    dim: usize,
    order: u32,
    xi: Vec<i64>,
    eta: Vec<i64>,
    omega: Vec<u32>,
    value: f64,
    bound: f64,
    holds: bool,
    /// Some(r_N == 0) when the polynomial degree is below N.
    exact_zero: Option<bool>,
}

#[derive(Serialize)]
struct Summary {
    preset: String,
    seed: u64,
    trials: usize,
    window: usize,
    bound_failures: usize,
    exact_checks: usize,
    exact_failures: usize,
    pass: bool,
}

pub fn run(o: &Overrides) -> Result<Verdict, Failure> {
    // n = 0 (the default) alternates one- and two-dimensional trials
    let (ctx, cfg): (_, TaylorConfig) = setup(o, Defaults { dim: 0, points: 0, cutoff: 12 })?;
    let fam = family(&cfg.preset)?;
    if !(1..=6).contains(&cfg.max_order) || cfg.max_omega > 4 || !(0..=8).contains(&cfg.max_eta) || ctx.dim > 3 {
        return Err(Failure::Usage("max_order in 1..=6, max_omega <= 4, max_eta in 0..=8 and n <= 3 required".into()));
    }
    let window = ctx.cutoff as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let dim = if ctx.dim == 0 { 1 + t % 2 } else { ctx.dim };
        let order = rng.gen_range(1..=cfg.max_order);
        let omega = loop {
            let w: Vec<u32> = (0..dim).map(|_| rng.gen_range(0..=cfg.max_omega)).collect();
            if w.iter().sum::<u32>() <= cfg.max_omega {
                break MultiIndex::new(w);
            }
        };
        let xi: Vec<i64> = (0..dim).map(|_| rng.gen_range(-window..=window)).collect();
        let eta: Vec<i64> = (0..dim).map(|_| rng.gen_range(-cfg.max_eta..=cfg.max_eta)).collect();

        let (value, bound, exact_zero) = match fam {
            Family::Poly(degree) => {
                let terms = random_poly(dim, degree, &mut rng);
                let f = LatticeFunction::from_rule(dim, move |p: &[i64]| BigRational::from_integer(poly_value(&terms, p)));
                let (ff, e) = (f.clone(), eta.clone());
                let r = LatticeFunction::from_rule(dim, move |p: &[i64]| taylor_remainder(&ff, p, &e, order).expect("unbounded rule"));
                let value = forward_difference(&r, &omega, &xi)?;
                let bound = remainder_bound(&f, &xi, &eta, order, &omega)?;
                let exact = (order > degree).then(|| taylor_remainder(&f, &xi, &eta, order).map(|r| r.is_zero())).transpose()?;
                (value.magnitude(), bound, exact)
            }
            Family::Wave(modes) => {
                let f = random_wave(dim, modes, &mut rng);
                let (ff, e) = (f.clone(), eta.clone());
                let r = LatticeFunction::from_rule(dim, move |p: &[i64]| taylor_remainder(&ff, p, &e, order).expect("unbounded rule"));
                let value = forward_difference(&r, &omega, &xi)?.abs();
                (value, remainder_bound(&f, &xi, &eta, order, &omega)?, None)
            }
        };
        let holds = value <= bound * (1.0 + 1e-12) + 1e-12;
        trials.push(Trial { trial: t, dim, order, xi, eta, omega: omega.entries().to_vec(), value, bound, holds, exact_zero });
    }

    let bound_failures = trials.iter().filter(|t| !t.holds).count();
    let exact_checks = trials.iter().filter(|t| t.exact_zero.is_some()).count();
    let exact_failures = trials.iter().filter(|t| t.exact_zero == Some(false)).count();
    let pass = bound_failures == 0 && exact_failures == 0;
    ctx.out.csv(
        "taylor.csv",
        &["trial", "dim", "order", "xi", "eta", "omega", "value", "bound", "holds", "exact_zero"],
        trials.iter().map(|t| {
            vec![
                t.trial.to_string(),
                t.dim.to_string(),
                t.order.to_string(),
                joined(&t.xi),
                joined(&t.eta),
                joined(&t.omega),
                t.value.to_string(),
                t.bound.to_string(),
                t.holds.to_string(),
                t.exact_zero.map(|b| b.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    let summary = Summary {
        preset: cfg.preset.clone(),
        seed: ctx.seed,
        trials: trials.len(),
        window: ctx.cutoff,
        bound_failures,
        exact_checks,
        exact_failures,
        pass,
    };
    ctx.out.json("summary.json", &summary)?;
    let offending: Vec<&Trial> = trials.iter().filter(|t| !t.holds || t.exact_zero == Some(false)).collect();
    if !offending.is_empty() {
        ctx.out.json("failures.json", &offending)?;
    }
    Ok(Verdict {
        pass,
        summary: format!("{} trials, {bound_failures} bound violations, {exact_checks} exact checks", trials.len()),
        diagnostics: offending.iter().map(|t| serde_json::to_string(t).unwrap_or_default()).collect(),
    })
}
