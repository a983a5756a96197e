//! Periodised first-order hyperbolic problems
//! i d_t w = (a1(D) + a0(X, D)) w on the torus, with a1 a real lattice
//! multiplier (not necessarily smooth in xi) and a0 of order <= 0.
//!
//! Convention: w^(k, t) = e^{-i t a1(k)} f^(k) solves i d_t w = a1(D) w.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::grid::{bin_frequency, bin_spectrum, FftNd, GridFunction, TorusGrid};
use crate::numerics::{cis, unravel};
use crate::periodise::{periodise_function, periodise_symbol, CompactFunction, EuclideanSymbol, Resampling};
use crate::quantize::apply_symbol_op;
use crate::symbols::ToroidalSymbol;

/// dt * max |a1| above this is rejected.
pub const STABILITY_LIMIT: f64 = 0.5;

type MultiplierRule = dyn Fn(&[i64]) -> f64 + Send + Sync;

/// Real multiplier k -> a1(k) on Z^n.
#[derive(Clone)]
pub struct LatticeMultiplier {
    dim: usize,
    rule: Arc<MultiplierRule>,
}

impl fmt::Debug for LatticeMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeMultiplier").field("dim", &self.dim).finish()
    }
}

impl LatticeMultiplier {
    pub fn new(dim: usize, rule: impl Fn(&[i64]) -> f64 + Send + Sync + 'static) -> Self {
        LatticeMultiplier { dim, rule: Arc::new(rule) }
    }

    /// a1(k) = v . k, transport with velocity v.
    pub fn linear(velocity: Vec<f64>) -> Self {
        let dim = velocity.len();
        Self::new(dim, move |k| k.iter().zip(&velocity).map(|(&a, b)| a as f64 * b).sum())
    }

    /// a1(k) = |k|.
    pub fn norm(dim: usize) -> Self {
        Self::new(dim, |k| k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt())
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_| 0.0)
    }

    /// Restriction of a Euclidean multiplier to the lattice.
    pub fn restrict(dim: usize, a1: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(dim, move |k| a1(&k.iter().map(|&v| v as f64).collect::<Vec<_>>()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, k: &[i64]) -> f64 {
        (self.rule)(k)
    }

    /// Values at every FFT bin of the grid.
    fn on_bins(&self, grid: TorusGrid) -> Vec<f64> {
        let (n, points) = (grid.dim(), grid.points());
        let mut idx = vec![0usize; n];
        let mut k = vec![0i64; n];
        (0..grid.len())
            .map(|b| {
                unravel(b, points, n, &mut idx);
                for j in 0..n {
                    k[j] = bin_frequency(idx[j], points);
                }
                self.eval(&k)
            })
            .collect()
    }

    /// max |a1| over the full grid window.
    pub fn max_abs(&self, grid: TorusGrid) -> f64 {
        self.on_bins(grid).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Times at which a trace records the solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SnapshotSchedule {
    /// count + 1 equally spaced times from 0 to t_final.
    Uniform { count: usize },
    /// 0, then first, first * ratio, ... up to t_final.
    Geometric { first: f64, ratio: f64 },
    Times { times: Vec<f64> },
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Uniform { count: 1 }
    }
}

impl SnapshotSchedule {
    /// Strictly increasing times starting at 0 and ending at t_final.
    pub fn times(&self, t_final: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0];
        match self {
            SnapshotSchedule::Uniform { count } => {
                if *count == 0 {
                    return Err(Error::InvalidArgument("uniform schedule needs count >= 1".into()));
                }
                out.extend((1..=*count).map(|i| t_final * i as f64 / *count as f64));
            }
            SnapshotSchedule::Geometric { first, ratio } => {
                if !(*first > 0.0) || !(*ratio > 1.0) {
                    return Err(Error::InvalidArgument("geometric schedule needs first > 0 and ratio > 1".into()));
                }
                let mut t = *first;
                while t < t_final {
                    out.push(t);
                    t *= ratio;
                }
                out.push(t_final);
            }
            SnapshotSchedule::Times { times } => {
                out.extend(times.iter().copied().filter(|&t| t > 0.0 && t < t_final));
                out.push(t_final);
            }
        }
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t_final.max(1.0));
        if out.windows(2).any(|w| !(w[1] > w[0])) && t_final > 0.0 {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        if t_final == 0.0 {
            out.truncate(1);
        }
        Ok(out)
    }
}

/// Torus problem i d_t w = (a1(D) + a0(X, D)) w, w(0) = f.
#[derive(Clone, Debug)]
pub struct HyperbolicProblem {
    pub a1: LatticeMultiplier,
    pub a0: Option<ToroidalSymbol>,
    pub initial: GridFunction,
    pub t_final: f64,
    pub dt: f64,
    pub schedule: SnapshotSchedule,
}

impl HyperbolicProblem {
    pub fn new(
        a1: LatticeMultiplier,
        a0: Option<ToroidalSymbol>,
        initial: GridFunction,
        t_final: f64,
        dt: f64,
    ) -> Result<Self> {
        let n = initial.grid().dim();
        check_dim(a1.dim(), n)?;
        if let Some(s) = &a0 {
            check_dim(s.dim(), n)?;
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("final time {t_final} must be non-negative")));
        }
        if a1.on_bins(initial.grid()).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("a1 on the grid window".into()));
        }
        Ok(HyperbolicProblem { a1, a0, initial, t_final, dt, schedule: SnapshotSchedule::default() })
    }

    pub fn with_schedule(mut self, schedule: SnapshotSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn grid(&self) -> TorusGrid {
        self.initial.grid()
    }
}

/// Torus problem from Euclidean data supported in [-pi, pi]^n: a1
/// restricted to Z^n, a0 periodised, f periodised.
pub fn periodise_problem(
    a1: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    a0: Option<&EuclideanSymbol>,
    f: &CompactFunction,
    grid: TorusGrid,
    t_final: f64,
    dt: f64,
) -> Result<HyperbolicProblem> {
    let n = f.dim();
    check_dim(n, grid.dim())?;
    let fundamental = |lo: &[f64], hi: &[f64]| {
        lo.iter().all(|&v| v >= -std::f64::consts::PI - 1e-12) && hi.iter().all(|&v| v <= std::f64::consts::PI + 1e-12)
    };
    // the sample box may overhang [-pi, pi]^n by a lattice step; only nonzero samples count
    let outside = (0..f.len()).find(|&i| {
        let x = f.node(i);
        f.values()[i] != Complex64::new(0.0, 0.0) && !fundamental(&x, &x)
    });
    if let Some(i) = outside {
        return Err(Error::InvalidArgument(format!("initial data is nonzero at {:?}, outside [-pi, pi]^n", f.node(i))));
    }
    let a0 = match a0 {
        None => None,
        Some(s) => {
            check_dim(s.dim(), n)?;
            let support = s
                .x_support()
                .ok_or_else(|| Error::InvalidArgument("a0 needs compact x-support".into()))?;
            if !fundamental(&support.lo, &support.hi) {
                return Err(Error::InvalidArgument("a0 x-support leaves [-pi, pi]^n".into()));
            }
            Some(periodise_symbol(s)?)
        }
    };
    let pf = periodise_function(f, grid, Resampling::AlignedOnly)?;
    HyperbolicProblem::new(LatticeMultiplier::restrict(n, a1), a0, pf, t_final, dt)
}

/// w^(k) = e^{-i t a1(k)} f^(k) over every grid frequency.
pub fn solve_constant(a1: &LatticeMultiplier, f: &GridFunction, t: f64) -> Result<GridFunction> {
    let grid = f.grid();
    check_dim(a1.dim(), grid.dim())?;
    let plan = FftNd::new(&grid);
    Ok(propagate(&plan, &a1.on_bins(grid), f, t))
}

fn propagate(plan: &FftNd, bins: &[f64], f: &GridFunction, t: f64) -> GridFunction {
    if t == 0.0 {
        return f.clone();
    }
    let mut spec = bin_spectrum(f, plan);
    for (s, a) in spec.iter_mut().zip(bins) {
        *s *= cis(-t * a);
    }
    plan.inverse(&mut spec);
    GridFunction::from_values_unchecked(f.grid(), spec)
}

/// Recorded solution.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    pub norms: Vec<f64>,
    /// Substeps taken between consecutive snapshots.
    pub steps: Vec<usize>,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    times: &'a [f64],
    norms: &'a [f64],
    snapshots: Vec<Vec<[f64; 2]>>,
}

impl EvolutionTrace {
    pub fn final_state(&self) -> &GridFunction {
        self.snapshots.last().expect("trace holds the initial snapshot")
    }

    /// Rows t, x-index, re, im.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x_index", "re", "im"])?;
        for (t, s) in self.times.iter().zip(&self.snapshots) {
            for (i, v) in s.values().iter().enumerate() {
                w.write_record([t.to_string(), i.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows t, l2norm.
    pub fn norms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "l2norm"])?;
        for (t, v) in self.times.iter().zip(&self.norms) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let grid = self.final_state().grid();
        Ok(serde_json::to_string(&TraceJson {
            n: grid.dim(),
            points: grid.points(),
            times: &self.times,
            norms: &self.norms,
            snapshots: self.snapshots.iter().map(|s| s.values().iter().map(|v| [v.re, v.im]).collect()).collect(),
        })?)
    }
}

/// L2 norms along a trace.
pub fn energy(trace: &EvolutionTrace) -> Vec<f64> {
    trace.snapshots.iter().map(|s| s.l2_norm()).collect()
}

fn rk4_a0(a0: &ToroidalSymbol, w: &GridFunction, h: f64) -> Result<GridFunction> {
    let window = w.grid().full_window();
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |v: &GridFunction| -> Result<Vec<Complex64>> {
        Ok(apply_symbol_op(a0, v, window)?.values().iter().map(|z| z * minus_i).collect())
    };
    let shifted = |k: &[Complex64], s: f64| {
        GridFunction::from_values_unchecked(w.grid(), w.values().iter().zip(k).map(|(a, b)| a + b * s).collect())
    };
    let k1 = rhs(w)?;
    let k2 = rhs(&shifted(&k1, h / 2.0))?;
    let k3 = rhs(&shifted(&k2, h / 2.0))?;
    let k4 = rhs(&shifted(&k3, h))?;
    let values = w
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect();
    Ok(GridFunction::from_values_unchecked(w.grid(), values))
}

/// Strang splitting: half a1-phase, RK4 step of a0, half a1-phase.
/// Each snapshot interval is cut into the fewest equal substeps no longer than dt.
pub fn solve_perturbed(problem: &HyperbolicProblem) -> Result<EvolutionTrace> {
    let grid = problem.grid();
    let bins = problem.a1.on_bins(grid);
    let a1_max = bins.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if problem.dt * a1_max > STABILITY_LIMIT {
        return Err(Error::Stability(format!(
            "dt * max|a1| = {:.3} exceeds {STABILITY_LIMIT}",
            problem.dt * a1_max
        )));
    }
    let times = problem.schedule.times(problem.t_final)?;
    let plan = FftNd::new(&grid);
    let mut state = problem.initial.clone();
    let mut snapshots = vec![state.clone()];
    let mut steps = vec![0];
    for pair in times.windows(2) {
        let interval = pair[1] - pair[0];
        let count = ((interval / problem.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = interval / count as f64;
        for step in 0..count {
            state = match &problem.a0 {
                None => propagate(&plan, &bins, &state, h),
                Some(a0) => {
                    let half = propagate(&plan, &bins, &state, h / 2.0);
                    propagate(&plan, &bins, &rk4_a0(a0, &half, h)?, h / 2.0)
                }
            };
            if state.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "solution at t = {} (substep {step} of {count})",
                    pair[0] + (step + 1) as f64 * h
                )));
            }
        }
        snapshots.push(state.clone());
        steps.push(count);
    }
    let norms = snapshots.iter().map(|s| s.l2_norm()).collect();
    Ok(EvolutionTrace { times, snapshots, norms, steps })
}

/// Final-time differences between runs at dt, dt/2, dt/4, ...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    /// max |w_{dt_i} - w_{dt_{i+1}}| at t_final.
    pub differences: Vec<f64>,
    /// log2 of successive difference ratios.
    pub orders: Vec<f64>,
    /// True when the differences sit at round-off, so no order is measurable.
    pub exact: bool,
}

impl ConvergenceReport {
    /// Order from the finest pair, infinite when exact.
    pub fn order(&self) -> f64 {
        if self.exact {
            f64::INFINITY
        } else {
            self.orders.last().copied().unwrap_or(f64::NAN)
        }
    }
}

/// Self-convergence by dt-halving over `levels` runs (at least 3).
pub fn self_convergence(problem: &HyperbolicProblem, levels: usize) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidArgument("self-convergence needs at least three runs".into()));
    }
    let dts: Vec<f64> = (0..levels).map(|i| problem.dt / 2f64.powi(i as i32)).collect();
    let finals = dts
        .iter()
        .map(|&dt| {
            let p = problem.clone().with_dt(dt).with_schedule(SnapshotSchedule::Uniform { count: 1 });
            Ok(solve_perturbed(&p)?.final_state().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = finals.windows(2).map(|w| w[0].max_abs_diff(&w[1])).collect();
    let scale = problem.initial.max_abs().max(1e-300);
    let exact = differences.iter().all(|&d| d <= 1e-12 * scale);
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceReport { dts, differences, orders, exact })
}
