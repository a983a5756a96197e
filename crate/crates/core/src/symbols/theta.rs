use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::diffcalc::MultiIndex;
use crate::error::{Error, Result};
use crate::numerics::lagrange_weights;

pub const DEFAULT_THETA_RESOLUTION: f64 = 2.0 * PI / 512.0;
pub const THETA_HAT_SPACING: f64 = 1.0 / 16.0;
/// Lagrange stencil width used between table nodes. Cubic (4) leaves
/// errors near 1.5e-5 at spacing 1/16; 12 points give about 6e-13.
pub const THETA_HAT_STENCIL: usize = 12;

/// The even bump theta(x) = 1 - h(|x| / 2pi) with the smooth step
/// h(t) = psi(t) / (psi(t) + psi(1 - t)), psi(t) = exp(-c/t) for t > 0.
/// Supported in (-2pi, 2pi); theta(pi - y) + theta(pi + y) = 1.
#[derive(Clone, Debug)]
pub struct ThetaFunction {
    scale: f64,
    resolution: f64,
    samples: Vec<f64>,
}

/// theta with c = 1 sampled at 2pi/512.
pub fn build_theta() -> ThetaFunction {
    ThetaFunction::new(DEFAULT_THETA_RESOLUTION).expect("default resolution is valid")
}

impl ThetaFunction {
    pub fn new(resolution: f64) -> Result<Self> {
        Self::with_scale(1.0, resolution)
    }

    /// Variant with psi(t) = exp(-scale/t); every scale > 0 gives an
    /// admissible bump. The resolution is rounded to divide 2pi.
    pub fn with_scale(scale: f64, resolution: f64) -> Result<Self> {
        if !(scale > 0.0) || !(resolution > 0.0) || resolution > PI {
            return Err(Error::InvalidArgument(format!(
                "theta scale {scale} / resolution {resolution}"
            )));
        }
        let per_period = (2.0 * PI / resolution).round() as usize;
        let h = 2.0 * PI / per_period as f64;
        let samples = (0..=2 * per_period).map(|k| step_bump(scale, k as f64 * h)).collect();
        Ok(ThetaFunction { scale, resolution: h, samples })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Samples at x = k h for k = 0..=2pi/h... covering [0, 2pi]; theta is even.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eval(&self, x: f64) -> f64 {
        step_bump(self.scale, x)
    }

    /// Tensor product prod_j theta(x_j).
    pub fn eval_nd(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.eval(v)).product()
    }

    /// Max over `count` points y in [0, pi] of |theta(pi - y) + theta(pi + y) - 1|.
    pub fn partition_defect(&self, count: usize) -> f64 {
        (0..count)
            .map(|k| {
                let y = PI * k as f64 / (count.max(2) - 1) as f64;
                (self.eval(PI - y) + self.eval(PI + y) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Trapezoid value of (2pi)^{-1} int g(x) theta(x) e^{-ix xi} dx.
    fn weighted_transform(&self, xi: f64, weight: impl Fn(f64) -> Complex64) -> Complex64 {
        let h = self.resolution;
        let mut acc = Complex64::new(self.samples[0], 0.0) * weight(0.0);
        for (k, &t) in self.samples.iter().enumerate().skip(1) {
            if t == 0.0 {
                break;
            }
            let x = k as f64 * h;
            let e = Complex64::from_polar(1.0, -x * xi);
            acc += t * (weight(x) * e + weight(-x) * e.conj());
        }
        acc * (h / (2.0 * PI))
    }

    fn transform(&self, xi: f64) -> f64 {
        let h = self.resolution;
        let mut acc = self.samples[0];
        for (k, &t) in self.samples.iter().enumerate().skip(1) {
            if t == 0.0 {
                break;
            }
            acc += 2.0 * t * (k as f64 * h * xi).cos();
        }
        acc * h / (2.0 * PI)
    }
}

fn smooth_step(scale: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (scale * (1.0 / t - 1.0 / (1.0 - t))).exp())
    }
}

fn step_bump(scale: f64, x: f64) -> f64 {
    1.0 - smooth_step(scale, x.abs() / (2.0 * PI))
}

/// Euclidean Fourier transform of theta at real xi (real since theta is even).
pub fn theta_hat(theta: &ThetaFunction, xi: f64) -> Complex64 {
    Complex64::new(theta.transform(xi), 0.0)
}

/// Transform of the tensor-product bump.
pub fn theta_hat_nd(theta: &ThetaFunction, xi: &[f64]) -> Complex64 {
    Complex64::new(xi.iter().map(|&v| theta.transform(v)).product(), 0.0)
}

/// (-ix / (1 - e^{ix})), written as ((x/2)/sin(x/2)) e^{-ix/2} and extended by 1 at 0.
fn phi_factor(x: f64) -> Complex64 {
    let half = 0.5 * x;
    let ratio = if half.abs() < 1e-8 { 1.0 } else { half / half.sin() };
    Complex64::from_polar(ratio, -half)
}

/// phi_alpha(xi): transform of x -> (-ix/(1 - e^{ix}))^alpha theta(x).
pub fn phi_alpha(theta: &ThetaFunction, alpha: u32, xi: f64) -> Complex64 {
    if alpha == 0 {
        return theta_hat(theta, xi);
    }
    theta.weighted_transform(xi, |x| phi_factor(x).powu(alpha))
}

/// Tensor-product phi_alpha.
pub fn phi_alpha_nd(theta: &ThetaFunction, alpha: &MultiIndex, xi: &[f64]) -> Complex64 {
    alpha
        .entries()
        .iter()
        .zip(xi)
        .map(|(&a, &v)| phi_alpha(theta, a, v))
        .product()
}

const TAIL_MAX_RADIUS: usize = 96;
const TAIL_OFFSETS: usize = 8;

/// theta_hat sampled at spacing 1/16 on [-range, range] with local
/// Lagrange interpolation between nodes.
#[derive(Debug)]
pub struct ThetaHatTable {
    theta: Arc<ThetaFunction>,
    spacing: f64,
    range: f64,
    stencil: usize,
    // Nodes k * spacing, k >= 0; theta_hat is even.
    values: Vec<f64>,
    tails: OnceLock<TailProfile>,
}

#[derive(Debug)]
struct TailProfile {
    // tail[r] = max over offsets of sum_{|j| > r} |theta_hat(s + j)|
    tail: Vec<f64>,
    // max over offsets of sum_j |theta_hat(s + j)|
    total: f64,
}

impl ThetaHatTable {
    pub fn new(theta: Arc<ThetaFunction>, range: f64) -> Result<Self> {
        Self::with_options(theta, range, THETA_HAT_SPACING, THETA_HAT_STENCIL)
    }

    pub fn with_options(theta: Arc<ThetaFunction>, range: f64, spacing: f64, stencil: usize) -> Result<Self> {
        if !(range > 0.0) || !(spacing > 0.0) || !(2..=16).contains(&stencil) {
            return Err(Error::InvalidArgument(format!(
                "table range {range}, spacing {spacing}, stencil {stencil}"
            )));
        }
        let count = (range / spacing).ceil() as usize + stencil;
        let values = (0..count).map(|k| theta.transform(k as f64 * spacing)).collect();
        Ok(ThetaHatTable { theta, spacing, range, stencil, values, tails: OnceLock::new() })
    }

    /// Process-wide table for the default theta, covering radii up to 64.
    pub fn shared() -> Arc<ThetaHatTable> {
        static SHARED: OnceLock<Arc<ThetaHatTable>> = OnceLock::new();
        SHARED
            .get_or_init(|| {
                Arc::new(ThetaHatTable::new(Arc::new(build_theta()), 66.0).expect("valid default table"))
            })
            .clone()
    }

    /// Table sized for extensions of radius `radius`.
    pub fn for_radius(theta: Arc<ThetaFunction>, radius: usize) -> Result<Self> {
        Self::new(theta, radius as f64 + 2.0)
    }

    pub fn theta(&self) -> &Arc<ThetaFunction> {
        &self.theta
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn stencil(&self) -> usize {
        self.stencil
    }

    /// Interpolated theta_hat(t); zero beyond the tabulated range.
    pub fn eval(&self, t: f64) -> f64 {
        let s = t.abs();
        if s > self.range {
            return 0.0;
        }
        let u = s / self.spacing;
        let p = self.stencil as i64;
        let last = self.values.len() as i64 - 1;
        let base = (u.floor() as i64 - (p / 2 - 1)).min(last - (p - 1));
        let mut nodes = [0.0f64; 16];
        for (j, v) in nodes.iter_mut().take(self.stencil).enumerate() {
            *v = (base + j as i64) as f64;
        }
        let w = lagrange_weights(u, &nodes[..self.stencil]);
        w.iter()
            .enumerate()
            .map(|(j, wj)| wj * self.values[(base + j as i64).unsigned_abs() as usize])
            .sum()
    }

    fn tail_profile(&self) -> &TailProfile {
        self.tails.get_or_init(|| {
            let max_r = TAIL_MAX_RADIUS;
            let mut tail = vec![0.0f64; max_r + 1];
            let mut total = 0.0f64;
            for o in 0..=TAIL_OFFSETS {
                let s = -0.5 + o as f64 / TAIL_OFFSETS as f64;
                let mag = |j: i64| self.theta.transform(s + j as f64).abs();
                let mut suffix = vec![0.0f64; max_r + 2];
                for r in (0..=max_r).rev() {
                    let j = r as i64 + 1;
                    suffix[r] = suffix[r + 1] + mag(j) + mag(-j);
                }
                for r in 0..=max_r {
                    tail[r] = tail[r].max(suffix[r]);
                }
                total = total.max(suffix[0] + mag(0));
            }
            TailProfile { tail, total }
        })
    }

    /// Bound on sum over |eta - round(xi)|_inf > radius of |theta_hat(xi - eta)|
    /// in dimension `dim`, measured over offsets xi - round(xi) in [-1/2, 1/2].
    pub fn tail_weight(&self, radius: usize, dim: usize) -> f64 {
        let p = self.tail_profile();
        let t = p.tail[radius.min(p.tail.len() - 1)];
        dim as f64 * t * p.total.powi(dim as i32 - 1)
    }

    /// Smallest radius whose tail weight is below `tolerance`.
    pub fn radius_for_tolerance(&self, tolerance: f64, dim: usize) -> Option<usize> {
        (1..TAIL_MAX_RADIUS).find(|&r| self.tail_weight(r, dim) <= tolerance)
    }

    /// Largest truncation radius this table can serve.
    pub fn max_radius(&self) -> usize {
        (self.range - 0.5).floor().max(0.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values() {
        let t = build_theta();
        assert_eq!(t.eval(0.0), 1.0);
        assert!((t.eval(PI) - 0.5).abs() < 1e-15);
        assert_eq!(t.eval(2.0 * PI), 0.0);
        assert_eq!(t.eval(-1.3), t.eval(1.3));
        assert!(t.partition_defect(10_000) < 1e-12);
    }

    #[test]
    fn transform_at_integers() {
        let t = build_theta();
        assert!((theta_hat(&t, 0.0).re - 1.0).abs() < 1e-10);
        assert!(theta_hat(&t, 5.0).norm() < 1e-10);
        let half = theta_hat(&t, 0.5).re;
        assert!(half > 0.0 && half < 1.0);
    }

    #[test]
    fn phi_zero_is_theta_hat() {
        let t = build_theta();
        assert_eq!(phi_alpha(&t, 0, 0.7), theta_hat(&t, 0.7));
        let nd = phi_alpha_nd(&t, &MultiIndex::new(vec![0, 0]), &[0.3, -1.2]);
        assert!((nd - theta_hat_nd(&t, &[0.3, -1.2])).norm() < 1e-15);
    }

    #[test]
    fn table_interpolates() {
        let t = Arc::new(build_theta());
        let table = ThetaHatTable::new(t.clone(), 6.0).unwrap();
        for &x in &[0.0, 0.03, -0.51, 1.7, 5.9] {
            assert!((table.eval(x) - theta_hat(&t, x).re).abs() < 1e-11, "{x}");
        }
        assert_eq!(table.eval(6.5), 0.0);
        for k in -5..=5 {
            assert!((table.eval(k as f64) - theta_hat(&t, k as f64).re).abs() < 1e-15);
        }
    }
}
