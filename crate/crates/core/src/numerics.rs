//! Small numerical kernels shared across modules.

use num_complex::Complex64;

/// Finite-difference weights (Fornberg's recursion) for derivatives of order
/// `0..=max_order` at `z`, using the given nodes. `result[k][j]` multiplies
/// `f(nodes[j])` for the k-th derivative.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Central stencil offsets and weights for the `order`-th derivative with
/// formal accuracy `accuracy` (even), on unit spacing.
pub fn central_stencil(order: usize, accuracy: usize) -> (Vec<i64>, Vec<f64>) {
    let half = ((order + 1) / 2 + accuracy / 2 - 1).max(1) as i64;
    let offsets: Vec<i64> = (-half..=half).collect();
    let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let w = fornberg_weights(0.0, &nodes, order);
    (offsets, w[order].clone())
}

/// Lagrange interpolation weights for evaluating at `t` from the given nodes.
pub fn lagrange_weights(t: f64, nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (t - xk) / (xj - xk))
                .product()
        })
        .collect()
}

/// Japanese bracket (1 + |xi|^2)^(1/2).
pub fn japanese_bracket(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub(crate) fn bracket_i(xi: &[i64]) -> f64 {
    (1.0 + xi.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt()
}

pub(crate) fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Unit-modulus exponential e^{i t}.
#[inline]
pub(crate) fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// Mixed-radix decomposition of a row-major linear index.
pub(crate) fn unravel(mut idx: usize, extent: usize, dim: usize, out: &mut [usize]) {
    for k in (0..dim).rev() {
        out[k] = idx % extent;
        idx /= extent;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_second_derivative() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn central_first_derivative_is_fourth_order() {
        let (off, w) = central_stencil(1, 4);
        assert_eq!(off, vec![-2, -1, 0, 1, 2]);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn central_stencils_differentiate_polynomials_exactly() {
        for order in 1..=4 {
            let (off, w) = central_stencil(order, 4);
            for p in 0..(order + 4) {
                let approx: f64 = off
                    .iter()
                    .zip(&w)
                    .map(|(&o, &c)| c * (o as f64).powi(p as i32))
                    .sum();
                let exact = if p == order {
                    (1..=order).product::<usize>() as f64
                } else {
                    0.0
                };
                assert!((approx - exact).abs() < 1e-9, "order {order} p {p}");
            }
        }
    }

    #[test]
    fn lagrange_weights_sum_to_one() {
        let w = lagrange_weights(0.3, &[-1.0, 0.0, 1.0, 2.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(japanese_bracket(&[0.0]), 1.0);
        assert!((japanese_bracket(&[3.0, 4.0]) - 26f64.sqrt()).abs() < 1e-15);
        assert!((japanese_bracket(&[1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
