use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use tpdo_core::diffcalc::*;

fn rational_table(dim: usize, lo: i64, hi: i64, values: &[i64]) -> LatticeFunction<BigRational> {
    let window = LatticeBox::cube(dim, lo, hi).unwrap();
    let vals = (0..window.len()).map(|i| BigRational::from_integer(BigInt::from(values[i % values.len()]))).collect();
    LatticeFunction::from_table(window, vals).unwrap()
}

fn wave(dim: usize, coeffs: Vec<f64>) -> LatticeFunction<f64> {
    LatticeFunction::from_rule(dim, move |p| {
        coeffs
            .chunks(3)
            .enumerate()
            .map(|(k, c)| c[0] * (c[1] * p[k % p.len()] as f64 + c[2] + 0.1 * p.iter().sum::<i64>() as f64).cos())
            .sum()
    })
}

fn multi(entries: &[u32]) -> MultiIndex {
    MultiIndex::new(entries.to_vec())
}

fn binom(n: u32, k: u32) -> BigRational {
    let mut acc = BigRational::one();
    for i in 0..k {
        acc = acc * BigRational::from_integer(BigInt::from(n - i)) / BigRational::from_integer(BigInt::from(i + 1));
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_iteration(
        dim in 1usize..=3,
        alpha in prop::collection::vec(0u32..=2, 3),
        values in prop::collection::vec(-50i64..50, 7..40),
    ) {
        let alpha = multi(&alpha[..dim]);
        prop_assume!(alpha.order() <= 4);
        let f = rational_table(dim, -3, 4, &values);
        let xi = vec![-1i64; dim];
        prop_assert_eq!(forward_difference(&f, &alpha, &xi).unwrap(), iterated_forward_difference(&f, &alpha, &xi).unwrap());
    }

    #[test]
    fn closed_form_matches_iteration_in_floating_point(
        alpha in prop::collection::vec(0u32..=2, 2),
        coeffs in prop::collection::vec(-2.0f64..2.0, 6),
        xi in prop::collection::vec(-20i64..20, 2),
    ) {
        let f = wave(2, coeffs);
        let alpha = multi(&alpha);
        let a = forward_difference(&f, &alpha, &xi).unwrap();
        let b = iterated_forward_difference(&f, &alpha, &xi).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) * 16.0);
    }

    #[test]
    fn leibniz_rule(
        dim in 1usize..=2,
        alpha in prop::collection::vec(0u32..=3, 2),
        u in prop::collection::vec(-9i64..9, 5..30),
        v in prop::collection::vec(-9i64..9, 5..30),
    ) {
        let alpha = multi(&alpha[..dim]);
        prop_assume!(alpha.order() <= 3);
        let phi = rational_table(dim, -4, 4, &u);
        let psi = rational_table(dim, -4, 4, &v);
        let window = LatticeBox::cube(dim, -4, 4).unwrap();
        let product = LatticeFunction::from_table(
            window.clone(),
            window.points().map(|p| phi.eval(&p).unwrap() * psi.eval(&p).unwrap()).collect(),
        ).unwrap();
        let xi = vec![-1i64; dim];
        let lhs = forward_difference(&product, &alpha, &xi).unwrap();
        let mut rhs = BigRational::zero();
        for beta in alpha.below() {
            let rest = alpha.checked_sub(&beta).unwrap();
            let shifted: Vec<i64> = xi.iter().zip(beta.entries()).map(|(x, &b)| x + b as i64).collect();
            let c = beta.entries().iter().zip(alpha.entries()).fold(BigRational::one(), |acc, (&b, &a)| acc * binom(a, b));
            rhs += c * forward_difference(&phi, &beta, &xi).unwrap() * forward_difference(&psi, &rest, &shifted).unwrap();
        }
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn summation_by_parts(
        u in prop::collection::vec(-9i64..9, 12),
        v in prop::collection::vec(-9i64..9, 12),
        k in 1u32..=3,
    ) {
        // finitely supported on [-6, 5], zero padded to [-12, 12]
        let pad = |vals: &Vec<i64>| LatticeFunction::from_rule(1, {
            let vals = vals.clone();
            move |p: &[i64]| {
                let i = p[0] + 6;
                if (0..12).contains(&i) { BigRational::from_integer(BigInt::from(vals[i as usize])) } else { BigRational::zero() }
            }
        });
        let (phi, psi) = (pad(&u), pad(&v));
        let alpha = multi(&[k]);
        let mut lhs = BigRational::zero();
        let mut rhs = BigRational::zero();
        for x in -10..=10 {
            lhs += phi.eval(&[x]).unwrap() * forward_difference(&psi, &alpha, &[x]).unwrap();
            rhs += transpose_difference(&phi, &alpha, &[x]).unwrap() * psi.eval(&[x]).unwrap();
        }
        let sign = if k % 2 == 1 { -BigRational::one() } else { BigRational::one() };
        prop_assert_eq!(lhs, sign * rhs);
    }

    #[test]
    fn falling_factorial_difference(
        gamma in prop::collection::vec(-3i64..=5, 2),
        alpha in prop::collection::vec(0u32..=2, 2),
        xi in prop::collection::vec(4i64..12, 2),
    ) {
        let g = gamma.clone();
        let f = LatticeFunction::from_rule(2, move |p: &[i64]| falling_factorial(p, &g).unwrap());
        let alpha = multi(&alpha);
        let lhs = forward_difference(&f, &alpha, &xi).unwrap();
        let a: Vec<i64> = alpha.entries().iter().map(|&v| v as i64).collect();
        let reduced: Vec<i64> = gamma.iter().zip(&a).map(|(g, a)| g - a).collect();
        let rhs = falling_factorial(&gamma, &a).unwrap() * falling_factorial(&xi, &reduced).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn remainder_respects_bound(
        coeffs in prop::collection::vec(-2.0f64..2.0, 6),
        order in 1u32..=4,
        omega in prop::collection::vec(0u32..=1, 2),
        xi in prop::collection::vec(-5i64..5, 2),
        eta in prop::collection::vec(-3i64..=3, 2),
    ) {
        let f = wave(2, coeffs);
        let omega = multi(&omega);
        let (ff, e, n) = (f.clone(), eta.clone(), order);
        let r = LatticeFunction::from_rule(2, move |p: &[i64]| taylor_remainder(&ff, p, &e, n).unwrap());
        let value = forward_difference(&r, &omega, &xi).unwrap();
        let bound = remainder_bound(&f, &xi, &eta, order, &omega).unwrap();
        prop_assert!(value.abs() <= bound * (1.0 + 1e-12) + 1e-12, "{} > {}", value.abs(), bound);
    }

    #[test]
    fn one_dimensional_remainder_is_a_nested_sum(
        values in prop::collection::vec(-20i64..20, 30),
        order in 1u32..=3,
        eta in 0i64..=6,
    ) {
        let f = rational_table(1, -15, 15, &values);
        let xi = [-2i64];
        let r = taylor_remainder(&f, &xi, &[eta], order).unwrap();
        // sum over eta > k_1 > ... > k_N >= 0 of Delta^N f(xi + k_N)
        let mut brute = BigRational::zero();
        let mut stack = vec![(eta, 0u32)];
        while let Some((upper, depth)) = stack.pop() {
            if depth == order {
                brute += forward_difference(&f, &multi(&[order]), &[xi[0] + upper]).unwrap();
                continue;
            }
            for k in 0..upper {
                stack.push((k, depth + 1));
            }
        }
        prop_assert_eq!(r, brute);
    }
}

#[test]
fn nested_sum_counts_falling_factorials() {
    for t0 in -8i64..=8 {
        for t1 in -8i64..=8 {
            for alpha in MultiIndex::below_order(2, 5) {
                let ns = nested_sum(&[t0, t1], &alpha).unwrap();
                let a: Vec<i64> = alpha.entries().iter().map(|&v| v as i64).collect();
                let ff = falling_factorial(&[t0, t1], &a).unwrap() / BigRational::from_integer(alpha.factorial_big());
                assert_eq!(ns, ff, "theta=({t0},{t1}) alpha={alpha}");
            }
        }
    }
}

#[test]
fn negative_falling_factorial_is_reciprocal() {
    assert_eq!(falling_factorial_1d(4, -1).unwrap(), BigRational::new(BigInt::one(), BigInt::from(4)));
    assert_eq!(falling_factorial_1d(5, -2).unwrap(), BigRational::new(BigInt::one(), BigInt::from(30)));
    assert!(falling_factorial_1d(0, -1).is_err());
    assert!(falling_factorial_1d(-1, -2).is_err());
}
