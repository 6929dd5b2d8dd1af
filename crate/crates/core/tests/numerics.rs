use co4_core::numerics::{fd_gradient, softmax_row, Rng};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn softmax_is_a_distribution(v in proptest::collection::vec(-300.0..300.0f64, 1..16)) {
        let p = softmax_row(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn softmax_ignores_shifts(
        v in proptest::collection::vec(-50.0..50.0f64, 1..16),
        c in -500.0..500.0f64,
    ) {
        let a = softmax_row(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = softmax_row(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn fd_matches_quadratic_gradient(
        a in proptest::collection::vec(-2.0..2.0f64, 16),
        b in proptest::collection::vec(-2.0..2.0f64, 4),
        x in proptest::collection::vec(-3.0..3.0f64, 4),
    ) {
        // f(x) = xᵀAx + bᵀx, ∇f = (A + Aᵀ)x + b
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..4 {
                s += b[i] * x[i];
                for j in 0..4 {
                    s += x[i] * a[i * 4 + j] * x[j];
                }
            }
            s
        };
        let g = fd_gradient(f, &x, 1e-4).unwrap();
        for i in 0..4 {
            let want: f64 = (0..4).map(|j| (a[i * 4 + j] + a[j * 4 + i]) * x[j]).sum::<f64>() + b[i];
            prop_assert!((g[i] - want).abs() < 1e-7, "{} vs {}", g[i], want);
        }
    }
}

#[test]
fn rng_draws_are_reproducible_and_well_spread() {
    let mut a = Rng::new(2024);
    let mut b = Rng::new(2024);
    let n = 10_000;
    let (mut sum_u, mut sum_z, mut sum_z2) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let u = a.uniform();
        assert_eq!(u.to_bits(), b.uniform().to_bits());
        assert!((0.0..1.0).contains(&u));
        let z = a.normal();
        assert_eq!(z.to_bits(), b.normal().to_bits());
        sum_u += u;
        sum_z += z;
        sum_z2 += z * z;
    }
    let n = n as f64;
    // five-sigma bands
    assert!((sum_u / n - 0.5).abs() < 5.0 * (1.0 / 12.0 / n).sqrt());
    assert!((sum_z / n).abs() < 5.0 / n.sqrt());
    assert!((sum_z2 / n - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
    assert_ne!(Rng::new(1).next_u64(), Rng::new(2).next_u64());
    assert_ne!(
        Rng::with_stream(1, 1).next_u64(),
        Rng::with_stream(1, 2).next_u64()
    );
}
