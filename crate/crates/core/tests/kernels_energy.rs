use proptest::prelude::*;
use sheetcap_core::kernels::{energy, DiagonalMode, DiscreteMeasure, RieszKernel};

fn fibonacci_sphere(n: usize) -> Vec<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pts = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        pts.extend([r * th.cos(), r * th.sin(), z]);
    }
    pts
}

#[test]
fn uniform_sphere_has_unit_newtonian_energy() {
    let k = RieszKernel::power(1.0, 3).unwrap();
    let mu = DiscreteMeasure::uniform(3, fibonacci_sphere(10_000), 1e-3).unwrap();
    let e = energy(&k, &mu, DiagonalMode::Exclude).unwrap();
    assert!((e - 1.0).abs() < 0.02, "{e}");
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_even(d in 1usize..6, frac in -0.5..0.99f64, seed in point(6)) {
        let beta = frac * d as f64;
        let k = RieszKernel::new(beta, d, 3.0).unwrap();
        let x: Vec<f64> = seed[..d].to_vec();
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let minus: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(k.eval(&x), k.eval(&minus));
    }

    #[test]
    fn power_kernel_scales(d in 2usize..6, frac in 0.05..0.95f64, lambda in 0.1..10.0f64, seed in point(6)) {
        let beta = frac * d as f64;
        let k = RieszKernel::power(beta, d).unwrap();
        let x: Vec<f64> = seed[..d].to_vec();
        let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let lx: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let lhs = k.eval(&lx);
        let rhs = lambda.powf(-beta) * k.eval(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn energy_ignores_order_and_translation(
        pts in prop::collection::vec(-1.0..1.0f64, 3 * 12),
        w in prop::collection::vec(0.1..1.0f64, 12),
        shift in point(3),
    ) {
        let total: f64 = w.iter().sum();
        let mut w: Vec<f64> = w.iter().map(|v| v / total).collect();
        w[11] = 1.0 - w[..11].iter().sum::<f64>();
        let k = RieszKernel::power(1.0, 3).unwrap();
        let mu = DiscreteMeasure::new(3, pts.clone(), w.clone(), 0.05).unwrap();
        let e = energy(&k, &mu, DiagonalMode::CellRegularized).unwrap();

        let mut rp = Vec::new();
        let mut rw = Vec::new();
        for i in (0..12).rev() {
            rp.extend(pts[3 * i..3 * i + 3].iter().zip(&shift).map(|(a, s)| a + s));
            rw.push(w[i]);
        }
        let t: f64 = rw.iter().sum();
        rw[11] += 1.0 - t;
        let moved = DiscreteMeasure::new(3, rp, rw, 0.05).unwrap();
        let e2 = energy(&k, &moved, DiagonalMode::CellRegularized).unwrap();
        prop_assert!((e - e2).abs() <= 1e-9 * e.abs());

        let ex = energy(&k, &mu, DiagonalMode::Exclude).unwrap();
        prop_assert!(e >= ex);
    }
}
