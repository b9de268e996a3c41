use proptest::prelude::*;
use sheetcap_core::capacity::{capacity_of, minimize_energy, CompactSet, SolverOptions, SymmetricMatrix};
use sheetcap_core::kernels::{potential, DiscreteMeasure, RieszKernel};

#[test]
fn ball_scaling_in_three_dimensions() {
    let k = RieszKernel::power(1.0, 3).unwrap();
    let unit = capacity_of(&CompactSet::ball(vec![0.0; 3], 1.0).unwrap(), &k, &[8, 16], 1e-6).unwrap();
    let big = capacity_of(&CompactSet::ball(vec![0.0; 3], 2.0).unwrap(), &k, &[8, 16], 1e-6).unwrap();
    assert!((big.value / unit.value - 2.0).abs() < 0.02 * 2.0);
    assert!((unit.value - 1.0).abs() < 0.05);
}

#[test]
fn potential_off_the_set_is_below_energy() {
    let k = RieszKernel::power(1.0, 3).unwrap();
    let r = capacity_of(&CompactSet::ball(vec![0.0; 3], 1.0).unwrap(), &k, &[8], 1e-7).unwrap();
    let mu = r.equilibrium.unwrap();
    let far = potential(&k, &mu, &[3.0, 0.0, 0.0]).unwrap();
    assert!(far < r.energy);
    assert!((far - 1.0 / 3.0).abs() < 1e-3);
}

#[test]
fn negative_beta_gives_one() {
    let k = RieszKernel::new(-1.0, 2, 1.0).unwrap();
    let r = capacity_of(&"box:0,0:1,1".parse().unwrap(), &k, &[4], 1e-6).unwrap();
    assert_eq!(r.value, 1.0);
}

#[test]
fn equilibrium_potential_is_flat_on_support() {
    let k = RieszKernel::power(1.0, 3).unwrap();
    let set = CompactSet::ball(vec![0.0; 3], 1.0).unwrap();
    let r = capacity_of(&set, &k, &[10], 1e-7).unwrap();
    let mu = r.equilibrium.unwrap();
    let diag = k.self_energy(mu.cell_size());
    for i in 0..mu.len() {
        let w = mu.weights()[i];
        if w > 0.0 {
            // off-diagonal potential plus the regularized self term
            let p = off_diagonal(&k, &mu, i) + w * diag;
            assert!(p >= r.energy - r.duality_gap - 1e-9, "atom {i}: {p} < {}", r.energy);
        }
    }
}

fn off_diagonal(k: &RieszKernel, mu: &DiscreteMeasure, i: usize) -> f64 {
    (0..mu.len())
        .filter(|&j| j != i)
        .map(|j| {
            let d: Vec<f64> = mu.point(i).iter().zip(mu.point(j)).map(|(a, b)| a - b).collect();
            mu.weights()[j] * k.eval(&d)
        })
        .sum()
}

fn psd(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |a| {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
            }
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_certifies_its_minimum(n in 2usize..8, m in psd(8)) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[i * 8 + j]).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let k = SymmetricMatrix::from_rows(&refs).unwrap();
        let r = minimize_energy(&k, &SolverOptions { tol: 1e-9, ..Default::default() }).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.duality_gap <= 1e-9 * r.energy);
        prop_assert!(r.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert!(r.energy <= rows[i][i] + 1e-12);
        }
        let uniform: f64 = rows.iter().flatten().sum::<f64>() / (n * n) as f64;
        prop_assert!(r.energy <= uniform + 1e-12);
    }

    #[test]
    fn capacity_is_translation_invariant(shift in prop::collection::vec(-2.0..2.0f64, 3)) {
        let k = RieszKernel::power(1.0, 3).unwrap();
        let set = CompactSet::ball(vec![0.0; 3], 0.5).unwrap();
        let a = capacity_of(&set, &k, &[6], 1e-7).unwrap();
        let b = capacity_of(&set.translated(&shift), &k, &[6], 1e-7).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-6 * a.value);
    }

    #[test]
    fn nested_balls_are_monotone(r in 0.2..1.0f64, grow in 1.1..2.0f64) {
        let k = RieszKernel::power(1.0, 3).unwrap();
        let small = capacity_of(&CompactSet::ball(vec![0.0; 3], r).unwrap(), &k, &[8], 1e-7).unwrap();
        let large = capacity_of(&CompactSet::ball(vec![0.0; 3], r * grow).unwrap(), &k, &[8], 1e-7).unwrap();
        prop_assert!(small.value <= large.value * (1.0 + 1e-6));
    }

    #[test]
    fn scaling_law(lambda in 0.3..3.0f64) {
        let k = RieszKernel::power(1.0, 3).unwrap();
        let set = CompactSet::ball(vec![0.0; 3], 1.0).unwrap();
        let a = capacity_of(&set, &k, &[8], 1e-7).unwrap();
        let b = capacity_of(&set.scaled(lambda), &k, &[8], 1e-7).unwrap();
        prop_assert!((b.value / a.value - lambda).abs() <= 1e-6 * lambda);
    }
}
