use proptest::prelude::*;
use sheetcap_core::fields::{simulate, CovarianceModel, Grid};
use sheetcap_core::spde::{driving_noise, solve, solve_seeded, Coefficients};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_diffusion_returns_the_sheet(seed in any::<u64>(), cells in 1usize..20, d in 1usize..5) {
        let grid = Grid::uniform(2, 1.5, cells).unwrap();
        let noise = driving_noise(&grid, d, seed);
        let x = solve(&Coefficients::identity(d), &noise).unwrap();
        prop_assert_eq!(&x.values, &noise.values);
    }

    #[test]
    fn dyadic_scaling_is_exact(seed in any::<u64>(), k in -3i32..4) {
        let rho = 2f64.powi(k);
        let grid = Grid::uniform(2, 2.0, 8).unwrap();
        let noise = driving_noise(&grid, 2, seed);
        let x = solve(&Coefficients::constant_diagonal(2, rho).unwrap(), &noise).unwrap();
        prop_assert!(x.values.iter().zip(&noise.values).all(|(a, w)| *a == rho * w));
    }

    #[test]
    fn solver_is_deterministic(seed in any::<u64>()) {
        let grid = Grid::uniform(2, 1.0, 6).unwrap();
        let c = Coefficients::sigmoid_perturbed(2, 1.0, 0.2).unwrap();
        let a = solve_seeded(&c, &grid, seed).unwrap();
        let b = solve_seeded(&c, &grid, seed).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn covariance_is_symmetric(s in prop::collection::vec(0.1..3.0f64, 2), t in prop::collection::vec(0.1..3.0f64, 2), h in 0.05..0.95f64) {
        for m in [CovarianceModel::brownian_sheet(), CovarianceModel::ou_sheet(), CovarianceModel::fbm_sheet(h, 1.0).unwrap()] {
            let (a, b) = (m.covariance(&s, &t), m.covariance(&t, &s));
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            prop_assert!(a * a <= m.variance(&s) * m.variance(&t) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn sheet_paths_vanish_on_the_axes() {
    let grid = Grid::uniform(2, 1.0, 5).unwrap();
    let p = simulate(&CovarianceModel::brownian_sheet(), &grid, 3, 9).unwrap();
    let shape = grid.shape();
    for node in 0..grid.n_nodes() {
        let idx = Grid::unflatten(&shape, node);
        if idx.contains(&0) {
            assert!(p.value(node).iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn constant_drift_adds_the_area() {
    let grid = Grid::uniform(2, 2.0, 8).unwrap();
    let noise = driving_noise(&grid, 2, 3);
    let c = [0.5, -0.25];
    let x = solve(&Coefficients::identity(2).with_drift(c.to_vec()).unwrap(), &noise).unwrap();
    let shape = grid.shape();
    for node in 0..grid.n_nodes() {
        let t = grid.node_coords(&Grid::unflatten(&shape, node));
        for k in 0..2 {
            assert_eq!(x.values[node * 2 + k], noise.values[node * 2 + k] + c[k] * t[0] * t[1]);
        }
    }
}
