use sheetcap_core::capacity::CompactSet;
use sheetcap_core::dimension::{sheet_range_dimension, BandPolicy};
use sheetcap_core::fields::Grid;
use sheetcap_core::hitting::{log_spaced, PathSampler, Source, Window};
use sheetcap_core::spde::Coefficients;
use sheetcap_core::verify::{girsanov_crosscheck, marginal_density_check, phi_check, PhiCase};

#[test]
fn planar_sheet_range_fills_the_plane() {
    let mut scales = log_spaced(0.05, 0.5, 6);
    scales.reverse();
    let e = sheet_range_dimension(2, 1.0, 2.0, 256, &scales, BandPolicy::default(), 3).unwrap();
    assert!((e.slope - 2.0).abs() < 0.25, "{}", e.slope);
}

#[test]
fn gaussian_marginal_sits_between_envelopes() {
    let grid = Grid::uniform(2, 2.0, 4).unwrap();
    let s = PathSampler::new(Source::Spde { coeffs: Coefficients::constant_diagonal(2, 0.5).unwrap() }, grid).unwrap();
    let r = marginal_density_check(&s, &[1.0, 1.0], 200_000, 1.0, 1).unwrap();
    assert!(r.pass());
    assert!(r.c_low > 0.0 && r.c_low <= r.c_up);
    assert!(r.max_rel_error.unwrap() < 0.3);
}

#[test]
fn girsanov_weight_has_unit_mean() {
    let grid = Grid::windowed(2, 1.0, 2.0, 8, 1).unwrap();
    let c = Coefficients::identity(2).with_drift(vec![0.2, -0.1]).unwrap();
    let set = CompactSet::ball(vec![0.3, 0.0], 0.4).unwrap();
    let r = girsanov_crosscheck(&c, &grid, &set, &Window::new(1.0, 2.0).unwrap(), 0.0, 2000, 8).unwrap();
    assert!(r.weight_ok(4.0), "{r:?}");
    assert!(r.identity_holds(4.0), "{r:?}");
}

#[test]
fn phi_cases() {
    let r = [1.0, 10.0, 100.0, 1000.0];
    let b = phi_check(0.5, 3.0, 2, &r, 0.05, 0.1).unwrap();
    assert_eq!(b.case, PhiCase::Bounded);
    assert!(b.pass);
    let l = phi_check(0.5, 2.0, 2, &r, 0.05, 0.1).unwrap();
    assert_eq!(l.case, PhiCase::Logarithmic);
    assert!(l.pass);
    assert!(phi_check(0.5, 1.0, 2, &r, 0.05, 0.1).is_err());
}
