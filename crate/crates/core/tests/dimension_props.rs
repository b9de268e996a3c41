use proptest::prelude::*;
use sheetcap_core::dimension::{box_counts, estimate_dimension, BandPolicy};
use sheetcap_core::rng;

fn cloud(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    (0..(n * dim) as u64).map(|k| (rng::hash_words(seed, &[k]) >> 11) as f64 / (1u64 << 53) as f64).collect()
}

fn halving(top: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| top / 2f64.powi(k as i32)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halving_the_box_multiplies_counts_by_at_most_two_to_the_d(seed in any::<u64>(), dim in 1usize..4) {
        let pts = cloud(2000, dim, seed);
        let c = box_counts(&pts, dim, &halving(0.5, 7)).unwrap();
        for w in c.windows(2) {
            prop_assert!(w[0] <= w[1]);
            prop_assert!(w[1] <= (1u64 << dim) * w[0]);
        }
    }

    #[test]
    fn dyadic_rescaling_keeps_counts(seed in any::<u64>(), k in -3i32..4) {
        let lambda = 2f64.powi(k);
        let pts = cloud(2000, 2, seed);
        let scaled: Vec<f64> = pts.iter().map(|v| v * lambda).collect();
        let s = halving(0.5, 6);
        let ls: Vec<f64> = s.iter().map(|v| v * lambda).collect();
        prop_assert_eq!(box_counts(&pts, 2, &s).unwrap(), box_counts(&scaled, 2, &ls).unwrap());
    }

    #[test]
    fn translation_leaves_the_slope(seed in any::<u64>(), shift in prop::collection::vec(-5.0..5.0f64, 2)) {
        let pts = cloud(20_000, 2, seed);
        let moved: Vec<f64> = pts.chunks_exact(2).flat_map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        let s = halving(0.25, 8);
        let a = estimate_dimension(&pts, 2, &s, BandPolicy::default(), None).unwrap();
        let b = estimate_dimension(&moved, 2, &s, BandPolicy::default(), None).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 0.1, "{} vs {}", a.slope, b.slope);
    }
}
