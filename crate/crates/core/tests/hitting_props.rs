use proptest::prelude::*;
use sheetcap_core::capacity::CompactSet;
use sheetcap_core::fields::{CovarianceModel, Grid};
use sheetcap_core::hitting::{estimate_hit_probs, hits, HitRule, PathSampler, RefineConfig, Source, Window};

fn sampler(d: usize) -> PathSampler {
    let grid = Grid::windowed(2, 1.0, 2.0, 8, 1).unwrap();
    PathSampler::new(Source::Field { model: CovarianceModel::brownian_sheet(), dim: d }, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hits_are_monotone_in_the_set(seed in any::<u64>(), r in 0.05..0.5f64) {
        let s = sampler(3);
        let w = Window::new(1.0, 2.0).unwrap();
        let small = CompactSet::ball(vec![0.0; 3], r).unwrap();
        let big = CompactSet::ball(vec![0.0; 3], 2.0 * r).unwrap();
        for i in 0..20 {
            let p = s.sample(seed, i).unwrap();
            if hits(&p, &small, &w, 0.0).unwrap() {
                prop_assert!(hits(&p, &big, &w, 0.0).unwrap());
            }
        }
    }

    #[test]
    fn refined_rule_dominates_grid_rule(seed in 0u64..1000) {
        let s = sampler(4);
        let w = Window::new(1.0, 2.0).unwrap();
        let sets = vec![CompactSet::ball(vec![0.0; 4], 0.3).unwrap()];
        let grid = estimate_hit_probs(&s, &sets, &w, 200, &HitRule::Grid { margin: 0.0 }, seed).unwrap();
        let refined = estimate_hit_probs(&s, &sets, &w, 200, &HitRule::Refined(RefineConfig::default()), seed).unwrap();
        prop_assert!(refined[0].hits >= grid[0].hits);
        prop_assert!(refined[0].ci_low <= refined[0].p_hat && refined[0].p_hat <= refined[0].ci_high);
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let s = sampler(3);
    let w = Window::new(1.0, 2.0).unwrap();
    let sets = vec![CompactSet::ball(vec![0.2, 0.0, 0.0], 0.2).unwrap()];
    let rule = HitRule::Refined(RefineConfig::default());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_hit_probs(&s, &sets, &w, 300, &rule, 4).unwrap())
    };
    assert_eq!(run(1)[0].hits, run(3)[0].hits);
}
