use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsinfo::estimators::{entropy, ik_symbols, schedule_k};
use tsinfo::oracle::{ci_check_markov, exact_ik, exact_label_transition, stationary_distribution};
use tsinfo::processes::{build_ideal_chain, random_chain, random_recipe, sample_chain};
use tsinfo::{collect_blocks, apply_representation, ObservationSeries, RepresentationFunction, Symbol};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ideal_chains_satisfy_ci(seed in any::<u64>(), n in 2usize..7, y in 2usize..4) {
        prop_assume!(y <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recipe = random_recipe(&mut rng, n, y).unwrap();
        let chain = build_ideal_chain(&recipe).unwrap();
        let verdict = ci_check_markov(&chain.spec, &chain.representation, 1e-9, 1).unwrap();
        prop_assert!(verdict.holds, "violation {}", verdict.max_violation);
        let lumped = exact_label_transition(&chain.spec, &chain.representation).unwrap();
        for (a, row) in recipe.label_transition.iter().enumerate() {
            for (b, &t) in row.iter().enumerate() {
                prop_assert!((lumped[a * y + b] - t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn information_is_bounded_and_monotone_in_k(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_chain(&mut rng, n);
        let f = RepresentationFunction::identity(n);
        let h0 = entropy(&stationary_distribution(&spec).unwrap()).unwrap();
        let mut prev = 0.0;
        for k in 1..4 {
            let i = exact_ik(&spec, &f, k).unwrap();
            prop_assert!(i >= -1e-12 && i <= h0 + 1e-12);
            prop_assert!(i >= prev - 1e-10);
            prev = i;
        }
    }

    #[test]
    fn block_counts_are_consistent(raw in proptest::collection::vec(0u32..3, 5..200), k in 0usize..4) {
        prop_assume!(raw.len() > k);
        let symbols: Vec<Symbol> = raw.iter().map(|&s| Symbol(s)).collect();
        let blocks = collect_blocks(&symbols, 3, k).unwrap();
        prop_assert_eq!(blocks.n_blocks(), (symbols.len() - k) as u64);
        prop_assert_eq!(blocks.iter().map(|(_, c)| c).sum::<u64>(), blocks.n_blocks());
        let est = ik_symbols(&symbols, 3, k.max(1)).ok();
        if let Some(est) = est {
            prop_assert!(est.value >= -1e-12);
        }
    }

    #[test]
    fn schedule_is_monotone_and_respects_support(n in 1u64..1_000_000_000, y in 2usize..6) {
        let k = schedule_k(n, y);
        prop_assert!(k >= 1);
        prop_assert!(schedule_k(n.saturating_mul(2), y) >= k);
        if k > 1 {
            prop_assert!((y as f64).powi(k as i32 + 1) <= n as f64 / 10.0);
        }
    }
}

#[test]
fn representation_is_applied_pointwise() {
    let series = ObservationSeries::discrete(vec![0, 3, 2, 1, 3]).unwrap();
    let f = RepresentationFunction::from_indices(&[1, 0, 1, 0], 2).unwrap();
    let y = apply_representation(&f, &series).unwrap();
    assert_eq!(y, vec![Symbol(1), Symbol(0), Symbol(1), Symbol(0), Symbol(0)]);
}

#[test]
fn series_file_round_trip() {
    let spec = random_chain(&mut ChaCha8Rng::seed_from_u64(9), 4);
    let series = sample_chain(&spec, 500, 11, 3).unwrap();
    let mut buf = Vec::new();
    series.write_to(&mut buf).unwrap();
    let back = ObservationSeries::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.states(), series.states());
    assert_eq!(back.meta.seed, Some(11));
}
