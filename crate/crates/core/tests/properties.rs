//! Randomized invariants, searched with proptest: population bookkeeping,
//! state validation, the extinction fixed point, and absorption of
//! extinction in full runs.

use proptest::collection::vec;
use proptest::prelude::*;

use brw_core::brw::{run, ObserverConfig, OffspringSpec, Population};
use brw_core::chains::{ChainModel, State};
use brw_core::rng::{domain, Streams};

/// A valid word of the three-regular tree: first letter below 3, rest below 2.
fn tree_word() -> impl Strategy<Value = Vec<u8>> {
    (0u8..3, vec(0u8..2, 0..6)).prop_map(|(first, rest)| {
        let mut word = vec![first];
        word.extend(rest);
        word
    })
}

/// A table offspring law: up to 4 support points with positive weights
/// (duplicate draws merge, since tables require distinct values).
fn table_spec() -> impl Strategy<Value = OffspringSpec> {
    vec((0u32..6, 1u32..100), 1..5).prop_map(|entries| {
        let mut merged = std::collections::BTreeMap::new();
        for (value, weight) in entries {
            *merged.entry(value).or_insert(0u32) += weight;
        }
        let total: u32 = merged.values().sum();
        let pmf = merged
            .into_iter()
            .map(|(value, weight)| (value, f64::from(weight) / f64::from(total)))
            .collect();
        OffspringSpec::Table { pmf }
    })
}

proptest! {
    #[test]
    fn population_counts_merge_and_total(words in vec((tree_word(), 1u64..50), 1..12)) {
        let chain = ChainModel::regular_tree(3).unwrap();
        let counts: Vec<(State, u64)> = words
            .iter()
            .map(|(w, n)| (State::TreeWord(w.clone()), *n))
            .collect();
        let population = Population::from_counts(&chain, 0, counts.clone()).unwrap();
        let expected_total: u64 = counts.iter().map(|(_, n)| n).sum();
        prop_assert_eq!(population.total(), expected_total);
        for (state, _) in &counts {
            let expected: u64 = counts
                .iter()
                .filter(|(s, _)| s == state)
                .map(|(_, n)| n)
                .sum();
            prop_assert_eq!(population.count_at(state), expected);
        }
    }

    #[test]
    fn tree_state_validation_accepts_exactly_the_legal_words(
        word in vec(0u8..5, 1..6),
        degree in 3u32..6,
    ) {
        let chain = ChainModel::regular_tree(degree).unwrap();
        let d = degree as u8;
        let legal = word
            .iter()
            .enumerate()
            .all(|(i, &l)| l < if i == 0 { d } else { d - 1 });
        let outcome = chain.validate_state(&State::TreeWord(word));
        prop_assert_eq!(outcome.is_ok(), legal);
    }

    #[test]
    fn extinction_probability_is_the_smallest_pgf_fixed_point(spec in table_spec()) {
        let offspring = spec.build().unwrap();
        let q = offspring.extinction_probability().unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        // A fixed point of the generating function...
        prop_assert!((offspring.pgf(q).unwrap() - q).abs() < 1e-9);
        if offspring.pmf() == [(1, 1.0)] {
            // ...zero for the immortal single-child line...
            prop_assert_eq!(q, 0.0);
        } else if offspring.mean_offspring() <= 1.0 {
            // ...one at or below criticality...
            prop_assert!(q >= 1.0 - 1e-9);
        } else {
            // ...and strictly below one when supercritical, separated from
            // any smaller candidate: the pgf maps [0, q) strictly above the
            // diagonal's reflection, so iterating from 0 cannot undershoot.
            prop_assert!(q < 1.0);
            let probe = q * 0.9;
            prop_assert!(offspring.pgf(probe).unwrap() > probe - 1e-12);
        }
    }

    #[test]
    fn extinction_is_absorbing_and_w_stays_nonnegative(
        spec in table_spec(),
        seed in 0u64..1000,
    ) {
        let chain = ChainModel::regular_tree(3).unwrap();
        let offspring = spec.build().unwrap();
        // The engine normalizes by mean^n and so rejects mean-zero laws.
        prop_assume!(offspring.mean_offspring() > 0.0);
        let mut rng = Streams::new(97).stream(domain::AUXILIARY, seed);
        let summary = run(&chain, &offspring, 8, &ObserverConfig::none(), &mut rng).unwrap();
        let mut seen_extinct = false;
        for record in &summary.records {
            prop_assert!(record.normalized >= 0.0);
            if seen_extinct {
                prop_assert_eq!(record.population, 0);
            }
            seen_extinct = seen_extinct || record.population == 0;
        }
        prop_assert_eq!(summary.survived(), summary.final_record().population > 0);
    }
}
