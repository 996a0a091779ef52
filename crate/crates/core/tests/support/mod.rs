//! Shared helpers for integration tests: an independent per-particle
//! implementation of one branching-walk step, and a two-sample chi-squared
//! homogeneity test.
//!
//! The per-particle step deliberately shares no code with the engine: it
//! draws one offspring count per particle and one categorical transition per
//! child, so distributional agreement with the aggregated engine is a real
//! cross-check of the convolution and multinomial sampling paths.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use brw_core::brw::{OffspringDistribution, Population};
use brw_core::chains::{transition_row, ChainModel, State, TransitionRow};

/// Advance a population one generation, one particle at a time.
pub fn brute_force_step(
    chain: &ChainModel,
    population: &Population,
    offspring: &OffspringDistribution,
    rng: &mut ChaCha8Rng,
) -> Population {
    let mut counts: HashMap<State, u64> = HashMap::new();
    for (state, count) in population.iter() {
        let row = transition_row(chain, state).expect("valid state");
        for _ in 0..count {
            let children = offspring.sample(rng);
            for _ in 0..children {
                *counts.entry(sample_row(&row, rng)).or_insert(0) += 1;
            }
        }
    }
    Population::from_counts(
        chain,
        population.generation() + 1,
        counts.into_iter().collect(),
    )
    .expect("oracle step produced a valid population")
}

fn sample_row(row: &TransitionRow, rng: &mut ChaCha8Rng) -> State {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (state, p) in &row.entries {
        acc += p;
        if u < acc {
            return state.clone();
        }
    }
    row.entries
        .last()
        .expect("transition rows are never empty")
        .0
        .clone()
}

/// Two-sample chi-squared homogeneity test on integer-valued outcomes.
/// Returns the p-value of the hypothesis that both samples draw from the
/// same law. Adjacent outcome bins are merged until each holds at least ten
/// combined observations.
pub fn chi_squared_homogeneity_p(a: &[u64], b: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let mut values: Vec<u64> = a.iter().chain(b.iter()).copied().collect();
    values.sort_unstable();
    values.dedup();
    let count_of = |sample: &[u64], value: u64| sample.iter().filter(|&&x| x == value).count();

    // Greedy left-to-right binning by combined frequency.
    const MIN_BIN: usize = 10;
    let mut bins: Vec<(usize, usize)> = Vec::new();
    let mut bin = (0usize, 0usize);
    for &value in &values {
        bin.0 += count_of(a, value);
        bin.1 += count_of(b, value);
        if bin.0 + bin.1 >= MIN_BIN {
            bins.push(bin);
            bin = (0, 0);
        }
    }
    if bin.0 + bin.1 > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += bin.0;
                last.1 += bin.1;
            }
            None => bins.push(bin),
        }
    }
    if bins.len() < 2 {
        // Both samples are concentrated on a single bin: identical supports,
        // nothing to reject.
        return 1.0;
    }

    let total_a: f64 = a.len() as f64;
    let total_b: f64 = b.len() as f64;
    let grand = total_a + total_b;
    let mut statistic = 0.0;
    for &(in_a, in_b) in &bins {
        let row_total = (in_a + in_b) as f64;
        let expected_a = total_a * row_total / grand;
        let expected_b = total_b * row_total / grand;
        statistic += (in_a as f64 - expected_a).powi(2) / expected_a;
        statistic += (in_b as f64 - expected_b).powi(2) / expected_b;
    }
    let freedom = (bins.len() - 1) as f64;
    let dist = ChiSquared::new(freedom).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}
