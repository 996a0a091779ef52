//! Exact aggregated sampling for count-valued populations.
//!
//! The engine never materializes individual particles. Two reductions keep
//! the cost per occupied state bounded while preserving the exact law:
//!
//! * The total number of children of `k` i.i.d. particles is drawn either by
//!   `k` direct draws (small `k`) or by splitting `k` multinomially across
//!   the offspring support and summing `value * count` (large `k`). Both
//!   procedures sample the exact convolution law.
//! * A total of `n` children scatters over the destinations of a transition
//!   row by sequential conditional binomials, which is an exact multinomial
//!   sample.
//!
//! An opt-in approximate mode replaces huge draws with matched-moment normal
//! deviates. It exists for exploratory runs only and is never used by the
//! experiment suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use super::offspring::OffspringDistribution;

/// How aggregated counts are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Every draw follows the exact law (default).
    #[default]
    Exact,
    /// Draws with more than [`APPROX_THRESHOLD`] trials use matched-moment
    /// normal surrogates. Opt-in; excluded from the experiment suites.
    Approximate,
}

/// Above this many repetitions, offspring totals switch from per-particle
/// draws to a multinomial split over the support (still exact).
const DIRECT_DRAW_LIMIT: u64 = 1024;

/// Trial count beyond which [`SamplingMode::Approximate`] substitutes a
/// normal surrogate for a binomial draw.
pub const APPROX_THRESHOLD: u64 = 1 << 20;

/// Exact Binomial(n, p) draw.
pub(crate) fn binomial_draw(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p), "binomial p out of range: {p}");
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n <= 32 {
        let mut hits = 0;
        for _ in 0..n {
            if rng.random::<f64>() < p {
                hits += 1;
            }
        }
        hits
    } else {
        rand_distr::Binomial::new(n, p)
            .expect("validated binomial parameters")
            .sample(rng)
    }
}

/// Binomial(n, p) with normal surrogate above the approximation threshold.
fn binomial_draw_with(n: u64, p: f64, mode: SamplingMode, rng: &mut ChaCha8Rng) -> u64 {
    if mode == SamplingMode::Approximate && n > APPROX_THRESHOLD && p > 0.0 && p < 1.0 {
        let nf = n as f64;
        let mean = nf * p;
        let sd = (nf * p * (1.0 - p)).sqrt();
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        let draw = (mean + sd * z).round();
        return draw.clamp(0.0, nf) as u64;
    }
    binomial_draw(n, p, rng)
}

/// Total number of children of `k` particles sharing `dist`, by the exact
/// convolution law.
pub(crate) fn offspring_total(
    dist: &OffspringDistribution,
    k: u64,
    mode: SamplingMode,
    rng: &mut ChaCha8Rng,
) -> u64 {
    let pmf = dist.pmf();
    if pmf.len() == 1 {
        return k * pmf[0].0 as u64;
    }
    if k <= DIRECT_DRAW_LIMIT {
        let mut total = 0u64;
        for _ in 0..k {
            total += dist.sample(rng) as u64;
        }
        return total;
    }
    // Split the k particles multinomially across the support values; the
    // induced total has exactly the k-fold convolution law.
    let mut remaining = k;
    let mut remaining_mass = 1.0f64;
    let mut total = 0u64;
    for (i, &(value, prob)) in pmf.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if i + 1 == pmf.len() {
            remaining
        } else {
            let conditional = (prob / remaining_mass).clamp(0.0, 1.0);
            binomial_draw_with(remaining, conditional, mode, rng)
        };
        total += value as u64 * count;
        remaining -= count;
        remaining_mass -= prob;
    }
    total
}

/// Scatter `n` children over `probs` (a probability vector) by sequential
/// conditional binomials; writes one count per destination into `out`.
pub(crate) fn multinomial_scatter(
    n: u64,
    probs: &[f64],
    mode: SamplingMode,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<u64>,
) {
    out.clear();
    let mut remaining = n;
    let mut remaining_mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        let count = if i + 1 == probs.len() {
            remaining
        } else if remaining == 0 {
            0
        } else {
            let conditional = (p / remaining_mass).clamp(0.0, 1.0);
            binomial_draw_with(remaining, conditional, mode, rng)
        };
        out.push(count);
        remaining -= count;
        remaining_mass -= p;
    }
}
