//! Offspring distributions for the branching engine.
//!
//! Every distribution is reduced to an explicit finite probability mass
//! function. Infinite families (Poisson, geometric) are truncated at a tail
//! mass below [`TAIL_BOUND`]; the stored pmf then sums to one up to that
//! bound, and the stored mean is recomputed from the truncated table. A
//! finite table always satisfies the `E[X log X] < inf` moment condition,
//! which is recorded in [`OffspringDistribution::llogl_finite`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maximum probability mass that truncation may discard.
pub const TAIL_BOUND: f64 = 1e-12;

/// Iteration cap for the extinction-probability fixed point.
const FIXED_POINT_CAP: u64 = 1_000_000;

/// Convergence tolerance of the extinction-probability fixed point.
const FIXED_POINT_TOL: f64 = 1e-12;

/// A serializable description of an offspring distribution, as it appears in
/// configurations; [`OffspringSpec::build`] produces the sampled form.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringSpec {
    Deterministic { k: u32 },
    Binomial { n: u32, p: f64 },
    Poisson { lambda: f64 },
    Geometric { p: f64 },
    Table { pmf: Vec<(u32, f64)> },
}

impl OffspringSpec {
    pub fn build(&self) -> Result<OffspringDistribution> {
        match self {
            OffspringSpec::Deterministic { k } => Ok(OffspringDistribution::deterministic(*k)),
            OffspringSpec::Binomial { n, p } => OffspringDistribution::binomial(*n, *p),
            OffspringSpec::Poisson { lambda } => OffspringDistribution::poisson(*lambda),
            OffspringSpec::Geometric { p } => OffspringDistribution::geometric(*p),
            OffspringSpec::Table { pmf } => OffspringDistribution::from_table(pmf),
        }
    }
}

/// An offspring law with finite support, ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    /// Support points with probabilities, ascending in the support value.
    pmf: Vec<(u32, f64)>,
    /// Cumulative probabilities aligned with `pmf`.
    cdf: Vec<f64>,
    mean: f64,
    variance: f64,
    llogl_finite: bool,
}

impl OffspringDistribution {
    /// Exactly `k` children per particle.
    pub fn deterministic(k: u32) -> Self {
        Self::assemble(vec![(k, 1.0)])
    }

    /// Binomial(n, p) children.
    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("binomial p must lie in [0,1], got {p}")));
        }
        // Multiplicative recurrence over k; underflowed entries are dropped,
        // which is a truncation far below TAIL_BOUND.
        let mut pmf = Vec::with_capacity(n as usize + 1);
        let mut mass = (1.0 - p).powi(n as i32);
        for k in 0..=n {
            if mass > 0.0 {
                pmf.push((k, mass));
            }
            if k < n {
                mass *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
            }
        }
        if p == 1.0 {
            pmf = vec![(n, 1.0)];
        }
        Ok(Self::assemble(pmf))
    }

    /// Poisson(lambda) children, truncated at tail mass below [`TAIL_BOUND`].
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("poisson lambda must be positive, got {lambda}")));
        }
        if lambda > 1e4 {
            return Err(Error::Domain(format!(
                "poisson lambda {lambda} unreasonably large for a per-particle offspring law"
            )));
        }
        let mut pmf = Vec::new();
        let mut mass = (-lambda).exp();
        let mut cum = 0.0;
        let mut k = 0u32;
        loop {
            if mass > 0.0 {
                pmf.push((k, mass));
            }
            cum += mass;
            if 1.0 - cum <= TAIL_BOUND && k as f64 > lambda {
                break;
            }
            if k > 10 * (lambda.ceil() as u32 + 20) {
                return Err(Error::Convergence {
                    what: format!("poisson({lambda}) truncation"),
                    residual: 1.0 - cum,
                    iterations: k as u64,
                });
            }
            mass *= lambda / (k + 1) as f64;
            k += 1;
        }
        Ok(Self::assemble(pmf))
    }

    /// Geometric children counting failures before the first success:
    /// `P(k) = (1-p)^k p`, mean `(1-p)/p`. Truncated below [`TAIL_BOUND`].
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("geometric p must lie in (0,1], got {p}")));
        }
        let mut pmf = Vec::new();
        let mut mass = p;
        let mut cum = 0.0;
        let mut k = 0u32;
        while 1.0 - cum > TAIL_BOUND {
            pmf.push((k, mass));
            cum += mass;
            mass *= 1.0 - p;
            k += 1;
            if mass == 0.0 {
                break;
            }
        }
        Ok(Self::assemble(pmf))
    }

    /// An explicit table `{value: probability}`. Values must be distinct,
    /// probabilities strictly positive and summing to one within 1e-12.
    pub fn from_table(entries: &[(u32, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("offspring table must be non-empty".into()));
        }
        let mut pmf = entries.to_vec();
        pmf.sort_by_key(|(v, _)| *v);
        for pair in pmf.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Domain(format!(
                    "offspring table repeats value {}",
                    pair[0].0
                )));
            }
        }
        let total: f64 = pmf.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "offspring table probabilities sum to {total}, not 1"
            )));
        }
        for &(v, p) in &pmf {
            if !(p > 0.0) {
                return Err(Error::Domain(format!(
                    "offspring table probability for value {v} must be positive, got {p}"
                )));
            }
        }
        Ok(Self::assemble(pmf))
    }

    fn assemble(pmf: Vec<(u32, f64)>) -> Self {
        debug_assert!(!pmf.is_empty());
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut cum = 0.0;
        for &(_, p) in &pmf {
            cum += p;
            cdf.push(cum);
        }
        let mean: f64 = pmf.iter().map(|&(v, p)| v as f64 * p).sum();
        let second: f64 = pmf.iter().map(|&(v, p)| (v as f64) * (v as f64) * p).sum();
        OffspringDistribution {
            mean,
            variance: (second - mean * mean).max(0.0),
            llogl_finite: true, // finite support always has E[X log X] < inf
            cdf,
            pmf,
        }
    }

    pub fn pmf(&self) -> &[(u32, f64)] {
        &self.pmf
    }

    /// Mean number of children per particle.
    pub fn mean_offspring(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Largest value in the (truncated) support.
    pub fn max_value(&self) -> u32 {
        self.pmf.last().expect("non-empty pmf").0
    }

    /// Whether `E[X log X]` is finite (always true for the finite tables this
    /// crate works with; recorded explicitly because the dichotomy between
    /// `E[W] = 1` and `W = 0` hinges on it).
    pub fn llogl_finite(&self) -> bool {
        self.llogl_finite
    }

    /// Whether this is the degenerate single-child law (the only law with
    /// mean <= 1 that never dies out).
    fn is_single_child(&self) -> bool {
        self.pmf.len() == 1 && self.pmf[0].0 == 1
    }

    /// Probability generating function `E[s^X]` for `s` in `[0, 1]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("pgf argument must lie in [0,1], got {s}")));
        }
        Ok(self.pmf.iter().map(|&(v, p)| p * s.powi(v as i32)).sum())
    }

    /// Extinction probability of the Galton-Watson process with this law:
    /// the smallest fixed point of the pgf in `[0, 1]`.
    ///
    /// Subcritical and critical laws (other than the degenerate single-child
    /// law) die out surely; supercritical laws are resolved by iterating
    /// `q <- pgf(q)` from zero, which converges geometrically.
    pub fn extinction_probability(&self) -> Result<f64> {
        if self.mean <= 1.0 && !self.is_single_child() {
            return Ok(1.0);
        }
        let mut q = 0.0f64;
        for _ in 0..FIXED_POINT_CAP {
            let next = self.pgf(q)?;
            if (next - q).abs() < FIXED_POINT_TOL {
                return Ok(next);
            }
            q = next;
        }
        Err(Error::Convergence {
            what: "extinction probability fixed point".into(),
            residual: (self.pgf(q)? - q).abs(),
            iterations: FIXED_POINT_CAP,
        })
    }

    /// One draw from the law.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        if self.pmf.len() == 1 {
            return self.pmf[0].0;
        }
        let u: f64 = rng.random();
        // The truncated tail (mass <= TAIL_BOUND) folds into the last entry.
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1);
        self.pmf[idx].0
    }
}

impl std::fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "offspring[mean={}, support<={}]", self.mean, self.max_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, Streams};

    #[test]
    fn table_mean_and_pgf() {
        let d = OffspringDistribution::from_table(&[(0, 0.25), (2, 0.75)]).unwrap();
        assert!((d.mean_offspring() - 1.5).abs() < 1e-15);
        // pgf(s) = 1/4 + 3/4 s^2.
        assert!((d.pgf(0.5).unwrap() - (0.25 + 0.75 * 0.25)).abs() < 1e-15);
        assert!(d.pgf(1.2).is_err());
        assert!(d.llogl_finite());
    }

    #[test]
    fn deterministic_pgf_is_a_power() {
        let d = OffspringDistribution::deterministic(2);
        assert_eq!(d.pgf(0.5).unwrap(), 0.25);
        assert_eq!(d.mean_offspring(), 2.0);
    }

    #[test]
    fn extinction_probability_of_quarter_table_is_one_third() {
        // q = 1/4 + 3/4 q^2 has roots 1/3 and 1; the smaller is the answer.
        let d = OffspringDistribution::from_table(&[(0, 0.25), (2, 0.75)]).unwrap();
        let q = d.extinction_probability().unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-11, "q = {q}");
    }

    #[test]
    fn critical_and_subcritical_laws_die_out() {
        let critical = OffspringDistribution::from_table(&[(0, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(critical.extinction_probability().unwrap(), 1.0);
        let sub = OffspringDistribution::binomial(2, 0.25).unwrap();
        assert_eq!(sub.extinction_probability().unwrap(), 1.0);
        // The degenerate single-child law survives forever.
        let single = OffspringDistribution::deterministic(1);
        assert_eq!(single.extinction_probability().unwrap(), 0.0);
    }

    #[test]
    fn binomial_16_sixth_matches_direct_values() {
        let d = OffspringDistribution::binomial(16, 1.0 / 6.0).unwrap();
        // Mean must equal np to rounding.
        assert!((d.mean_offspring() - 16.0 / 6.0).abs() < 1e-12);
        let total: f64 = d.pmf().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Extinction probability is interior and solves q = pgf(q).
        let q = d.extinction_probability().unwrap();
        assert!(q > 1e-3 && q < 1.0 - 1e-3, "q = {q}");
        assert!((d.pgf(q).unwrap() - q).abs() < 1e-11);
    }

    #[test]
    fn truncated_families_sum_to_one_within_tail_bound() {
        for dist in [
            OffspringDistribution::poisson(2.0).unwrap(),
            OffspringDistribution::poisson(0.3).unwrap(),
            OffspringDistribution::geometric(0.4).unwrap(),
        ] {
            let total: f64 = dist.pmf().iter().map(|(_, p)| p).sum();
            assert!(1.0 - total <= 2.0 * TAIL_BOUND, "total {total}");
            assert!(total <= 1.0 + 1e-15);
            // Mean matches a direct recomputation from the table.
            let direct: f64 = dist.pmf().iter().map(|&(v, p)| v as f64 * p).sum();
            assert_eq!(dist.mean_offspring(), direct);
            assert!(dist.llogl_finite());
        }
        // Poisson(2) keeps its mean to within the truncated tail's reach.
        let p2 = OffspringDistribution::poisson(2.0).unwrap();
        assert!((p2.mean_offspring() - 2.0).abs() < 1e-9);
        let g = OffspringDistribution::geometric(0.4).unwrap();
        assert!((g.mean_offspring() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(OffspringDistribution::from_table(&[(0, 0.5), (2, 0.4)]).is_err());
        assert!(OffspringDistribution::from_table(&[(1, 0.5), (1, 0.5)]).is_err());
        assert!(OffspringDistribution::from_table(&[]).is_err());
        assert!(OffspringDistribution::binomial(4, 1.5).is_err());
        assert!(OffspringDistribution::poisson(-1.0).is_err());
        assert!(OffspringDistribution::geometric(0.0).is_err());
    }

    #[test]
    fn sampling_matches_the_table_distribution() {
        let d = OffspringDistribution::from_table(&[(0, 0.25), (2, 0.75)]).unwrap();
        let mut rng = Streams::new(99).stream(domain::WALK, 0);
        let n = 100_000u32;
        let mut twos = 0u32;
        for _ in 0..n {
            match d.sample(&mut rng) {
                0 => {}
                2 => twos += 1,
                other => panic!("impossible sample {other}"),
            }
        }
        let p_hat = twos as f64 / n as f64;
        let se = (0.75 * 0.25 / n as f64).sqrt();
        assert!((p_hat - 0.75).abs() < 4.0 * se, "p_hat {p_hat}");
    }

    #[test]
    fn spec_round_trip_builds() {
        let spec = OffspringSpec::Table {
            pmf: vec![(0, 0.25), (2, 0.75)],
        };
        let d = spec.build().unwrap();
        assert!((d.mean_offspring() - 1.5).abs() < 1e-15);
        assert!(OffspringSpec::Binomial { n: 16, p: 1.0 / 6.0 }.build().is_ok());
    }
}
