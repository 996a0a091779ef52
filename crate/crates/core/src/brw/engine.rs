//! The count-aggregated branching random walk engine.
//!
//! A population is a multiset of states. One step has every particle draw a
//! child count from the offspring law and scatter those children over the
//! transition row of its state. Particles at the same state are
//! exchangeable, so the engine aggregates them: per occupied state it draws
//! the total number of children (exact convolution law) and one multinomial
//! scatter, making the cost per generation proportional to the number of
//! occupied states rather than the number of particles.
//!
//! [`run`] repeats steps from a single particle at the origin and records a
//! [`TrajectorySummary`]: population size, the normalized martingale
//! `W_n = population / mean^n`, masses of a cylinder family under the
//! empirical boundary measure, pairings against harmonic functions, and
//! root occupancy.

use rand_chacha::ChaCha8Rng;

use crate::chains::{ChainKind, ChainModel, State};
use crate::error::{Error, Result};
use crate::measures::{CylinderFamily, HarmonicFn};

use super::offspring::OffspringDistribution;
use super::sampling::{offspring_total, SamplingMode};
use super::space::{Accumulator, Space, ORIGIN_ID, PREFIX_CACHE};

/// Default bound on the population size of a single run.
pub const DEFAULT_POPULATION_CAP: u64 = 100_000_000;

/// Execution limits and sampling regime of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// A step that would produce more particles than this fails with
    /// [`Error::PopulationOverflow`] naming the offending generation.
    pub population_cap: u64,
    pub sampling: SamplingMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            population_cap: DEFAULT_POPULATION_CAP,
            sampling: SamplingMode::Exact,
        }
    }
}

/// A generation of the branching walk: counts per occupied state, sorted by
/// state, every count positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    generation: u32,
    counts: Vec<(State, u64)>,
}

impl Population {
    /// The initial population: one particle at the origin.
    pub fn origin(chain: &ChainModel) -> Population {
        Population {
            generation: 0,
            counts: vec![(chain.origin(), 1)],
        }
    }

    /// Build a population from explicit counts. States are validated against
    /// the chain, duplicates merged; zero counts are rejected.
    pub fn from_counts(
        chain: &ChainModel,
        generation: u32,
        counts: Vec<(State, u64)>,
    ) -> Result<Population> {
        for (state, count) in &counts {
            chain.validate_state(state)?;
            if *count == 0 {
                return Err(Error::Domain(format!(
                    "population count for state {state:?} must be positive"
                )));
            }
        }
        let pop = Self::assemble(generation, counts);
        let total: u128 = pop.counts.iter().map(|&(_, n)| n as u128).sum();
        if total > u64::MAX as u128 {
            return Err(Error::Domain(format!("population total {total} overflows")));
        }
        Ok(pop)
    }

    /// Sort by state and merge duplicates; assumes validated input.
    fn assemble(generation: u32, mut counts: Vec<(State, u64)>) -> Population {
        counts.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(State, u64)> = Vec::with_capacity(counts.len());
        for (state, count) in counts {
            match merged.last_mut() {
                Some((last, n)) if *last == state => *n += count,
                _ => merged.push((state, count)),
            }
        }
        Population {
            generation,
            counts: merged,
        }
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Total number of particles.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, n)| n).sum()
    }

    /// Number of occupied states.
    pub fn occupied_states(&self) -> usize {
        self.counts.len()
    }

    pub fn is_extinct(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count_at(&self, state: &State) -> u64 {
        self.counts
            .binary_search_by(|(s, _)| s.cmp(state))
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, u64)> {
        self.counts.iter().map(|(s, n)| (s, *n))
    }
}

/// What a run observes per generation, besides totals.
#[derive(Debug, Clone, Default)]
pub struct ObserverConfig {
    /// Track masses of the cylinder family up to this depth (0 = none; at
    /// most [`MAX_CYLINDER_DEPTH`] on the tree).
    pub cylinder_depth: u32,
    /// Harmonic functions whose pairings with the empirical measure are
    /// recorded each generation.
    pub tracks: Vec<HarmonicFn>,
}

/// Deepest cylinder family a run can track.
pub const MAX_CYLINDER_DEPTH: u32 = PREFIX_CACHE as u32;

impl ObserverConfig {
    /// Observe nothing beyond totals and root occupancy.
    pub fn none() -> ObserverConfig {
        ObserverConfig::default()
    }

    /// Observe the cylinder family up to `depth`.
    pub fn with_cylinders(depth: u32) -> ObserverConfig {
        ObserverConfig {
            cylinder_depth: depth,
            tracks: Vec::new(),
        }
    }

    fn validate(&self, chain: &ChainModel) -> Result<()> {
        if self.cylinder_depth > MAX_CYLINDER_DEPTH {
            return Err(Error::Config(format!(
                "cylinder depth {} exceeds the supported maximum {}",
                self.cylinder_depth, MAX_CYLINDER_DEPTH
            )));
        }
        for h in &self.tracks {
            h.validate(chain)?;
        }
        Ok(())
    }
}

/// Per-generation observations of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u32,
    /// Number of particles alive.
    pub population: u64,
    /// The additive martingale `W_n = population / mean^n`.
    pub normalized: f64,
    /// Empirical boundary-measure masses of the observed cylinder family.
    pub cylinder_masses: Vec<f64>,
    /// Pairings of the empirical measure with the observed harmonic tracks.
    pub track_values: Vec<f64>,
    /// Whether any particle sits at the origin.
    pub root_occupied: bool,
}

impl GenerationRecord {
    fn empty(generation: u32, cylinders: usize, tracks: usize) -> GenerationRecord {
        GenerationRecord {
            generation,
            population: 0,
            normalized: 0.0,
            cylinder_masses: vec![0.0; cylinders],
            track_values: vec![0.0; tracks],
            root_occupied: false,
        }
    }
}

/// The full observation record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub chain: ChainKind,
    pub mean_offspring: f64,
    pub generations: u32,
    pub cylinder_labels: Vec<String>,
    pub track_labels: Vec<String>,
    /// One record per generation `0..=generations`; generations after
    /// extinction carry explicit zero records.
    pub records: Vec<GenerationRecord>,
    /// First generation with no particles, if the run died out.
    pub extinction_generation: Option<u32>,
}

impl TrajectorySummary {
    pub fn record(&self, generation: u32) -> &GenerationRecord {
        &self.records[generation as usize]
    }

    pub fn final_record(&self) -> &GenerationRecord {
        self.records.last().expect("at least generation zero")
    }

    pub fn survived(&self) -> bool {
        self.extinction_generation.is_none()
    }

    pub fn cylinder_index(&self, label: &str) -> Option<usize> {
        self.cylinder_labels.iter().position(|l| l == label)
    }

    pub fn track_index(&self, label: &str) -> Option<usize> {
        self.track_labels.iter().position(|l| l == label)
    }
}

/// Advance a population one generation with default options.
pub fn step(
    chain: &ChainModel,
    population: &Population,
    offspring: &OffspringDistribution,
    rng: &mut ChaCha8Rng,
) -> Result<Population> {
    step_with(chain, population, offspring, &RunOptions::default(), rng)
}

/// Advance a population one generation.
pub fn step_with(
    chain: &ChainModel,
    population: &Population,
    offspring: &OffspringDistribution,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Population> {
    validate_limits(offspring, options)?;
    let mut space = Space::for_chain(chain);
    let mut frontier = Vec::with_capacity(population.occupied_states());
    for (state, count) in population.iter() {
        chain.validate_state(state)?;
        frontier.push((space.intern(state)?, count));
    }
    let mut scratch = Scratch::default();
    advance(
        &mut space,
        &mut frontier,
        offspring,
        options,
        population.generation(),
        rng,
        &mut scratch,
    )?;
    let counts = frontier
        .iter()
        .map(|&(id, n)| (space.state_of(id), n))
        .collect();
    Ok(Population::assemble(population.generation() + 1, counts))
}

/// Run from one particle at the origin with default options.
pub fn run(
    chain: &ChainModel,
    offspring: &OffspringDistribution,
    generations: u32,
    observer: &ObserverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectorySummary> {
    run_with(chain, offspring, generations, observer, &RunOptions::default(), rng)
}

/// Run from one particle at the origin.
pub fn run_with(
    chain: &ChainModel,
    offspring: &OffspringDistribution,
    generations: u32,
    observer: &ObserverConfig,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectorySummary> {
    validate_limits(offspring, options)?;
    observer.validate(chain)?;
    let family = CylinderFamily::for_chain(chain, observer.cylinder_depth)?;
    let space = Space::for_chain(chain);
    run_on_space(
        space,
        Some(chain),
        chain.kind(),
        family.labels(),
        observer.cylinder_depth,
        &observer.tracks,
        offspring,
        generations,
        options,
        rng,
    )
}

/// Run the depth projection of the regular tree: the process of distances
/// from the root, whose root-occupancy law matches the full tree's. Used by
/// experiments whose populations are too large to spread over a tree.
pub(crate) fn run_depth_projected(
    degree: u32,
    offspring: &OffspringDistribution,
    generations: u32,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectorySummary> {
    debug_assert!(degree >= 3);
    validate_limits(offspring, options)?;
    run_on_space(
        Space::depth_projection(degree),
        None,
        ChainKind::RegularTree { degree },
        Vec::new(),
        0,
        &[],
        offspring,
        generations,
        options,
        rng,
    )
}

fn validate_limits(offspring: &OffspringDistribution, options: &RunOptions) -> Result<()> {
    if !(offspring.mean_offspring() > 0.0) {
        return Err(Error::Config(
            "offspring mean must be positive to normalize by mean^n".into(),
        ));
    }
    if options.population_cap == 0 {
        return Err(Error::Config("population cap must be positive".into()));
    }
    // Two guards keep all engine arithmetic exact: state counts stay exactly
    // representable in f64, and per-state child totals stay within u64.
    if options.population_cap > (1u64 << 53) {
        return Err(Error::Config(format!(
            "population cap {} exceeds the exact-arithmetic bound 2^53",
            options.population_cap
        )));
    }
    if options
        .population_cap
        .checked_mul(offspring.max_value() as u64)
        .is_none()
    {
        return Err(Error::Config(
            "population cap times maximum offspring overflows".into(),
        ));
    }
    Ok(())
}

#[derive(Default)]
struct Scratch {
    totals: Vec<u64>,
    counts: Vec<u64>,
    acc: Accumulator,
}

/// One aggregated generation step over interned ids.
fn advance(
    space: &mut Space,
    frontier: &mut Vec<(u32, u64)>,
    offspring: &OffspringDistribution,
    options: &RunOptions,
    current_generation: u32,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> Result<()> {
    // First pass: child totals per occupied state, so the cap check sees the
    // exact attempted size before any state is committed.
    scratch.totals.clear();
    let mut attempted: u128 = 0;
    for &(_, count) in frontier.iter() {
        let total = offspring_total(offspring, count, options.sampling, rng);
        attempted += total as u128;
        scratch.totals.push(total);
    }
    if attempted > options.population_cap as u128 {
        return Err(Error::PopulationOverflow {
            generation: current_generation + 1,
            attempted,
            cap: options.population_cap,
        });
    }
    // Second pass: scatter each state's children over its transition row.
    for (i, &(id, _)) in frontier.iter().enumerate() {
        if scratch.totals[i] > 0 {
            space.step_state(
                id,
                scratch.totals[i],
                options.sampling,
                rng,
                &mut scratch.counts,
                &mut scratch.acc,
            );
        }
    }
    scratch.acc.drain_into(frontier);
    Ok(())
}

/// Per-generation observer with lazily cached per-state track values.
struct Recorder<'a> {
    chain: Option<&'a ChainModel>,
    mean: f64,
    cylinder_depth: u32,
    cylinders: usize,
    tracks: &'a [HarmonicFn],
    track_cache: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    fn new(
        chain: Option<&'a ChainModel>,
        mean: f64,
        cylinder_depth: u32,
        cylinders: usize,
        tracks: &'a [HarmonicFn],
    ) -> Recorder<'a> {
        Recorder {
            chain,
            mean,
            cylinder_depth,
            cylinders,
            tracks,
            track_cache: vec![Vec::new(); tracks.len()],
        }
    }

    fn track_value(&mut self, track: usize, space: &Space, id: u32) -> Result<f64> {
        let cache = &mut self.track_cache[track];
        if id as usize >= cache.len() {
            cache.resize(space.node_bound(), f64::NAN);
        }
        if !cache[id as usize].is_nan() {
            return Ok(cache[id as usize]);
        }
        let chain = self
            .chain
            .expect("harmonic tracks require a concrete chain");
        let state = space.state_of(id);
        let value = self.tracks[track].evaluate(chain, &state)?;
        cache[id as usize] = value;
        Ok(value)
    }

    fn record(
        &mut self,
        space: &Space,
        frontier: &[(u32, u64)],
        generation: u32,
    ) -> Result<GenerationRecord> {
        if frontier.is_empty() {
            return Ok(GenerationRecord::empty(
                generation,
                self.cylinders,
                self.tracks.len(),
            ));
        }
        // Divide by mean^n rather than multiplying by its reciprocal: for a
        // deterministic k-fold law both the count and the divisor are the
        // exact float k^n, so the normalized population is exactly one.
        let divisor = self.mean.powi(generation as i32);
        let mut population: u64 = 0;
        let mut root_occupied = false;
        let mut masses = vec![0.0f64; self.cylinders];
        let mut values = vec![0.0f64; self.tracks.len()];
        let mut slots = [0u16; PREFIX_CACHE];
        for &(id, count) in frontier {
            population += count;
            if id == ORIGIN_ID {
                root_occupied = true;
            }
            let weight = count as f64;
            if self.cylinders > 0 {
                let n = space.cylinder_slots(id, self.cylinder_depth, &mut slots);
                for &slot in &slots[..n] {
                    masses[slot as usize] += weight;
                }
            }
            for track in 0..self.tracks.len() {
                values[track] += self.track_value(track, space, id)? * weight;
            }
        }
        for mass in &mut masses {
            *mass /= divisor;
        }
        for value in &mut values {
            *value /= divisor;
        }
        Ok(GenerationRecord {
            generation,
            population,
            normalized: population as f64 / divisor,
            cylinder_masses: masses,
            track_values: values,
            root_occupied,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn run_on_space(
    mut space: Space,
    chain: Option<&ChainModel>,
    chain_kind: ChainKind,
    cylinder_labels: Vec<String>,
    cylinder_depth: u32,
    tracks: &[HarmonicFn],
    offspring: &OffspringDistribution,
    generations: u32,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectorySummary> {
    let mean = offspring.mean_offspring();
    let mut recorder = Recorder::new(chain, mean, cylinder_depth, cylinder_labels.len(), tracks);
    let mut frontier = vec![(ORIGIN_ID, 1u64)];
    let mut scratch = Scratch::default();
    let mut records = Vec::with_capacity(generations as usize + 1);
    let mut extinction_generation = None;
    for generation in 0..=generations {
        if frontier.is_empty() && extinction_generation.is_none() {
            extinction_generation = Some(generation);
        }
        records.push(recorder.record(&space, &frontier, generation)?);
        if generation < generations && !frontier.is_empty() {
            advance(
                &mut space,
                &mut frontier,
                offspring,
                options,
                generation,
                rng,
                &mut scratch,
            )?;
        }
    }
    Ok(TrajectorySummary {
        chain: chain_kind,
        mean_offspring: mean,
        generations,
        cylinder_labels,
        track_labels: tracks.iter().map(|h| h.label()).collect(),
        records,
        extinction_generation,
    })
}
