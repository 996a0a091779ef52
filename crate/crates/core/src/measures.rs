//! Empirical boundary measures and their pairings with harmonic functions.
//!
//! A supercritical branching walk normalized by `mean^n` induces the
//! empirical measure that puts mass `count(x) / mean^n` on each occupied
//! state `x`. As generations pass, this mass drifts toward the boundary of
//! the chain; cylinder masses and pairings with harmonic functions are the
//! finite-generation observables that witness the limit. For a harmonic
//! `h`, the pairing sequence is a martingale; for a superharmonic `h`, a
//! supermartingale — which is what [`martingale_diagnostic`] checks.

use crate::brw::Population;
use crate::chains::{ChainKind, ChainModel, State};
use crate::error::{Error, Result};
use crate::potential::{
    harmonic_extension, martin_kernel, BoundaryPoint, CompactificationPoint, CylinderSet,
};
use crate::stats;

// ─── Harmonic function library ───────────────────────────────────────────────

/// A harmonic (or deliberately non-harmonic) function to pair empirical
/// measures against.
#[derive(Debug, Clone, PartialEq)]
pub enum HarmonicFn {
    /// The constant function 1; pairing gives the additive martingale `W`.
    One,
    /// The harmonic extension of a cylinder's indicator: the probability,
    /// from `x`, that the chain converges into the cylinder.
    CylinderExtension(CylinderSet),
    /// The Martin kernel of a boundary point.
    MartinKernel(BoundaryPoint),
    /// `min(K(., target), cap)`: superharmonic, pairing a supermartingale.
    CappedKernel { target: BoundaryPoint, cap: f64 },
    /// A cylinder extension spoiled by an offset at one state. Not harmonic;
    /// exists so diagnostics can prove they catch broken inputs.
    Corrupted {
        base: CylinderSet,
        at: State,
        offset: f64,
    },
}

impl HarmonicFn {
    pub fn validate(&self, chain: &ChainModel) -> Result<()> {
        match self {
            HarmonicFn::One => Ok(()),
            HarmonicFn::CylinderExtension(set) => set.validate_for(chain),
            HarmonicFn::MartinKernel(target) => target.validate_for(chain),
            HarmonicFn::CappedKernel { target, cap } => {
                target.validate_for(chain)?;
                if !(*cap > 0.0) || !cap.is_finite() {
                    return Err(Error::Domain(format!("kernel cap must be positive, got {cap}")));
                }
                Ok(())
            }
            HarmonicFn::Corrupted { base, at, offset } => {
                base.validate_for(chain)?;
                chain.validate_state(at)?;
                if !offset.is_finite() {
                    return Err(Error::Domain(format!("corruption offset {offset} not finite")));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, chain: &ChainModel, x: &State) -> Result<f64> {
        match self {
            HarmonicFn::One => {
                chain.validate_state(x)?;
                Ok(1.0)
            }
            HarmonicFn::CylinderExtension(set) => harmonic_extension(chain, set, x),
            HarmonicFn::MartinKernel(target) => boundary_kernel(chain, x, target),
            HarmonicFn::CappedKernel { target, cap } => {
                Ok(boundary_kernel(chain, x, target)?.min(*cap))
            }
            HarmonicFn::Corrupted { base, at, offset } => {
                let value = harmonic_extension(chain, base, x)?;
                Ok(if x == at { value + offset } else { value })
            }
        }
    }

    /// Stable short label for CSV headers and reports.
    pub fn label(&self) -> String {
        match self {
            HarmonicFn::One => "one".to_string(),
            HarmonicFn::CylinderExtension(set) => format!("ext_{}", short_set_label(set)),
            HarmonicFn::MartinKernel(target) => format!("kernel_{}", boundary_label(target)),
            HarmonicFn::CappedKernel { target, .. } => {
                format!("capped_{}", boundary_label(target))
            }
            HarmonicFn::Corrupted { base, .. } => format!("corrupt_{}", short_set_label(base)),
        }
    }
}

fn boundary_kernel(chain: &ChainModel, x: &State, target: &BoundaryPoint) -> Result<f64> {
    martin_kernel(
        chain,
        x,
        &CompactificationPoint::Boundary(target.clone()),
    )?
    .ok_or_else(|| {
        Error::Domain(format!("no closed-form kernel for boundary target {target:?}"))
    })
}

fn short_set_label(set: &CylinderSet) -> String {
    set.label()
        .strip_prefix("cyl_")
        .expect("cylinder labels start with cyl_")
        .to_string()
}

fn boundary_label(target: &BoundaryPoint) -> String {
    match target {
        BoundaryPoint::TreeRay(w) if w.is_empty() => "ray_zero".to_string(),
        BoundaryPoint::TreeRay(w) => {
            let digits: Vec<String> = w.iter().map(|l| l.to_string()).collect();
            format!("ray_{}", digits.join(""))
        }
        BoundaryPoint::PlusInfinity => "plus".to_string(),
        BoundaryPoint::MinusInfinity => "minus".to_string(),
        BoundaryPoint::LatticeInfinity => "infinity".to_string(),
    }
}

// ─── Cylinder families ───────────────────────────────────────────────────────

/// The canonical finite family of cylinders observed by runs and compared by
/// [`discrepancy`]: on the tree all shadows of words of depth `1..=depth`
/// (each level in lexicographic order), on the line the two half-boundaries,
/// on the lattice the full boundary. Depth 0 is the empty family.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFamily {
    chain: ChainKind,
    depth: u32,
    sets: Vec<CylinderSet>,
}

/// Hard bound on family size (slots must fit the engine's u16 indices).
const MAX_FAMILY_SIZE: usize = u16::MAX as usize;

impl CylinderFamily {
    pub fn for_chain(chain: &ChainModel, depth: u32) -> Result<CylinderFamily> {
        let mut sets = Vec::new();
        if depth > 0 {
            match chain.kind() {
                ChainKind::RegularTree { degree } => {
                    if depth > crate::brw::MAX_CYLINDER_DEPTH {
                        return Err(Error::Config(format!(
                            "cylinder family depth {depth} exceeds the supported maximum {}",
                            crate::brw::MAX_CYLINDER_DEPTH
                        )));
                    }
                    let mut level: Vec<Vec<u8>> =
                        (0..degree).map(|letter| vec![letter as u8]).collect();
                    for _ in 0..depth {
                        sets.extend(level.iter().cloned().map(CylinderSet::TreeShadow));
                        if sets.len() > MAX_FAMILY_SIZE {
                            return Err(Error::Config(format!(
                                "cylinder family for degree {degree}, depth {depth} is too large"
                            )));
                        }
                        let mut next = Vec::with_capacity(level.len() * (degree as usize - 1));
                        for word in &level {
                            for letter in 0..degree - 1 {
                                let mut child = word.clone();
                                child.push(letter as u8);
                                next.push(child);
                            }
                        }
                        level = next;
                    }
                    sets.truncate(family_size(degree, depth));
                }
                ChainKind::DriftedLine { .. } => {
                    sets = vec![CylinderSet::LinePlus, CylinderSet::LineMinus];
                }
                ChainKind::Lattice3D => {
                    sets = vec![CylinderSet::LatticeFull];
                }
            }
        }
        Ok(CylinderFamily {
            chain: chain.kind(),
            depth,
            sets,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn sets(&self) -> &[CylinderSet] {
        &self.sets
    }

    pub fn labels(&self) -> Vec<String> {
        self.sets.iter().map(|set| set.label()).collect()
    }

    pub fn index_of(&self, set: &CylinderSet) -> Option<usize> {
        self.sets.iter().position(|s| s == set)
    }
}

/// Number of tree cylinders up to `depth`: `sum_j degree * (degree-1)^(j-1)`.
fn family_size(degree: u32, depth: u32) -> usize {
    let mut size = 0usize;
    let mut level = degree as usize;
    for _ in 0..depth {
        size += level;
        level *= degree as usize - 1;
    }
    size
}

// ─── Empirical boundary measures ─────────────────────────────────────────────

/// The normalized occupation measure of one generation: an atom of mass
/// `count(x) / mean^n` per occupied state, standing in for boundary mass in
/// the direction of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBoundaryMeasure {
    chain: ChainKind,
    generation: u32,
    atoms: Vec<(State, f64)>,
}

impl EmpiricalBoundaryMeasure {
    pub fn from_population(
        chain: &ChainModel,
        population: &Population,
        mean_offspring: f64,
    ) -> Result<EmpiricalBoundaryMeasure> {
        if !(mean_offspring > 0.0) {
            return Err(Error::Domain(format!(
                "offspring mean must be positive, got {mean_offspring}"
            )));
        }
        let scale = mean_offspring.powi(-(population.generation() as i32));
        let mut atoms = Vec::with_capacity(population.occupied_states());
        for (state, count) in population.iter() {
            chain.validate_state(state)?;
            atoms.push((state.clone(), count as f64 * scale));
        }
        Ok(EmpiricalBoundaryMeasure {
            chain: chain.kind(),
            generation: population.generation(),
            atoms,
        })
    }

    pub fn chain(&self) -> ChainKind {
        self.chain
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn atoms(&self) -> &[(State, f64)] {
        &self.atoms
    }

    /// Total mass; equals the additive martingale `W_n`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    /// Mass sitting in the shadow of a cylinder.
    pub fn cylinder_mass(&self, set: &CylinderSet) -> Result<f64> {
        let chain = ChainModel::from_kind(self.chain)?;
        set.validate_for(&chain)?;
        Ok(self
            .atoms
            .iter()
            .filter(|(state, _)| set.contains_state(state))
            .map(|&(_, w)| w)
            .sum())
    }
}

/// Pairing `<h, nu_n> = mean^-n * sum_x h(x) count(x)` of a harmonic
/// function with the empirical measure of a population.
pub fn pair(
    chain: &ChainModel,
    h: &HarmonicFn,
    population: &Population,
    mean_offspring: f64,
) -> Result<f64> {
    h.validate(chain)?;
    if !(mean_offspring > 0.0) {
        return Err(Error::Domain(format!(
            "offspring mean must be positive, got {mean_offspring}"
        )));
    }
    let scale = mean_offspring.powi(-(population.generation() as i32));
    let mut sum = 0.0;
    for (state, count) in population.iter() {
        sum += h.evaluate(chain, state)? * count as f64;
    }
    Ok(sum * scale)
}

// ─── Martingale diagnostics ──────────────────────────────────────────────────

/// One replica's pairing trajectory for one harmonic function.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrack {
    pub label: String,
    /// Pairing values at generations `0..=N`.
    pub values: Vec<f64>,
}

/// The cross-replica test of one generation's increment.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCheck {
    pub generation: u32,
    pub mean: f64,
    pub std_error: f64,
    pub flagged: bool,
}

/// Diagnostic verdict for one track label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackDiagnostic {
    pub label: String,
    pub replicas: usize,
    pub increments: Vec<IncrementCheck>,
    /// Whether any increment mean sits outside the tolerance band.
    pub flagged: bool,
    /// Variance of pooled increments over the first third of the checked
    /// range — convergent martingales show shrinking increments.
    pub early_increment_variance: f64,
    /// Same over the last third.
    pub late_increment_variance: f64,
}

/// Minimum number of replicas per label for the diagnostic to run.
pub const MIN_DIAGNOSTIC_REPLICAS: usize = 30;

/// Check, label by label, that pairing increments are centered at zero: for
/// each generation past `burn_in`, the replica mean of
/// `values[n+1] - values[n]` must lie within `flag_multiplier` standard
/// errors of zero (a zero standard error flags exactly when the mean is
/// nonzero). Labels appear in the output in first-appearance order.
pub fn martingale_diagnostic(
    tracks: &[MartingaleTrack],
    burn_in: u32,
    flag_multiplier: f64,
) -> Result<Vec<TrackDiagnostic>> {
    if !(flag_multiplier > 0.0) {
        return Err(Error::Domain(format!(
            "flag multiplier must be positive, got {flag_multiplier}"
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    for track in tracks {
        if !order.contains(&track.label.as_str()) {
            order.push(&track.label);
        }
    }
    let mut diagnostics = Vec::with_capacity(order.len());
    for label in order {
        let group: Vec<&MartingaleTrack> =
            tracks.iter().filter(|t| t.label == label).collect();
        if group.len() < MIN_DIAGNOSTIC_REPLICAS {
            return Err(Error::Domain(format!(
                "martingale diagnostic needs at least {MIN_DIAGNOSTIC_REPLICAS} replicas per \
                 label, got {} for {label}",
                group.len()
            )));
        }
        let len = group[0].values.len();
        if group.iter().any(|t| t.values.len() != len) {
            return Err(Error::Domain(format!(
                "replica series for label {label} have mismatched lengths"
            )));
        }
        if len < 2 {
            return Err(Error::Domain(format!(
                "label {label} has fewer than two generations; no increments to check"
            )));
        }
        let steps = len - 1;
        if burn_in as usize >= steps {
            return Err(Error::Domain(format!(
                "burn-in {burn_in} leaves no increments for label {label}"
            )));
        }
        let mut increments = Vec::with_capacity(steps - burn_in as usize);
        let mut pooled: Vec<Vec<f64>> = Vec::with_capacity(steps - burn_in as usize);
        for n in burn_in as usize..steps {
            let diffs: Vec<f64> = group
                .iter()
                .map(|t| t.values[n + 1] - t.values[n])
                .collect();
            let (mean, std_error) = stats::mean_and_se(&diffs);
            let flagged = if std_error == 0.0 {
                mean != 0.0
            } else {
                mean.abs() > flag_multiplier * std_error
            };
            increments.push(IncrementCheck {
                generation: n as u32,
                mean,
                std_error,
                flagged,
            });
            pooled.push(diffs);
        }
        let third = (pooled.len() / 3).max(1);
        let early: Vec<f64> = pooled[..third.min(pooled.len())]
            .iter()
            .flatten()
            .copied()
            .collect();
        let late: Vec<f64> = pooled[pooled.len().saturating_sub(third)..]
            .iter()
            .flatten()
            .copied()
            .collect();
        diagnostics.push(TrackDiagnostic {
            label: label.to_string(),
            replicas: group.len(),
            flagged: increments.iter().any(|c| c.flagged),
            increments,
            early_increment_variance: stats::variance(&early),
            late_increment_variance: stats::variance(&late),
        });
    }
    Ok(diagnostics)
}

// ─── Discrepancy between empirical measures ──────────────────────────────────

/// Worst cylinder-mass disagreement between two measures over the canonical
/// family up to `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub depth: u32,
    pub max_absolute: f64,
    pub per_cylinder: Vec<(String, f64)>,
}

pub fn discrepancy(
    chain: &ChainModel,
    a: &EmpiricalBoundaryMeasure,
    b: &EmpiricalBoundaryMeasure,
    depth: u32,
) -> Result<DiscrepancyReport> {
    if a.chain != chain.kind() || b.chain != chain.kind() {
        return Err(Error::InvalidState(
            "discrepancy requires measures on the same chain".into(),
        ));
    }
    if depth == 0 {
        return Err(Error::Config("discrepancy depth must be at least 1".into()));
    }
    let family = CylinderFamily::for_chain(chain, depth)?;
    let mut per_cylinder = Vec::with_capacity(family.len());
    let mut max_absolute = 0.0f64;
    for set in family.sets() {
        let gap = (a.cylinder_mass(set)? - b.cylinder_mass(set)?).abs();
        max_absolute = max_absolute.max(gap);
        per_cylinder.push((set.label(), gap));
    }
    Ok(DiscrepancyReport {
        depth,
        max_absolute,
        per_cylinder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brw::{run, ObserverConfig, OffspringDistribution, Population};
    use crate::potential::harmonicity_defect;
    use crate::rng::{domain, Streams};
    use rand::Rng;

    fn t3() -> ChainModel {
        ChainModel::regular_tree(3).unwrap()
    }

    fn random_population(chain: &ChainModel, rng: &mut rand_chacha::ChaCha8Rng) -> Population {
        let mut counts = Vec::new();
        for _ in 0..40 {
            let len = rng.random_range(0..6);
            let mut word = Vec::with_capacity(len);
            for i in 0..len {
                let bound = if i == 0 { 3 } else { 2 };
                word.push(rng.random_range(0..bound) as u8);
            }
            counts.push((State::TreeWord(word), rng.random_range(1..50)));
        }
        Population::from_counts(chain, 4, counts).unwrap()
    }

    #[test]
    fn family_enumeration_is_levelwise_lexicographic() {
        let family = CylinderFamily::for_chain(&t3(), 2).unwrap();
        let expected = [
            "cyl_0", "cyl_1", "cyl_2", "cyl_00", "cyl_01", "cyl_10", "cyl_11", "cyl_20", "cyl_21",
        ];
        assert_eq!(family.labels(), expected);
        assert_eq!(family.len(), 9);
        assert_eq!(
            family.index_of(&CylinderSet::TreeShadow(vec![2, 1])),
            Some(8)
        );
        let line = CylinderFamily::for_chain(&ChainModel::drifted_line(0.7).unwrap(), 3).unwrap();
        assert_eq!(line.labels(), ["cyl_plus", "cyl_minus"]);
        let lattice = CylinderFamily::for_chain(&ChainModel::lattice3d(), 1).unwrap();
        assert_eq!(lattice.labels(), ["cyl_full"]);
        assert!(CylinderFamily::for_chain(&t3(), 0).unwrap().is_empty());
        assert!(CylinderFamily::for_chain(&t3(), 9).is_err());
    }

    #[test]
    fn pairing_with_one_is_the_total_mass() {
        let chain = t3();
        let mut rng = Streams::new(31).stream(domain::AUXILIARY, 0);
        let pop = random_population(&chain, &mut rng);
        let mean = 1.5f64;
        let paired = pair(&chain, &HarmonicFn::One, &pop, mean).unwrap();
        let measure = EmpiricalBoundaryMeasure::from_population(&chain, &pop, mean).unwrap();
        assert!((paired - measure.total_mass()).abs() < 1e-12);
        assert!((paired - pop.total() as f64 * mean.powi(-4)).abs() < 1e-12);
    }

    #[test]
    fn pairings_are_additive_over_sibling_cylinders() {
        // The extension of a cylinder indicator is the sum of its children's
        // extensions, so pairings must add up the same way.
        let chain = t3();
        let mut rng = Streams::new(32).stream(domain::AUXILIARY, 1);
        let pop = random_population(&chain, &mut rng);
        let parent = pair(
            &chain,
            &HarmonicFn::CylinderExtension(CylinderSet::TreeShadow(vec![0])),
            &pop,
            1.5,
        )
        .unwrap();
        let children: f64 = (0..2)
            .map(|letter| {
                pair(
                    &chain,
                    &HarmonicFn::CylinderExtension(CylinderSet::TreeShadow(vec![0, letter])),
                    &pop,
                    1.5,
                )
                .unwrap()
            })
            .sum();
        assert!((parent - children).abs() < 1e-12, "{parent} vs {children}");
    }

    #[test]
    fn cylinder_masses_decompose_atomically() {
        let chain = t3();
        let mut rng = Streams::new(33).stream(domain::AUXILIARY, 2);
        let pop = random_population(&chain, &mut rng);
        let measure = EmpiricalBoundaryMeasure::from_population(&chain, &pop, 1.5).unwrap();
        // mass(shadow of w) = atom at w + sum of children shadows.
        let at_w: f64 = measure
            .atoms()
            .iter()
            .filter(|(s, _)| *s == State::TreeWord(vec![0]))
            .map(|&(_, w)| w)
            .sum();
        let parent = measure
            .cylinder_mass(&CylinderSet::TreeShadow(vec![0]))
            .unwrap();
        let children: f64 = (0..2)
            .map(|l| {
                measure
                    .cylinder_mass(&CylinderSet::TreeShadow(vec![0, l]))
                    .unwrap()
            })
            .sum();
        assert!((parent - (at_w + children)).abs() < 1e-12);
        // Depth-1 masses partition the total.
        let depth_one: f64 = (0..3)
            .map(|l| {
                measure
                    .cylinder_mass(&CylinderSet::TreeShadow(vec![l]))
                    .unwrap()
            })
            .sum();
        let at_root: f64 = measure
            .atoms()
            .iter()
            .filter(|(s, _)| *s == State::root())
            .map(|&(_, w)| w)
            .sum();
        assert!((measure.total_mass() - (depth_one + at_root)).abs() < 1e-12);
    }

    #[test]
    fn corrupted_function_shifts_only_its_target() {
        let chain = t3();
        let base = CylinderSet::TreeShadow(vec![0]);
        let h = HarmonicFn::Corrupted {
            base: base.clone(),
            at: State::TreeWord(vec![0]),
            offset: 0.5,
        };
        let at_target = h.evaluate(&chain, &State::TreeWord(vec![0])).unwrap();
        let clean = harmonic_extension(&chain, &base, &State::TreeWord(vec![0])).unwrap();
        assert!((at_target - clean - 0.5).abs() < 1e-15);
        let elsewhere = h.evaluate(&chain, &State::TreeWord(vec![1])).unwrap();
        let clean_elsewhere = harmonic_extension(&chain, &base, &State::TreeWord(vec![1])).unwrap();
        assert_eq!(elsewhere, clean_elsewhere);
    }

    #[test]
    fn capped_kernel_is_superharmonic_on_the_line() {
        let chain = ChainModel::drifted_line(0.7).unwrap();
        let h = HarmonicFn::CappedKernel {
            target: BoundaryPoint::MinusInfinity,
            cap: 1.0,
        };
        for x in -5..=5 {
            let state = State::LinePoint(x);
            let defect = harmonicity_defect(&chain, &state, |s| h.evaluate(&chain, s)).unwrap();
            assert!(defect >= -1e-12, "superharmonicity fails at {x}: {defect}");
            if x == 0 {
                // At the capping point the inequality is strict:
                // h(0) - P h(0) = 1 - 2q = 0.4.
                assert!((defect - 0.4).abs() < 1e-12, "defect at 0 was {defect}");
            } else {
                assert!(defect.abs() < 1e-12, "harmonic away from the cap, x={x}");
            }
        }
    }

    #[test]
    fn kernel_track_labels_are_stable() {
        assert_eq!(HarmonicFn::One.label(), "one");
        assert_eq!(
            HarmonicFn::CylinderExtension(CylinderSet::TreeShadow(vec![0, 1])).label(),
            "ext_01"
        );
        assert_eq!(
            HarmonicFn::MartinKernel(BoundaryPoint::tree_ray(vec![0, 0])).label(),
            "kernel_ray_zero"
        );
        assert_eq!(
            HarmonicFn::MartinKernel(BoundaryPoint::MinusInfinity).label(),
            "kernel_minus"
        );
        assert_eq!(
            HarmonicFn::CappedKernel {
                target: BoundaryPoint::MinusInfinity,
                cap: 1.0
            }
            .label(),
            "capped_minus"
        );
        assert_eq!(
            HarmonicFn::Corrupted {
                base: CylinderSet::TreeShadow(vec![0]),
                at: State::root(),
                offset: 0.5
            }
            .label(),
            "corrupt_0"
        );
    }

    #[test]
    fn harmonic_pairings_are_statistically_flat_martingales() {
        // 400 replicas on the 3-regular tree: increments of the pairing with
        // a cylinder extension must average to zero within 4 standard errors.
        let chain = t3();
        let offspring = OffspringDistribution::from_table(&[(0, 0.25), (2, 0.75)]).unwrap();
        let observer = ObserverConfig {
            cylinder_depth: 0,
            tracks: vec![HarmonicFn::CylinderExtension(CylinderSet::TreeShadow(vec![0]))],
        };
        let streams = Streams::new(77);
        let replicas = 400;
        let generations = 10u32;
        let deltas: Vec<f64> = (0..replicas)
            .map(|i| {
                let mut rng = streams.stream(domain::REPLICA, i);
                let summary = run(&chain, &offspring, generations, &observer, &mut rng).unwrap();
                summary.records[generations as usize].track_values[0]
                    - summary.records[0].track_values[0]
            })
            .collect();
        let (mean, se) = stats::mean_and_se(&deltas);
        assert!(mean.abs() <= 4.0 * se, "martingale drift {mean} vs se {se}");
    }

    #[test]
    fn capped_kernel_pairing_decreases_on_average() {
        // Supermartingale check: the capped minus-kernel pairing must not
        // drift upward (one-sided bound at 4 standard errors).
        let chain = ChainModel::drifted_line(0.7).unwrap();
        let offspring = OffspringDistribution::from_table(&[(0, 0.25), (2, 0.75)]).unwrap();
        let observer = ObserverConfig {
            cylinder_depth: 0,
            tracks: vec![HarmonicFn::CappedKernel {
                target: BoundaryPoint::MinusInfinity,
                cap: 1.0,
            }],
        };
        let streams = Streams::new(78);
        let deltas: Vec<f64> = (0..500)
            .map(|i| {
                let mut rng = streams.stream(domain::REPLICA, i);
                let summary = run(&chain, &offspring, 10, &observer, &mut rng).unwrap();
                summary.records[10].track_values[0] - summary.records[0].track_values[0]
            })
            .collect();
        let (mean, se) = stats::mean_and_se(&deltas);
        assert!(mean <= 4.0 * se, "supermartingale drifted up: {mean} (se {se})");
        // The decrease is real: the initial particle sits at the cap point.
        assert!(mean < 0.0, "expected strictly negative drift, got {mean}");
    }

    #[test]
    fn diagnostic_passes_clean_tracks_and_flags_drift() {
        // A deterministic martingale (constant values) must pass.
        let clean: Vec<MartingaleTrack> = (0..40)
            .map(|_| MartingaleTrack {
                label: "clean".into(),
                values: vec![1.0; 11],
            })
            .collect();
        // A deterministic drift has zero standard error and nonzero mean.
        let drifting: Vec<MartingaleTrack> = (0..40)
            .map(|_| MartingaleTrack {
                label: "drift".into(),
                values: (0..11).map(|n| 1.0 + 0.1 * n as f64).collect(),
            })
            .collect();
        let mut tracks = clean;
        tracks.extend(drifting);
        let diagnostics = martingale_diagnostic(&tracks, 2, 4.0).unwrap();
        assert_eq!(diagnostics.len(), 2);
        assert_eq!(diagnostics[0].label, "clean");
        assert!(!diagnostics[0].flagged);
        assert_eq!(diagnostics[1].label, "drift");
        assert!(diagnostics[1].flagged);
        assert!(diagnostics[1].increments.iter().all(|c| c.flagged));
    }

    #[test]
    fn diagnostic_enforces_replica_and_shape_requirements() {
        let few: Vec<MartingaleTrack> = (0..10)
            .map(|_| MartingaleTrack {
                label: "few".into(),
                values: vec![1.0; 5],
            })
            .collect();
        assert!(martingale_diagnostic(&few, 0, 4.0).is_err());
        let mut ragged: Vec<MartingaleTrack> = (0..40)
            .map(|_| MartingaleTrack {
                label: "ragged".into(),
                values: vec![1.0; 5],
            })
            .collect();
        ragged[0].values.pop();
        assert!(martingale_diagnostic(&ragged, 0, 4.0).is_err());
        let ok: Vec<MartingaleTrack> = (0..40)
            .map(|_| MartingaleTrack {
                label: "ok".into(),
                values: vec![1.0; 5],
            })
            .collect();
        // Burn-in consuming every increment is rejected.
        assert!(martingale_diagnostic(&ok, 4, 4.0).is_err());
        assert!(martingale_diagnostic(&ok, 3, 4.0).is_ok());
    }

    #[test]
    fn discrepancy_measures_cylinder_gaps() {
        let chain = t3();
        let pop_a =
            Population::from_counts(&chain, 0, vec![(State::TreeWord(vec![0]), 1)]).unwrap();
        let pop_b =
            Population::from_counts(&chain, 0, vec![(State::TreeWord(vec![1]), 1)]).unwrap();
        let a = EmpiricalBoundaryMeasure::from_population(&chain, &pop_a, 1.5).unwrap();
        let b = EmpiricalBoundaryMeasure::from_population(&chain, &pop_b, 1.5).unwrap();
        let report = discrepancy(&chain, &a, &b, 1).unwrap();
        // Mass 1 moved from shadow of [0] to shadow of [1].
        assert_eq!(report.max_absolute, 1.0);
        assert_eq!(report.per_cylinder[0], ("cyl_0".to_string(), 1.0));
        assert_eq!(report.per_cylinder[1], ("cyl_1".to_string(), 1.0));
        assert_eq!(report.per_cylinder[2], ("cyl_2".to_string(), 0.0));
        let zero = discrepancy(&chain, &a, &a, 2).unwrap();
        assert_eq!(zero.max_absolute, 0.0);
        assert!(discrepancy(&chain, &a, &b, 0).is_err());
    }

    #[test]
    fn empirical_measure_rejects_foreign_chains() {
        let tree = t3();
        let line = ChainModel::drifted_line(0.7).unwrap();
        let pop = Population::origin(&tree);
        assert!(EmpiricalBoundaryMeasure::from_population(&line, &pop, 1.5).is_err());
        let measure = EmpiricalBoundaryMeasure::from_population(&tree, &pop, 1.5).unwrap();
        assert!(measure.cylinder_mass(&CylinderSet::LinePlus).is_err());
    }
}
