//! Potential theory on the catalog chains: Martin kernels, harmonic measure
//! on the boundary, harmonic extensions of cylinder sets, and the metric of
//! the boundary compactification.
//!
//! Throughout, `G` is the Green's function, `o` the origin, and
//! `K(x, t) = G(x, t)/G(o, t)` the Martin kernel (extended continuously to
//! boundary targets). Closed forms are available everywhere except for
//! interior targets on the lattice, which fall back to a Monte-Carlo Green
//! ratio ([`martin_kernel_mc`]).

use rand_chacha::ChaCha8Rng;

use crate::chains::{
    common_prefix_len, distance, green_mc, transition_row, ChainKind, ChainModel, State, Walker,
};
use crate::error::{Error, Result};
use crate::stats;

/// Levels beyond the cylinder depth a walk must have reached before its
/// terminal vertex is considered committed to a boundary direction. At the
/// catalog speeds, 20 levels put the misclassification probability below
/// 1e-5 for the horizons accepted by [`harmonic_measure_mc`].
const COMMITMENT_MARGIN: u64 = 20;

/// A point of the Martin boundary of a catalog chain.
///
/// Tree boundary points are infinite rays. Computationally a ray is pinned
/// by a finite word: `tree_ray(w)` denotes the canonical ray that follows
/// `w` and then the letter `0` forever. Trailing zeros are stripped on
/// construction so equal rays compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundaryPoint {
    /// The ray `w 0 0 0 ...` on the regular tree (word normalized).
    TreeRay(Vec<u8>),
    /// The right end of the drifted line.
    PlusInfinity,
    /// The left end of the drifted line.
    MinusInfinity,
    /// The single boundary point of the lattice.
    LatticeInfinity,
}

impl BoundaryPoint {
    /// The canonical ray through `word` (extended by zeros).
    pub fn tree_ray(mut word: Vec<u8>) -> Self {
        while word.last() == Some(&0) {
            word.pop();
        }
        BoundaryPoint::TreeRay(word)
    }

    pub fn validate_for(&self, chain: &ChainModel) -> Result<()> {
        let ok = matches!(
            (chain.kind(), self),
            (ChainKind::RegularTree { .. }, BoundaryPoint::TreeRay(_))
                | (ChainKind::DriftedLine { .. }, BoundaryPoint::PlusInfinity)
                | (ChainKind::DriftedLine { .. }, BoundaryPoint::MinusInfinity)
                | (ChainKind::Lattice3D, BoundaryPoint::LatticeInfinity)
        );
        if ok {
            if let (ChainKind::RegularTree { .. }, BoundaryPoint::TreeRay(w)) =
                (chain.kind(), self)
            {
                chain.validate_state(&State::TreeWord(w.clone()))?;
            }
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "boundary point {self:?} does not belong to chain {:?}",
                chain.kind()
            )))
        }
    }
}

/// A basic measurable subset of the boundary.
///
/// On the tree, `TreeShadow(w)` is the set of rays passing through the
/// vertex `w` (the empty word gives the full boundary). On the line the
/// boundary has exactly two points, on the lattice one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CylinderSet {
    TreeShadow(Vec<u8>),
    LinePlus,
    LineMinus,
    LatticeFull,
}

impl CylinderSet {
    pub fn validate_for(&self, chain: &ChainModel) -> Result<()> {
        let ok = matches!(
            (chain.kind(), self),
            (ChainKind::RegularTree { .. }, CylinderSet::TreeShadow(_))
                | (ChainKind::DriftedLine { .. }, CylinderSet::LinePlus)
                | (ChainKind::DriftedLine { .. }, CylinderSet::LineMinus)
                | (ChainKind::Lattice3D, CylinderSet::LatticeFull)
        );
        if ok {
            if let (ChainKind::RegularTree { .. }, CylinderSet::TreeShadow(w)) =
                (chain.kind(), self)
            {
                chain.validate_state(&State::TreeWord(w.clone()))?;
            }
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "cylinder {self:?} does not belong to chain {:?}",
                chain.kind()
            )))
        }
    }

    /// Depth of the cylinder (word length; 1 for the line halves, 0 for the
    /// full boundaries).
    pub fn depth(&self) -> usize {
        match self {
            CylinderSet::TreeShadow(w) => w.len(),
            CylinderSet::LinePlus | CylinderSet::LineMinus => 1,
            CylinderSet::LatticeFull => 0,
        }
    }

    /// Whether an interior state lies in the "shadow" of this cylinder: the
    /// set of states from which the cylinder is the natural limit direction.
    /// Tree: descendants of `w` (including `w`). Line: positive states for
    /// `LinePlus`, non-positive for `LineMinus`. Lattice: everything.
    pub fn contains_state(&self, x: &State) -> bool {
        match (self, x) {
            (CylinderSet::TreeShadow(w), State::TreeWord(u)) => {
                u.len() >= w.len() && common_prefix_len(u, w) == w.len()
            }
            (CylinderSet::LinePlus, State::LinePoint(v)) => *v > 0,
            (CylinderSet::LineMinus, State::LinePoint(v)) => *v <= 0,
            (CylinderSet::LatticeFull, State::LatticePoint(_)) => true,
            _ => false,
        }
    }

    /// A short stable label used in CSV headers and verdicts.
    pub fn label(&self) -> String {
        match self {
            CylinderSet::TreeShadow(w) if w.is_empty() => "cyl_root".to_string(),
            CylinderSet::TreeShadow(w) => {
                let digits: Vec<String> = w.iter().map(|l| l.to_string()).collect();
                format!("cyl_{}", digits.join(""))
            }
            CylinderSet::LinePlus => "cyl_plus".to_string(),
            CylinderSet::LineMinus => "cyl_minus".to_string(),
            CylinderSet::LatticeFull => "cyl_full".to_string(),
        }
    }
}

/// A point of the compactified state space: an interior state or a boundary
/// point.
#[derive(Debug, Clone, PartialEq)]
pub enum CompactificationPoint {
    Interior(State),
    Boundary(BoundaryPoint),
}

/// A target for the Martin kernel: an interior state or a boundary point.
pub type MartinTarget = CompactificationPoint;

// ─── Martin kernel ──────────────────────────────────────────────────────────

/// Exact Martin kernel `K(x, target)`; `None` when no closed form exists
/// (interior targets on the lattice — see [`martin_kernel_mc`]).
///
/// Closed forms, with `F` the one-step first-passage probability:
/// - tree, interior `y`: `F^(dist(x,y) - dist(o,y))`;
/// - tree, ray `xi`: `F^(dist(x,c) - dist(o,c))` with `c` the confluent of
///   `x` and the ray;
/// - line: `K(x, +inf) = 1`, `K(x, -inf) = (q/p)^x`, interior targets from
///   the Green closed form;
/// - lattice: `K(x, boundary) = 1` (one-point boundary).
pub fn martin_kernel(
    chain: &ChainModel,
    x: &State,
    target: &MartinTarget,
) -> Result<Option<f64>> {
    chain.validate_state(x)?;
    match target {
        CompactificationPoint::Interior(y) => {
            chain.validate_state(y)?;
            match chain.kind() {
                ChainKind::RegularTree { .. } => {
                    let f = chain.step_down_prob().expect("tree has F");
                    let o = chain.origin();
                    let exp = distance(chain, x, y)? as i64 - distance(chain, &o, y)? as i64;
                    Ok(Some(f.powi(exp as i32)))
                }
                ChainKind::DriftedLine { right_prob } => {
                    let (State::LinePoint(a), State::LinePoint(b)) = (x, y) else {
                        unreachable!("validated")
                    };
                    let ratio = (1.0 - right_prob) / right_prob;
                    // K = (q/p)^(max(x-y,0) - max(-y,0)) from the two Green
                    // closed forms.
                    let exp = (a - b).max(0) - (-b).max(0);
                    Ok(Some(ratio.powi(exp as i32)))
                }
                ChainKind::Lattice3D => Ok(None),
            }
        }
        CompactificationPoint::Boundary(xi) => {
            xi.validate_for(chain)?;
            match (chain.kind(), xi) {
                (ChainKind::RegularTree { .. }, BoundaryPoint::TreeRay(ray)) => {
                    let State::TreeWord(w) = x else { unreachable!("validated") };
                    let f = chain.step_down_prob().expect("tree has F");
                    let confluent = ray_confluent_len(w, ray);
                    let exp = w.len() as i64 - 2 * confluent as i64;
                    Ok(Some(f.powi(exp as i32)))
                }
                (ChainKind::DriftedLine { .. }, BoundaryPoint::PlusInfinity) => Ok(Some(1.0)),
                (ChainKind::DriftedLine { right_prob }, BoundaryPoint::MinusInfinity) => {
                    let State::LinePoint(a) = x else { unreachable!("validated") };
                    let ratio = (1.0 - right_prob) / right_prob;
                    Ok(Some(ratio.powi(*a as i32)))
                }
                (ChainKind::Lattice3D, BoundaryPoint::LatticeInfinity) => Ok(Some(1.0)),
                _ => unreachable!("validate_for guarantees matching variants"),
            }
        }
    }
}

/// Length of the common prefix of a finite word with the canonical ray
/// `ray 0 0 0 ...` (the ray word is normalized, i.e. has no trailing zeros).
pub(crate) fn ray_confluent_len(word: &[u8], ray: &[u8]) -> usize {
    let shared = common_prefix_len(word, ray);
    if shared < ray.len() {
        return shared;
    }
    // The whole pinned part of the ray is a prefix of `word`; the ray
    // continues with zeros.
    shared + word[shared..].iter().take_while(|&&l| l == 0).count()
}

/// Monte-Carlo Martin kernel for targets without a closed form: the ratio of
/// [`green_mc`] estimates `G(x,y)/G(o,y)` with a first-order propagated
/// standard error.
pub fn martin_kernel_mc(
    chain: &ChainModel,
    x: &State,
    y: &State,
    walks: u64,
    horizon: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let (gx, se_x) = green_mc(chain, x, y, walks, horizon, rng)?;
    let (go, se_o) = green_mc(chain, &chain.origin(), y, walks, horizon, rng)?;
    if gx <= 0.0 || go <= 0.0 {
        return Err(Error::Convergence {
            what: format!("martin_kernel_mc at {x:?} -> {y:?}: no visits observed"),
            residual: f64::INFINITY,
            iterations: walks,
        });
    }
    let ratio = gx / go;
    let se = ratio * ((se_x / gx).powi(2) + (se_o / go).powi(2)).sqrt();
    Ok((ratio, se))
}

// ─── harmonic measure ───────────────────────────────────────────────────────

/// Exact harmonic measure of a cylinder: the probability that the walk from
/// the origin converges into it.
///
/// Tree: `F^|w| (d-1)/d` (hit `w`, then settle in one of its `d-1` forward
/// directions). Line: the walk drifts to `+inf`, so `{+inf}` carries measure
/// one. Lattice: one boundary point.
pub fn harmonic_measure(chain: &ChainModel, cylinder: &CylinderSet) -> Result<f64> {
    cylinder.validate_for(chain)?;
    Ok(match (chain.kind(), cylinder) {
        (ChainKind::RegularTree { degree }, CylinderSet::TreeShadow(w)) => {
            if w.is_empty() {
                1.0
            } else {
                let d = degree as f64;
                let f = 1.0 / (d - 1.0);
                // Grouping (F^|w| (d-1)) / d keeps the depth-1 masses at
                // exactly 1/d in floating point, so they partition exactly.
                (f.powi(w.len() as i32) * (d - 1.0)) / d
            }
        }
        (ChainKind::DriftedLine { .. }, CylinderSet::LinePlus) => 1.0,
        (ChainKind::DriftedLine { .. }, CylinderSet::LineMinus) => 0.0,
        (ChainKind::Lattice3D, CylinderSet::LatticeFull) => 1.0,
        _ => unreachable!("validate_for guarantees matching variants"),
    })
}

/// Monte-Carlo harmonic measure: the fraction of independent walks from the
/// origin whose terminal state is committed to the cylinder. Returns the
/// estimate and its standard error.
///
/// A tree walk is committed when its terminal depth is at least
/// `|w| + 20` and its ancestor at depth `|w|` equals `w`; uncommitted walks
/// count as misses. A line walk is classified by the sign of its terminal
/// coordinate. The horizon must be at least `6 (|w| + 20)` on the tree so
/// the commitment depth is reached with overwhelming probability.
pub fn harmonic_measure_mc(
    chain: &ChainModel,
    cylinder: &CylinderSet,
    walks: u64,
    horizon: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    cylinder.validate_for(chain)?;
    if walks < 2 {
        return Err(Error::Config("harmonic_measure_mc needs at least 2 walks".into()));
    }
    if let CylinderSet::TreeShadow(w) = cylinder {
        let needed = 6 * (w.len() as u64 + COMMITMENT_MARGIN);
        if u64::from(horizon) < needed {
            return Err(Error::Config(format!(
                "horizon {horizon} too small for cylinder depth {}: need at least {needed}",
                w.len()
            )));
        }
    }
    let mut hits = 0u64;
    for _ in 0..walks {
        let mut walker = Walker::new(chain, chain.origin());
        for _ in 0..horizon {
            walker.step(rng);
        }
        let committed = match cylinder {
            CylinderSet::TreeShadow(w) => {
                let t = walker.word();
                t.len() as u64 >= w.len() as u64 + COMMITMENT_MARGIN
                    && common_prefix_len(t, w) == w.len()
            }
            CylinderSet::LinePlus => walker.line_position() > 0,
            CylinderSet::LineMinus => walker.line_position() < 0,
            CylinderSet::LatticeFull => true,
        };
        if committed {
            hits += 1;
        }
    }
    let p = hits as f64 / walks as f64;
    Ok((p, stats::proportion_se(p, walks as usize)))
}

// ─── harmonic extension ─────────────────────────────────────────────────────

/// The harmonic extension `h_C(x) = P_x(walk converges into C)` of a
/// cylinder. Values lie in `[0, 1]` and `h_C(o)` is the harmonic measure.
///
/// Tree closed form: outside the subtree under `w` the walk must first hit
/// `w`, giving `F^dist(x,w) (d-1)/d`; at or below `w` the escape happens
/// through the parent of `w`, giving `1 - F^dist(x,w)/d`.
pub fn harmonic_extension(chain: &ChainModel, cylinder: &CylinderSet, x: &State) -> Result<f64> {
    cylinder.validate_for(chain)?;
    chain.validate_state(x)?;
    Ok(match (chain.kind(), cylinder, x) {
        (ChainKind::RegularTree { degree }, CylinderSet::TreeShadow(w), State::TreeWord(u)) => {
            if w.is_empty() {
                return Ok(1.0);
            }
            let d = degree as f64;
            let f = 1.0 / (d - 1.0);
            let dist = (u.len() + w.len() - 2 * common_prefix_len(u, w)) as i32;
            if cylinder.contains_state(x) {
                1.0 - f.powi(dist) / d
            } else {
                (f.powi(dist) * (d - 1.0)) / d
            }
        }
        (ChainKind::DriftedLine { .. }, CylinderSet::LinePlus, _) => 1.0,
        (ChainKind::DriftedLine { .. }, CylinderSet::LineMinus, _) => 0.0,
        (ChainKind::Lattice3D, CylinderSet::LatticeFull, _) => 1.0,
        _ => unreachable!("validate_for guarantees matching variants"),
    })
}

/// One-step harmonicity defect `h(x) - sum_y P(x,y) h(y)` of an arbitrary
/// state function. Zero (to rounding) characterizes harmonic functions;
/// non-negative values characterize superharmonic ones.
pub fn harmonicity_defect(
    chain: &ChainModel,
    x: &State,
    h: impl Fn(&State) -> Result<f64>,
) -> Result<f64> {
    let row = transition_row(chain, x)?;
    let mut pushed = 0.0;
    for (y, p) in &row.entries {
        pushed += p * h(y)?;
    }
    Ok(h(x)? - pushed)
}

// ─── compactification metric ────────────────────────────────────────────────

/// Metric of the boundary compactification. All three are ultrametrics:
///
/// - tree: `2^-(confluent depth)` between distinct points (rays or
///   vertices), where the confluent of two points is their longest common
///   prefix;
/// - line: distance 1 between points on different sides of the origin
///   (state 0 counts as the minus side), `2^-min(|x|, |y|)` between
///   distinct points on the same side, with `|±inf| = inf`;
/// - lattice: `2^-min(L1 norms)` between distinct points; the boundary is a
///   single point at L1 norm infinity.
///
/// Interior points are isolated; interior sequences converge to a boundary
/// point exactly when they converge in the chain's own sense (along a ray,
/// rightward, or in norm).
pub fn compactification_distance(
    chain: &ChainModel,
    a: &CompactificationPoint,
    b: &CompactificationPoint,
) -> Result<f64> {
    validate_point(chain, a)?;
    validate_point(chain, b)?;
    if a == b {
        return Ok(0.0);
    }
    Ok(match chain.kind() {
        ChainKind::RegularTree { .. } => {
            let confluent = match (a, b) {
                (
                    CompactificationPoint::Interior(State::TreeWord(u)),
                    CompactificationPoint::Interior(State::TreeWord(v)),
                ) => common_prefix_len(u, v),
                (
                    CompactificationPoint::Interior(State::TreeWord(u)),
                    CompactificationPoint::Boundary(BoundaryPoint::TreeRay(r)),
                )
                | (
                    CompactificationPoint::Boundary(BoundaryPoint::TreeRay(r)),
                    CompactificationPoint::Interior(State::TreeWord(u)),
                ) => ray_confluent_len(u, r),
                (
                    CompactificationPoint::Boundary(BoundaryPoint::TreeRay(r)),
                    CompactificationPoint::Boundary(BoundaryPoint::TreeRay(s)),
                ) => {
                    // Normalized distinct rays never share their whole pinned
                    // parts plus zeros; the confluent is finite.
                    ray_confluent_len(&zero_extend(r, s.len()), s)
                }
                _ => unreachable!("validated"),
            };
            0.5f64.powi(confluent as i32)
        }
        ChainKind::DriftedLine { .. } => {
            let (side_a, norm_a) = line_side_norm(a);
            let (side_b, norm_b) = line_side_norm(b);
            if side_a != side_b {
                1.0
            } else {
                0.5f64.powi(norm_a.min(norm_b).min(1 << 20) as i32)
            }
        }
        ChainKind::Lattice3D => {
            let norm_of = |p: &CompactificationPoint| -> u64 {
                match p {
                    CompactificationPoint::Interior(s) => s.norm(),
                    CompactificationPoint::Boundary(_) => u64::MAX,
                }
            };
            let m = norm_of(a).min(norm_of(b)).min(1 << 20);
            0.5f64.powi(m as i32)
        }
    })
}

fn zero_extend(word: &[u8], len: usize) -> Vec<u8> {
    let mut v = word.to_vec();
    while v.len() < len + 1 {
        v.push(0);
    }
    v
}

fn line_side_norm(p: &CompactificationPoint) -> (bool, u64) {
    match p {
        CompactificationPoint::Interior(State::LinePoint(x)) => (*x > 0, x.unsigned_abs()),
        CompactificationPoint::Boundary(BoundaryPoint::PlusInfinity) => (true, u64::MAX),
        CompactificationPoint::Boundary(BoundaryPoint::MinusInfinity) => (false, u64::MAX),
        _ => unreachable!("validated"),
    }
}

fn validate_point(chain: &ChainModel, p: &CompactificationPoint) -> Result<()> {
    match p {
        CompactificationPoint::Interior(s) => chain.validate_state(s),
        CompactificationPoint::Boundary(b) => b.validate_for(chain),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::green_exact;
    use crate::rng::{domain, Streams};
    use rand::Rng;

    fn tree(d: u32) -> ChainModel {
        ChainModel::regular_tree(d).unwrap()
    }

    fn line(p: f64) -> ChainModel {
        ChainModel::drifted_line(p).unwrap()
    }

    fn interior(s: State) -> CompactificationPoint {
        CompactificationPoint::Interior(s)
    }

    fn boundary(b: BoundaryPoint) -> CompactificationPoint {
        CompactificationPoint::Boundary(b)
    }

    // ── Martin kernel ───────────────────────────────────────────────────────

    #[test]
    fn kernel_is_one_at_origin_for_every_target() {
        let t = tree(3);
        let o = t.origin();
        let targets = [
            interior(State::TreeWord(vec![0, 1])),
            boundary(BoundaryPoint::tree_ray(vec![2, 1])),
        ];
        for target in &targets {
            assert_eq!(martin_kernel(&t, &o, target).unwrap(), Some(1.0));
        }
        let l = line(2.0 / 3.0);
        for target in [
            interior(State::LinePoint(4)),
            interior(State::LinePoint(-4)),
            boundary(BoundaryPoint::PlusInfinity),
            boundary(BoundaryPoint::MinusInfinity),
        ] {
            assert_eq!(martin_kernel(&l, &l.origin(), &target).unwrap(), Some(1.0));
        }
        let z = ChainModel::lattice3d();
        assert_eq!(
            martin_kernel(&z, &z.origin(), &boundary(BoundaryPoint::LatticeInfinity)).unwrap(),
            Some(1.0)
        );
        // Interior lattice targets have no closed form.
        assert_eq!(
            martin_kernel(&z, &z.origin(), &interior(State::LatticePoint([1, 0, 0]))).unwrap(),
            None
        );
    }

    #[test]
    fn kernel_times_green_at_origin_recovers_green() {
        let streams = Streams::new(17);
        let mut rng = streams.stream(domain::WALK, 0);
        let t = tree(4);
        let o = t.origin();
        for _ in 0..50 {
            let len_x = rng.random_range(0..8usize);
            let len_y = rng.random_range(0..8usize);
            let mk_word = |rng: &mut ChaCha8Rng, len: usize| {
                let mut w = Vec::new();
                for i in 0..len {
                    let bound = if i == 0 { 4 } else { 3 };
                    w.push(rng.random_range(0..bound) as u8);
                }
                State::TreeWord(w)
            };
            let x = mk_word(&mut rng, len_x);
            let y = mk_word(&mut rng, len_y);
            let k = martin_kernel(&t, &x, &interior(y.clone())).unwrap().unwrap();
            let gxy = green_exact(&t, &x, &y).unwrap().unwrap();
            let goy = green_exact(&t, &o, &y).unwrap().unwrap();
            assert!((k * goy - gxy).abs() < 1e-12, "K G(o,y) = {} vs {gxy}", k * goy);
        }
        let l = line(0.7);
        for _ in 0..50 {
            let x = State::LinePoint(rng.random_range(-10..=10));
            let y = State::LinePoint(rng.random_range(-10..=10));
            let k = martin_kernel(&l, &x, &interior(y.clone())).unwrap().unwrap();
            let gxy = green_exact(&l, &x, &y).unwrap().unwrap();
            let goy = green_exact(&l, &l.origin(), &y).unwrap().unwrap();
            assert!((k * goy - gxy).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_boundary_kernel_is_the_stabilized_green_ratio() {
        // Along the canonical ray through w, K(x, xi) equals
        // G(x, y_m)/G(o, y_m) for every ray vertex y_m deeper than the
        // confluent; the ratio stabilizes there.
        let t = tree(3);
        let o = t.origin();
        let ray_word = vec![2, 1];
        let xi = boundary(BoundaryPoint::tree_ray(ray_word.clone()));
        let xs = [
            State::TreeWord(vec![]),
            State::TreeWord(vec![2]),
            State::TreeWord(vec![2, 1, 1, 0]),
            State::TreeWord(vec![0, 1]),
        ];
        for x in &xs {
            let k = martin_kernel(&t, x, &xi).unwrap().unwrap();
            for m in [10usize, 20] {
                let mut deep = ray_word.clone();
                deep.resize(m, 0); // continue the canonical ray with zeros
                let y = State::TreeWord(deep);
                let ratio = green_exact(&t, x, &y).unwrap().unwrap()
                    / green_exact(&t, &o, &y).unwrap().unwrap();
                assert!((k - ratio).abs() < 1e-12, "{k} vs {ratio} at {x:?}, m={m}");
            }
        }
        // First vertex on the ray, degree 3: F^(0 - 1) = 2.
        let first = State::TreeWord(vec![2]);
        assert_eq!(martin_kernel(&t, &first, &xi).unwrap(), Some(2.0));
    }

    #[test]
    fn line_minus_kernel_matches_green_ratio_for_every_cutoff() {
        let l = line(2.0 / 3.0);
        let k = martin_kernel(&l, &State::LinePoint(2), &boundary(BoundaryPoint::MinusInfinity))
            .unwrap()
            .unwrap();
        assert!((k - 0.25).abs() < 1e-15);
        for m in [5i64, 10, 30] {
            let y = State::LinePoint(-m);
            let ratio = green_exact(&l, &State::LinePoint(2), &y).unwrap().unwrap()
                / green_exact(&l, &l.origin(), &y).unwrap().unwrap();
            assert!((k - ratio).abs() < 1e-12, "{k} vs {ratio} at cutoff {m}");
        }
    }

    #[test]
    fn kernels_are_harmonic_away_from_interior_targets() {
        let t = tree(3);
        let xi = boundary(BoundaryPoint::tree_ray(vec![0, 1]));
        let inner = interior(State::TreeWord(vec![1, 0]));
        let streams = Streams::new(23);
        let mut rng = streams.stream(domain::WALK, 1);
        for _ in 0..100 {
            let len = rng.random_range(0..10usize);
            let mut w = Vec::new();
            for i in 0..len {
                let bound = if i == 0 { 3 } else { 2 };
                w.push(rng.random_range(0..bound) as u8);
            }
            let x = State::TreeWord(w);
            for target in [&xi, &inner] {
                if *target == interior(x.clone()) {
                    continue;
                }
                let defect = harmonicity_defect(&t, &x, |s| {
                    Ok(martin_kernel(&t, s, target).unwrap().unwrap())
                })
                .unwrap();
                assert!(defect.abs() < 1e-12, "defect {defect:.3e} at {x:?}");
            }
        }
    }

    // ── harmonic measure ────────────────────────────────────────────────────

    #[test]
    fn tree_measure_closed_forms() {
        let t3 = tree(3);
        let m1 = harmonic_measure(&t3, &CylinderSet::TreeShadow(vec![0])).unwrap();
        let m2 = harmonic_measure(&t3, &CylinderSet::TreeShadow(vec![0, 1])).unwrap();
        assert!((m1 - 1.0 / 3.0).abs() < 1e-16);
        assert!((m2 - 1.0 / 6.0).abs() < 1e-16);
        let t4 = tree(4);
        let m = harmonic_measure(&t4, &CylinderSet::TreeShadow(vec![3, 0])).unwrap();
        assert!((m - 1.0 / 12.0).abs() < 1e-16);
        assert_eq!(harmonic_measure(&t3, &CylinderSet::TreeShadow(vec![])).unwrap(), 1.0);
    }

    #[test]
    fn depth_one_masses_partition_exactly() {
        for d in [3u32, 4] {
            let t = tree(d);
            let total: f64 = (0..d as u8)
                .map(|l| harmonic_measure(&t, &CylinderSet::TreeShadow(vec![l])).unwrap())
                .sum();
            assert_eq!(total, 1.0, "depth-1 masses must sum to exactly 1 for d={d}");
        }
    }

    #[test]
    fn children_masses_sum_to_parent() {
        let t = tree(4);
        let parent = CylinderSet::TreeShadow(vec![2, 1]);
        let parent_mass = harmonic_measure(&t, &parent).unwrap();
        let child_total: f64 = (0..3u8)
            .map(|l| {
                harmonic_measure(&t, &CylinderSet::TreeShadow(vec![2, 1, l])).unwrap()
            })
            .sum();
        assert!((child_total - parent_mass).abs() < 1e-12);
    }

    #[test]
    fn line_and_lattice_measures() {
        let l = line(0.9);
        assert_eq!(harmonic_measure(&l, &CylinderSet::LinePlus).unwrap(), 1.0);
        assert_eq!(harmonic_measure(&l, &CylinderSet::LineMinus).unwrap(), 0.0);
        let z = ChainModel::lattice3d();
        assert_eq!(harmonic_measure(&z, &CylinderSet::LatticeFull).unwrap(), 1.0);
    }

    #[test]
    fn measure_mc_agrees_with_closed_form() {
        let streams = Streams::new(91);
        let t = tree(3);
        let mut rng = streams.stream(domain::WALK, 7);
        for w in [vec![0], vec![2, 1]] {
            let cyl = CylinderSet::TreeShadow(w);
            let exact = harmonic_measure(&t, &cyl).unwrap();
            let (est, se) = harmonic_measure_mc(&t, &cyl, 20_000, 200, &mut rng).unwrap();
            assert!(
                (est - exact).abs() <= 3.0 * se,
                "{} mc {est} +- {se} vs exact {exact}",
                cyl.label()
            );
        }
        let l = line(2.0 / 3.0);
        let (plus, _) = harmonic_measure_mc(&l, &CylinderSet::LinePlus, 5_000, 400, &mut rng).unwrap();
        let (minus, _) =
            harmonic_measure_mc(&l, &CylinderSet::LineMinus, 5_000, 400, &mut rng).unwrap();
        assert_eq!(plus, 1.0);
        assert_eq!(minus, 0.0);
    }

    #[test]
    fn measure_mc_rejects_short_horizons() {
        let t = tree(3);
        let mut rng = Streams::new(1).stream(domain::WALK, 0);
        let err = harmonic_measure_mc(&t, &CylinderSet::TreeShadow(vec![0, 1, 0]), 100, 60, &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    // ── harmonic extension ──────────────────────────────────────────────────

    #[test]
    fn extension_values_at_landmarks() {
        let t = tree(3);
        let cyl = CylinderSet::TreeShadow(vec![1]);
        let at_root = harmonic_extension(&t, &cyl, &t.origin()).unwrap();
        let at_w = harmonic_extension(&t, &cyl, &State::TreeWord(vec![1])).unwrap();
        assert!((at_root - 1.0 / 3.0).abs() < 1e-15);
        assert!((at_w - 2.0 / 3.0).abs() < 1e-15);
        // At the root the extension is the harmonic measure.
        assert!((at_root - harmonic_measure(&t, &cyl).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn extension_is_harmonic_everywhere() {
        let streams = Streams::new(29);
        let mut rng = streams.stream(domain::WALK, 2);
        for d in [3u32, 4] {
            let t = tree(d);
            for _ in 0..100 {
                let wlen = rng.random_range(1..=3usize);
                let mut w = Vec::new();
                for i in 0..wlen {
                    let bound = if i == 0 { d } else { d - 1 };
                    w.push(rng.random_range(0..bound) as u8);
                }
                let cyl = CylinderSet::TreeShadow(w);
                let xlen = rng.random_range(0..10usize);
                let mut xw = Vec::new();
                for i in 0..xlen {
                    let bound = if i == 0 { d } else { d - 1 };
                    xw.push(rng.random_range(0..bound) as u8);
                }
                let x = State::TreeWord(xw);
                let defect =
                    harmonicity_defect(&t, &x, |s| harmonic_extension(&t, &cyl, s)).unwrap();
                assert!(defect.abs() < 1e-12, "defect {defect:.3e} at {x:?} for {cyl:?}");
            }
        }
    }

    #[test]
    fn extension_stays_in_unit_interval() {
        let streams = Streams::new(31);
        let mut rng = streams.stream(domain::WALK, 3);
        for d in [3u32, 5] {
            let t = tree(d);
            for _ in 0..500 {
                let wlen = rng.random_range(1..=3usize);
                let mut w = Vec::new();
                for i in 0..wlen {
                    let bound = if i == 0 { d } else { d - 1 };
                    w.push(rng.random_range(0..bound) as u8);
                }
                let xlen = rng.random_range(0..20usize);
                let mut xw = Vec::new();
                for i in 0..xlen {
                    let bound = if i == 0 { d } else { d - 1 };
                    xw.push(rng.random_range(0..bound) as u8);
                }
                let h = harmonic_extension(
                    &t,
                    &CylinderSet::TreeShadow(w),
                    &State::TreeWord(xw),
                )
                .unwrap();
                assert!((0.0..=1.0).contains(&h));
            }
        }
    }

    // ── compactification metric ─────────────────────────────────────────────

    #[test]
    fn metric_matches_stated_examples() {
        let t = tree(3);
        // Interior vertices with confluent depth 3.
        let u = interior(State::TreeWord(vec![0, 1, 0, 1]));
        let v = interior(State::TreeWord(vec![0, 1, 0, 0]));
        assert_eq!(compactification_distance(&t, &u, &v).unwrap(), 0.125);

        let l = line(0.8);
        let d = compactification_distance(
            &l,
            &interior(State::LinePoint(2)),
            &boundary(BoundaryPoint::PlusInfinity),
        )
        .unwrap();
        assert_eq!(d, 0.25);
        assert_eq!(
            compactification_distance(
                &l,
                &boundary(BoundaryPoint::PlusInfinity),
                &boundary(BoundaryPoint::MinusInfinity),
            )
            .unwrap(),
            1.0
        );

        let z = ChainModel::lattice3d();
        assert_eq!(
            compactification_distance(
                &z,
                &boundary(BoundaryPoint::LatticeInfinity),
                &boundary(BoundaryPoint::LatticeInfinity),
            )
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn equal_rays_in_different_pinnings_coincide() {
        // w and w00 pin the same canonical ray.
        let a = BoundaryPoint::tree_ray(vec![1]);
        let b = BoundaryPoint::tree_ray(vec![1, 0, 0]);
        assert_eq!(a, b);
        let t = tree(3);
        assert_eq!(
            compactification_distance(&t, &boundary(a), &boundary(b)).unwrap(),
            0.0
        );
    }

    #[test]
    fn metric_axioms_hold_on_random_triples() {
        let streams = Streams::new(37);
        let mut rng = streams.stream(domain::WALK, 4);
        let t = tree(3);
        let random_point = |rng: &mut ChaCha8Rng| -> CompactificationPoint {
            let len = rng.random_range(0..6usize);
            let mut w = Vec::new();
            for i in 0..len {
                let bound = if i == 0 { 3 } else { 2 };
                w.push(rng.random_range(0..bound) as u8);
            }
            if rng.random_bool(0.3) {
                boundary(BoundaryPoint::tree_ray(w))
            } else {
                interior(State::TreeWord(w))
            }
        };
        for _ in 0..2000 {
            let (a, b, c) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
            let dab = compactification_distance(&t, &a, &b).unwrap();
            let dba = compactification_distance(&t, &b, &a).unwrap();
            let dac = compactification_distance(&t, &a, &c).unwrap();
            let dcb = compactification_distance(&t, &c, &b).unwrap();
            assert_eq!(dab, dba);
            assert_eq!(dab == 0.0, a == b);
            // Ultrametric triangle inequality.
            assert!(dab <= dac.max(dcb) + 1e-15);
        }
    }

    #[test]
    fn ray_prefixes_converge_to_the_ray() {
        let t = tree(3);
        let xi = boundary(BoundaryPoint::tree_ray(vec![2, 1, 1]));
        // The canonical ray continues with zeros after its pinned word.
        let mut full = vec![2, 1, 1];
        full.resize(12, 0);
        for k in 0..=12usize {
            let p = interior(State::TreeWord(full[..k].to_vec()));
            let d = compactification_distance(&t, &p, &xi).unwrap();
            assert_eq!(d, 0.5f64.powi(k as i32), "distance at ray depth {k}");
        }
    }

    #[test]
    fn mixed_chain_points_are_rejected() {
        let t = tree(3);
        let err = compactification_distance(
            &t,
            &interior(State::LinePoint(0)),
            &interior(State::TreeWord(vec![])),
        );
        assert!(matches!(err, Err(Error::InvalidState(_))));
        assert!(martin_kernel(&t, &State::TreeWord(vec![]), &boundary(BoundaryPoint::PlusInfinity))
            .is_err());
    }
}
