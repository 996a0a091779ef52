//! Chain catalog: transient Markov chains with tractable potential theory.
//!
//! Three models are provided:
//!
//! - **Regular tree** of degree `d >= 3`. States are words over the letter
//!   alphabet: the first letter lies in `0..d` (the root has `d` neighbors),
//!   every subsequent letter lies in `0..d-1` (each non-root vertex has one
//!   parent and `d-1` children). The empty word is the root. The simple walk
//!   moves to a uniformly chosen neighbor.
//! - **Drifted line**: the walk on the integers stepping `+1` with
//!   probability `p in (1/2, 1)` and `-1` with probability `q = 1 - p`.
//! - **Lattice3D**: the simple walk on the three-dimensional integer lattice,
//!   each of the six neighbors with probability `1/6`.
//!
//! All three are transient, which is what makes their Green's functions
//! finite and their boundary theory non-trivial.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stats;

/// Which chain of the catalog a model instantiates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainKind {
    /// Simple walk on the `degree`-regular tree.
    RegularTree { degree: u32 },
    /// Nearest-neighbor walk on the integers with rightward drift.
    DriftedLine { right_prob: f64 },
    /// Simple walk on the three-dimensional integer lattice.
    Lattice3D,
}

/// A state of one of the catalog chains.
///
/// States are self-describing encodings; [`ChainModel::validate_state`]
/// checks that a state actually belongs to a given model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    /// A tree vertex as its address word from the root (empty = root).
    TreeWord(Vec<u8>),
    /// A point of the integer line.
    LinePoint(i64),
    /// A point of the integer lattice.
    LatticePoint([i64; 3]),
}

impl State {
    pub fn root() -> Self {
        State::TreeWord(Vec::new())
    }

    /// Depth of a tree word, absolute value on the line, L1 norm on the
    /// lattice; a convenient "distance from origin" for diagnostics.
    pub fn norm(&self) -> u64 {
        match self {
            State::TreeWord(w) => w.len() as u64,
            State::LinePoint(x) => x.unsigned_abs(),
            State::LatticePoint(p) => p.iter().map(|c| c.unsigned_abs()).sum(),
        }
    }
}

/// One row of the transition matrix: the reachable destinations of a state
/// with their probabilities, in the canonical destination order used by the
/// branching engine's multinomial scatter (parent before children on the
/// tree; smaller coordinate before larger on the line and lattice).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub entries: Vec<(State, f64)>,
}

impl TransitionRow {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// A chain of the catalog together with its distinguished origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainModel {
    kind: ChainKind,
}

impl ChainModel {
    /// Simple walk on the `degree`-regular tree. Degree must be at least 3
    /// (degree 2 is the recurrent line and has no boundary theory here).
    pub fn regular_tree(degree: u32) -> Result<Self> {
        if degree < 3 {
            return Err(Error::Domain(format!(
                "regular tree degree must be >= 3, got {degree}"
            )));
        }
        Ok(ChainModel {
            kind: ChainKind::RegularTree { degree },
        })
    }

    /// Drifted walk on the line; `right_prob` must lie strictly between 1/2
    /// and 1 (drift to the right, non-degenerate).
    pub fn drifted_line(right_prob: f64) -> Result<Self> {
        if !(right_prob > 0.5 && right_prob < 1.0) {
            return Err(Error::Domain(format!(
                "drifted line right-probability must lie in (1/2, 1), got {right_prob}"
            )));
        }
        Ok(ChainModel {
            kind: ChainKind::DriftedLine { right_prob },
        })
    }

    /// Simple walk on the three-dimensional lattice.
    pub fn lattice3d() -> Self {
        ChainModel {
            kind: ChainKind::Lattice3D,
        }
    }

    /// Rebuild a model from its kind, re-running parameter validation.
    pub fn from_kind(kind: ChainKind) -> Result<Self> {
        match kind {
            ChainKind::RegularTree { degree } => Self::regular_tree(degree),
            ChainKind::DriftedLine { right_prob } => Self::drifted_line(right_prob),
            ChainKind::Lattice3D => Ok(Self::lattice3d()),
        }
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    /// The distinguished origin `o`.
    pub fn origin(&self) -> State {
        match self.kind {
            ChainKind::RegularTree { .. } => State::TreeWord(Vec::new()),
            ChainKind::DriftedLine { .. } => State::LinePoint(0),
            ChainKind::Lattice3D => State::LatticePoint([0, 0, 0]),
        }
    }

    /// First-passage probability to a fixed neighbor (tree) or to the point
    /// one step against the drift (line). This is the basic quantity from
    /// which Green's functions and kernels are assembled.
    pub(crate) fn step_down_prob(&self) -> Option<f64> {
        match self.kind {
            // From a child back to its parent: F solves F = 1/d + (d-1)/d F^2,
            // and transience selects the smaller root 1/(d-1).
            ChainKind::RegularTree { degree } => Some(1.0 / (degree as f64 - 1.0)),
            // Probability of ever moving one step left: q/p.
            ChainKind::DriftedLine { right_prob } => {
                Some((1.0 - right_prob) / right_prob)
            }
            ChainKind::Lattice3D => None,
        }
    }

    /// Checks that `x` is a state of this chain.
    pub fn validate_state(&self, x: &State) -> Result<()> {
        match (self.kind, x) {
            (ChainKind::RegularTree { degree }, State::TreeWord(w)) => {
                let d = degree as u8;
                for (i, &letter) in w.iter().enumerate() {
                    let bound = if i == 0 { d } else { d - 1 };
                    if letter >= bound {
                        return Err(Error::InvalidState(format!(
                            "tree word letter {letter} at position {i} exceeds bound {bound} \
                             for degree {degree}"
                        )));
                    }
                }
                Ok(())
            }
            (ChainKind::DriftedLine { .. }, State::LinePoint(_)) => Ok(()),
            (ChainKind::Lattice3D, State::LatticePoint(_)) => Ok(()),
            (_, other) => Err(Error::InvalidState(format!(
                "state {other:?} does not belong to chain {:?}",
                self.kind
            ))),
        }
    }

    /// Number of neighbors of `x`.
    pub fn degree_of(&self, x: &State) -> Result<usize> {
        self.validate_state(x)?;
        Ok(match self.kind {
            ChainKind::RegularTree { degree } => degree as usize,
            ChainKind::DriftedLine { .. } => 2,
            ChainKind::Lattice3D => 6,
        })
    }
}

/// Graph distance between two states of the same chain (tree: path length in
/// the tree; line: absolute difference; lattice: L1 distance).
pub fn distance(chain: &ChainModel, x: &State, y: &State) -> Result<u64> {
    chain.validate_state(x)?;
    chain.validate_state(y)?;
    Ok(match (x, y) {
        (State::TreeWord(a), State::TreeWord(b)) => {
            let c = common_prefix_len(a, b);
            (a.len() + b.len() - 2 * c) as u64
        }
        (State::LinePoint(a), State::LinePoint(b)) => a.abs_diff(*b),
        (State::LatticePoint(a), State::LatticePoint(b)) => {
            (0..3).map(|i| a[i].abs_diff(b[i])).sum()
        }
        _ => unreachable!("validate_state guarantees matching variants"),
    })
}

pub(crate) fn common_prefix_len(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// The transition row of `x`: all destinations with their probabilities, in
/// canonical destination order. Probabilities are strictly positive and sum
/// to one up to rounding.
pub fn transition_row(chain: &ChainModel, x: &State) -> Result<TransitionRow> {
    chain.validate_state(x)?;
    let entries = match (chain.kind, x) {
        (ChainKind::RegularTree { degree }, State::TreeWord(w)) => {
            let d = degree as f64;
            let mut entries = Vec::with_capacity(degree as usize);
            if w.is_empty() {
                for letter in 0..degree as u8 {
                    entries.push((State::TreeWord(vec![letter]), 1.0 / d));
                }
            } else {
                let mut parent = w.clone();
                parent.pop();
                entries.push((State::TreeWord(parent), 1.0 / d));
                for letter in 0..(degree - 1) as u8 {
                    let mut child = w.clone();
                    child.push(letter);
                    entries.push((State::TreeWord(child), 1.0 / d));
                }
            }
            entries
        }
        (ChainKind::DriftedLine { right_prob }, State::LinePoint(v)) => vec![
            (State::LinePoint(v - 1), 1.0 - right_prob),
            (State::LinePoint(v + 1), right_prob),
        ],
        (ChainKind::Lattice3D, State::LatticePoint(p)) => {
            let mut entries = Vec::with_capacity(6);
            for axis in 0..3 {
                for delta in [-1i64, 1] {
                    let mut q = *p;
                    q[axis] += delta;
                    entries.push((State::LatticePoint(q), 1.0 / 6.0));
                }
            }
            entries
        }
        _ => unreachable!("validate_state guarantees matching variants"),
    };
    Ok(TransitionRow { entries })
}

/// Exact Green's function `G(x, y) = sum_n P^n(x, y)` where a closed form
/// exists; `None` for the lattice (use [`green_mc`] there).
///
/// Closed forms, with `F` the one-step first-passage probability:
/// - tree: `G(x, y) = F^dist(x,y) * (d-1)/(d-2)`,
/// - line: `G(x, y) = 1/(p-q)` for `y >= x` and `(q/p)^(x-y)/(p-q)` below.
pub fn green_exact(chain: &ChainModel, x: &State, y: &State) -> Result<Option<f64>> {
    chain.validate_state(x)?;
    chain.validate_state(y)?;
    Ok(match (chain.kind, x, y) {
        (ChainKind::RegularTree { degree }, _, _) => {
            let d = degree as f64;
            let f = 1.0 / (d - 1.0);
            let dist = distance(chain, x, y)? as i32;
            Some(f.powi(dist) * (d - 1.0) / (d - 2.0))
        }
        (ChainKind::DriftedLine { right_prob }, State::LinePoint(a), State::LinePoint(b)) => {
            let p = right_prob;
            let q = 1.0 - p;
            let base = 1.0 / (p - q);
            if b >= a {
                Some(base)
            } else {
                Some((q / p).powi((a - b) as i32) * base)
            }
        }
        (ChainKind::Lattice3D, _, _) => None,
        _ => unreachable!("validate_state guarantees matching variants"),
    })
}

/// Monte-Carlo Green's function: the mean number of visits to `y` by time
/// `horizon` over independent walks started at `x` (the visit at time 0
/// counts). Returns the estimate and its standard error.
///
/// The truncation bias is `sum_{n > horizon} P^n(x, y)`, which decays
/// geometrically on the tree and line and like `n^(-1/2)` in aggregate on
/// the lattice; the default horizons (200, and 10^4 for the lattice) keep it
/// well below the Monte-Carlo error at 10^5 walks.
pub fn green_mc(
    chain: &ChainModel,
    x: &State,
    y: &State,
    walks: u64,
    horizon: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    chain.validate_state(x)?;
    chain.validate_state(y)?;
    if walks < 2 {
        return Err(Error::Config("green_mc needs at least 2 walks".into()));
    }
    let mut visit_counts = Vec::with_capacity(walks as usize);
    for _ in 0..walks {
        let mut walker = Walker::new(chain, x.clone());
        let mut visits = u64::from(walker.matches(y));
        for _ in 0..horizon {
            walker.step(rng);
            visits += u64::from(walker.matches(y));
        }
        visit_counts.push(visits as f64);
    }
    Ok(stats::mean_and_se(&visit_counts))
}

/// Spectral radius of the transition operator on `l^2`:
/// `2 sqrt(d-1)/d` on the tree, `2 sqrt(pq)` on the drifted line, and `1` on
/// the (amenable) lattice.
pub fn spectral_radius(chain: &ChainModel) -> f64 {
    match chain.kind {
        ChainKind::RegularTree { degree } => {
            let d = degree as f64;
            2.0 * (d - 1.0).sqrt() / d
        }
        ChainKind::DriftedLine { right_prob } => {
            2.0 * (right_prob * (1.0 - right_prob)).sqrt()
        }
        ChainKind::Lattice3D => 1.0,
    }
}

/// Simulates one walk for `steps` steps and returns the full trajectory
/// (`steps + 1` states, starting with `start`).
///
/// Tree trajectories materialize a word per step; for long walks where only
/// the endpoint matters, prefer [`Walker`] directly.
pub fn simulate_walk(
    chain: &ChainModel,
    start: &State,
    steps: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<State>> {
    chain.validate_state(start)?;
    let mut walker = Walker::new(chain, start.clone());
    let mut path = Vec::with_capacity(steps as usize + 1);
    path.push(walker.state());
    for _ in 0..steps {
        walker.step(rng);
        path.push(walker.state());
    }
    Ok(path)
}

/// In-place single-particle walker. Steps are O(1) on every chain (tree
/// words are mutated by push/pop rather than reallocated).
pub(crate) struct Walker {
    kind: ChainKind,
    word: Vec<u8>,
    line: i64,
    lattice: [i64; 3],
}

impl Walker {
    pub(crate) fn new(chain: &ChainModel, start: State) -> Self {
        let mut w = Walker {
            kind: chain.kind,
            word: Vec::new(),
            line: 0,
            lattice: [0, 0, 0],
        };
        match start {
            State::TreeWord(word) => w.word = word,
            State::LinePoint(x) => w.line = x,
            State::LatticePoint(p) => w.lattice = p,
        }
        w
    }

    pub(crate) fn step(&mut self, rng: &mut ChaCha8Rng) {
        match self.kind {
            ChainKind::RegularTree { degree } => {
                if self.word.is_empty() {
                    self.word.push(rng.random_range(0..degree) as u8);
                } else {
                    // Neighbor 0 is the parent, neighbors 1..d the children.
                    let pick = rng.random_range(0..degree);
                    if pick == 0 {
                        self.word.pop();
                    } else {
                        self.word.push((pick - 1) as u8);
                    }
                }
            }
            ChainKind::DriftedLine { right_prob } => {
                if rng.random_bool(right_prob) {
                    self.line += 1;
                } else {
                    self.line -= 1;
                }
            }
            ChainKind::Lattice3D => {
                let pick = rng.random_range(0..6u32);
                let delta = if pick % 2 == 0 { -1 } else { 1 };
                self.lattice[(pick / 2) as usize] += delta;
            }
        }
    }

    pub(crate) fn word(&self) -> &[u8] {
        &self.word
    }

    pub(crate) fn line_position(&self) -> i64 {
        self.line
    }

    fn matches(&self, y: &State) -> bool {
        match (self.kind, y) {
            (ChainKind::RegularTree { .. }, State::TreeWord(w)) => self.word == *w,
            (ChainKind::DriftedLine { .. }, State::LinePoint(x)) => self.line == *x,
            (ChainKind::Lattice3D, State::LatticePoint(p)) => self.lattice == *p,
            _ => false,
        }
    }

    fn state(&self) -> State {
        match self.kind {
            ChainKind::RegularTree { .. } => State::TreeWord(self.word.clone()),
            ChainKind::DriftedLine { .. } => State::LinePoint(self.line),
            ChainKind::Lattice3D => State::LatticePoint(self.lattice),
        }
    }
}
