//! Interned state spaces for the branching engine.
//!
//! The engine works on dense `u32` state ids rather than on [`State`]
//! values: interning happens once per newly reached state, and the per
//! generation hot loop touches only integer ids and fixed probability rows.
//! Each space reproduces the destination order of
//! [`crate::chains::transition_row`], which the unit tests pin down.
//!
//! Id 0 is always the origin of the space.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::chains::State;
use crate::error::{Error, Result};

use super::sampling::{multinomial_scatter, SamplingMode};

/// Id of the origin state in every space.
pub(crate) const ORIGIN_ID: u32 = 0;

const NONE: u32 = u32::MAX;

/// How many leading letters of a tree word are cached inline; bounds the
/// cylinder family depth the fast path can serve.
pub(crate) const PREFIX_CACHE: usize = 4;

/// Dense accumulator for the next generation's counts, drained in the
/// deterministic order in which states were first touched.
#[derive(Debug, Default)]
pub(crate) struct Accumulator {
    counts: Vec<u64>,
    touched: Vec<u32>,
}

impl Accumulator {
    pub(crate) fn add(&mut self, id: u32, n: u64) {
        debug_assert!(n > 0);
        let idx = id as usize;
        if idx >= self.counts.len() {
            self.counts.resize(idx + 1 + idx / 2, 0);
        }
        if self.counts[idx] == 0 {
            self.touched.push(id);
        }
        self.counts[idx] += n;
    }

    pub(crate) fn drain_into(&mut self, frontier: &mut Vec<(u32, u64)>) {
        frontier.clear();
        for &id in &self.touched {
            frontier.push((id, self.counts[id as usize]));
            self.counts[id as usize] = 0;
        }
        self.touched.clear();
    }
}

/// A chain's state space with dense interned ids.
#[derive(Debug)]
pub(crate) enum Space {
    Tree(TreeSpace),
    Line(LineSpace),
    Lattice(LatticeSpace),
    Depth(DepthSpace),
}

impl Space {
    pub(crate) fn for_chain(chain: &crate::chains::ChainModel) -> Space {
        match chain.kind() {
            crate::chains::ChainKind::RegularTree { degree } => Space::Tree(TreeSpace::new(degree)),
            crate::chains::ChainKind::DriftedLine { right_prob } => {
                Space::Line(LineSpace::new(right_prob))
            }
            crate::chains::ChainKind::Lattice3D => Space::Lattice(LatticeSpace::new()),
        }
    }

    /// The autonomous depth process of the tree walk: distance from the root
    /// moves down with probability `1/degree`, up otherwise, and reflects at
    /// zero. Occupancy of depth 0 has the same law as root occupancy of the
    /// full tree process, which is what the phase-transition experiment
    /// needs at population sizes no materialized tree could hold.
    pub(crate) fn depth_projection(degree: u32) -> Space {
        Space::Depth(DepthSpace::new(degree))
    }

    /// Number of ids handed out so far (ids are `0..node_bound`).
    pub(crate) fn node_bound(&self) -> usize {
        match self {
            Space::Tree(s) => s.nodes.len(),
            Space::Line(s) => s.positions.len(),
            Space::Lattice(s) => s.points.len(),
            Space::Depth(s) => s.bound as usize,
        }
    }

    /// Intern a state that has already been validated for the chain.
    pub(crate) fn intern(&mut self, state: &State) -> Result<u32> {
        match (self, state) {
            (Space::Tree(s), State::TreeWord(w)) => Ok(s.intern_word(w)),
            (Space::Line(s), State::LinePoint(x)) => Ok(s.intern_pos(*x)),
            (Space::Lattice(s), State::LatticePoint(p)) => Ok(s.intern_point(*p)),
            (Space::Depth(s), State::LinePoint(x)) if *x >= 0 => Ok(s.intern_depth(*x as u32)),
            (_, other) => Err(Error::InvalidState(format!(
                "state {other:?} does not belong to this space"
            ))),
        }
    }

    /// Materialize the id back into a public state.
    pub(crate) fn state_of(&self, id: u32) -> State {
        match self {
            Space::Tree(s) => State::TreeWord(s.word_of(id)),
            Space::Line(s) => State::LinePoint(s.positions[id as usize]),
            Space::Lattice(s) => State::LatticePoint(s.points[id as usize]),
            // The depth projection is internal; its "states" are depths.
            Space::Depth(_) => State::LinePoint(id as i64),
        }
    }

    /// Slots of the cylinder family of depth `max_depth` that the state
    /// contributes mass to, in ascending order. At most one slot per family
    /// level on the tree, exactly one on the line and lattice, none for the
    /// internal depth projection.
    pub(crate) fn cylinder_slots(
        &self,
        id: u32,
        max_depth: u32,
        out: &mut [u16; PREFIX_CACHE],
    ) -> usize {
        if max_depth == 0 {
            return 0;
        }
        match self {
            Space::Tree(s) => s.cylinder_slots(id, max_depth, out),
            Space::Line(s) => {
                out[0] = if s.positions[id as usize] > 0 { 0 } else { 1 };
                1
            }
            Space::Lattice(_) => {
                out[0] = 0;
                1
            }
            Space::Depth(_) => 0,
        }
    }

    /// Scatter `total` children of the particles at `id` across the state's
    /// transition row and accumulate the results.
    pub(crate) fn step_state(
        &mut self,
        id: u32,
        total: u64,
        mode: SamplingMode,
        rng: &mut ChaCha8Rng,
        counts: &mut Vec<u64>,
        acc: &mut Accumulator,
    ) {
        match self {
            Space::Tree(s) => {
                multinomial_scatter(total, &s.row, mode, rng, counts);
                s.commit(id, counts, acc);
            }
            Space::Line(s) => {
                multinomial_scatter(total, &s.row, mode, rng, counts);
                s.commit(id, counts, acc);
            }
            Space::Lattice(s) => {
                multinomial_scatter(total, &s.row, mode, rng, counts);
                s.commit(id, counts, acc);
            }
            Space::Depth(s) => {
                let row: &[f64] = if id == 0 { &s.row_zero } else { &s.row };
                multinomial_scatter(total, row, mode, rng, counts);
                s.commit(id, counts, acc);
            }
        }
    }
}

/// Trie arena over tree address words.
#[derive(Debug)]
pub(crate) struct TreeSpace {
    degree: u32,
    nodes: Vec<TreeNode>,
    /// Child ids, `degree` slots per node: slot `j` of the root is the child
    /// with first letter `j`; slot `j` of an inner node is the child
    /// extending the word by letter `j` (the last slot stays unused).
    children: Vec<u32>,
    row: Vec<f64>,
}

#[derive(Debug)]
struct TreeNode {
    parent: u32,
    depth: u32,
    letter: u8,
    /// First [`PREFIX_CACHE`] letters of the word, `0xFF`-padded.
    prefix: [u8; PREFIX_CACHE],
}

impl TreeSpace {
    fn new(degree: u32) -> TreeSpace {
        let d = degree as usize;
        TreeSpace {
            degree,
            nodes: vec![TreeNode {
                parent: NONE,
                depth: 0,
                letter: 0xFF,
                prefix: [0xFF; PREFIX_CACHE],
            }],
            children: vec![NONE; d],
            row: vec![1.0 / degree as f64; d],
        }
    }

    fn child_of(&mut self, id: u32, letter: u8) -> u32 {
        let slot = id as usize * self.degree as usize + letter as usize;
        let existing = self.children[slot];
        if existing != NONE {
            return existing;
        }
        let parent = &self.nodes[id as usize];
        let depth = parent.depth + 1;
        let mut prefix = parent.prefix;
        if (parent.depth as usize) < PREFIX_CACHE {
            prefix[parent.depth as usize] = letter;
        }
        let new_id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            parent: id,
            depth,
            letter,
            prefix,
        });
        self.children
            .resize(self.children.len() + self.degree as usize, NONE);
        self.children[slot] = new_id;
        new_id
    }

    fn intern_word(&mut self, word: &[u8]) -> u32 {
        let mut cur = ORIGIN_ID;
        for &letter in word {
            cur = self.child_of(cur, letter);
        }
        cur
    }

    fn word_of(&self, id: u32) -> Vec<u8> {
        let mut letters = Vec::with_capacity(self.nodes[id as usize].depth as usize);
        let mut cur = id;
        while cur != ORIGIN_ID {
            let node = &self.nodes[cur as usize];
            letters.push(node.letter);
            cur = node.parent;
        }
        letters.reverse();
        letters
    }

    fn commit(&mut self, id: u32, counts: &[u64], acc: &mut Accumulator) {
        if id == ORIGIN_ID {
            for (j, &n) in counts.iter().enumerate() {
                if n > 0 {
                    let child = self.child_of(id, j as u8);
                    acc.add(child, n);
                }
            }
        } else {
            if counts[0] > 0 {
                acc.add(self.nodes[id as usize].parent, counts[0]);
            }
            for (j, &n) in counts.iter().enumerate().skip(1) {
                if n > 0 {
                    let child = self.child_of(id, (j - 1) as u8);
                    acc.add(child, n);
                }
            }
        }
    }

    /// Family layout: all cylinders of depth 1, then depth 2, ... each level
    /// in lexicographic word order; the slot index within a level is the
    /// mixed-radix value of the word (first letter base `degree`, the rest
    /// base `degree - 1`).
    fn cylinder_slots(&self, id: u32, max_depth: u32, out: &mut [u16; PREFIX_CACHE]) -> usize {
        let node = &self.nodes[id as usize];
        let levels = node.depth.min(max_depth) as usize;
        let dm1 = (self.degree - 1) as usize;
        let mut index = 0usize;
        let mut base = 0usize;
        let mut level_size = self.degree as usize;
        for (lvl, slot) in out.iter_mut().enumerate().take(levels) {
            index = index * dm1 + node.prefix[lvl] as usize;
            *slot = (base + index) as u16;
            base += level_size;
            level_size *= dm1;
        }
        levels
    }
}

/// Offset-table space over integer line positions, grown on demand.
#[derive(Debug)]
pub(crate) struct LineSpace {
    ids: Vec<u32>,
    min_pos: i64,
    positions: Vec<i64>,
    row: [f64; 2],
}

impl LineSpace {
    fn new(right_prob: f64) -> LineSpace {
        let mut space = LineSpace {
            ids: vec![NONE; 129],
            min_pos: -64,
            positions: Vec::new(),
            row: [1.0 - right_prob, right_prob],
        };
        let origin = space.intern_pos(0);
        debug_assert_eq!(origin, ORIGIN_ID);
        space
    }

    fn ensure_range(&mut self, x: i64) {
        if x >= self.min_pos && x < self.min_pos + self.ids.len() as i64 {
            return;
        }
        let old_len = self.ids.len() as i64;
        let new_min = self.min_pos.min(x - old_len);
        let new_max = (self.min_pos + old_len - 1).max(x + old_len);
        let new_len = (new_max - new_min + 1) as usize;
        let mut ids = vec![NONE; new_len];
        let shift = (self.min_pos - new_min) as usize;
        ids[shift..shift + self.ids.len()].copy_from_slice(&self.ids);
        self.ids = ids;
        self.min_pos = new_min;
    }

    fn intern_pos(&mut self, x: i64) -> u32 {
        self.ensure_range(x);
        let slot = (x - self.min_pos) as usize;
        if self.ids[slot] == NONE {
            let id = self.positions.len() as u32;
            self.positions.push(x);
            self.ids[slot] = id;
        }
        self.ids[slot]
    }

    fn commit(&mut self, id: u32, counts: &[u64], acc: &mut Accumulator) {
        let x = self.positions[id as usize];
        if counts[0] > 0 {
            let left = self.intern_pos(x - 1);
            acc.add(left, counts[0]);
        }
        if counts[1] > 0 {
            let right = self.intern_pos(x + 1);
            acc.add(right, counts[1]);
        }
    }
}

/// Hash-interned space over lattice points; the lattice runs in this crate
/// are small enough that hashing is not a bottleneck.
#[derive(Debug)]
pub(crate) struct LatticeSpace {
    ids: HashMap<[i64; 3], u32>,
    points: Vec<[i64; 3]>,
    row: [f64; 6],
}

impl LatticeSpace {
    fn new() -> LatticeSpace {
        let mut space = LatticeSpace {
            ids: HashMap::new(),
            points: Vec::new(),
            row: [1.0 / 6.0; 6],
        };
        let origin = space.intern_point([0, 0, 0]);
        debug_assert_eq!(origin, ORIGIN_ID);
        space
    }

    fn intern_point(&mut self, p: [i64; 3]) -> u32 {
        if let Some(&id) = self.ids.get(&p) {
            return id;
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.ids.insert(p, id);
        id
    }

    fn commit(&mut self, id: u32, counts: &[u64], acc: &mut Accumulator) {
        let p = self.points[id as usize];
        // Canonical order: -x, +x, -y, +y, -z, +z.
        for (j, &n) in counts.iter().enumerate() {
            if n > 0 {
                let mut q = p;
                let axis = j / 2;
                q[axis] += if j % 2 == 0 { -1 } else { 1 };
                let dest = self.intern_point(q);
                acc.add(dest, n);
            }
        }
    }
}

/// The depth birth-death chain of the regular tree (ids are depths).
#[derive(Debug)]
pub(crate) struct DepthSpace {
    bound: u32,
    row_zero: [f64; 1],
    row: [f64; 2],
}

impl DepthSpace {
    fn new(degree: u32) -> DepthSpace {
        let d = degree as f64;
        DepthSpace {
            bound: 1,
            row_zero: [1.0],
            row: [1.0 / d, (d - 1.0) / d],
        }
    }

    fn intern_depth(&mut self, depth: u32) -> u32 {
        self.bound = self.bound.max(depth + 1);
        depth
    }

    fn commit(&mut self, id: u32, counts: &[u64], acc: &mut Accumulator) {
        if id == 0 {
            if counts[0] > 0 {
                self.intern_depth(1);
                acc.add(1, counts[0]);
            }
        } else {
            if counts[0] > 0 {
                acc.add(id - 1, counts[0]);
            }
            if counts[1] > 0 {
                self.intern_depth(id + 1);
                acc.add(id + 1, counts[1]);
            }
        }
    }
}
