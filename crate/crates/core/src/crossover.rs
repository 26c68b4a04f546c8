//! Kernel-growing crossover.
//!
//! A child is grown one piece at a time from a random seed piece. Each step
//! adds a seam leaving the kernel, preferring (1) a relation both parents
//! share, then (2) a best-buddy relation found in either parent, then (3) the
//! cheapest seam overall. Parents are only consulted through their relation
//! sets, so where a segment sits in a parent, or how it is turned, does not
//! matter.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;

use crate::compat::CompatibilityTable;
use crate::model::{Chromosome, EdgeLabel, PieceEdge, Placement, PuzzleSpec, PuzzleType, Relation, Side};

const EMPTY: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

/// Which rule selected a seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Shared,
    BestBuddy,
    Greedy,
    Mutation,
}

/// A seam leaving the kernel: `relation.first` belongs to a placed piece,
/// `relation.second` to the piece that would go into `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEdge {
    pub relation: Relation,
    pub target: (i32, i32),
    pub placement: Placement,
}

/// Relation set of a parent, as a lookup from each labeled edge to the edge
/// it abuts. For two-sided puzzles both readings of every seam are stored.
#[derive(Debug, Clone)]
pub struct ParentView {
    partner: Vec<u32>,
}

impl ParentView {
    pub fn new(chromosome: &Chromosome, label_count: usize) -> ParentView {
        let mut partner = vec![NONE; chromosome.len() * label_count];
        for rel in chromosome.adjacencies() {
            let mut link = |r: Relation| {
                let a = r.first.slot(label_count);
                let b = r.second.slot(label_count);
                partner[a] = b as u32;
                partner[b] = a as u32;
            };
            link(rel);
            if label_count == 8 {
                link(rel.flipped());
            }
        }
        ParentView { partner }
    }

    /// The edge abutting `slot` in this parent, if any.
    #[inline]
    pub fn partner(&self, slot: usize) -> Option<usize> {
        let p = self.partner[slot];
        (p != NONE).then_some(p as usize)
    }
}

/// The partial assembly grown during crossover, on an unbounded plane with
/// the seed at the origin.
#[derive(Debug, Clone)]
pub struct Kernel {
    puzzle_type: PuzzleType,
    rows: i32,
    cols: i32,
    labels: usize,
    dim: i32,
    cells: Vec<u32>,
    position: Vec<(i32, i32)>,
    placement: Vec<Option<Placement>>,
    used: Vec<bool>,
    bbox: (i32, i32, i32, i32),
    placed: usize,
}

impl Kernel {
    /// Empty kernel for a puzzle of `spec`'s shape.
    pub fn new(spec: &PuzzleSpec) -> Kernel {
        let long = spec.rows.max(spec.cols) as i32;
        let dim = 2 * long + 1;
        let n = spec.piece_count();
        Kernel {
            puzzle_type: spec.puzzle_type,
            rows: spec.rows as i32,
            cols: spec.cols as i32,
            labels: spec.label_count(),
            dim,
            cells: vec![EMPTY; (dim * dim) as usize],
            position: vec![(0, 0); n],
            placement: vec![None; n],
            used: vec![false; n * spec.label_count()],
            bbox: (0, -1, 0, -1),
            placed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.placed
    }

    pub fn is_empty(&self) -> bool {
        self.placed == 0
    }

    /// `(min_row, max_row, min_col, max_col)` of the placed cells.
    pub fn bounding_box(&self) -> (i32, i32, i32, i32) {
        self.bbox
    }

    #[inline]
    fn index(&self, (r, c): (i32, i32)) -> Option<usize> {
        let h = self.dim / 2;
        let (gr, gc) = (r + h, c + h);
        (gr >= 0 && gc >= 0 && gr < self.dim && gc < self.dim).then(|| (gr * self.dim + gc) as usize)
    }

    /// Piece occupying a cell.
    #[inline]
    pub fn at(&self, cell: (i32, i32)) -> Option<usize> {
        let i = self.index(cell)?;
        let p = self.cells[i];
        (p != EMPTY).then_some(p as usize)
    }

    #[inline]
    pub fn is_placed(&self, piece: usize) -> bool {
        self.placement[piece].is_some()
    }

    pub fn placement_of(&self, piece: usize) -> Option<(Placement, (i32, i32))> {
        self.placement[piece].map(|p| (p, self.position[piece]))
    }

    #[inline]
    pub fn is_used(&self, edge: PieceEdge) -> bool {
        self.used[edge.slot(self.labels)]
    }

    /// Whether the bounding box would still fit the frame with `cell` added.
    /// Rotatable puzzles may settle on either orientation: at most one axis
    /// may grow past the short dimension, and that axis is then capped at the
    /// long one.
    #[inline]
    pub fn fits(&self, (r, c): (i32, i32)) -> bool {
        let (r0, r1, c0, c1) = self.bbox;
        let h = r1.max(r) - r0.min(r) + 1;
        let w = c1.max(c) - c0.min(c) + 1;
        if self.puzzle_type.rotatable() {
            let short = self.rows.min(self.cols);
            let long = self.rows.max(self.cols);
            (h <= long && w <= short) || (h <= short && w <= long)
        } else {
            h <= self.rows && w <= self.cols
        }
    }

    /// Full check of a candidate against every constraint: the piece is
    /// unplaced, the target is an empty cell inside the frame, the candidate
    /// matches the kernel geometry, and every seam the placement creates
    /// uses fresh edges whose other-face counterparts are also unused.
    pub fn feasible(&self, cand: &CandidateEdge) -> bool {
        let rel = cand.relation;
        let p = cand.placement;
        if self.is_empty() {
            return false;
        }
        if p.piece != rel.second.piece || self.is_placed(p.piece) || !p.is_legal_for(self.puzzle_type) {
            return false;
        }
        if self.at(cand.target).is_some() || self.index(cand.target).is_none() || !self.fits(cand.target) {
            return false;
        }
        let Some((anchor, (ar, ac))) = self.placement_of(rel.first.piece) else {
            return false;
        };
        let Some(side) = anchor.side_of(rel.first.label) else {
            return false;
        };
        let (dr, dc) = side.offset();
        if (ar + dr, ac + dc) != cand.target || p.side_of(rel.second.label) != Some(side.opposite()) {
            return false;
        }
        let fresh = |e: PieceEdge| {
            !self.is_used(e) && !(self.puzzle_type.two_sided() && self.is_used(e.flip_counterpart()))
        };
        for s in Side::ALL {
            let (dr, dc) = s.offset();
            let Some(q) = self.at((cand.target.0 + dr, cand.target.1 + dc)) else {
                continue;
            };
            let neighbor = self.placement[q].expect("occupied cell has a placement");
            let theirs = PieceEdge::new(q, neighbor.label_at(s.opposite()));
            let ours = PieceEdge::new(p.piece, p.label_at(s));
            if !fresh(theirs) || !fresh(ours) {
                return false;
            }
        }
        true
    }

    /// Places a piece, marking the edges of every seam it creates as used.
    /// Returns false (and changes nothing) if the cell is taken or the piece
    /// is already placed.
    pub fn place(&mut self, cell: (i32, i32), placement: Placement) -> bool {
        let Some(i) = self.index(cell) else { return false };
        if self.cells[i] != EMPTY || self.is_placed(placement.piece) {
            return false;
        }
        self.cells[i] = placement.piece as u32;
        self.position[placement.piece] = cell;
        self.placement[placement.piece] = Some(placement);
        let (r0, r1, c0, c1) = self.bbox;
        self.bbox = if self.placed == 0 {
            (cell.0, cell.0, cell.1, cell.1)
        } else {
            (r0.min(cell.0), r1.max(cell.0), c0.min(cell.1), c1.max(cell.1))
        };
        self.placed += 1;
        for s in Side::ALL {
            let (dr, dc) = s.offset();
            if let Some(q) = self.at((cell.0 + dr, cell.1 + dc)) {
                let neighbor = self.placement[q].expect("occupied cell has a placement");
                let a = PieceEdge::new(placement.piece, placement.label_at(s)).slot(self.labels);
                let b = PieceEdge::new(q, neighbor.label_at(s.opposite())).slot(self.labels);
                self.used[a] = true;
                self.used[b] = true;
            }
        }
        true
    }

    /// Normalizes the kernel to a grid. Panics unless the kernel is a full
    /// rectangle.
    pub fn into_chromosome(self) -> Chromosome {
        let (r0, r1, c0, c1) = self.bbox;
        let rows = (r1 - r0 + 1) as usize;
        let cols = (c1 - c0 + 1) as usize;
        assert_eq!(rows * cols, self.placed, "kernel is not a full rectangle");
        let mut cells = vec![Placement::upright(0); rows * cols];
        for (piece, p) in self.placement.iter().enumerate() {
            if let Some(p) = p {
                let (r, c) = self.position[piece];
                cells[(r - r0) as usize * cols + (c - c0) as usize] = *p;
            }
        }
        Chromosome::new(rows, cols, cells)
    }
}

#[derive(Debug, Clone, Copy)]
struct Exposed {
    side: u8,
    slot: u32,
    target: (i32, i32),
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    cost: f64,
    partner: u32,
    edge: u32,
    rank: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.partner.cmp(&other.partner))
            .then(self.edge.cmp(&other.edge))
    }
}

const SCANNED: u32 = u32::MAX;

struct Growth<'a, R: Rng> {
    table: &'a CompatibilityTable,
    parents: [&'a ParentView; 2],
    rng: &'a mut R,
    mutation_rate: f64,
    labels: usize,
    kernel: Kernel,
    unplaced: Vec<u32>,
    unplaced_at: Vec<u32>,
    exposed: Vec<Exposed>,
    open: Vec<u32>,
    shared: Vec<(u32, u32)>,
    buddies: Vec<(u32, u32)>,
    heap: BinaryHeap<Reverse<HeapEntry>>,
    trace: Option<&'a mut Vec<(Phase, Relation)>>,
}

impl<'a, R: Rng> Growth<'a, R> {
    #[inline]
    fn edge_open(&self, e: u32) -> bool {
        let x = self.exposed[e as usize];
        self.kernel.at(x.target).is_none() && self.kernel.fits(x.target)
    }

    #[inline]
    fn piece_free(&self, slot: u32) -> bool {
        !self.kernel.is_placed(slot as usize / self.labels)
    }

    fn legal_label(&self, label: EdgeLabel, side: Side) -> bool {
        let ty = self.table.puzzle_type();
        ty != PuzzleType::Type1 || label.index() == side.index()
    }

    fn place(&mut self, edge: u32, partner: u32, phase: Phase) {
        let x = self.exposed[edge as usize];
        let side = Side::from_index(x.side as usize);
        let theirs = PieceEdge::from_slot(partner as usize, self.labels);
        let placement = Placement::showing(theirs.piece, theirs.label, side.opposite());
        let relation = Relation::new(PieceEdge::from_slot(x.slot as usize, self.labels), theirs);
        debug_assert!(self.kernel.feasible(&CandidateEdge {
            relation,
            target: x.target,
            placement,
        }));
        if let Some(t) = self.trace.as_deref_mut() {
            t.push((phase, relation));
        }
        self.add(x.target, placement);
    }

    fn add(&mut self, cell: (i32, i32), placement: Placement) {
        let placed = self.kernel.place(cell, placement);
        debug_assert!(placed);
        let piece = placement.piece;
        let at = self.unplaced_at[piece] as usize;
        let last = *self.unplaced.last().unwrap();
        self.unplaced.swap_remove(at);
        if at < self.unplaced.len() {
            self.unplaced_at[last as usize] = at as u32;
        }
        for side in Side::ALL {
            let (dr, dc) = side.offset();
            let target = (cell.0 + dr, cell.1 + dc);
            if self.kernel.at(target).is_some() || !self.kernel.fits(target) {
                continue;
            }
            let slot = PieceEdge::new(piece, placement.label_at(side)).slot(self.labels) as u32;
            let e = self.exposed.len() as u32;
            self.exposed.push(Exposed {
                side: side.index() as u8,
                slot,
                target,
            });
            self.open.push(e);
            let p1 = self.parents[0].partner(slot as usize);
            let p2 = self.parents[1].partner(slot as usize);
            if let (Some(a), Some(b)) = (p1, p2) {
                if a == b && self.piece_free(a as u32) {
                    self.shared.push((e, a as u32));
                }
            }
            for p in [p1, p2].into_iter().flatten() {
                if self.piece_free(p as u32) && self.table.is_best_buddy_slots(slot as usize, p) {
                    self.buddies.push((e, p as u32));
                }
            }
            if let Some(entry) = self.next_entry(e, 0) {
                self.heap.push(Reverse(entry));
            }
        }
    }

    /// Cheapest unplaced partner of an exposed edge, starting the ranked
    /// list at `rank`, or from a full scan once the list runs out.
    fn next_entry(&self, edge: u32, mut rank: u32) -> Option<HeapEntry> {
        let slot = self.exposed[edge as usize].slot as usize;
        if rank != SCANNED {
            let list = self.table.ranked(slot);
            while (rank as usize) < list.len() {
                let p = list[rank as usize];
                if self.piece_free(p) {
                    return Some(HeapEntry {
                        cost: self.table.seam_cost_slots(slot, p as usize),
                        partner: p,
                        edge,
                        rank,
                    });
                }
                rank += 1;
            }
        }
        let x = self.exposed[edge as usize];
        let side = Side::from_index(x.side as usize).opposite();
        let mut best: Option<HeapEntry> = None;
        for &piece in &self.unplaced {
            for label in EdgeLabel::all(self.labels) {
                if !self.legal_label(label, side) {
                    continue;
                }
                let p = PieceEdge::new(piece as usize, label).slot(self.labels) as u32;
                let entry = HeapEntry {
                    cost: self.table.seam_cost_slots(slot, p as usize),
                    partner: p,
                    edge,
                    rank: SCANNED,
                };
                if best.is_none_or(|b| entry < b) {
                    best = Some(entry);
                }
            }
        }
        best
    }

    fn pick(&mut self, list: fn(&mut Self) -> &mut Vec<(u32, u32)>) -> Option<(u32, u32)> {
        loop {
            let len = list(self).len();
            if len == 0 {
                return None;
            }
            let i = self.rng.gen_range(0..len);
            let (e, p) = list(self)[i];
            if self.edge_open(e) && self.piece_free(p) {
                return Some((e, p));
            }
            list(self).swap_remove(i);
        }
    }

    fn mutate(&mut self) -> Option<(u32, u32)> {
        let e = loop {
            if self.open.is_empty() {
                return None;
            }
            let i = self.rng.gen_range(0..self.open.len());
            let e = self.open[i];
            if self.edge_open(e) {
                break e;
            }
            self.open.swap_remove(i);
        };
        let piece = self.unplaced[self.rng.gen_range(0..self.unplaced.len())] as usize;
        let side = Side::from_index(self.exposed[e as usize].side as usize).opposite();
        let label = if self.table.puzzle_type() == PuzzleType::Type1 {
            EdgeLabel::from_index(side.index())
        } else {
            EdgeLabel::from_index(self.rng.gen_range(0..self.labels))
        };
        Some((e, PieceEdge::new(piece, label).slot(self.labels) as u32))
    }

    fn greedy(&mut self) -> Option<(u32, u32)> {
        while let Some(Reverse(entry)) = self.heap.pop() {
            if !self.edge_open(entry.edge) {
                continue;
            }
            if self.piece_free(entry.partner) {
                return Some((entry.edge, entry.partner));
            }
            let next = if entry.rank == SCANNED { SCANNED } else { entry.rank + 1 };
            if let Some(e) = self.next_entry(entry.edge, next) {
                self.heap.push(Reverse(e));
            }
        }
        None
    }

    fn step(&mut self) {
        if let Some((e, p)) = self.pick(|g| &mut g.shared) {
            return self.place(e, p, Phase::Shared);
        }
        if let Some((e, p)) = self.pick(|g| &mut g.buddies) {
            return self.place(e, p, Phase::BestBuddy);
        }
        if self.mutation_rate > 0.0 && self.rng.gen_bool(self.mutation_rate) {
            if let Some((e, p)) = self.mutate() {
                return self.place(e, p, Phase::Mutation);
            }
        }
        let (e, p) = self.greedy().expect("an open kernel edge always exists while pieces remain");
        self.place(e, p, Phase::Greedy);
    }
}

/// Produces one child from two parents. `mutation_rate` is the chance that
/// a greedy step instead joins a random unplaced piece, in a random legal
/// pose, to a random open kernel edge.
pub fn crossover<R: Rng>(
    parent1: &ParentView,
    parent2: &ParentView,
    table: &CompatibilityTable,
    spec: &PuzzleSpec,
    mutation_rate: f64,
    rng: &mut R,
) -> Chromosome {
    grow(parent1, parent2, table, spec, mutation_rate, rng, None)
}

/// [`crossover`] that also records the phase and relation of every seam it
/// selects, in order.
pub fn crossover_traced<R: Rng>(
    parent1: &ParentView,
    parent2: &ParentView,
    table: &CompatibilityTable,
    spec: &PuzzleSpec,
    mutation_rate: f64,
    rng: &mut R,
    trace: &mut Vec<(Phase, Relation)>,
) -> Chromosome {
    grow(parent1, parent2, table, spec, mutation_rate, rng, Some(trace))
}

fn grow<R: Rng>(
    parent1: &ParentView,
    parent2: &ParentView,
    table: &CompatibilityTable,
    spec: &PuzzleSpec,
    mutation_rate: f64,
    rng: &mut R,
    trace: Option<&mut Vec<(Phase, Relation)>>,
) -> Chromosome {
    let n = spec.piece_count();
    assert_eq!(table.piece_count(), n, "table and spec disagree on the piece count");
    let mut g = Growth {
        table,
        parents: [parent1, parent2],
        rng,
        mutation_rate,
        labels: spec.label_count(),
        kernel: Kernel::new(spec),
        unplaced: (0..n as u32).collect(),
        unplaced_at: (0..n as u32).collect(),
        exposed: Vec::with_capacity(3 * n),
        open: Vec::with_capacity(3 * n),
        shared: Vec::new(),
        buddies: Vec::new(),
        heap: BinaryHeap::with_capacity(3 * n),
        trace,
    };
    let seed = g.rng.gen_range(0..n);
    g.add((0, 0), Placement::upright(seed));
    while !g.unplaced.is_empty() {
        g.step();
    }
    g.kernel.into_chromosome()
}

/// Relation set of a parent; alias of [`crate::model::relation_set`].
pub fn parent_relation_set(parent: &Chromosome) -> HashSet<Relation> {
    crate::model::relation_set(parent)
}
