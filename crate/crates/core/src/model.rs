//! Domain types shared by every stage of the pipeline: puzzle specs, edge
//! labels, placements, relations and chromosomes.
//!
//! Geometry conventions used throughout the crate:
//!
//! * Sides of a grid cell are numbered clockwise from the top: 0 = top,
//!   1 = right, 2 = bottom, 3 = left.
//! * On the front face at rotation 0 the labels `a, b, c, d` sit on the top,
//!   right, bottom and left sides.
//! * The back face is seen after turning the piece over about its vertical
//!   axis. At rotation 0 it shows `a'` on top, `b'` on the left, `c'` at the
//!   bottom and `d'` on the right, so `x` and `x'` always name the same
//!   physical boundary.
//! * Rotations are counterclockwise quarter turns of the displayed face.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("puzzle dimensions must be positive (rows {rows}, cols {cols}, tile {tile})")]
    EmptySpec { rows: usize, cols: usize, tile: usize },
    #[error("unsupported puzzle type {0}; only types 1, 2 and 4 are solvable")]
    UnsupportedType(u8),
    #[error("global flip requested on a one-sided puzzle")]
    FlipOnOneSided,
    #[error("chromosome is {rows}x{cols} but the puzzle is {expected_rows}x{expected_cols}")]
    Dimensions {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("piece {0} is missing, duplicated or out of range")]
    NotBijective(usize),
    #[error("placement of piece {0} is illegal for this puzzle type")]
    IllegalPlacement(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PuzzleType {
    /// Unknown location only.
    Type1,
    /// Unknown location and orientation.
    Type2,
    /// Two-sided pieces: unknown location, orientation and face.
    Type4,
}

impl PuzzleType {
    /// Number of labeled edges per piece.
    pub fn label_count(self) -> usize {
        match self {
            PuzzleType::Type4 => 8,
            _ => 4,
        }
    }

    pub fn rotatable(self) -> bool {
        !matches!(self, PuzzleType::Type1)
    }

    pub fn two_sided(self) -> bool {
        matches!(self, PuzzleType::Type4)
    }

    pub fn number(self) -> u8 {
        match self {
            PuzzleType::Type1 => 1,
            PuzzleType::Type2 => 2,
            PuzzleType::Type4 => 4,
        }
    }
}

impl TryFrom<u8> for PuzzleType {
    type Error = ModelError;

    fn try_from(v: u8) -> Result<Self, ModelError> {
        match v {
            1 => Ok(PuzzleType::Type1),
            2 => Ok(PuzzleType::Type2),
            4 => Ok(PuzzleType::Type4),
            other => Err(ModelError::UnsupportedType(other)),
        }
    }
}

impl From<PuzzleType> for u8 {
    fn from(t: PuzzleType) -> u8 {
        t.number()
    }
}

impl fmt::Display for PuzzleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Type {}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PuzzleSpec {
    pub rows: usize,
    pub cols: usize,
    pub tile_size: usize,
    pub puzzle_type: PuzzleType,
}

impl PuzzleSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        tile_size: usize,
        puzzle_type: PuzzleType,
    ) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 || tile_size == 0 {
            return Err(ModelError::EmptySpec {
                rows,
                cols,
                tile: tile_size,
            });
        }
        Ok(PuzzleSpec {
            rows,
            cols,
            tile_size,
            puzzle_type,
        })
    }

    pub fn piece_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn label_count(&self) -> usize {
        self.puzzle_type.label_count()
    }

    /// Number of physical seams in a complete assembly.
    pub fn seam_count(&self) -> usize {
        self.rows * (self.cols - 1) + self.cols * (self.rows - 1)
    }

    /// Legal global transforms for this puzzle type.
    pub fn transforms(&self) -> Vec<Dihedral> {
        let turns: &[u8] = if self.puzzle_type.rotatable() {
            &[0, 1, 2, 3]
        } else {
            &[0]
        };
        let flips: &[bool] = if self.puzzle_type.two_sided() {
            &[false, true]
        } else {
            &[false]
        };
        flips
            .iter()
            .flat_map(|&flip| turns.iter().map(move |&t| Dihedral::new(t, flip)))
            .collect()
    }
}

/// One of the eight labeled piece edges `a..d` and `a'..d'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeLabel(u8);

impl EdgeLabel {
    pub const A: EdgeLabel = EdgeLabel(0);
    pub const B: EdgeLabel = EdgeLabel(1);
    pub const C: EdgeLabel = EdgeLabel(2);
    pub const D: EdgeLabel = EdgeLabel(3);
    pub const A_PRIME: EdgeLabel = EdgeLabel(4);
    pub const B_PRIME: EdgeLabel = EdgeLabel(5);
    pub const C_PRIME: EdgeLabel = EdgeLabel(6);
    pub const D_PRIME: EdgeLabel = EdgeLabel(7);

    /// `index` in `0..8`: the unprimed labels first, then the primed ones.
    pub fn from_index(index: usize) -> EdgeLabel {
        assert!(index < 8, "edge label index {index} out of range");
        EdgeLabel(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_primed(self) -> bool {
        self.0 >= 4
    }

    /// Position of the label within its face, `a = 0 .. d = 3`.
    pub fn letter(self) -> u8 {
        self.0 % 4
    }

    /// The same physical boundary named from the other face.
    pub fn flip_counterpart(self) -> EdgeLabel {
        EdgeLabel(self.0 ^ 4)
    }

    pub fn face(self) -> Face {
        if self.is_primed() {
            Face::Back
        } else {
            Face::Front
        }
    }

    pub fn all(label_count: usize) -> impl Iterator<Item = EdgeLabel> {
        (0..label_count as u8).map(EdgeLabel)
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = (b'a' + self.letter()) as char;
        if self.is_primed() {
            write!(f, "{letter}'")
        } else {
            write!(f, "{letter}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Front,
    Back,
}

impl Face {
    pub fn flipped(self) -> Face {
        match self {
            Face::Front => Face::Back,
            Face::Back => Face::Front,
        }
    }
}

/// Counterclockwise quarter turns, always reduced mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rotation(u8);

impl Rotation {
    pub const ZERO: Rotation = Rotation(0);

    pub fn new(quarter_turns: i32) -> Rotation {
        Rotation(quarter_turns.rem_euclid(4) as u8)
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn degrees(self) -> u16 {
        self.0 as u16 * 90
    }

    pub fn from_degrees(deg: u16) -> Option<Rotation> {
        (deg.is_multiple_of(90) && deg < 360).then_some(Rotation((deg / 90) as u8))
    }

    pub fn inverse(self) -> Rotation {
        Rotation::new(-(self.0 as i32))
    }

    pub fn plus(self, quarter_turns: i32) -> Rotation {
        Rotation::new(self.0 as i32 + quarter_turns)
    }
}

/// A cell side, numbered clockwise from the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Top = 0,
    Right = 1,
    Bottom = 2,
    Left = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Right, Side::Bottom, Side::Left];

    pub fn from_index(i: usize) -> Side {
        Side::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Side {
        Side::from_index(self.index() + 2)
    }

    /// Grid offset `(drow, dcol)` of the neighbor across this side.
    pub fn offset(self) -> (i32, i32) {
        match self {
            Side::Top => (-1, 0),
            Side::Right => (0, 1),
            Side::Bottom => (1, 0),
            Side::Left => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Second piece is to the right of the first.
    Horizontal,
    /// Second piece is below the first.
    Vertical,
}

/// A piece in a cell: which piece (index into the bundle's piece list), its
/// rotation and the face shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub piece: usize,
    pub rotation: Rotation,
    pub face: Face,
}

impl Placement {
    pub fn new(piece: usize, rotation: Rotation, face: Face) -> Placement {
        Placement {
            piece,
            rotation,
            face,
        }
    }

    pub fn upright(piece: usize) -> Placement {
        Placement::new(piece, Rotation::ZERO, Face::Front)
    }

    /// Label displayed on the given side of the cell.
    pub fn label_at(&self, side: Side) -> EdgeLabel {
        let k = (side.index() + self.rotation.0 as usize) % 4;
        match self.face {
            Face::Front => EdgeLabel(k as u8),
            Face::Back => EdgeLabel(4 + ((4 - k) % 4) as u8),
        }
    }

    /// Side on which `label` is displayed, or `None` if it belongs to the
    /// hidden face.
    pub fn side_of(&self, label: EdgeLabel) -> Option<Side> {
        if label.face() != self.face {
            return None;
        }
        let l = label.letter() as i32;
        let k = self.rotation.0 as i32;
        let s = match self.face {
            Face::Front => l - k,
            Face::Back => -l - k,
        };
        Some(Side::from_index(s.rem_euclid(4) as usize))
    }

    /// The unique pose that shows `label` on `side`.
    pub fn showing(piece: usize, label: EdgeLabel, side: Side) -> Placement {
        let l = label.letter() as i32;
        let s = side.index() as i32;
        let (face, k) = if label.is_primed() {
            (Face::Back, -l - s)
        } else {
            (Face::Front, l - s)
        };
        Placement::new(piece, Rotation::new(k), face)
    }

    pub fn is_legal_for(&self, puzzle_type: PuzzleType) -> bool {
        (puzzle_type.rotatable() || self.rotation == Rotation::ZERO)
            && (puzzle_type.two_sided() || self.face == Face::Front)
    }
}

/// A labeled edge of a specific piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PieceEdge {
    pub piece: usize,
    pub label: EdgeLabel,
}

impl PieceEdge {
    pub fn new(piece: usize, label: EdgeLabel) -> PieceEdge {
        PieceEdge { piece, label }
    }

    /// Dense index `piece * label_count + label`.
    pub fn slot(&self, label_count: usize) -> usize {
        self.piece * label_count + self.label.index()
    }

    pub fn from_slot(slot: usize, label_count: usize) -> PieceEdge {
        PieceEdge::new(slot / label_count, EdgeLabel::from_index(slot % label_count))
    }

    pub fn flip_counterpart(&self) -> PieceEdge {
        PieceEdge::new(self.piece, self.label.flip_counterpart())
    }
}

impl fmt::Display for PieceEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}.{}", self.piece, self.label)
    }
}

/// "Edge `first.label` of `first.piece` abuts edge `second.label` of
/// `second.piece`", independent of where the pair sits or how it is turned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    pub first: PieceEdge,
    pub second: PieceEdge,
}

impl Relation {
    pub fn new(first: PieceEdge, second: PieceEdge) -> Relation {
        Relation { first, second }
    }

    pub fn reversed(&self) -> Relation {
        Relation::new(self.second, self.first)
    }

    /// The same physical seam read from the opposite face of the assembly.
    pub fn flipped(&self) -> Relation {
        Relation::new(self.first.flip_counterpart(), self.second.flip_counterpart())
    }

    /// Representative shared by every reading of the same physical seam:
    /// the lower piece first, and (for two-sided pieces) its label unprimed.
    pub fn canonical(&self) -> Relation {
        let mut r = if self.first.piece <= self.second.piece {
            *self
        } else {
            self.reversed()
        };
        if r.first.label.is_primed() {
            r = r.flipped();
        }
        r
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.second)
    }
}

/// Relation realized by two adjacent placements; `first` is the left (or
/// upper) cell.
pub fn relation_of_adjacency(first: &Placement, second: &Placement, direction: Direction) -> Relation {
    let (s1, s2) = match direction {
        Direction::Horizontal => (Side::Right, Side::Left),
        Direction::Vertical => (Side::Bottom, Side::Top),
    };
    Relation::new(
        PieceEdge::new(first.piece, first.label_at(s1)),
        PieceEdge::new(second.piece, second.label_at(s2)),
    )
}

/// A global rotation (counterclockwise quarter turns) followed by an
/// optional mirror flip of the whole assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dihedral {
    pub quarter_turns: u8,
    pub flip: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        quarter_turns: 0,
        flip: false,
    };

    pub fn new(quarter_turns: u8, flip: bool) -> Dihedral {
        Dihedral {
            quarter_turns: quarter_turns % 4,
            flip,
        }
    }
}

/// A complete assembly: one placement per cell, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    rows: usize,
    cols: usize,
    cells: Vec<Placement>,
}

impl Chromosome {
    /// Panics if `cells.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, cells: Vec<Placement>) -> Chromosome {
        assert_eq!(cells.len(), rows * cols, "cell count does not match grid");
        Chromosome { rows, cols, cells }
    }

    /// Row-major identity assembly of pieces `0..rows*cols`, all upright.
    pub fn identity(rows: usize, cols: usize) -> Chromosome {
        Chromosome::new(rows, cols, (0..rows * cols).map(Placement::upright).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Placement] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> &Placement {
        &self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, p: Placement) {
        self.cells[row * self.cols + col] = p;
    }

    /// Every grid adjacency as a raw (left/upper first) relation.
    pub fn adjacencies(&self) -> impl Iterator<Item = Relation> + '_ {
        let horiz = (0..self.rows).flat_map(move |r| {
            (0..self.cols.saturating_sub(1)).map(move |c| {
                relation_of_adjacency(self.get(r, c), self.get(r, c + 1), Direction::Horizontal)
            })
        });
        let vert = (0..self.rows.saturating_sub(1)).flat_map(move |r| {
            (0..self.cols).map(move |c| {
                relation_of_adjacency(self.get(r, c), self.get(r + 1, c), Direction::Vertical)
            })
        });
        horiz.chain(vert)
    }

    /// Checks dimensions, bijection over `0..n` and placement legality in O(n).
    pub fn validate(&self, spec: &PuzzleSpec) -> Result<(), ModelError> {
        let dims_ok = (self.rows == spec.rows && self.cols == spec.cols)
            || (spec.puzzle_type.rotatable() && self.rows == spec.cols && self.cols == spec.rows);
        if !dims_ok {
            return Err(ModelError::Dimensions {
                rows: self.rows,
                cols: self.cols,
                expected_rows: spec.rows,
                expected_cols: spec.cols,
            });
        }
        let n = spec.piece_count();
        let mut seen = vec![false; n];
        for p in &self.cells {
            if p.piece >= n || seen[p.piece] {
                return Err(ModelError::NotBijective(p.piece));
            }
            seen[p.piece] = true;
            if !p.is_legal_for(spec.puzzle_type) {
                return Err(ModelError::IllegalPlacement(p.piece));
            }
        }
        Ok(())
    }

    fn rotated_ccw_once(&self) -> Chromosome {
        let (rows, cols) = (self.cols, self.rows);
        let mut cells = vec![Placement::upright(0); rows * cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.get(r, c);
                let (nr, nc) = (self.cols - 1 - c, r);
                cells[nr * cols + nc] = Placement::new(p.piece, p.rotation.plus(1), p.face);
            }
        }
        Chromosome { rows, cols, cells }
    }

    fn flipped(&self) -> Chromosome {
        let mut cells = self.cells.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.get(r, c);
                cells[r * self.cols + (self.cols - 1 - c)] =
                    Placement::new(p.piece, p.rotation.inverse(), p.face.flipped());
            }
        }
        Chromosome {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }
}

/// Applies a global transform to a whole assembly. A flip turns every piece
/// over, so it is only meaningful for two-sided puzzles.
pub fn apply_dihedral(
    chromosome: &Chromosome,
    transform: Dihedral,
    puzzle_type: PuzzleType,
) -> Result<Chromosome, ModelError> {
    if transform.flip && !puzzle_type.two_sided() {
        return Err(ModelError::FlipOnOneSided);
    }
    Ok(transform_unchecked(chromosome, transform))
}

pub(crate) fn transform_unchecked(chromosome: &Chromosome, transform: Dihedral) -> Chromosome {
    let mut out = chromosome.clone();
    for _ in 0..transform.quarter_turns % 4 {
        out = out.rotated_ccw_once();
    }
    if transform.flip {
        out = out.flipped();
    }
    out
}

/// Canonical relations over all adjacencies of a chromosome.
pub fn relation_set(chromosome: &Chromosome) -> HashSet<Relation> {
    chromosome.adjacencies().map(|r| r.canonical()).collect()
}
