//! Pairwise edge compatibility: boundary dissimilarity for every labeled
//! edge pairing, the dense score table, ranked partner lists and best
//! buddies.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::factory::Piece;
use crate::model::{EdgeLabel, PieceEdge, PuzzleSpec, PuzzleType, Relation};
use crate::raster::FaceImage;

/// Longest ranked partner list kept per piece edge. Deeper lookups fall back
/// to scanning the pieces that are still unplaced.
pub const RANK_DEPTH: usize = 64;

const NONE: u32 = u32::MAX;
const CACHE_MAGIC: &[u8; 8] = b"JIGTABLE";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CompatError {
    #[error("edge {0} is primed but the piece has no back face")]
    PrimedOnOneSided(EdgeLabel),
    #[error("cannot compare a piece with itself")]
    SamePiece,
    #[error("table cache {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn boundary(piece: &Piece, label: EdgeLabel) -> Result<Vec<[f64; 3]>, CompatError> {
    if label.is_primed() {
        let back = piece.back.as_ref().ok_or(CompatError::PrimedOnOneSided(label))?;
        Ok(back.lab.clockwise_side(((4 - label.letter()) % 4) as usize))
    } else {
        Ok(piece.front.lab.clockwise_side(label.letter() as usize))
    }
}

/// Root of the summed squared band differences across the seam where edge
/// `first` of one piece abuts edge `second` of another. Both boundaries are
/// read clockwise, so the second sequence runs backwards along the seam.
fn seam_distance(first: &[[f64; 3]], second: &[[f64; 3]]) -> f64 {
    let w = first.len();
    let mut sum = 0.0;
    for k in 0..w {
        let a = first[k];
        let b = second[w - 1 - k];
        for band in 0..3 {
            let d = a[band] - b[band];
            sum += d * d;
        }
    }
    sum.sqrt()
}

/// Dissimilarity of edge `edge_i` of `piece_i` abutting edge `edge_j` of
/// `piece_j`, on the faces those labels belong to.
pub fn dissimilarity(
    piece_i: &Piece,
    edge_i: EdgeLabel,
    piece_j: &Piece,
    edge_j: EdgeLabel,
) -> Result<f64, CompatError> {
    if piece_i.id == piece_j.id {
        return Err(CompatError::SamePiece);
    }
    // Same evaluation order as the table, which fills the lower piece's row.
    let ((p, x), (q, y)) = if piece_i.id < piece_j.id {
        ((piece_i, edge_i), (piece_j, edge_j))
    } else {
        ((piece_j, edge_j), (piece_i, edge_i))
    };
    Ok(seam_distance(&boundary(p, x)?, &boundary(q, y)?))
}

/// Dissimilarity computed straight from two face images for the b|d case:
/// `left`'s rightmost column against `right`'s leftmost column.
pub fn right_left_dissimilarity(left: &FaceImage, right: &FaceImage) -> f64 {
    let w = left.size();
    let mut sum = 0.0;
    for k in 0..w {
        let a = left.get(k, w - 1);
        let b = right.get(k, 0);
        for band in 0..3 {
            sum += (a[band] - b[band]).powi(2);
        }
    }
    sum.sqrt()
}

/// Dense score table indexed by `(piece_i, edge_i, piece_j, edge_j)`.
///
/// `score` is the one-face dissimilarity of a labeled pairing. `seam_cost`
/// is what a physical seam costs in an assembly: for two-sided puzzles the
/// sum of the front and back readings of that seam.
#[derive(Debug, Clone)]
pub struct CompatibilityTable {
    puzzle_type: PuzzleType,
    pieces: usize,
    labels: usize,
    scores: Vec<f64>,
    ranked: Vec<u32>,
    rank_len: usize,
    best: Vec<u32>,
}

impl CompatibilityTable {
    /// Builds derived data (ranked lists, best partners) from raw scores laid
    /// out as `scores[slot_i * n * L + slot_j]`, `slot = piece * L + label`.
    pub fn from_scores(puzzle_type: PuzzleType, pieces: usize, scores: Vec<f64>) -> Self {
        let labels = puzzle_type.label_count();
        let slots = pieces * labels;
        assert_eq!(scores.len(), slots * slots, "score array has the wrong size");
        let mut table = CompatibilityTable {
            puzzle_type,
            pieces,
            labels,
            scores,
            ranked: Vec::new(),
            rank_len: 0,
            best: Vec::new(),
        };
        table.rank();
        table
    }

    pub fn puzzle_type(&self) -> PuzzleType {
        self.puzzle_type
    }

    pub fn piece_count(&self) -> usize {
        self.pieces
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn raw_scores(&self) -> &[f64] {
        &self.scores
    }

    #[inline]
    fn slots(&self) -> usize {
        self.pieces * self.labels
    }

    #[inline]
    pub fn score_slots(&self, a: usize, b: usize) -> f64 {
        self.scores[a * self.slots() + b]
    }

    pub fn score(&self, a: PieceEdge, b: PieceEdge) -> f64 {
        self.score_slots(a.slot(self.labels), b.slot(self.labels))
    }

    #[inline]
    pub fn seam_cost_slots(&self, a: usize, b: usize) -> f64 {
        let s = self.score_slots(a, b);
        if self.labels == 8 {
            s + self.score_slots(a ^ 4, b ^ 4)
        } else {
            s
        }
    }

    pub fn seam_cost(&self, relation: &Relation) -> f64 {
        self.seam_cost_slots(relation.first.slot(self.labels), relation.second.slot(self.labels))
    }

    /// Whether label `b` may abut label `a` in this puzzle type. One-sided
    /// upright pieces only meet on opposite sides.
    #[inline]
    pub fn legal_pair(&self, a: EdgeLabel, b: EdgeLabel) -> bool {
        match self.puzzle_type {
            PuzzleType::Type1 => (a.letter() + 2) % 4 == b.letter(),
            _ => true,
        }
    }

    /// Partner slots of `slot`, lowest seam cost first (ties by slot), at
    /// most [`RANK_DEPTH`] long.
    pub fn ranked(&self, slot: usize) -> &[u32] {
        let start = slot * self.rank_len;
        let list = &self.ranked[start..start + self.rank_len];
        let end = list.iter().position(|&s| s == NONE).unwrap_or(list.len());
        &list[..end]
    }

    /// Best partner slot of `slot` (lowest seam cost, ties to smallest slot).
    pub fn best_partner(&self, slot: usize) -> Option<usize> {
        let b = self.best[slot];
        (b != NONE).then_some(b as usize)
    }

    #[inline]
    pub fn is_best_buddy_slots(&self, a: usize, b: usize) -> bool {
        self.best[a] == b as u32 && self.best[b] == a as u32
    }

    pub fn is_best_buddy(&self, relation: &Relation) -> bool {
        self.is_best_buddy_slots(relation.first.slot(self.labels), relation.second.slot(self.labels))
    }

    /// All mutually best pairings, in canonical form.
    pub fn best_buddies(&self) -> HashSet<Relation> {
        (0..self.slots())
            .filter_map(|a| {
                let b = self.best_partner(a)?;
                self.is_best_buddy_slots(a, b).then(|| {
                    Relation::new(PieceEdge::from_slot(a, self.labels), PieceEdge::from_slot(b, self.labels))
                        .canonical()
                })
            })
            .collect()
    }

    fn rank(&mut self) {
        let slots = self.slots();
        let depth = RANK_DEPTH.min(slots.saturating_sub(self.labels));
        let labels = self.labels;
        let lists: Vec<Vec<u32>> = (0..slots)
            .into_par_iter()
            .map(|a| {
                let piece = a / labels;
                let la = EdgeLabel::from_index(a % labels);
                let mut cands: Vec<(f64, u32)> = (0..slots)
                    .filter(|&b| b / labels != piece && self.legal_pair(la, EdgeLabel::from_index(b % labels)))
                    .map(|b| (self.seam_cost_slots(a, b), b as u32))
                    .collect();
                let cmp = |x: &(f64, u32), y: &(f64, u32)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
                if cands.len() > depth && depth > 0 {
                    cands.select_nth_unstable_by(depth - 1, cmp);
                    cands.truncate(depth);
                }
                cands.sort_unstable_by(cmp);
                let mut list: Vec<u32> = cands.into_iter().map(|c| c.1).collect();
                list.resize(depth, NONE);
                list
            })
            .collect();
        self.rank_len = depth;
        self.best = lists.iter().map(|l| l.first().copied().unwrap_or(NONE)).collect();
        self.ranked = lists.into_iter().flatten().collect();
    }

    /// Writes a versioned binary cache: magic, version, bundle checksum,
    /// puzzle type, piece count, then the raw scores as little-endian f64.
    pub fn save_cache(&self, path: &Path, bundle_sha256: &str) -> Result<(), CompatError> {
        let mut out = Vec::with_capacity(64 + self.scores.len() * 8);
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        let digest = hex_digest(bundle_sha256)?;
        out.extend_from_slice(&digest);
        out.push(self.puzzle_type.number());
        out.extend_from_slice(&(self.pieces as u64).to_le_bytes());
        for s in &self.scores {
            out.extend_from_slice(&s.to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }

    /// Reads a cache written by [`save_cache`](Self::save_cache); fails if it
    /// was computed for a different bundle.
    pub fn load_cache(path: &Path, bundle_sha256: &str, spec: &PuzzleSpec) -> Result<Self, CompatError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let header = 8 + 4 + 32 + 1 + 8;
        if bytes.len() < header || &bytes[..8] != CACHE_MAGIC {
            return Err(CompatError::Cache("has no valid header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(CompatError::Cache(format!("version {version} is not supported")));
        }
        if bytes[12..44] != hex_digest(bundle_sha256)? {
            return Err(CompatError::Cache("belongs to a different bundle".into()));
        }
        if bytes[44] != spec.puzzle_type.number() {
            return Err(CompatError::Cache("puzzle type mismatch".into()));
        }
        let pieces = u64::from_le_bytes(bytes[45..53].try_into().unwrap()) as usize;
        let slots = pieces * spec.label_count();
        if pieces != spec.piece_count() || bytes.len() != header + slots * slots * 8 {
            return Err(CompatError::Cache("size does not match the puzzle".into()));
        }
        let scores = bytes[header..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(CompatibilityTable::from_scores(spec.puzzle_type, pieces, scores))
    }
}

fn hex_digest(s: &str) -> Result<[u8; 32], CompatError> {
    let v = hex::decode(s).map_err(|_| CompatError::Cache("bundle checksum is not hex".into()))?;
    v.try_into().map_err(|_| CompatError::Cache("bundle checksum is not SHA-256".into()))
}

/// Computes every labeled pairing score for the pieces and derives ranked
/// partner lists and best buddies. Each unordered pair is evaluated once and
/// mirrored, so the table is exactly symmetric and independent of the
/// number of worker threads.
///
/// Panics if a Type 4 spec is given one-sided pieces.
pub fn build_table(pieces: &[Piece], spec: &PuzzleSpec) -> CompatibilityTable {
    let labels = spec.label_count();
    let n = pieces.len();
    let slots = n * labels;
    let seqs: Vec<Vec<[f64; 3]>> = pieces
        .iter()
        .flat_map(|p| EdgeLabel::all(labels).map(move |l| boundary(p, l).expect("faces match the puzzle type")))
        .collect();
    let mut scores = vec![f64::INFINITY; slots * slots];
    scores.par_chunks_mut(slots).enumerate().for_each(|(a, row)| {
        let i = a / labels;
        for b in (i + 1) * labels..slots {
            row[b] = seam_distance(&seqs[a], &seqs[b]);
        }
    });
    for a in 0..slots {
        let i = a / labels;
        for b in (i + 1) * labels..slots {
            scores[b * slots + a] = scores[a * slots + b];
        }
    }
    CompatibilityTable::from_scores(spec.puzzle_type, n, scores)
}

/// Mutually best pairings of a complete table.
pub fn best_buddy_edges(table: &CompatibilityTable) -> HashSet<Relation> {
    table.best_buddies()
}
