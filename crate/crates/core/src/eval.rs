//! Scoring assemblies against the ground truth, and synthetic puzzles whose
//! true seams are the only zero-cost ones.

use std::collections::HashSet;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::CompatibilityTable;
use crate::factory::{scramble, shred, shred_two_sided, FactoryError, PuzzleBundle};
use crate::model::{relation_set, transform_unchecked, Chromosome, Dihedral, ModelError, PieceEdge, PuzzleSpec, Relation};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("solution has {solution} pieces but the truth has {truth}")]
    PieceCount { solution: usize, truth: usize },
    #[error("solution is not a valid assembly: {0}")]
    Solution(ModelError),
    #[error("ground truth is not a valid assembly: {0}")]
    Truth(ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub direct: f64,
    pub neighbor: f64,
    pub perfect: bool,
    pub best_transform: Dihedral,
}

fn check(solution: &Chromosome, truth: &Chromosome, spec: &PuzzleSpec) -> Result<(), EvalError> {
    if solution.len() != truth.len() {
        return Err(EvalError::PieceCount {
            solution: solution.len(),
            truth: truth.len(),
        });
    }
    truth.validate(spec).map_err(EvalError::Truth)?;
    solution.validate(spec).map_err(EvalError::Solution)
}

/// Fraction of pieces in the right cell, rotation and face, maximized over
/// the global transforms the puzzle type allows. Returns the transform that
/// attains the maximum (the first one on ties).
pub fn direct_comparison(
    solution: &Chromosome,
    truth: &Chromosome,
    spec: &PuzzleSpec,
) -> Result<(f64, Dihedral), EvalError> {
    check(solution, truth, spec)?;
    let mut best = (0usize, Dihedral::IDENTITY);
    for t in spec.transforms() {
        let moved = transform_unchecked(solution, t);
        if moved.rows() != truth.rows() || moved.cols() != truth.cols() {
            continue;
        }
        let hits = moved.cells().iter().zip(truth.cells()).filter(|(a, b)| a == b).count();
        if hits > best.0 {
            best = (hits, t);
        }
    }
    Ok((best.0 as f64 / truth.len() as f64, best.1))
}

/// Fraction of the truth's seams that the solution reproduces. A seam is a
/// canonical relation, which fixes both faces at once for two-sided pieces.
pub fn neighbor_comparison(solution: &Chromosome, truth: &Chromosome, spec: &PuzzleSpec) -> Result<f64, EvalError> {
    check(solution, truth, spec)?;
    let expected = relation_set(truth);
    if expected.is_empty() {
        return Ok(1.0);
    }
    let found = relation_set(solution);
    Ok(expected.intersection(&found).count() as f64 / expected.len() as f64)
}

pub fn evaluate(solution: &Chromosome, truth: &Chromosome, spec: &PuzzleSpec) -> Result<ScoreReport, EvalError> {
    let (direct, best_transform) = direct_comparison(solution, truth, spec)?;
    let neighbor = neighbor_comparison(solution, truth, spec)?;
    Ok(ScoreReport {
        direct,
        neighbor,
        perfect: direct == 1.0,
        best_transform,
    })
}

fn coded_image(spec: &PuzzleSpec, rng: &mut ChaCha8Rng) -> RgbImage {
    let w = spec.tile_size;
    let (rows, cols) = (spec.rows, spec.cols);
    let mut img = RgbImage::from_fn((cols * w) as u32, (rows * w) as u32, |_, _| image::Rgb(rng.gen()));
    let mut put = |x: usize, y: usize, px: [u8; 3]| img.put_pixel(x as u32, y as u32, image::Rgb(px));
    // Lattice corners are shared by the four tiles that meet there.
    for r in 0..=rows {
        for c in 0..=cols {
            let px: [u8; 3] = rng.gen();
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let y = (r * w + dy).checked_sub(1);
                let x = (c * w + dx).checked_sub(1);
                if let (Some(y), Some(x)) = (y, x) {
                    if y < rows * w && x < cols * w {
                        put(x, y, px);
                    }
                }
            }
        }
    }
    // Each vertical seam gets one code written on both sides of it.
    for r in 0..rows {
        for c in 1..cols {
            for k in 1..w - 1 {
                let px: [u8; 3] = rng.gen();
                let y = r * w + k;
                put(c * w - 1, y, px);
                put(c * w, y, px);
            }
        }
    }
    for r in 1..rows {
        for c in 0..cols {
            for k in 1..w - 1 {
                let px: [u8; 3] = rng.gen();
                let x = c * w + k;
                put(x, r * w - 1, px);
                put(x, r * w, px);
            }
        }
    }
    img
}

/// Synthetic scrambled puzzle in which pieces that truly abut carry
/// identical boundary pixels and everything else is random, so every true
/// seam scores exactly 0. Two-sided puzzles are coded on both faces.
pub fn make_oracle_puzzle(spec: &PuzzleSpec, seed: u64) -> Result<PuzzleBundle, FactoryError> {
    if spec.tile_size < 3 {
        return Err(FactoryError::Invalid("oracle puzzles need tiles of at least 3 pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let front = coded_image(spec, &mut rng);
    let bundle = if spec.puzzle_type.two_sided() {
        let back = coded_image(spec, &mut rng);
        shred_two_sided(&front, &back, spec, seed)?
    } else {
        shred(&front, spec, seed)?
    };
    Ok(scramble(&bundle, seed.wrapping_add(1)))
}

/// Every pairing whose seam cost is exactly 0, in canonical form.
pub fn zero_cost_relations(table: &CompatibilityTable) -> HashSet<Relation> {
    let l = table.label_count();
    let slots = table.piece_count() * l;
    let mut out = HashSet::new();
    for a in 0..slots {
        for b in (a / l + 1) * l..slots {
            if table.seam_cost_slots(a, b) == 0.0 {
                out.insert(Relation::new(PieceEdge::from_slot(a, l), PieceEdge::from_slot(b, l)).canonical());
            }
        }
    }
    out
}
