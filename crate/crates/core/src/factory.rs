//! Turning source images into puzzle bundles: tiling, two-sided composition,
//! scrambling and rendering assemblies back into images.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::srgb_to_normalized_lab;
use crate::model::{transform_unchecked, Chromosome, Dihedral, Face, ModelError, Placement, PuzzleSpec, PuzzleType};
#[cfg(test)]
use crate::model::Rotation;
use crate::raster::{FaceImage, RgbTile};

#[derive(Debug, Error)]
pub enum FactoryError {
    #[error("image is {width}x{height} but the puzzle needs at least {need_width}x{need_height}")]
    TooSmall {
        width: u32,
        height: u32,
        need_width: u32,
        need_height: u32,
    },
    #[error("front image is {front:?} but back image is {back:?}")]
    SizeMismatch { front: (u32, u32), back: (u32, u32) },
    #[error("{0} puzzles have one face; two-sided shredding needs Type 4")]
    NotTwoSided(PuzzleType),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported bundle format version {0}")]
    Version(u32),
    #[error("manifest lists {found} pieces but the puzzle needs {expected}")]
    PieceCount { expected: usize, found: usize },
    #[error("missing piece file {0}")]
    MissingFile(PathBuf),
    #[error("checksum mismatch for {0}")]
    Checksum(String),
    #[error("invalid bundle: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Opaque random piece identifier; carries no positional information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PieceId(pub u64);

impl fmt::Display for PieceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl std::str::FromStr for PieceId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(PieceId)
    }
}

impl Serialize for PieceId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PieceId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One printed side of a piece: the original RGB pixels and their L*a*b*
/// image. The back face is stored as seen after turning the piece over
/// about its vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceFace {
    pub rgb: RgbTile,
    pub lab: FaceImage,
}

impl PieceFace {
    pub fn from_rgb(rgb: RgbTile) -> PieceFace {
        let lab = rgb.map(srgb_to_normalized_lab);
        PieceFace { rgb, lab }
    }

    pub fn rotated_ccw(&self, quarter_turns: i32) -> PieceFace {
        let k = quarter_turns.rem_euclid(4) as u8;
        PieceFace {
            rgb: self.rgb.rotated_ccw(k),
            lab: self.lab.rotated_ccw(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub id: PieceId,
    pub front: PieceFace,
    pub back: Option<PieceFace>,
}

impl Piece {
    /// Panics when asking for the back of a one-sided piece.
    pub fn face(&self, face: Face) -> &PieceFace {
        match face {
            Face::Front => &self.front,
            Face::Back => self.back.as_ref().expect("piece has no back face"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuzzleBundle {
    pub spec: PuzzleSpec,
    pub pieces: Vec<Piece>,
    /// Correct assembly in terms of indices into `pieces`.
    pub ground_truth: Option<Chromosome>,
}

impl PuzzleBundle {
    pub fn validate(&self) -> Result<(), FactoryError> {
        let n = self.spec.piece_count();
        if self.pieces.len() != n {
            return Err(FactoryError::PieceCount {
                expected: n,
                found: self.pieces.len(),
            });
        }
        let two_sided = self.spec.puzzle_type.two_sided();
        let mut ids = HashSet::new();
        for p in &self.pieces {
            if !ids.insert(p.id) {
                return Err(FactoryError::Invalid(format!("duplicate piece id {}", p.id)));
            }
            if p.back.is_some() != two_sided {
                return Err(FactoryError::Invalid(format!("piece {} has the wrong number of faces", p.id)));
            }
            let sizes_ok = p.front.rgb.size() == self.spec.tile_size
                && p.back.as_ref().is_none_or(|b| b.rgb.size() == self.spec.tile_size);
            if !sizes_ok {
                return Err(FactoryError::Invalid(format!("piece {} has the wrong tile size", p.id)));
            }
        }
        if let Some(truth) = &self.ground_truth {
            truth.validate(&self.spec)?;
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<PieceId> {
        self.pieces.iter().map(|p| p.id).collect()
    }
}

fn check_size(image: &RgbImage, spec: &PuzzleSpec) -> Result<(), FactoryError> {
    let need_width = (spec.cols * spec.tile_size) as u32;
    let need_height = (spec.rows * spec.tile_size) as u32;
    if image.width() < need_width || image.height() < need_height {
        return Err(FactoryError::TooSmall {
            width: image.width(),
            height: image.height(),
            need_width,
            need_height,
        });
    }
    Ok(())
}

fn cut_tile(image: &RgbImage, row: usize, col: usize, w: usize) -> RgbTile {
    RgbTile::from_fn(w, |r, c| image.get_pixel((col * w + c) as u32, (row * w + r) as u32).0)
}

fn random_ids(n: usize, seed: u64) -> Vec<PieceId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    while ids.len() < n {
        let id = PieceId(rng.gen());
        if seen.insert(id) {
            ids.push(id);
        }
    }
    ids
}

/// Cuts the image into `rows × cols` tiles row-major, cropping any excess
/// on the right and bottom. The ground truth is the identity assembly.
pub fn shred(image: &RgbImage, spec: &PuzzleSpec, seed: u64) -> Result<PuzzleBundle, FactoryError> {
    if spec.puzzle_type.two_sided() {
        return Err(FactoryError::Invalid("Type 4 puzzles need a back image".into()));
    }
    check_size(image, spec)?;
    let ids = random_ids(spec.piece_count(), seed);
    let w = spec.tile_size;
    let pieces = (0..spec.rows)
        .flat_map(|r| (0..spec.cols).map(move |c| (r, c)))
        .zip(ids)
        .map(|((r, c), id)| Piece {
            id,
            front: PieceFace::from_rgb(cut_tile(image, r, c, w)),
            back: None,
        })
        .collect();
    Ok(PuzzleBundle {
        spec: *spec,
        pieces,
        ground_truth: Some(Chromosome::identity(spec.rows, spec.cols)),
    })
}

/// Builds a two-sided puzzle as if both images were printed on the two sides
/// of one sheet: the piece cut at front cell `(r, c)` carries back tile
/// `(r, cols - 1 - c)` of `back_image`.
pub fn shred_two_sided(
    front_image: &RgbImage,
    back_image: &RgbImage,
    spec: &PuzzleSpec,
    seed: u64,
) -> Result<PuzzleBundle, FactoryError> {
    if !spec.puzzle_type.two_sided() {
        return Err(FactoryError::NotTwoSided(spec.puzzle_type));
    }
    if front_image.dimensions() != back_image.dimensions() {
        return Err(FactoryError::SizeMismatch {
            front: front_image.dimensions(),
            back: back_image.dimensions(),
        });
    }
    check_size(front_image, spec)?;
    let ids = random_ids(spec.piece_count(), seed);
    let w = spec.tile_size;
    let mut pieces = Vec::with_capacity(spec.piece_count());
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            pieces.push(Piece {
                id: ids[r * spec.cols + c],
                front: PieceFace::from_rgb(cut_tile(front_image, r, c, w)),
                back: Some(PieceFace::from_rgb(cut_tile(back_image, r, spec.cols - 1 - c, w))),
            });
        }
    }
    Ok(PuzzleBundle {
        spec: *spec,
        pieces,
        ground_truth: Some(Chromosome::identity(spec.rows, spec.cols)),
    })
}

/// What `scramble` did to each stored piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrambleRecord {
    /// `source[i]` is the pre-scramble index of the piece now at index `i`.
    pub source: Vec<usize>,
    /// Counterclockwise quarter turns applied to the stored front raster.
    pub turns: Vec<u8>,
    /// Whether the stored front and back faces were exchanged.
    pub swapped: Vec<bool>,
}

impl ScrambleRecord {
    /// Maps a placement of a pre-scramble piece to the placement of the same
    /// physical pose after scrambling.
    pub fn forward(&self, inverse: &[usize], p: &Placement) -> Placement {
        let new_index = inverse[p.piece];
        let k = self.turns[new_index] as i32;
        let face = if self.swapped[new_index] { p.face.flipped() } else { p.face };
        let rotation = match face {
            Face::Front => p.rotation.plus(-k),
            Face::Back => p.rotation.plus(k),
        };
        Placement::new(new_index, rotation, face)
    }

    /// `inverse[old] = new` index lookup.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.source.len()];
        for (new, &old) in self.source.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }
}

pub fn scramble(bundle: &PuzzleBundle, seed: u64) -> PuzzleBundle {
    scramble_with_record(bundle, seed).0
}

/// Permutes the piece order and, depending on the puzzle type, turns each
/// stored raster by a uniform random multiple of 90° and swaps its faces
/// with probability 1/2. The ground truth is rewritten to the same physical
/// assembly.
pub fn scramble_with_record(bundle: &PuzzleBundle, seed: u64) -> (PuzzleBundle, ScrambleRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bundle.pieces.len();
    let ty = bundle.spec.puzzle_type;
    let mut source: Vec<usize> = (0..n).collect();
    source.shuffle(&mut rng);
    let mut turns = vec![0u8; n];
    let mut swapped = vec![false; n];
    let mut pieces = Vec::with_capacity(n);
    for (i, &old) in source.iter().enumerate() {
        let piece = &bundle.pieces[old];
        if ty.rotatable() {
            turns[i] = rng.gen_range(0..4);
        }
        if ty.two_sided() {
            swapped[i] = rng.gen_bool(0.5);
        }
        let (front, back) = match (&piece.back, swapped[i]) {
            (Some(b), true) => (b.clone(), Some(piece.front.clone())),
            _ => (piece.front.clone(), piece.back.clone()),
        };
        let k = turns[i] as i32;
        pieces.push(Piece {
            id: piece.id,
            front: front.rotated_ccw(k),
            back: back.map(|b| b.rotated_ccw(-k)),
        });
    }
    let record = ScrambleRecord {
        source,
        turns,
        swapped,
    };
    let inverse = record.inverse();
    let ground_truth = bundle.ground_truth.as_ref().map(|t| {
        let cells = t.cells().iter().map(|p| record.forward(&inverse, p)).collect();
        Chromosome::new(t.rows(), t.cols(), cells)
    });
    (
        PuzzleBundle {
            spec: bundle.spec,
            pieces,
            ground_truth,
        },
        record,
    )
}

/// Renders an assembly as seen from the front, or from the back after
/// turning the whole assembly over.
pub fn render(pieces: &[Piece], chromosome: &Chromosome, view: Face) -> RgbImage {
    let ch = match view {
        Face::Front => chromosome.clone(),
        Face::Back => transform_unchecked(chromosome, Dihedral::new(0, true)),
    };
    let w = pieces.first().map_or(0, |p| p.front.rgb.size());
    let mut img = RgbImage::new((ch.cols() * w) as u32, (ch.rows() * w) as u32);
    for r in 0..ch.rows() {
        for c in 0..ch.cols() {
            let p = ch.get(r, c);
            let tile = pieces[p.piece].face(p.face).rgb.rotated_ccw(p.rotation.quarter_turns());
            for y in 0..w {
                for x in 0..w {
                    img.put_pixel((c * w + x) as u32, (r * w + y) as u32, image::Rgb(tile.get(y, x)));
                }
            }
        }
    }
    img
}

/// Crops `image` to the area covered by `spec`.
pub fn crop_to_spec(image: &RgbImage, spec: &PuzzleSpec) -> RgbImage {
    image::imageops::crop_imm(
        image,
        0,
        0,
        (spec.cols * spec.tile_size) as u32,
        (spec.rows * spec.tile_size) as u32,
    )
    .to_image()
}
