//! On-disk puzzle bundles.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json          spec, piece list, per-file SHA-256, bundle checksum
//! <id>_front.png         one lossless RGB tile per piece face
//! <id>_back.png          (Type 4 only)
//! truth.json             optional ground truth, kept apart so solvers run blind
//! ```
//!
//! `truth.json` and solver output (`solution.json`) share the
//! [`AssemblyFile`] layout: a grid of `{piece, rotation, face}` cells with the
//! rotation in degrees counterclockwise.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::factory::{FactoryError, Piece, PieceFace, PieceId, PuzzleBundle};
use crate::model::{Chromosome, Face, Placement, PuzzleSpec, PuzzleType, Rotation};
use crate::raster::RgbTile;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub puzzle_type: PuzzleType,
    pub rows: usize,
    pub cols: usize,
    pub tile_size: usize,
    pub piece_count: usize,
    pub pieces: Vec<ManifestPiece>,
    /// SHA-256 over the spec and every piece's id and face checksums.
    pub bundle_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPiece {
    pub id: PieceId,
    pub front: String,
    pub front_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub piece: PieceId,
    pub rotation: u16,
    pub face: Face,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyFile {
    pub format_version: u32,
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<Vec<CellRecord>>,
}

impl AssemblyFile {
    pub fn from_chromosome(chromosome: &Chromosome, ids: &[PieceId]) -> AssemblyFile {
        let grid = (0..chromosome.rows())
            .map(|r| {
                (0..chromosome.cols())
                    .map(|c| {
                        let p = chromosome.get(r, c);
                        CellRecord {
                            piece: ids[p.piece],
                            rotation: p.rotation.degrees(),
                            face: p.face,
                        }
                    })
                    .collect()
            })
            .collect();
        AssemblyFile {
            format_version: FORMAT_VERSION,
            rows: chromosome.rows(),
            cols: chromosome.cols(),
            grid,
        }
    }

    /// Resolves piece ids against `ids` and validates the result for `spec`.
    pub fn to_chromosome(&self, ids: &[PieceId], spec: &PuzzleSpec) -> Result<Chromosome, FactoryError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FactoryError::Version(self.format_version));
        }
        let index: HashMap<PieceId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        if self.grid.len() != self.rows || self.grid.iter().any(|row| row.len() != self.cols) {
            return Err(FactoryError::Invalid("assembly grid does not match its rows/cols".into()));
        }
        let mut cells = Vec::with_capacity(self.rows * self.cols);
        for cell in self.grid.iter().flatten() {
            let piece = *index
                .get(&cell.piece)
                .ok_or_else(|| FactoryError::Invalid(format!("unknown piece {}", cell.piece)))?;
            let rotation = Rotation::from_degrees(cell.rotation)
                .ok_or_else(|| FactoryError::Invalid(format!("rotation {} is not a multiple of 90", cell.rotation)))?;
            cells.push(Placement::new(piece, rotation, cell.face));
        }
        let ch = Chromosome::new(self.rows, self.cols, cells);
        ch.validate(spec)?;
        Ok(ch)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn bundle_checksum(spec: &PuzzleSpec, pieces: &[ManifestPiece]) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "{}|{}|{}|{}|",
        spec.puzzle_type.number(),
        spec.rows,
        spec.cols,
        spec.tile_size
    ));
    for p in pieces {
        h.update(format!(
            "{}:{}:{};",
            p.id,
            p.front_sha256,
            p.back_sha256.as_deref().unwrap_or("")
        ));
    }
    hex::encode(h.finalize())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FactoryError + '_ {
    move |source| FactoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn encode_png(tile: &RgbTile) -> Vec<u8> {
    let w = tile.size() as u32;
    let raw: Vec<u8> = tile.pixels().iter().flatten().copied().collect();
    let img = image::RgbImage::from_raw(w, w, raw).expect("tile buffer matches its size");
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out
}

fn decode_png(path: &Path, bytes: &[u8], tile_size: usize) -> Result<RgbTile, FactoryError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|source| FactoryError::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    if img.width() as usize != tile_size || img.height() as usize != tile_size {
        return Err(FactoryError::Invalid(format!(
            "{} is {}x{}, expected {tile_size}x{tile_size}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    let px = img.pixels().map(|p| p.0).collect();
    Ok(RgbTile::from_pixels(tile_size, px).expect("decoded tile has tile_size^2 pixels"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FactoryError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FactoryError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FactoryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FactoryError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_assembly(path: &Path, chromosome: &Chromosome, ids: &[PieceId]) -> Result<(), FactoryError> {
    write_json(path, &AssemblyFile::from_chromosome(chromosome, ids))
}

pub fn read_assembly(path: &Path, ids: &[PieceId], spec: &PuzzleSpec) -> Result<Chromosome, FactoryError> {
    read_json::<AssemblyFile>(path)?.to_chromosome(ids, spec)
}

/// Writes the bundle and returns the manifest it produced. The ground truth,
/// if any, goes to `truth.json`.
pub fn save_bundle(bundle: &PuzzleBundle, dir: &Path) -> Result<Manifest, FactoryError> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(bundle.pieces.len());
    for piece in &bundle.pieces {
        let front_name = format!("{}_front.png", piece.id);
        let front_png = encode_png(&piece.front.rgb);
        let front_path = dir.join(&front_name);
        fs::write(&front_path, &front_png).map_err(io_err(&front_path))?;
        let (back, back_sha256) = match &piece.back {
            Some(face) => {
                let name = format!("{}_back.png", piece.id);
                let png = encode_png(&face.rgb);
                let path = dir.join(&name);
                fs::write(&path, &png).map_err(io_err(&path))?;
                (Some(name), Some(sha256_hex(&png)))
            }
            None => (None, None),
        };
        entries.push(ManifestPiece {
            id: piece.id,
            front: front_name,
            front_sha256: sha256_hex(&front_png),
            back,
            back_sha256,
        });
    }
    let spec = bundle.spec;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        puzzle_type: spec.puzzle_type,
        rows: spec.rows,
        cols: spec.cols,
        tile_size: spec.tile_size,
        piece_count: bundle.pieces.len(),
        bundle_sha256: bundle_checksum(&spec, &entries),
        pieces: entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    let truth_path = dir.join(TRUTH_FILE);
    match &bundle.ground_truth {
        Some(truth) => write_assembly(&truth_path, truth, &bundle.ids())?,
        None if truth_path.exists() => fs::remove_file(&truth_path).map_err(io_err(&truth_path))?,
        None => {}
    }
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, FactoryError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(FactoryError::Version(manifest.format_version));
    }
    Ok(manifest)
}

fn load_face(dir: &Path, name: &str, sha: &str, tile_size: usize) -> Result<PieceFace, FactoryError> {
    if name.contains('/') || name.contains('\\') {
        return Err(FactoryError::Invalid(format!("piece file name {name:?} escapes the bundle")));
    }
    let path: PathBuf = dir.join(name);
    if !path.is_file() {
        return Err(FactoryError::MissingFile(path));
    }
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if sha256_hex(&bytes) != sha {
        return Err(FactoryError::Checksum(name.to_string()));
    }
    Ok(PieceFace::from_rgb(decode_png(&path, &bytes, tile_size)?))
}

/// Loads a bundle, verifying counts and checksums. A missing `truth.json`
/// yields `ground_truth: None`.
pub fn load_bundle(dir: &Path) -> Result<PuzzleBundle, FactoryError> {
    let manifest = load_manifest(dir)?;
    let spec = PuzzleSpec::new(manifest.rows, manifest.cols, manifest.tile_size, manifest.puzzle_type)?;
    let expected = spec.piece_count();
    if manifest.piece_count != expected {
        return Err(FactoryError::PieceCount {
            expected,
            found: manifest.piece_count,
        });
    }
    if manifest.pieces.len() != expected {
        return Err(FactoryError::PieceCount {
            expected,
            found: manifest.pieces.len(),
        });
    }
    if bundle_checksum(&spec, &manifest.pieces) != manifest.bundle_sha256 {
        return Err(FactoryError::Checksum(MANIFEST_FILE.into()));
    }
    let two_sided = spec.puzzle_type.two_sided();
    let mut pieces = Vec::with_capacity(expected);
    for entry in &manifest.pieces {
        let front = load_face(dir, &entry.front, &entry.front_sha256, spec.tile_size)?;
        let back = match (&entry.back, &entry.back_sha256, two_sided) {
            (Some(name), Some(sha), true) => Some(load_face(dir, name, sha, spec.tile_size)?),
            (None, None, false) => None,
            _ => {
                return Err(FactoryError::Invalid(format!(
                    "piece {} faces do not match {}",
                    entry.id, spec.puzzle_type
                )))
            }
        };
        pieces.push(Piece {
            id: entry.id,
            front,
            back,
        });
    }
    let ids: Vec<PieceId> = pieces.iter().map(|p| p.id).collect();
    let truth_path = dir.join(TRUTH_FILE);
    let ground_truth = if truth_path.exists() {
        Some(read_assembly(&truth_path, &ids, &spec)?)
    } else {
        None
    };
    let bundle = PuzzleBundle {
        spec,
        pieces,
        ground_truth,
    };
    bundle.validate()?;
    Ok(bundle)
}
