//! Table scores against a brute-force evaluator that poses both rasters
//! physically and compares the touching pixel columns.

use jigsaw_core::compat::{build_table, dissimilarity, CompatibilityTable};
use jigsaw_core::factory::{Piece, PieceFace, PieceId};
use jigsaw_core::model::{EdgeLabel, PieceEdge, Placement, PuzzleSpec, PuzzleType, Side};
use jigsaw_core::raster::{FaceImage, RgbTile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_piece(id: u64, w: usize, two_sided: bool, rng: &mut ChaCha8Rng) -> Piece {
    let mut face = || PieceFace::from_rgb(RgbTile::from_fn(w, |_, _| rng.gen()));
    let front = face();
    let back = two_sided.then(face);
    Piece {
        id: PieceId(id),
        front,
        back,
    }
}

fn posed(piece: &Piece, p: &Placement) -> FaceImage {
    piece.face(p.face).lab.rotated_ccw(p.rotation.quarter_turns())
}

/// Places piece i showing `x` on its right and piece j showing `y` on its
/// left, then sums squared differences across the shared seam.
fn brute_force(pi: &Piece, x: EdgeLabel, pj: &Piece, y: EdgeLabel) -> f64 {
    let left = posed(pi, &Placement::showing(0, x, Side::Right));
    let right = posed(pj, &Placement::showing(1, y, Side::Left));
    let w = left.size();
    let mut sum = 0.0;
    for r in 0..w {
        let a = left.get(r, w - 1);
        let b = right.get(r, 0);
        for k in 0..3 {
            sum += (a[k] - b[k]) * (a[k] - b[k]);
        }
    }
    sum.sqrt()
}

fn check_type(ty: PuzzleType, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols, w) = (3, 4, 5);
    let pieces: Vec<Piece> = (0..rows * cols)
        .map(|i| random_piece(i as u64, w, ty.two_sided(), &mut rng))
        .collect();
    let spec = PuzzleSpec::new(rows, cols, w, ty).unwrap();
    let table: CompatibilityTable = build_table(&pieces, &spec);
    let n = pieces.len();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for x in EdgeLabel::all(ty.label_count()) {
                for y in EdgeLabel::all(ty.label_count()) {
                    let expected = brute_force(&pieces[i], x, &pieces[j], y);
                    let got = table.score(PieceEdge::new(i, x), PieceEdge::new(j, y));
                    assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300), "{ty} {i}.{x} {j}.{y}");
                    assert_eq!(dissimilarity(&pieces[i], x, &pieces[j], y).unwrap(), got);
                }
            }
        }
    }
}

#[test]
fn type2_table_matches_posed_rasters() {
    check_type(PuzzleType::Type2, 1);
}

#[test]
fn type4_table_matches_posed_rasters() {
    check_type(PuzzleType::Type4, 2);
}

#[test]
fn type4_seam_cost_reads_both_faces() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pieces: Vec<Piece> = (0..2).map(|i| random_piece(i, 4, true, &mut rng)).collect();
    let spec = PuzzleSpec::new(1, 2, 4, PuzzleType::Type4).unwrap();
    let table = build_table(&pieces, &spec);
    let rel = jigsaw_core::model::Relation::new(PieceEdge::new(0, EdgeLabel::B), PieceEdge::new(1, EdgeLabel::D));
    let front = brute_force(&pieces[0], EdgeLabel::B, &pieces[1], EdgeLabel::D);
    let back = brute_force(&pieces[0], EdgeLabel::B_PRIME, &pieces[1], EdgeLabel::D_PRIME);
    assert!((table.seam_cost(&rel) - (front + back)).abs() < 1e-12);
}

fn lab_piece(id: u64, lab: FaceImage) -> Piece {
    let w = lab.size();
    Piece {
        id: PieceId(id),
        front: PieceFace {
            rgb: RgbTile::from_fn(w, |_, _| [0; 3]),
            lab,
        },
        back: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_scale_with_pixel_values(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut face = || FaceImage::from_fn(4, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
        let (a, b) = (face(), face());
        let scaled = |f: &FaceImage| f.map(|p| [p[0] * c, p[1] * c, p[2] * c]);
        for x in EdgeLabel::all(4) {
            for y in EdgeLabel::all(4) {
                let d = dissimilarity(&lab_piece(0, a.clone()), x, &lab_piece(1, b.clone()), y).unwrap();
                let ds = dissimilarity(&lab_piece(0, scaled(&a)), x, &lab_piece(1, scaled(&b)), y).unwrap();
                prop_assert!((ds - c * d).abs() <= 1e-9 * (1.0 + c * d));
            }
        }
    }

    #[test]
    fn scores_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pieces: Vec<Piece> = (0..4).map(|i| random_piece(i, 3, true, &mut rng)).collect();
        let spec = PuzzleSpec::new(2, 2, 3, PuzzleType::Type4).unwrap();
        let table = build_table(&pieces, &spec);
        for a in 0..32 {
            for b in 0..32 {
                if a / 8 != b / 8 {
                    prop_assert_eq!(table.score_slots(a, b), table.score_slots(b, a));
                    prop_assert!(table.score_slots(a, b) >= 0.0);
                }
            }
        }
    }
}
