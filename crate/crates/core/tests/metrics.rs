use jigsaw_core::eval::{direct_comparison, evaluate, neighbor_comparison};
use jigsaw_core::ga::random_chromosome;
use jigsaw_core::model::{apply_dihedral, Chromosome, Dihedral, PuzzleSpec, PuzzleType};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rotatable_type() -> impl Strategy<Value = PuzzleType> {
    prop_oneof![Just(PuzzleType::Type2), Just(PuzzleType::Type4)]
}

fn transform(ty: PuzzleType) -> impl Strategy<Value = Dihedral> {
    let flips = ty.two_sided();
    (0u8..4, any::<bool>()).prop_map(move |(t, f)| Dihedral::new(t, f && flips))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn neighbor_is_transform_invariant(
        (ty, t) in rotatable_type().prop_flat_map(|ty| (Just(ty), transform(ty))),
        rows in 1usize..7,
        cols in 1usize..7,
        seed in any::<u64>(),
    ) {
        let spec = PuzzleSpec::new(rows, cols, 1, ty).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = Chromosome::identity(rows, cols);
        let sol = random_chromosome(&spec, &mut rng);
        let moved = apply_dihedral(&sol, t, ty).unwrap();
        prop_assert_eq!(neighbor_comparison(&sol, &truth, &spec).unwrap(), neighbor_comparison(&moved, &truth, &spec).unwrap());
    }

    #[test]
    fn transformed_truth_is_perfect(
        (ty, t) in rotatable_type().prop_flat_map(|ty| (Just(ty), transform(ty))),
        rows in 1usize..7,
        cols in 1usize..7,
    ) {
        let spec = PuzzleSpec::new(rows, cols, 1, ty).unwrap();
        let truth = Chromosome::identity(rows, cols);
        let sol = apply_dihedral(&truth, t, ty).unwrap();
        let r = evaluate(&sol, &truth, &spec).unwrap();
        prop_assert_eq!(r.direct, 1.0);
        prop_assert_eq!(r.neighbor, 1.0);
        prop_assert!(r.perfect);
    }

    #[test]
    fn direct_is_invariant_to_a_shared_transform(
        (ty, t) in rotatable_type().prop_flat_map(|ty| (Just(ty), transform(ty))),
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let spec = PuzzleSpec::new(rows, cols, 1, ty).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_chromosome(&spec, &mut rng);
        let sol = random_chromosome(&spec, &mut rng);
        let moved_truth = apply_dihedral(&truth, t, ty).unwrap();
        let moved_spec = PuzzleSpec::new(moved_truth.rows(), moved_truth.cols(), 1, ty).unwrap();
        let before = direct_comparison(&sol, &truth, &spec).unwrap().0;
        let after = direct_comparison(&apply_dihedral(&sol, t, ty).unwrap(), &moved_truth, &moved_spec).unwrap().0;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn scores_stay_in_unit_interval(
        ty in prop_oneof![Just(PuzzleType::Type1), Just(PuzzleType::Type2), Just(PuzzleType::Type4)],
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let spec = PuzzleSpec::new(rows, cols, 1, ty).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_chromosome(&spec, &mut rng);
        let sol = random_chromosome(&spec, &mut rng);
        let r = evaluate(&sol, &truth, &spec).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.direct) && (0.0..=1.0).contains(&r.neighbor));
        prop_assert!(!r.perfect || (r.direct == 1.0 && r.neighbor == 1.0));
    }
}

#[test]
fn type1_direct_ignores_rotations() {
    let spec = PuzzleSpec::new(2, 2, 1, PuzzleType::Type1).unwrap();
    let truth = Chromosome::identity(2, 2);
    let sol = apply_dihedral(&truth, Dihedral::new(2, false), PuzzleType::Type1).unwrap();
    // The rotated copy is not a legal Type 1 assembly, so build the
    // position-only equivalent: pieces in reversed order, upright.
    let cells = sol
        .cells()
        .iter()
        .map(|p| jigsaw_core::model::Placement::upright(p.piece))
        .collect();
    let reversed = Chromosome::new(2, 2, cells);
    assert_eq!(direct_comparison(&reversed, &truth, &spec).unwrap().0, 0.0);
}
