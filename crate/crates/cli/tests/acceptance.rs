//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use jigsaw_cli::{bench_one, cmd_shred, ImageResult, ShredArgs, SpecArgs};
use jigsaw_core::compat::{build_table, CompatibilityTable};
use jigsaw_core::crossover::{crossover, crossover_traced, ParentView, Phase};
use jigsaw_core::eval::{direct_comparison, evaluate, make_oracle_puzzle, neighbor_comparison};
use jigsaw_core::factory::{Piece, PieceFace, PieceId, PuzzleBundle};
use jigsaw_core::ga::{evolve, fitness_cost, random_chromosome, GaConfig, Roulette};
use jigsaw_core::model::{apply_dihedral, relation_set, Chromosome, EdgeLabel, Face, PieceEdge, PuzzleSpec, PuzzleType};
use jigsaw_core::raster::{FaceImage, RgbTile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const PHOTO_TILE: usize = 28;
const PHOTO_ROWS: usize = 18;
const PHOTO_COLS: usize = 24;
const SHRED_SEED: u64 = 7;
const REPEATS: usize = 5;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, text: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id:<3} {text}", if pass { "PASS" } else { "FAIL" });
    }

    fn info(&self, text: String) {
        println!("     ..  {text}");
    }
}

fn type_name(ty: PuzzleType) -> &'static str {
    match ty {
        PuzzleType::Type1 => "type 1",
        PuzzleType::Type2 => "type 2",
        PuzzleType::Type4 => "type 4",
    }
}

fn oracle_exactness(report: &mut Report) {
    let mut runs = 0;
    let mut exact = 0;
    let mut slowest: f64 = 0.0;
    for ty in [PuzzleType::Type2, PuzzleType::Type4] {
        for (rows, cols) in [(4, 4), (6, 8), (12, 16)] {
            let mut ok = 0;
            for seed in 0..10u64 {
                let spec = PuzzleSpec::new(rows, cols, 6, ty).unwrap();
                let bundle = make_oracle_puzzle(&spec, 1000 + seed).unwrap();
                let truth = bundle.ground_truth.as_ref().unwrap();
                let start = Instant::now();
                let table = build_table(&bundle.pieces, &spec);
                let config = GaConfig {
                    master_seed: seed,
                    ..GaConfig::default()
                };
                let evo = evolve(&spec, &table, &config, |_, _| {}).unwrap();
                let secs = start.elapsed().as_secs_f64();
                slowest = slowest.max(secs);
                let cost = fitness_cost(&evo.best, &table, &spec).unwrap();
                let neighbor = neighbor_comparison(&evo.best, truth, &spec).unwrap();
                runs += 1;
                if cost == 0.0 && neighbor == 1.0 && evo.history.len() <= config.generations + 1 && secs <= 60.0 {
                    ok += 1;
                }
            }
            exact += ok;
            report.info(format!("{} {rows}x{cols}: {ok}/10 exact", type_name(ty)));
        }
    }
    let rate = exact as f64 / runs as f64;
    report.line(
        "1",
        rate >= 0.95 && slowest <= 60.0,
        format!(
            "oracle puzzles solved exactly in {exact}/{runs} runs ({:.1}%, need >= 95%), slowest run {slowest:.2} s (limit 60 s)",
            rate * 100.0
        ),
    );
}

fn photo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/photos")
}

fn photos() -> Vec<(String, PathBuf)> {
    let mut list: Vec<(String, PathBuf)> = std::fs::read_dir(photo_dir())
        .unwrap()
        .filter_map(|e| {
            let path = e.ok()?.path();
            let name = path.file_stem()?.to_string_lossy().into_owned();
            (path.extension()? == "png").then_some((name, path))
        })
        .collect();
    list.sort();
    list
}

fn shred_photo(images: Vec<PathBuf>, ty: PuzzleType, out: &Path) -> PuzzleBundle {
    cmd_shred(&ShredArgs {
        spec: SpecArgs {
            puzzle_type: ty,
            tile: PHOTO_TILE,
            rows: PHOTO_ROWS,
            cols: PHOTO_COLS,
        },
        seed: SHRED_SEED,
        out: out.to_path_buf(),
        images,
    })
    .unwrap_or_else(|e| panic!("{e}"))
}

fn photo_benchmark(report: &mut Report, work: &Path) -> Vec<ImageResult> {
    let config = GaConfig::default();
    let start = Instant::now();
    let mut results = Vec::new();
    for (name, path) in photos() {
        let bundle = shred_photo(vec![path], PuzzleType::Type2, &work.join(&name));
        let r = bench_one(&name, &bundle, &config, REPEATS).unwrap_or_else(|e| panic!("{e}"));
        report.info(format!(
            "{name:<18} neighbor {:6.2}%  direct {:6.2}%  perfect runs {}/{REPEATS}  {:.1} s/run",
            r.neighbor.best * 100.0,
            r.direct.best * 100.0,
            r.perfect_runs,
            r.mean_ms / 1e3
        ));
        results.push(r);
    }
    let hours = start.elapsed().as_secs_f64() / 3600.0;
    let n = results.len() as f64;
    let neighbor = results.iter().map(|r| r.neighbor.best).sum::<f64>() / n;
    let direct = results.iter().map(|r| r.direct.best).sum::<f64>() / n;
    let perfect = results.iter().filter(|r| r.perfect_runs > 0).count();
    report.info(format!(
        "substitute photo set: best-of-{REPEATS} direct {:.2}%, {perfect}/{} perfect (published-set targets 88% and 7 do not apply)",
        direct * 100.0,
        results.len()
    ));
    report.line(
        "2",
        results.len() == 20 && neighbor >= 0.85 && hours <= 2.0,
        format!(
            "{} photos, best-of-{REPEATS} average neighbor {:.2}% (need >= 85%), suite time {:.2} h (limit 2 h)",
            results.len(),
            neighbor * 100.0,
            hours
        ),
    );
    results
}

fn two_sided_assembly(report: &mut Report, work: &Path, type2: &[ImageResult]) {
    let eligible: Vec<&ImageResult> = type2.iter().filter(|r| r.neighbor.best >= 0.99).collect();
    if eligible.len() < 2 {
        report.line("3", false, format!("only {} photo(s) reach 99% neighbor as type 2", eligible.len()));
        return;
    }
    let (front, back) = (eligible[0], eligible[1]);
    let path = |name: &str| photo_dir().join(format!("{name}.png"));
    let bundle = shred_photo(vec![path(&front.name), path(&back.name)], PuzzleType::Type4, &work.join("two_sided"));
    let r = bench_one("two_sided", &bundle, &GaConfig::default(), REPEATS).unwrap_or_else(|e| panic!("{e}"));
    let type2_ms = (front.mean_ms + back.mean_ms) / 2.0;
    let ratio = r.mean_ms / type2_ms;
    report.line(
        "3",
        r.direct.best == 1.0 && r.neighbor.best == 1.0 && ratio <= 10.0,
        format!(
            "type 4 {}/{}: best-of-{REPEATS} direct {:.2}% neighbor {:.2}% (need 100%), {:.1} s/run = {ratio:.2}x type 2 (limit 10x)",
            front.name,
            back.name,
            r.direct.best * 100.0,
            r.neighbor.best * 100.0,
            r.mean_ms / 1e3
        ),
    );
}

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

/// Turns the raster carrying `label` so that edge sits on `side` (clockwise
/// from the top). Front label k lies on side k of the front raster; primed
/// label k lies on side (4 - k) % 4 of the back raster as seen from behind.
fn pose(piece: &Piece, label: EdgeLabel, side: usize) -> FaceImage {
    let letter = label.letter() as usize;
    let (face, at) = if label.is_primed() {
        (Face::Back, (4 - letter) % 4)
    } else {
        (Face::Front, letter)
    };
    // One counter-clockwise quarter turn moves side s to side s - 1.
    let turns = (at + 4 - side) % 4;
    piece.face(face).lab.rotated_ccw(turns as u8)
}

fn brute_force(pi: &Piece, x: EdgeLabel, pj: &Piece, y: EdgeLabel) -> f64 {
    let left = pose(pi, x, 1);
    let right = pose(pj, y, 3);
    let w = left.size();
    let mut sum = 0.0;
    for k in 0..w {
        let (a, b) = (left.get(k, w - 1), right.get(k, 0));
        for band in 0..3 {
            sum += (a[band] - b[band]) * (a[band] - b[band]);
        }
    }
    sum.sqrt()
}

fn dissimilarity_oracle(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for ty in [PuzzleType::Type2, PuzzleType::Type4] {
        for pair in 0..1000u64 {
            let w = rng.gen_range(2..=12);
            let pieces = vec![
                random_piece(2 * pair, w, ty.two_sided(), &mut rng),
                random_piece(2 * pair + 1, w, ty.two_sided(), &mut rng),
            ];
            let spec = PuzzleSpec::new(1, 2, w, ty).unwrap();
            let table = build_table(&pieces, &spec);
            for x in EdgeLabel::all(ty.label_count()) {
                for y in EdgeLabel::all(ty.label_count()) {
                    let expected = brute_force(&pieces[0], x, &pieces[1], y);
                    let got = table.score(PieceEdge::new(0, x), PieceEdge::new(1, y));
                    worst = worst.max((got - expected).abs() / expected.max(f64::MIN_POSITIVE));
                    checked += 1;
                }
            }
        }
    }
    report.line(
        "4",
        checked == 1000 * (16 + 64) && worst <= 1e-12,
        format!("{checked} table scores against posed rasters, worst relative error {worst:.2e} (limit 1e-12)"),
    );
}

fn random_table(ty: PuzzleType, n: usize, rng: &mut ChaCha8Rng) -> CompatibilityTable {
    let l = ty.label_count();
    let slots = n * l;
    let levels = rng.gen_range(3..40);
    let mut scores = vec![f64::INFINITY; slots * slots];
    for a in 0..slots {
        for b in (a / l + 1) * l..slots {
            let v = rng.gen_range(0..levels) as f64;
            scores[a * slots + b] = v;
            scores[b * slots + a] = v;
        }
    }
    CompatibilityTable::from_scores(ty, n, scores)
}

fn face_coherent(child: &Chromosome) -> bool {
    let faces: std::collections::HashMap<usize, Face> = child.cells().iter().map(|p| (p.piece, p.face)).collect();
    child
        .adjacencies()
        .all(|r| r.first.label.face() == faces[&r.first.piece] && r.second.label.face() == faces[&r.second.piece])
}

fn crossover_properties(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let types = [PuzzleType::Type1, PuzzleType::Type2, PuzzleType::Type4];
    let (mut invocations, mut valid, mut idem, mut idem_runs, mut sound, mut coherent, mut coherent_runs) = (0, 0, 0, 0, 0, 0, 0);
    while invocations < 10_000 {
        let ty = types[rng.gen_range(0..3)];
        let spec = PuzzleSpec::new(rng.gen_range(1..=7), rng.gen_range(1..=7), 1, ty).unwrap();
        let table = random_table(ty, spec.piece_count(), &mut rng);
        let l = spec.label_count();
        for _ in 0..10 {
            let a = random_chromosome(&spec, &mut rng);
            let identical = rng.gen_bool(0.3);
            let b = if identical { a.clone() } else { random_chromosome(&spec, &mut rng) };
            let mutation = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.3) };
            let (ra, rb) = (relation_set(&a), relation_set(&b));
            let mut trace = Vec::new();
            let child = crossover_traced(&ParentView::new(&a, l), &ParentView::new(&b, l), &table, &spec, mutation, &mut rng, &mut trace);
            invocations += 1;
            let dims = (child.rows(), child.cols());
            if child.validate(&spec).is_ok() && (dims == (spec.rows, spec.cols) || dims == (spec.cols, spec.rows)) {
                valid += 1;
            }
            let child_set = relation_set(&child);
            let phases_ok = trace.len() + 1 == spec.piece_count()
                && trace.iter().all(|(phase, rel)| {
                    let c = rel.canonical();
                    child_set.contains(&c)
                        && match phase {
                            Phase::Shared => ra.contains(&c) && rb.contains(&c),
                            Phase::BestBuddy => table.is_best_buddy(rel) && (ra.contains(&c) || rb.contains(&c)),
                            Phase::Greedy | Phase::Mutation => true,
                        }
                });
            sound += phases_ok as usize;
            if identical {
                idem_runs += 1;
                idem += (child_set == ra) as usize;
            }
            if ty == PuzzleType::Type4 {
                coherent_runs += 1;
                coherent += face_coherent(&child) as usize;
            }
        }
    }
    let pass = valid == invocations && sound == invocations && idem == idem_runs && coherent == coherent_runs && idem_runs > 0 && coherent_runs > 0;
    report.line(
        "5",
        pass,
        format!(
            "{invocations} crossovers: valid {valid}/{invocations}, phase-sound {sound}/{invocations}, idempotent {idem}/{idem_runs}, face-coherent {coherent}/{coherent_runs}"
        ),
    );
    // Sanity check that plain crossover agrees with the traced one.
    let spec = PuzzleSpec::new(3, 4, 1, PuzzleType::Type4).unwrap();
    let table = random_table(PuzzleType::Type4, 12, &mut rng);
    let a = random_chromosome(&spec, &mut rng);
    let b = random_chromosome(&spec, &mut rng);
    let l = spec.label_count();
    let plain = crossover(&ParentView::new(&a, l), &ParentView::new(&b, l), &table, &spec, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
    let traced = crossover_traced(&ParentView::new(&a, l), &ParentView::new(&b, l), &table, &spec, 0.1, &mut ChaCha8Rng::seed_from_u64(1), &mut Vec::new());
    assert_eq!(plain, traced);
}

fn metric_invariance(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (mut same_neighbor, mut perfect_direct) = (0, 0);
    let pairs = 1000;
    for _ in 0..pairs {
        let ty = if rng.gen_bool(0.5) { PuzzleType::Type2 } else { PuzzleType::Type4 };
        let spec = PuzzleSpec::new(rng.gen_range(1..=8), rng.gen_range(1..=8), 1, ty).unwrap();
        let t = *spec.transforms().choose(&mut rng).unwrap();
        let truth = random_chromosome(&spec, &mut rng);
        let sol = random_chromosome(&spec, &mut rng);
        let moved = apply_dihedral(&sol, t, ty).unwrap();
        if neighbor_comparison(&sol, &truth, &spec).unwrap() == neighbor_comparison(&moved, &truth, &spec).unwrap() {
            same_neighbor += 1;
        }
        let moved_truth = apply_dihedral(&truth, t, ty).unwrap();
        let score = evaluate(&moved_truth, &truth, &spec).unwrap();
        if direct_comparison(&moved_truth, &truth, &spec).unwrap().0 == 1.0 && score.perfect {
            perfect_direct += 1;
        }
    }
    report.line(
        "6",
        same_neighbor == pairs && perfect_direct == pairs,
        format!("{pairs} (solution, transform) pairs: neighbor unchanged {same_neighbor}/{pairs}, transformed truth direct = 1.0 {perfect_direct}/{pairs}"),
    );
}

fn determinism(report: &mut Report, work: &Path) {
    let bundle = work.join("coffee");
    if !bundle.exists() {
        shred_photo(vec![photo_dir().join("coffee.png")], PuzzleType::Type2, &bundle);
    }
    let solve = |workers: &str| {
        let out = work.join(format!("det_{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_jigsaw"))
            .args(["solve", bundle.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--seed", "5", "--population", "300", "--generations", "10", "--workers", workers])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("solution.json")).unwrap()
    };
    let (one, eight) = (solve("1"), solve("8"));
    report.line(
        "7",
        one == eight,
        format!("solution.json with 1 and 8 workers: {}", if one == eight { "byte-identical" } else { "differs" }),
    );
}

fn selection_statistics(report: &mut Report) {
    let weights = [3.0, 2.0, 1.0];
    let wheel = Roulette::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let draws = 30_000;
    let mut counts = [0f64; 3];
    for _ in 0..draws {
        counts[wheel.sample(&mut rng)] += 1.0;
    }
    let stat: f64 = counts
        .iter()
        .zip(weights)
        .map(|(o, w)| {
            let e = draws as f64 * w / 6.0;
            (o - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(stat);
    report.line(
        "8",
        p > 0.001,
        format!("roulette 3:2:1 over {draws} draws: counts {counts:?}, chi-square {stat:.3}, p = {p:.4} (need > 0.001)"),
    );
}

fn main() {
    // The test harness passes flags such as --list; only run on a plain call.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let work = tempfile::tempdir().unwrap();
    let mut report = Report { failed: 0 };
    println!("acceptance suite");
    // ACCEPTANCE_ONLY=4,5 runs a subset; the default is every criterion.
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let want = |id: &str| only.as_deref().is_none_or(|o| o.split(',').any(|x| x.trim() == id));
    if want("1") {
        oracle_exactness(&mut report);
    }
    if want("2") || want("3") {
        let type2 = photo_benchmark(&mut report, work.path());
        two_sided_assembly(&mut report, work.path(), &type2);
    }
    if want("4") {
        dissimilarity_oracle(&mut report);
    }
    if want("5") {
        crossover_properties(&mut report);
    }
    if want("6") {
        metric_invariance(&mut report);
    }
    if want("7") {
        determinism(&mut report, work.path());
    }
    if want("8") {
        selection_statistics(&mut report);
    }
    println!("{} criteria failed", report.failed);
    if report.failed > 0 {
        std::process::exit(1);
    }
}
