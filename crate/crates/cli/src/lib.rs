//! Subcommands of the `jigsaw` tool.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use jigsaw_core::bundle;
use jigsaw_core::compat::{build_table, CompatibilityTable};
use jigsaw_core::eval::{evaluate, make_oracle_puzzle, ScoreReport};
use jigsaw_core::factory::{render, scramble, shred, shred_two_sided, PuzzleBundle};
use jigsaw_core::ga::{evolve, Evolution, GaConfig, GenerationStats};
use jigsaw_core::model::{Chromosome, Face, PuzzleSpec, PuzzleType};

pub const SOLUTION_FILE: &str = "solution.json";
pub const RUN_MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

/// Whether a failure was caused by the input or by the tool itself; they
/// map to distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, e) = match self {
            Failure::Input(e) => ("input error", e),
            Failure::Internal(e) => ("internal error", e),
        };
        write!(f, "{kind}")?;
        let mut last = String::new();
        for cause in e.chain() {
            let msg = cause.to_string();
            // Errors that already embed their source would repeat it.
            if !last.ends_with(&msg) {
                write!(f, ": {msg}")?;
            }
            last = msg;
        }
        Ok(())
    }
}

trait InputContext<T> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
    fn internal(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what())))
    }

    fn internal(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into().context(what())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "jigsaw", version, about = "Shred, solve and score square-piece jigsaw puzzles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut one image (two for Type 4: front and back) into a scrambled bundle.
    Shred(ShredArgs),
    /// Synthesize a puzzle whose true seams are the only zero-cost ones.
    Oracle(OracleArgs),
    /// Run the genetic algorithm on a bundle.
    Solve(SolveArgs),
    /// Score a solution against the bundle's ground truth.
    Eval(EvalArgs),
    /// Solve every bundle in a directory several times and aggregate scores.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// Puzzle type: 1, 2 or 4.
    #[arg(long = "type", value_parser = parse_type)]
    pub puzzle_type: PuzzleType,
    /// Tile side in pixels.
    #[arg(long)]
    pub tile: usize,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
}

impl SpecArgs {
    fn spec(&self) -> Result<PuzzleSpec, Failure> {
        PuzzleSpec::new(self.rows, self.cols, self.tile, self.puzzle_type).input(|| "bad puzzle shape".into())
    }
}

fn parse_type(s: &str) -> Result<PuzzleType, String> {
    let n: u8 = s.parse().map_err(|_| format!("{s:?} is not a puzzle type"))?;
    PuzzleType::try_from(n).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct ShredArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Front image, then the back image for Type 4.
    #[arg(required = true, num_args = 1..=2)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GaArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub population: usize,
    #[arg(long, default_value_t = 30)]
    pub generations: usize,
    #[arg(long, default_value_t = 4)]
    pub elites: usize,
    #[arg(long, default_value_t = 0.05)]
    pub mutation: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl GaArgs {
    pub fn config(&self) -> GaConfig {
        GaConfig {
            population_size: self.population,
            generations: self.generations,
            elite_count: self.elites,
            mutation_rate: self.mutation,
            master_seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub bundle: PathBuf,
    #[command(flatten)]
    pub ga: GaArgs,
    /// Output directory for the solution, run manifest and snapshots.
    #[arg(long)]
    pub out: PathBuf,
    /// Render the best assembly of every generation.
    #[arg(long)]
    pub snapshots: bool,
    /// Read the score table from this file if it matches the bundle, else
    /// compute it and write it there.
    #[arg(long)]
    pub table_cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub bundle: PathBuf,
    pub solution: PathBuf,
    /// Where to write the JSON report (default: next to the solution).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory whose subdirectories are bundles with ground truth.
    pub set: PathBuf,
    #[command(flatten)]
    pub ga: GaArgs,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableInfo {
    pub source: String,
    pub ms: f64,
}

/// Everything needed to rerun a solve: the command line, spec, GA settings
/// and input checksum, plus timings and scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub spec: PuzzleSpec,
    pub config: GaConfig,
    pub workers: Option<usize>,
    pub bundle_sha256: String,
    pub table: TableInfo,
    pub history: Vec<GenerationStats>,
    pub total_ms: f64,
    pub best_cost: f64,
    pub solution_sha256: String,
    pub score: Option<ScoreReport>,
}

pub struct SolveOutcome {
    pub evolution: Evolution,
    pub table: TableInfo,
    pub total_ms: f64,
    pub score: Option<ScoreReport>,
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match workers {
        Some(0) => Err(Failure::Input(anyhow!("--workers must be at least 1"))),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .internal(|| "cannot start worker threads".into())?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Builds (or loads) the score table and runs the GA on a loaded bundle,
/// scoring the result if the bundle carries a ground truth.
pub fn solve_bundle(
    puzzle: &PuzzleBundle,
    bundle_sha256: &str,
    config: &GaConfig,
    table_cache: Option<&Path>,
    observer: impl FnMut(&GenerationStats, &Chromosome),
) -> Result<SolveOutcome, Failure> {
    config.validate().input(|| "bad GA settings".into())?;
    let start = Instant::now();
    let (table, source) = load_or_build_table(puzzle, bundle_sha256, table_cache)?;
    let table_ms = start.elapsed().as_secs_f64() * 1e3;
    let evolution = evolve(&puzzle.spec, &table, config, observer).internal(|| "solver failed".into())?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let score = match &puzzle.ground_truth {
        Some(truth) => Some(evaluate(&evolution.best, truth, &puzzle.spec).internal(|| "scoring failed".into())?),
        None => None,
    };
    Ok(SolveOutcome {
        evolution,
        table: TableInfo { source, ms: table_ms },
        total_ms,
        score,
    })
}

fn load_or_build_table(
    puzzle: &PuzzleBundle,
    sha: &str,
    cache: Option<&Path>,
) -> Result<(CompatibilityTable, String), Failure> {
    if let Some(path) = cache {
        if path.exists() {
            if let Ok(t) = CompatibilityTable::load_cache(path, sha, &puzzle.spec) {
                return Ok((t, "cache".into()));
            }
        }
        let t = build_table(&puzzle.pieces, &puzzle.spec);
        t.save_cache(path, sha)
            .input(|| format!("cannot write table cache {}", path.display()))?;
        return Ok((t, "computed".into()));
    }
    Ok((build_table(&puzzle.pieces, &puzzle.spec), "computed".into()))
}

fn load(dir: &Path) -> Result<(PuzzleBundle, String), Failure> {
    let manifest = bundle::load_manifest(dir).input(|| format!("cannot read bundle {}", dir.display()))?;
    let puzzle = bundle::load_bundle(dir).input(|| format!("cannot read bundle {}", dir.display()))?;
    Ok((puzzle, manifest.bundle_sha256))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).internal(|| "cannot serialize output".into())?;
    fs::write(path, text + "\n").input(|| format!("cannot write {}", path.display()))
}

fn read_image(path: &Path) -> Result<image::RgbImage, Failure> {
    Ok(image::open(path)
        .input(|| format!("cannot read image {}", path.display()))?
        .to_rgb8())
}

pub fn cmd_shred(args: &ShredArgs) -> Result<PuzzleBundle, Failure> {
    let spec = args.spec.spec()?;
    let two_sided = spec.puzzle_type.two_sided();
    let expected = if two_sided { 2 } else { 1 };
    if args.images.len() != expected {
        return Err(Failure::Input(anyhow!(
            "{} takes {expected} image(s), got {}",
            spec.puzzle_type,
            args.images.len()
        )));
    }
    let front = read_image(&args.images[0])?;
    let cut = if two_sided {
        let back = read_image(&args.images[1])?;
        shred_two_sided(&front, &back, &spec, args.seed)
    } else {
        shred(&front, &spec, args.seed)
    }
    .input(|| "cannot shred".into())?;
    let puzzle = scramble(&cut, args.seed.wrapping_add(1));
    bundle::save_bundle(&puzzle, &args.out).input(|| format!("cannot write bundle {}", args.out.display()))?;
    Ok(puzzle)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<PuzzleBundle, Failure> {
    let spec = args.spec.spec()?;
    let puzzle = make_oracle_puzzle(&spec, args.seed).input(|| "cannot build oracle puzzle".into())?;
    bundle::save_bundle(&puzzle, &args.out).input(|| format!("cannot write bundle {}", args.out.display()))?;
    Ok(puzzle)
}

fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).input(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn cmd_solve(args: &SolveArgs, command: Vec<String>) -> Result<RunManifest, Failure> {
    let (puzzle, sha) = load(&args.bundle)?;
    let config = args.ga.config();
    fs::create_dir_all(&args.out).input(|| format!("cannot create {}", args.out.display()))?;
    let snapshot_dir = args.out.join("snapshots");
    if args.snapshots {
        fs::create_dir_all(&snapshot_dir).input(|| format!("cannot create {}", snapshot_dir.display()))?;
    }
    let mut snapshot_error = None;
    let observer = |stats: &GenerationStats, best: &Chromosome| {
        if !args.snapshots || snapshot_error.is_some() {
            return;
        }
        let mut faces = vec![Face::Front];
        if puzzle.spec.puzzle_type.two_sided() {
            faces.push(Face::Back);
        }
        for face in faces {
            let name = format!("gen_{:03}_{}.png", stats.generation, if face == Face::Front { "front" } else { "back" });
            if let Err(e) = render(&puzzle.pieces, best, face).save(snapshot_dir.join(&name)) {
                snapshot_error = Some(anyhow!(e).context(format!("cannot write snapshot {name}")));
            }
        }
    };
    let outcome = with_workers(args.ga.workers, || {
        solve_bundle(&puzzle, &sha, &config, args.table_cache.as_deref(), observer)
    })??;
    if let Some(e) = snapshot_error {
        return Err(Failure::Input(e));
    }
    let solution_path = args.out.join(SOLUTION_FILE);
    bundle::write_assembly(&solution_path, &outcome.evolution.best, &puzzle.ids())
        .input(|| format!("cannot write {}", solution_path.display()))?;
    let manifest = RunManifest {
        tool: "jigsaw".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        spec: puzzle.spec,
        config,
        workers: args.ga.workers,
        bundle_sha256: sha,
        table: outcome.table,
        history: outcome.evolution.history,
        total_ms: outcome.total_ms,
        best_cost: outcome.evolution.best_cost,
        solution_sha256: sha256_file(&solution_path)?,
        score: outcome.score,
    };
    write_json(&args.out.join(RUN_MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<ScoreReport, Failure> {
    let (puzzle, _) = load(&args.bundle)?;
    let truth = puzzle
        .ground_truth
        .as_ref()
        .ok_or_else(|| Failure::Input(anyhow!("bundle {} has no ground truth", args.bundle.display())))?;
    let solution = bundle::read_assembly(&args.solution, &puzzle.ids(), &puzzle.spec)
        .input(|| format!("cannot read solution {}", args.solution.display()))?;
    let report = evaluate(&solution, truth, &puzzle.spec).input(|| "solution does not fit the bundle".into())?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.solution
            .parent()
            .map(|p| p.join(REPORT_FILE))
            .unwrap_or_else(|| PathBuf::from(REPORT_FILE))
    });
    write_json(&out, &report)?;
    Ok(report)
}

/// Best, worst, mean and population standard deviation of a set of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub best: f64,
    pub worst: f64,
    pub average: f64,
    pub std_dev: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len() as f64;
        let average = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - average).powi(2)).sum::<f64>() / n;
        Spread {
            best: values.iter().copied().fold(f64::MIN, f64::max),
            worst: values.iter().copied().fold(f64::MAX, f64::min),
            average,
            std_dev: var.sqrt(),
        }
    }

    fn mean_of(items: &[Spread]) -> Spread {
        let n = items.len() as f64;
        let avg = |f: fn(&Spread) -> f64| items.iter().map(f).sum::<f64>() / n;
        Spread {
            best: avg(|s| s.best),
            worst: avg(|s| s.worst),
            average: avg(|s| s.average),
            std_dev: avg(|s| s.std_dev),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageResult {
    pub name: String,
    pub pieces: usize,
    pub direct: Spread,
    pub neighbor: Spread,
    pub perfect_runs: usize,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: GaConfig,
    pub repeats: usize,
    pub images: Vec<ImageResult>,
    pub direct: Spread,
    pub neighbor: Spread,
    /// Images reconstructed perfectly in at least one run.
    pub perfect_images: usize,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<24} {:>6}  {:>8} {:>8} {:>8} {:>7}  {:>8} {:>8} {:>8} {:>7}  {:>7} {:>9}\n",
            "image", "pieces", "dir.best", "dir.wrst", "dir.avg", "dir.sd", "nbr.best", "nbr.wrst", "nbr.avg", "nbr.sd", "perfect", "ms/run"
        );
        let pct = |v: f64| format!("{:.2}%", v * 100.0);
        let mut row = |name: &str, pieces: String, d: &Spread, n: &Spread, perfect: String, ms: String| {
            s.push_str(&format!(
                "{:<24} {:>6}  {:>8} {:>8} {:>8} {:>7}  {:>8} {:>8} {:>8} {:>7}  {:>7} {:>9}\n",
                name,
                pieces,
                pct(d.best),
                pct(d.worst),
                pct(d.average),
                pct(d.std_dev),
                pct(n.best),
                pct(n.worst),
                pct(n.average),
                pct(n.std_dev),
                perfect,
                ms
            ));
        };
        for r in &self.images {
            row(
                &r.name,
                r.pieces.to_string(),
                &r.direct,
                &r.neighbor,
                format!("{}/{}", r.perfect_runs, self.repeats),
                format!("{:.0}", r.mean_ms),
            );
        }
        row(
            "average",
            String::new(),
            &self.direct,
            &self.neighbor,
            format!("{}/{}", self.perfect_images, self.images.len()),
            String::new(),
        );
        s
    }
}

/// Solves `puzzle` `repeats` times with seeds `seed, seed+1, ...`, reusing
/// one score table.
pub fn bench_one(
    name: &str,
    puzzle: &PuzzleBundle,
    config: &GaConfig,
    repeats: usize,
) -> Result<ImageResult, Failure> {
    let truth = puzzle
        .ground_truth
        .as_ref()
        .ok_or_else(|| Failure::Input(anyhow!("bundle {name} has no ground truth")))?;
    let table = build_table(&puzzle.pieces, &puzzle.spec);
    let mut direct = Vec::with_capacity(repeats);
    let mut neighbor = Vec::with_capacity(repeats);
    let mut perfect_runs = 0;
    let mut total_ms = 0.0;
    for r in 0..repeats {
        let cfg = GaConfig {
            master_seed: config.master_seed.wrapping_add(r as u64),
            ..*config
        };
        let start = Instant::now();
        let evo = evolve(&puzzle.spec, &table, &cfg, |_, _| {}).input(|| "bad GA settings".into())?;
        total_ms += start.elapsed().as_secs_f64() * 1e3;
        let score = evaluate(&evo.best, truth, &puzzle.spec).internal(|| "scoring failed".into())?;
        direct.push(score.direct);
        neighbor.push(score.neighbor);
        perfect_runs += score.perfect as usize;
    }
    Ok(ImageResult {
        name: name.to_string(),
        pieces: puzzle.spec.piece_count(),
        direct: Spread::of(&direct),
        neighbor: Spread::of(&neighbor),
        perfect_runs,
        mean_ms: total_ms / repeats as f64,
    })
}

pub fn aggregate(config: GaConfig, repeats: usize, images: Vec<ImageResult>) -> BenchReport {
    let direct = Spread::mean_of(&images.iter().map(|i| i.direct).collect::<Vec<_>>());
    let neighbor = Spread::mean_of(&images.iter().map(|i| i.neighbor).collect::<Vec<_>>());
    let perfect_images = images.iter().filter(|i| i.perfect_runs > 0).count();
    BenchReport {
        config,
        repeats,
        images,
        direct,
        neighbor,
        perfect_images,
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, Failure> {
    if args.repeats == 0 {
        return Err(Failure::Input(anyhow!("--repeats must be at least 1")));
    }
    let config = args.ga.config();
    config.validate().input(|| "bad GA settings".into())?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(&args.set)
        .input(|| format!("cannot list {}", args.set.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(bundle::MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Input(anyhow!("no bundles in {}", args.set.display())));
    }
    let report = with_workers(args.ga.workers, || -> Result<BenchReport, Failure> {
        let mut images = Vec::with_capacity(dirs.len());
        for dir in &dirs {
            let (puzzle, _) = load(dir)?;
            let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let result = bench_one(&name, &puzzle, &config, args.repeats)?;
            eprintln!(
                "{name}: neighbor best {:.2}% direct best {:.2}%",
                result.neighbor.best * 100.0,
                result.direct.best * 100.0
            );
            images.push(result);
        }
        Ok(aggregate(config, args.repeats, images))
    })??;
    fs::create_dir_all(&args.out).input(|| format!("cannot create {}", args.out.display()))?;
    write_json(&args.out.join("bench.json"), &report)?;
    let table = report.table();
    fs::write(args.out.join("bench.txt"), &table).input(|| "cannot write bench.txt".into())?;
    print!("{table}");
    Ok(report)
}

/// Parses `argv` and runs the chosen subcommand.
pub fn run(argv: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(Failure::Input(anyhow!(e.to_string()))),
        Err(e) => {
            print!("{e}");
            return Ok(());
        }
    };
    match cli.command {
        Command::Shred(a) => {
            let b = cmd_shred(&a)?;
            println!("wrote {} pieces to {}", b.pieces.len(), a.out.display());
        }
        Command::Oracle(a) => {
            let b = cmd_oracle(&a)?;
            println!("wrote {} pieces to {}", b.pieces.len(), a.out.display());
        }
        Command::Solve(a) => {
            let m = cmd_solve(&a, argv.clone())?;
            println!("best cost {:.6} after {} generations", m.best_cost, m.history.len() - 1);
            if let Some(s) = m.score {
                println!("direct {:.4} neighbor {:.4} perfect {}", s.direct, s.neighbor, s.perfect);
            }
        }
        Command::Eval(a) => {
            let s = cmd_eval(&a)?;
            println!(
                "direct {:.4} neighbor {:.4} perfect {} transform {}x90{}",
                s.direct,
                s.neighbor,
                s.perfect,
                s.best_transform.quarter_turns,
                if s.best_transform.flip { " flipped" } else { "" }
            );
        }
        Command::Bench(a) => {
            cmd_bench(&a)?;
        }
    }
    Ok(())
}
