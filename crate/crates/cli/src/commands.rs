use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use berthcast_core::classifier::{train, ClassifierError, ModelParams, RouteState};
use berthcast_core::embedding::{embed_point, FeatureVector5, Vec5};
use berthcast_core::evaluation::{
    score_dataset, write_synthetic_csv, EvalError, Scores, SyntheticConfig,
};
use berthcast_core::ingest::parse_ais_csv;
use berthcast_core::route_model::{partition_routes, Route};
use berthcast_core::spatial_index::{
    brute_nearest, BallTree, BruteForce, KdTree, NearestNeighborIndex, Neighbor,
};
use berthcast_core::tuner::{evolve, Evolution, GaConfig, TuneError};

use crate::params_file::{format_params, parse_params};
use crate::predictions::{write_predictions, PredictionRow};
use crate::CliError;

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// (one worker per core) when `threads` is `None`.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses an AIS file into routes. Row errors are reported on `warn` and
/// skipped; a file without any valid row is an empty dataset.
pub fn load_routes(
    path: &Path,
    labeled: bool,
    warn: &mut dyn Write,
) -> Result<Vec<Route>, CliError> {
    let bytes = read_file(path)?;
    let parsed = parse_ais_csv(bytes.as_slice(), labeled).map_err(|e| CliError::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    for e in &parsed.errors {
        let _ = writeln!(warn, "warning: {}: {e}", path.display());
    }
    if parsed.records.is_empty() {
        return Err(CliError::EmptyDataset(path.to_path_buf()));
    }
    Ok(partition_routes(parsed.records))
}

pub fn load_params(path: Option<&Path>) -> Result<ModelParams, CliError> {
    match path {
        None => Ok(ModelParams::default()),
        Some(p) => {
            let bytes = read_file(p)?;
            let text = String::from_utf8(bytes).map_err(|_| CliError::Params {
                path: p.to_path_buf(),
                message: "not UTF-8".into(),
            })?;
            parse_params(&text).map_err(|e| CliError::Params {
                path: p.to_path_buf(),
                message: e.to_string(),
            })
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn train_model(routes: &[Route], params: ModelParams) -> Result<berthcast_core::Model, CliError> {
    train(routes, params).map_err(|e| match e {
        ClassifierError::NoTrainingRoutes => CliError::NoRoutes,
        other => CliError::Model(other.to_string()),
    })
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    /// Labeled training routes.
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled routes to replay and score.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[arg(long)]
    pub no_smoothing: bool,
}

pub fn evaluate(
    args: &EvaluateArgs,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<Scores, CliError> {
    let mut params = load_params(args.params.as_deref())?;
    if args.no_smoothing {
        params.smoothing_enabled = false;
    }
    let train_routes = load_routes(&args.train, true, warn)?;
    let test_routes = load_routes(&args.test, true, warn)?;
    let scores = with_threads(args.threads.map(usize::from), || {
        let model = train_model(&train_routes, params)?;
        score_dataset(&model, &test_routes).map_err(|e| match e {
            EvalError::NoRoutes => CliError::NoRoutes,
            other => CliError::Model(other.to_string()),
        })
    })?;
    scores.write_csv(out).map_err(stdout_err)?;
    Ok(scores)
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Query points (unlabeled schema; arrival columns are ignored).
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
}

/// Writes one prediction row per query point, in input order. Returns the
/// number of rows.
pub fn predict(
    args: &PredictArgs,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<usize, CliError> {
    let params = load_params(args.params.as_deref())?;
    let train_routes = load_routes(&args.train, true, warn)?;
    let query_routes = load_routes(&args.query, false, warn)?;
    let rows = with_threads(args.threads.map(usize::from), || {
        let model = train_model(&train_routes, params)?;
        let mut rows: Vec<(usize, PredictionRow)> = query_routes
            .par_iter()
            .flat_map_iter(|route| {
                let mut state = RouteState::new();
                route
                    .points
                    .iter()
                    .enumerate()
                    .map(|(seq, p)| {
                        let pred = model.classify_point(&mut state, p);
                        (
                            p.source_index,
                            PredictionRow {
                                route_key: route.route_id.to_string(),
                                seq,
                                predicted_port: pred.port.to_string(),
                                predicted_arrival: pred.arrival,
                                raw_port: pred.raw_port.to_string(),
                            },
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, r)| r).collect::<Vec<_>>())
    })?;
    write_predictions(out, &rows).map_err(stdout_err)?;
    Ok(rows.len())
}

#[derive(Args, Debug, Clone)]
pub struct TuneArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub generations: usize,
    #[arg(long, default_value_t = 32)]
    pub population: usize,
    #[arg(long)]
    pub seed: u64,
    /// Base parameters; normalizers, leaf size and smoothing come from here.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Where to write the best parameters.
    #[arg(long, default_value = "params.txt")]
    pub out: PathBuf,
    /// Per-generation fitness history (CSV).
    #[arg(long, default_value = "tune_history.csv")]
    pub history: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
}

pub fn tune(
    args: &TuneArgs,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<Evolution, CliError> {
    let base = load_params(args.params.as_deref())?;
    let routes = load_routes(&args.train, true, warn)?;
    let cfg = GaConfig {
        population: args.population,
        generations: args.generations,
        seed: args.seed,
        ..GaConfig::default()
    };
    let evo = with_threads(args.threads.map(usize::from), || {
        evolve(&routes, &cfg, &base).map_err(|e| match e {
            TuneError::NotEnoughRoutes(_) => CliError::NoRoutes,
            TuneError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Model(other.to_string()),
        })
    })?;

    let mut f = create(&args.out)?;
    f.write_all(format_params(&evo.best.to_params(&base)).as_bytes())
        .and_then(|_| f.flush())
        .map_err(io_err(&args.out))?;

    let mut h = create(&args.history)?;
    let write_history = |h: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(h, "generation,best_fitness,mean_fitness")?;
        for g in &evo.history {
            writeln!(h, "{},{},{}", g.generation, g.best_fitness, g.mean_fitness)?;
        }
        h.flush()
    };
    write_history(&mut h).map_err(io_err(&args.history))?;

    writeln!(
        out,
        "best_fitness={} baseline_fitness={} params={} history={}",
        evo.best_fitness,
        evo.baseline_fitness,
        args.out.display(),
        args.history.display()
    )
    .map_err(stdout_err)?;
    Ok(evo)
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Balltree,
    Kdtree,
    Brute,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::Balltree => "balltree",
            Structure::Kdtree => "kdtree",
            Structure::Brute => "brute",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Structures to time; repeat the flag for several. Defaults to all.
    #[arg(long, value_enum)]
    pub structure: Vec<Structure>,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Supplies the feature magnitudes and leaf size.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct StructureTiming {
    pub structure: Structure,
    pub build: Duration,
    pub mean_query: Duration,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub points: usize,
    pub queries: usize,
    pub timings: Vec<StructureTiming>,
}

impl BenchReport {
    pub fn timing(&self, s: Structure) -> Option<&StructureTiming> {
        self.timings.iter().find(|t| t.structure == s)
    }
}

/// Query vectors: embedded training points jittered with Gaussian noise.
pub fn bench_queries(points: &[FeatureVector5], n: usize, seed: u64) -> Vec<Vec5> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    (0..n)
        .map(|_| {
            let base = points[rng.random_range(0..points.len())].v;
            base.map(|x| x + noise.sample(&mut rng))
        })
        .collect()
}

fn build_index(
    s: Structure,
    points: &[FeatureVector5],
    leaf_size: usize,
) -> Result<Box<dyn NearestNeighborIndex>, CliError> {
    let points = points.to_vec();
    let index: Box<dyn NearestNeighborIndex> = match s {
        Structure::Balltree => Box::new(
            BallTree::build(points, leaf_size).map_err(|e| CliError::Model(e.to_string()))?,
        ),
        Structure::Kdtree => {
            Box::new(KdTree::build(points, leaf_size).map_err(|e| CliError::Model(e.to_string()))?)
        }
        Structure::Brute => {
            Box::new(BruteForce::new(points).map_err(|e| CliError::Model(e.to_string()))?)
        }
    };
    Ok(index)
}

/// Indexes every training point, checks each structure against a linear
/// scan on the whole query set, then times construction and queries.
pub fn bench(
    args: &BenchArgs,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<BenchReport, CliError> {
    let params = load_params(args.params.as_deref())?;
    let routes = load_routes(&args.train, true, warn)?;
    let points: Vec<FeatureVector5> = routes
        .iter()
        .flat_map(|r| r.points.iter())
        .enumerate()
        .map(|(id, p)| FeatureVector5 {
            id,
            v: embed_point(p, &params.weights),
        })
        .collect();
    let structures = if args.structure.is_empty() {
        vec![Structure::Balltree, Structure::Kdtree, Structure::Brute]
    } else {
        args.structure.clone()
    };
    let queries = bench_queries(&points, args.queries, args.seed);

    let expected: Vec<Neighbor> = queries
        .iter()
        .map(|q| brute_nearest(&points, q).expect("non-empty dataset"))
        .collect();
    let mut indexes = Vec::with_capacity(structures.len());
    for &s in &structures {
        let started = Instant::now();
        let index = build_index(s, &points, params.leaf_size)?;
        let build = started.elapsed();
        for (q, want) in queries.iter().zip(&expected) {
            let got = index.nearest(q);
            if got != *want {
                return Err(CliError::Bench(format!(
                    "{} returned {got:?}, linear scan {want:?}",
                    s.name()
                )));
            }
        }
        indexes.push((s, index, build));
    }
    writeln!(out, "points={} queries={}", points.len(), queries.len()).map_err(stdout_err)?;
    writeln!(out, "correctness=ok structures={}", structures.len()).map_err(stdout_err)?;

    let mut timings = Vec::with_capacity(indexes.len());
    for (s, index, build) in indexes {
        let started = Instant::now();
        let mut checksum = 0usize;
        for q in &queries {
            checksum = checksum.wrapping_add(std::hint::black_box(index.nearest(q)).id);
        }
        std::hint::black_box(checksum);
        let mean_query = started.elapsed() / queries.len().max(1) as u32;
        writeln!(
            out,
            "structure={} build_ms={:.3} mean_query_us={:.3}",
            s.name(),
            build.as_secs_f64() * 1e3,
            mean_query.as_secs_f64() * 1e6
        )
        .map_err(stdout_err)?;
        timings.push(StructureTiming {
            structure: s,
            build,
            mean_query,
        });
    }
    Ok(BenchReport {
        points: points.len(),
        queries: queries.len(),
        timings,
    })
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long)]
    pub ports: usize,
    #[arg(long)]
    pub routes_per_port: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub min_points: usize,
    #[arg(long, default_value_t = 60)]
    pub max_points: usize,
    /// Position noise standard deviation, degrees.
    #[arg(long, default_value_t = 0.02)]
    pub noise_deg: f64,
}

impl GenArgs {
    pub fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n_ports: self.ports,
            routes_per_port: self.routes_per_port,
            min_points: self.min_points,
            max_points: self.max_points,
            noise_sigma_deg: self.noise_deg,
            seed: self.seed,
            ..SyntheticConfig::default()
        }
    }
}

/// Returns `(routes, points)` written.
pub fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<(usize, usize), CliError> {
    let cfg = args.config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut f = create(&args.out)?;
    let counts = write_synthetic_csv(&cfg, &mut f)
        .and_then(|c| f.flush().map(|_| c))
        .map_err(io_err(&args.out))?;
    writeln!(out, "routes={} points={}", counts.0, counts.1).map_err(stdout_err)?;
    Ok(counts)
}
