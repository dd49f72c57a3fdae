//! Genetic-algorithm tuning of the five feature magnitudes and four
//! similarity penalties.
//!
//! Fitness trains a model on one split of the routes and scores it on the
//! other: `avg_earliness + lambda * max(0, 1 - mae_minutes / 1440)`. Every
//! random draw comes from one seeded stream consumed sequentially; only the
//! fitness evaluations run in parallel, so results do not depend on the
//! thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{train, ClassifierError, ModelParams, Penalties};
use crate::embedding::FeatureWeights;
use crate::evaluation::{score_dataset, EvalError};
use crate::route_model::Route;

pub const GENES: usize = 9;
const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("need at least two labeled routes to split, got {0}")]
    NotEnoughRoutes(usize),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `[m_x, m_y, m_z, m_sin, m_cos, p_course, p_heading, p_speed, p_dist]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Genome(pub [f64; GENES]);

impl Genome {
    pub fn from_params(params: &ModelParams) -> Self {
        let w = &params.weights;
        let p = &params.penalties;
        Genome([
            w.x,
            w.y,
            w.z,
            w.bearing_sin,
            w.bearing_cos,
            p.course,
            p.heading,
            p.speed,
            p.dist,
        ])
    }

    /// `base` with the tuned genes substituted; normalizers, leaf size and
    /// smoothing are left alone.
    pub fn to_params(&self, base: &ModelParams) -> ModelParams {
        let g = &self.0;
        ModelParams {
            weights: FeatureWeights {
                x: g[0],
                y: g[1],
                z: g[2],
                bearing_sin: g[3],
                bearing_cos: g[4],
            },
            penalties: Penalties {
                course: g[5],
                heading: g[6],
                speed: g[7],
                dist: g[8],
            },
            ..*base
        }
    }

    pub fn upper_bound(gene: usize, p_max: f64) -> f64 {
        if gene < 5 {
            1.0
        } else {
            p_max
        }
    }

    pub fn clamp(&mut self, p_max: f64) {
        for (i, g) in self.0.iter_mut().enumerate() {
            *g = g.clamp(0.0, Self::upper_bound(i, p_max));
        }
    }

    pub fn within_bounds(&self, p_max: f64) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &g)| (0.0..=Self::upper_bound(i, p_max)).contains(&g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub gene_mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub elite_count: usize,
    pub p_max: f64,
    pub seed: u64,
    pub fitness_lambda: f64,
    pub split_fraction: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 32,
            generations: 20,
            tournament_size: 3,
            crossover_rate: 0.9,
            gene_mutation_rate: 0.2,
            mutation_sigma: 0.1,
            elite_count: 2,
            p_max: 10.0,
            seed: 0,
            fitness_lambda: 0.5,
            split_fraction: 0.8,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::InvalidConfig(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.elite_count >= self.population {
            return bad("elite_count must be below population");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1");
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("gene_mutation_rate", self.gene_mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} outside [0, 1]"));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return bad("mutation_sigma must be non-negative");
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad("p_max must be positive");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction must be inside (0, 1)");
        }
        if self.fitness_lambda.is_nan() || self.fitness_lambda < 0.0 {
            return bad("fitness_lambda must be non-negative");
        }
        Ok(())
    }
}

/// Shuffles route indexes with `seed` and cuts at `fraction`; both sides
/// are non-empty whenever there are at least two routes.
pub fn split_routes(
    routes: &[Route],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Route>, Vec<Route>), TuneError> {
    if routes.len() < 2 {
        return Err(TuneError::NotEnoughRoutes(routes.len()));
    }
    let mut order: Vec<usize> = (0..routes.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((routes.len() as f64 * fraction).round() as usize).clamp(1, routes.len() - 1);
    let (a, b) = order.split_at(cut);
    let pick = |ix: &[usize]| ix.iter().map(|&i| routes[i].clone()).collect::<Vec<_>>();
    Ok((pick(a), pick(b)))
}

pub fn fitness(
    genome: &Genome,
    base: &ModelParams,
    train_routes: &[Route],
    val_routes: &[Route],
    lambda: f64,
) -> Result<f64, TuneError> {
    let model = train(train_routes, genome.to_params(base))?;
    let scores = score_dataset(&model, val_routes)?;
    Ok(blend(scores.avg_earliness, scores.mae_minutes, lambda))
}

/// Combined score; the arrival term vanishes at one day of mean error.
pub fn blend(avg_earliness: f64, mae_minutes: f64, lambda: f64) -> f64 {
    avg_earliness + lambda * (1.0 - mae_minutes / MINUTES_PER_DAY).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness seen up to and including this generation.
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub best: Genome,
    pub best_fitness: f64,
    /// Fitness of the untuned `base` parameters on the same split.
    pub baseline_fitness: f64,
    /// One entry per generation, starting with generation 0.
    pub history: Vec<GenerationStats>,
}

#[derive(Clone, Copy)]
struct Scored {
    genome: Genome,
    fitness: f64,
}

pub fn evolve(
    routes: &[Route],
    cfg: &GaConfig,
    base: &ModelParams,
) -> Result<Evolution, TuneError> {
    cfg.validate()?;
    let (train_routes, val_routes) = split_routes(routes, cfg.split_fraction, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let seed_genome = {
        let mut g = Genome::from_params(base);
        g.clamp(cfg.p_max);
        g
    };
    let mut genomes = vec![seed_genome];
    while genomes.len() < cfg.population {
        genomes.push(Genome(std::array::from_fn(|i| {
            rng.random_range(0.0..=Genome::upper_bound(i, cfg.p_max))
        })));
    }

    let evaluate = |genomes: &[Genome]| -> Result<Vec<Scored>, TuneError> {
        genomes
            .par_iter()
            .map(|g| {
                Ok(Scored {
                    genome: *g,
                    fitness: fitness(g, base, &train_routes, &val_routes, cfg.fitness_lambda)?,
                })
            })
            .collect()
    };

    let mut population = evaluate(&genomes)?;
    let baseline_fitness = population[0].fitness;
    let mut best = population[0];
    let mut history = Vec::with_capacity(cfg.generations + 1);
    record(&population, &mut best, 0, &mut history);

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for generation in 1..=cfg.generations {
        // elites: highest fitness first, earlier index on ties
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| {
            population[b]
                .fitness
                .total_cmp(&population[a].fitness)
                .then(a.cmp(&b))
        });
        let elites: Vec<Scored> = ranked[..cfg.elite_count]
            .iter()
            .map(|&i| population[i])
            .collect();

        let mut children = Vec::with_capacity(cfg.population - cfg.elite_count);
        while children.len() < cfg.population - cfg.elite_count {
            let a = tournament(&population, cfg.tournament_size, &mut rng);
            let b = tournament(&population, cfg.tournament_size, &mut rng);
            let (mut c1, mut c2) = (a, b);
            if rng.random::<f64>() < cfg.crossover_rate {
                for i in 0..GENES {
                    if rng.random::<f64>() < 0.5 {
                        std::mem::swap(&mut c1.0[i], &mut c2.0[i]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for i in 0..GENES {
                    if rng.random::<f64>() < cfg.gene_mutation_rate {
                        let sigma = cfg.mutation_sigma * Genome::upper_bound(i, cfg.p_max);
                        child.0[i] += sigma * unit.sample(&mut rng);
                    }
                }
                child.clamp(cfg.p_max);
            }
            children.push(c1);
            if children.len() < cfg.population - cfg.elite_count {
                children.push(c2);
            }
        }

        let mut next = elites;
        next.extend(evaluate(&children)?);
        population = next;
        record(&population, &mut best, generation, &mut history);
    }

    Ok(Evolution {
        best: best.genome,
        best_fitness: best.fitness,
        baseline_fitness,
        history,
    })
}

fn tournament(population: &[Scored], size: usize, rng: &mut ChaCha8Rng) -> Genome {
    let mut winner = rng.random_range(0..population.len());
    for _ in 1..size {
        let c = rng.random_range(0..population.len());
        if population[c].fitness > population[winner].fitness {
            winner = c;
        }
    }
    population[winner].genome
}

fn record(
    population: &[Scored],
    best: &mut Scored,
    generation: usize,
    history: &mut Vec<GenerationStats>,
) {
    for s in population {
        if s.fitness > best.fitness {
            *best = *s;
        }
    }
    let mean = population.iter().map(|s| s.fitness).sum::<f64>() / population.len() as f64;
    history.push(GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness: mean,
    });
}
