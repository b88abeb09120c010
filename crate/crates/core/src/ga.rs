//! Generational genetic algorithm over bounded integer genomes.
//!
//! Roulette-wheel selection, single-point crossover, per-gene uniform
//! resampling as mutation, optional elitism, and a stop rule that fires on a
//! generation budget, a stalled best fitness, or a fitness threshold.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Rng, Stream};

/// Minimum roulette weight after shifting fitness values.
pub const MIN_SELECTION_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneBound {
    pub min: i64,
    pub max: i64,
}

impl GeneBound {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::domain(format!("empty gene bound [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, g: i64) -> bool {
        (self.min..=self.max).contains(&g)
    }

    fn sample(&self, rng: &mut Rng) -> i64 {
        rng.gen_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeSpec {
    pub bounds: Vec<GeneBound>,
}

impl GenomeSpec {
    pub fn new(bounds: Vec<GeneBound>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::domain("genome needs at least one gene"));
        }
        if let Some(b) = bounds.iter().find(|b| b.min > b.max) {
            return Err(Error::domain(format!(
                "empty gene bound [{}, {}]",
                b.min, b.max
            )));
        }
        Ok(Self { bounds })
    }

    /// `len` genes sharing one bound.
    pub fn uniform(len: usize, min: i64, max: i64) -> Result<Self> {
        Self::new(vec![GeneBound::new(min, max)?; len])
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn contains(&self, genes: &[i64]) -> bool {
        genes.len() == self.len() && genes.iter().zip(&self.bounds).all(|(g, b)| b.contains(*g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genes: Vec<i64>,
    /// `None` until evaluated; `-inf` marks an individual the evaluator rejected.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genes: Vec<i64>) -> Self {
        Self {
            genes,
            fitness: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.fitness.is_some_and(f64::is_finite)
    }

    fn fitness_or_min(&self) -> f64 {
        self.fitness
            .filter(|f| f.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub generation: usize,
    pub individuals: Vec<Individual>,
    /// Fitness evaluations performed so far in the run.
    pub evaluations: usize,
}

impl Population {
    /// Best valid individual; earlier index wins ties.
    pub fn best(&self) -> Option<&Individual> {
        self.individuals
            .iter()
            .filter(|i| i.is_valid())
            .fold(None, |best, ind| match best {
                Some(b) if b.fitness_or_min() >= ind.fitness_or_min() => Some(b),
                _ => Some(ind),
            })
    }

    pub fn mean_fitness(&self) -> Option<f64> {
        let valid: Vec<f64> = self
            .individuals
            .iter()
            .filter(|i| i.is_valid())
            .map(Individual::fitness_or_min)
            .collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 30,
            crossover_rate: 0.9,
            mutation_rate: 0.02,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.population < 2 {
            errs.push(format!(
                "ga.population must be at least 2, got {}",
                self.population
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            errs.push(format!(
                "ga.crossover_rate must lie in [0, 1], got {}",
                self.crossover_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            errs.push(format!(
                "ga.mutation_rate must lie in [0, 1], got {}",
                self.mutation_rate
            ));
        }
        if self.elitism > self.population {
            errs.push(format!(
                "ga.elitism {} exceeds population {}",
                self.elitism, self.population
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingCriteria {
    /// Generation budget, counting the initial population.
    pub max_generations: usize,
    /// Stop once the best fitness changes by less than this between
    /// consecutive generations. Zero never fires.
    pub min_delta: f64,
    pub fitness_threshold: Option<f64>,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self {
            max_generations: 100,
            min_delta: 0.0,
            fitness_threshold: None,
        }
    }
}

impl StoppingCriteria {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.max_generations < 1 {
            errs.push("ga.max_generations must be at least 1".to_string());
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            errs.push(format!(
                "ga.min_delta must be non-negative, got {}",
                self.min_delta
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Fitness to maximize. An `Err` marks the genome invalid.
pub trait Fitness: Sync {
    fn evaluate(&self, genes: &[i64]) -> std::result::Result<f64, String>;
}

impl<F> Fitness for F
where
    F: Fn(&[i64]) -> std::result::Result<f64, String> + Sync,
{
    fn evaluate(&self, genes: &[i64]) -> std::result::Result<f64, String> {
        self(genes)
    }
}

/// Count of genes equal to 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct OneMax;

impl Fitness for OneMax {
    fn evaluate(&self, genes: &[i64]) -> std::result::Result<f64, String> {
        Ok(genes.iter().filter(|&&g| g == 1).count() as f64)
    }
}

/// Negated sum of squares; optimum 0 at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sphere;

impl Fitness for Sphere {
    fn evaluate(&self, genes: &[i64]) -> std::result::Result<f64, String> {
        Ok(-genes.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>())
    }
}

pub fn init_population(spec: &GenomeSpec, size: usize, rng: &mut Rng) -> Population {
    let individuals = (0..size)
        .map(|_| Individual::new(spec.bounds.iter().map(|b| b.sample(rng)).collect()))
        .collect();
    Population {
        generation: 0,
        individuals,
        evaluations: 0,
    }
}

/// Scores every unevaluated individual. Evaluations run in parallel and are
/// written back by index.
pub fn evaluate(mut pop: Population, fitness: &dyn Fitness) -> Population {
    let pending: Vec<usize> = pop
        .individuals
        .iter()
        .enumerate()
        .filter(|(_, ind)| ind.fitness.is_none())
        .map(|(i, _)| i)
        .collect();
    let scores: Vec<(usize, f64)> = pending
        .par_iter()
        .map(|&i| {
            let score = match fitness.evaluate(&pop.individuals[i].genes) {
                Ok(f) if f.is_finite() => f,
                Ok(f) => {
                    log::warn!(
                        "non-finite fitness {f} for {:?}; marking invalid",
                        pop.individuals[i].genes
                    );
                    f64::NEG_INFINITY
                }
                Err(e) => {
                    log::warn!("invalid individual {:?}: {e}", pop.individuals[i].genes);
                    f64::NEG_INFINITY
                }
            };
            (i, score)
        })
        .collect();
    pop.evaluations += scores.len();
    for (i, f) in scores {
        pop.individuals[i].fitness = Some(f);
    }
    pop
}

/// Roulette probabilities. Fitness is shifted up when needed so the smallest
/// valid weight is at least [`MIN_SELECTION_WEIGHT`]; invalid individuals get 0.
pub fn selection_probabilities(pop: &Population) -> Result<Vec<f64>> {
    if pop.individuals.iter().any(|i| i.fitness.is_none()) {
        return Err(Error::domain(
            "selection requires every individual to be evaluated",
        ));
    }
    let min = pop
        .individuals
        .iter()
        .filter(|i| i.is_valid())
        .map(Individual::fitness_or_min)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::domain("no valid individuals to select from"));
    }
    let shift = (MIN_SELECTION_WEIGHT - min).max(0.0);
    let weights: Vec<f64> = pop
        .individuals
        .iter()
        .map(|i| {
            if i.is_valid() {
                i.fitness_or_min() + shift
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn spin(probs: &[f64], rng: &mut Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_valid = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_valid = i;
            acc += p;
            if r < acc {
                return i;
            }
        }
    }
    last_valid
}

pub fn select_parent<'a>(pop: &'a Population, rng: &mut Rng) -> Result<&'a Individual> {
    let probs = selection_probabilities(pop)?;
    Ok(&pop.individuals[spin(&probs, rng)])
}

/// Single-point crossover at a fixed cut `q` (1 <= q < k).
pub fn crossover_at(a: &Individual, b: &Individual, q: usize) -> Result<(Individual, Individual)> {
    let k = a.genes.len();
    if b.genes.len() != k {
        return Err(Error::domain(format!(
            "parent lengths differ: {k} vs {}",
            b.genes.len()
        )));
    }
    if q == 0 || q >= k {
        return Err(Error::domain(format!(
            "crossover point {q} outside [1, {}]",
            k.saturating_sub(1)
        )));
    }
    let child = |x: &Individual, y: &Individual| {
        let mut genes = x.genes[..q].to_vec();
        genes.extend_from_slice(&y.genes[q..]);
        Individual::new(genes)
    };
    Ok((child(a, b), child(b, a)))
}

/// With probability `rate` cuts both parents at a uniform point and swaps
/// tails; otherwise returns copies of the parents.
pub fn crossover(
    a: &Individual,
    b: &Individual,
    rng: &mut Rng,
    rate: f64,
) -> Result<(Individual, Individual)> {
    let k = a.genes.len();
    if b.genes.len() != k {
        return Err(Error::domain(format!(
            "parent lengths differ: {k} vs {}",
            b.genes.len()
        )));
    }
    if k < 2 {
        return Err(Error::domain(
            "crossover needs genomes of length at least 2",
        ));
    }
    if rng.gen_bool(rate) {
        let q = rng.gen_range(1..k);
        crossover_at(a, b, q)
    } else {
        Ok((
            Individual::new(a.genes.clone()),
            Individual::new(b.genes.clone()),
        ))
    }
}

/// Resamples each gene uniformly within its bound with probability `rate`.
pub fn mutate(ind: &Individual, rng: &mut Rng, rate: f64, spec: &GenomeSpec) -> Individual {
    let genes = ind
        .genes
        .iter()
        .zip(&spec.bounds)
        .map(|(&g, b)| if rng.gen_bool(rate) { b.sample(rng) } else { g })
        .collect();
    Individual::new(genes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub valid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxGenerations,
    Converged,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    pub stop_reason: StopReason,
    pub evaluations: usize,
}

fn stats(pop: &Population) -> Result<GenerationStats> {
    let best = pop.best().ok_or_else(|| {
        Error::domain(format!(
            "generation {} has no valid individual",
            pop.generation
        ))
    })?;
    Ok(GenerationStats {
        generation: pop.generation,
        best: best.fitness_or_min(),
        mean: pop.mean_fitness().unwrap_or(f64::NAN),
        valid: pop.individuals.iter().filter(|i| i.is_valid()).count(),
    })
}

fn next_generation(
    pop: &Population,
    spec: &GenomeSpec,
    cfg: &GaConfig,
    rng: &mut Rng,
) -> Result<Population> {
    let m = cfg.population;
    let mut ranked: Vec<&Individual> = pop.individuals.iter().filter(|i| i.is_valid()).collect();
    // stable sort keeps index order among equal fitness
    ranked.sort_by(|a, b| b.fitness_or_min().total_cmp(&a.fitness_or_min()));
    let mut next: Vec<Individual> = ranked
        .iter()
        .take(cfg.elitism)
        .map(|&i| i.clone())
        .collect();
    let probs = selection_probabilities(pop)?;
    while next.len() < m {
        let a = &pop.individuals[spin(&probs, rng)];
        let b = &pop.individuals[spin(&probs, rng)];
        let (c1, c2) = if spec.len() >= 2 {
            crossover(a, b, rng, cfg.crossover_rate)?
        } else {
            (
                Individual::new(a.genes.clone()),
                Individual::new(b.genes.clone()),
            )
        };
        for child in [c1, c2] {
            if next.len() < m {
                next.push(mutate(&child, rng, cfg.mutation_rate, spec));
            }
        }
    }
    Ok(Population {
        generation: pop.generation + 1,
        individuals: next,
        evaluations: pop.evaluations,
    })
}

/// Runs the GA until a stopping rule fires and returns the best individual
/// seen in any generation.
pub fn run(
    spec: &GenomeSpec,
    cfg: &GaConfig,
    stop: &StoppingCriteria,
    fitness: &dyn Fitness,
) -> Result<GaOutcome> {
    cfg.validate()?;
    stop.validate()?;
    let mut rng = substream(cfg.seed, Stream::Ga);
    let mut pop = evaluate(init_population(spec, cfg.population, &mut rng), fitness);
    let mut history = vec![stats(&pop)?];
    let mut best = pop
        .best()
        .cloned()
        .expect("stats checked a valid individual");
    loop {
        let current = history.last().expect("history is never empty");
        if stop.fitness_threshold.is_some_and(|t| current.best >= t) {
            return Ok(finish(
                best,
                history,
                StopReason::Threshold,
                pop.evaluations,
            ));
        }
        if history.len() >= 2 {
            let prev = &history[history.len() - 2];
            if (current.best - prev.best).abs() < stop.min_delta {
                return Ok(finish(
                    best,
                    history,
                    StopReason::Converged,
                    pop.evaluations,
                ));
            }
        }
        if history.len() >= stop.max_generations {
            return Ok(finish(
                best,
                history,
                StopReason::MaxGenerations,
                pop.evaluations,
            ));
        }
        pop = evaluate(next_generation(&pop, spec, cfg, &mut rng)?, fitness);
        history.push(stats(&pop)?);
        if let Some(b) = pop.best() {
            if b.fitness_or_min() > best.fitness_or_min() {
                best = b.clone();
            }
        }
    }
}

fn finish(
    best: Individual,
    history: Vec<GenerationStats>,
    stop_reason: StopReason,
    evaluations: usize,
) -> GaOutcome {
    GaOutcome {
        best,
        history,
        stop_reason,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    fn with_fitness(fs: &[f64]) -> Population {
        Population {
            generation: 0,
            individuals: fs
                .iter()
                .map(|&f| Individual {
                    genes: vec![0],
                    fitness: Some(f),
                })
                .collect(),
            evaluations: fs.len(),
        }
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let spec = GenomeSpec::uniform(1, 0, 0).unwrap();
        let pop = init_population(&spec, 1, &mut rng(1));
        assert_eq!(pop.individuals[0].genes, vec![0]);
        let spec = GenomeSpec::uniform(20, 0, 1).unwrap();
        let a = init_population(&spec, 30, &mut rng(9));
        let b = init_population(&spec, 30, &mut rng(9));
        assert_eq!(a, b);
        assert!(a.individuals.iter().all(|i| spec.contains(&i.genes)));
        assert!(a.individuals.iter().all(|i| i.fitness.is_none()));
    }

    #[test]
    fn evaluation_and_invalid_marking() {
        assert_eq!(OneMax.evaluate(&[1, 1, 1, 1]), Ok(4.0));
        let pop = Population {
            generation: 0,
            individuals: vec![
                Individual::new(vec![1]),
                Individual::new(vec![-1]),
                Individual::new(vec![2]),
            ],
            evaluations: 0,
        };
        let picky = |g: &[i64]| {
            if g[0] < 0 {
                Err("negative".to_string())
            } else {
                Ok(g[0] as f64)
            }
        };
        let pop = evaluate(pop, &picky);
        assert_eq!(pop.evaluations, 3);
        assert!(!pop.individuals[1].is_valid());
        let probs = selection_probabilities(&pop).unwrap();
        assert_eq!(probs[1], 0.0);
        assert!((probs[0] - 1.0 / 3.0).abs() < 1e-12);
        let constant = evaluate(
            init_population(&GenomeSpec::uniform(3, 0, 5).unwrap(), 6, &mut rng(2)),
            &|_: &[i64]| Ok(7.0),
        );
        assert!(constant.individuals.iter().all(|i| i.fitness == Some(7.0)));
    }

    #[test]
    fn roulette_probabilities() {
        let p = selection_probabilities(&with_fitness(&[1.0, 2.0, 3.0])).unwrap();
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[2] - 0.5).abs() < 1e-15);
        let p = selection_probabilities(&with_fitness(&[4.0; 5])).unwrap();
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        // negative fitness is shifted so the worst keeps a sliver of mass
        let p = selection_probabilities(&with_fitness(&[-3.0, -1.0])).unwrap();
        assert!(p[0] > 0.0 && p[0] < 1e-8);
        assert!(selection_probabilities(&with_fitness(&[f64::NEG_INFINITY])).is_err());
    }

    #[test]
    fn crossover_examples() {
        let a = Individual::new(vec![1, 2, 3, 4]);
        let b = Individual::new(vec![5, 6, 7, 8]);
        let (x, y) = crossover_at(&a, &b, 2).unwrap();
        assert_eq!(x.genes, vec![1, 2, 7, 8]);
        assert_eq!(y.genes, vec![5, 6, 3, 4]);
        let (x, y) = crossover(&a, &b, &mut rng(3), 0.0).unwrap();
        assert_eq!((x.genes, y.genes), (a.genes.clone(), b.genes.clone()));
        assert!(crossover(&a, &Individual::new(vec![1]), &mut rng(3), 1.0).is_err());
        assert!(crossover_at(&a, &b, 0).is_err());
        assert!(crossover_at(&a, &b, 4).is_err());
    }

    #[test]
    fn mutation_edges() {
        let spec = GenomeSpec::uniform(6, 0, 9).unwrap();
        let ind = Individual::new(vec![3; 6]);
        assert_eq!(mutate(&ind, &mut rng(4), 0.0, &spec).genes, ind.genes);
        let fixed = GenomeSpec::uniform(6, 0, 0).unwrap();
        let zero = Individual::new(vec![0; 6]);
        assert_eq!(mutate(&zero, &mut rng(4), 1.0, &fixed).genes, zero.genes);
    }

    #[test]
    fn single_generation_budget() {
        let spec = GenomeSpec::uniform(8, 0, 1).unwrap();
        let cfg = GaConfig {
            population: 10,
            ..Default::default()
        };
        let stop = StoppingCriteria {
            max_generations: 1,
            ..Default::default()
        };
        let out = run(&spec, &cfg, &stop, &OneMax).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.evaluations, 10);
        assert_eq!(out.stop_reason, StopReason::MaxGenerations);
    }

    #[test]
    fn threshold_reached_by_initial_population() {
        let spec = GenomeSpec::uniform(8, 0, 1).unwrap();
        let cfg = GaConfig {
            population: 10,
            seed: 5,
            ..Default::default()
        };
        let mut r = substream(cfg.seed, Stream::Ga);
        let first = evaluate(init_population(&spec, 10, &mut r), &OneMax);
        let f0 = first.individuals[0].fitness.unwrap();
        let stop = StoppingCriteria {
            max_generations: 50,
            fitness_threshold: Some(f0),
            ..Default::default()
        };
        let out = run(&spec, &cfg, &stop, &OneMax).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.stop_reason, StopReason::Threshold);
    }

    #[test]
    fn stall_rule_stops_run() {
        let spec = GenomeSpec::uniform(4, 0, 3).unwrap();
        let cfg = GaConfig {
            population: 6,
            ..Default::default()
        };
        let stop = StoppingCriteria {
            max_generations: 50,
            min_delta: 0.5,
            fitness_threshold: None,
        };
        let out = run(&spec, &cfg, &stop, &|_: &[i64]| Ok(1.0)).unwrap();
        assert_eq!(out.history.len(), 2);
        assert_eq!(out.stop_reason, StopReason::Converged);
    }

    #[test]
    fn config_validation() {
        let bad = GaConfig {
            population: 1,
            crossover_rate: 1.5,
            mutation_rate: -0.1,
            elitism: 3,
            seed: 0,
        };
        match bad.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 4),
            other => panic!("{other:?}"),
        }
        assert!(GenomeSpec::new(vec![]).is_err());
        assert!(GeneBound::new(2, 1).is_err());
    }
}
