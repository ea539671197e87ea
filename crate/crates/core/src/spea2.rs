//! Multi-objective evolutionary engine: Pareto dominance, SPEA2
//! fitness assignment, environmental selection with nearest-neighbor
//! archive truncation, binary tournament mating and real-coded
//! variation operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};
use crate::params::{clamp, lhs_sample, ParameterBounds, ParameterVector, PARAM_COUNT};
use crate::util::mix_seed;

pub type ObjectiveVector = Vec<f64>;

/// Genotype with assigned objectives and scalar SPEA2 fitness.
/// Fitness below 1 marks a non-dominated individual in its pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: ParameterVector,
    pub objectives: ObjectiveVector,
    pub fitness: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub archive_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
    /// Optional early stop: halt when the best archive objectives have
    /// not improved for this many generations. Off by default.
    pub stagnation_window: Option<usize>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            generations: 60,
            archive_size: 5,
            crossover_rate: 0.2,
            mutation_rate: 0.2,
            seed: 0,
            stagnation_window: None,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.archive_size == 0 {
            return Err(WavecalError::Config(
                "population and archive size must be >= 1".into(),
            ));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(WavecalError::Config(format!("{name} {rate} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Pareto dominance under minimization: `a` is no worse everywhere and
/// strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(WavecalError::Shape(format!(
            "objective length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

fn objective_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// SPEA2 fitness over the pooled population and archive:
/// strength S(i) = dominated count, raw R(i) = sum of dominator
/// strengths, density D(i) = 1 / (sigma_k + 2) with sigma_k the
/// distance to the k-th nearest neighbor, k = round(sqrt(pool size)).
pub fn assign_fitness(pool: &mut [Individual]) {
    let n = pool.len();
    if n == 0 {
        return;
    }
    let mut strength = vec![0usize; n];
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates_unchecked(&pool[i].objectives, &pool[j].objectives) {
                strength[i] += 1;
                dominated_by[j].push(i);
            }
        }
    }
    let k = ((n as f64).sqrt().round() as usize).max(1);
    for i in 0..n {
        let raw: usize = dominated_by[i].iter().map(|&j| strength[j]).sum();
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| objective_distance(&pool[i].objectives, &pool[j].objectives))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sigma_k = if dists.is_empty() {
            0.0
        } else {
            dists[k.min(dists.len()) - 1]
        };
        pool[i].fitness = raw as f64 + 1.0 / (sigma_k + 2.0);
    }
}

/// Sorted distance vector from member `i` to the others in `kept`,
/// used for the lexicographic truncation comparison.
fn sorted_distances(pool: &[Individual], kept: &[usize], i: usize) -> Vec<f64> {
    let mut d: Vec<f64> = kept
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| objective_distance(&pool[i].objectives, &pool[j].objectives))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// SPEA2 environmental selection. Returns indices into `pool`, in
/// stable pool order. Non-dominated members (fitness < 1) enter the
/// archive; over capacity the most crowded member is removed
/// iteratively (nearest-neighbor distance, ties by the next distance,
/// then by index); under capacity the best dominated members fill up.
pub fn environmental_selection(pool: &[Individual], capacity: usize) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..pool.len())
        .filter(|&i| pool[i].fitness < 1.0)
        .collect();

    if kept.len() > capacity {
        while kept.len() > capacity {
            let mut worst = 0usize;
            let mut worst_d = sorted_distances(pool, &kept, kept[0]);
            for (pos, &i) in kept.iter().enumerate().skip(1) {
                let d = sorted_distances(pool, &kept, i);
                if d
                    .iter()
                    .zip(&worst_d)
                    .find_map(|(a, b)| a.partial_cmp(b).filter(|o| o.is_ne()))
                    .map(|o| o.is_lt())
                    .unwrap_or(false)
                {
                    worst = pos;
                    worst_d = d;
                }
            }
            kept.remove(worst);
        }
    } else if kept.len() < capacity {
        let mut dominated: Vec<usize> = (0..pool.len())
            .filter(|&i| pool[i].fitness >= 1.0)
            .collect();
        dominated.sort_by(|&a, &b| pool[a].fitness.partial_cmp(&pool[b].fitness).unwrap());
        let need = (capacity - kept.len()).min(dominated.len());
        kept.extend(dominated.into_iter().take(need));
        kept.sort_unstable();
    }
    kept
}

/// Fill a mating pool of `count` by binary tournaments over the
/// archive: lower fitness of two uniform draws with replacement, ties
/// going to the first draw.
pub fn binary_tournament<R: Rng>(
    archive: &[Individual],
    count: usize,
    rng: &mut R,
) -> Vec<ParameterVector> {
    assert!(!archive.is_empty(), "tournament over empty archive");
    (0..count)
        .map(|_| {
            let first = &archive[rng.random_range(0..archive.len())];
            let second = &archive[rng.random_range(0..archive.len())];
            if second.fitness < first.fitness {
                second.genotype
            } else {
                first.genotype
            }
        })
        .collect()
}

/// Mutation scale as a fraction of each gene's bound width.
pub const MUTATION_SIGMA_FRACTION: f64 = 0.1;

/// Uniform per-gene crossover on consecutive pairs followed by bounded
/// Gaussian mutation, everything clamped back into bounds.
pub fn vary<R: Rng>(
    mating_pool: &[ParameterVector],
    bounds: &ParameterBounds,
    crossover_rate: f64,
    mutation_rate: f64,
    rng: &mut R,
) -> Vec<ParameterVector> {
    let mut offspring: Vec<[f64; PARAM_COUNT]> =
        mating_pool.iter().map(|p| p.as_array()).collect();
    for pair in offspring.chunks_mut(2) {
        if pair.len() < 2 {
            break;
        }
        for g in 0..PARAM_COUNT {
            if rng.random::<f64>() < crossover_rate {
                let tmp = pair[0][g];
                pair[0][g] = pair[1][g];
                pair[1][g] = tmp;
            }
        }
    }
    let widths: Vec<f64> = bounds.as_array().iter().map(|iv| iv.width()).collect();
    offspring
        .into_iter()
        .map(|mut genes| {
            for g in 0..PARAM_COUNT {
                if rng.random::<f64>() < mutation_rate {
                    let z: f64 = rng.sample(StandardNormal);
                    genes[g] += z * MUTATION_SIGMA_FRACTION * widths[g];
                }
            }
            clamp(&ParameterVector::from_array(genes), bounds)
        })
        .collect()
}

/// One evaluated pool snapshot per generation.
#[derive(Debug, Clone)]
pub struct GenerationRecord {
    pub generation: usize,
    pub entries: Vec<HistoryEntry>,
}

#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub individual: usize,
    pub genotype: ParameterVector,
    pub objectives: ObjectiveVector,
    pub fitness: f64,
    pub in_archive: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: Vec<Individual>,
    pub history: Vec<GenerationRecord>,
}

/// Run the evolution loop with a caller-supplied objective evaluator.
/// Population evaluation parallelizes across individuals; selection and
/// variation consume a single sequential RNG stream so the result is
/// independent of worker count.
pub fn run_evolution<F>(
    evaluator: F,
    bounds: &ParameterBounds,
    config: &EvolutionConfig,
) -> Result<RunResult>
where
    F: Fn(&ParameterVector) -> Result<ObjectiveVector> + Sync,
{
    config.validate()?;
    bounds.validate()?;

    let evaluate = |genotypes: Vec<ParameterVector>| -> Result<Vec<Individual>> {
        genotypes
            .into_par_iter()
            .map(|genotype| {
                let objectives = evaluator(&genotype).map_err(|e| WavecalError::Run {
                    genotype: genotype.as_array(),
                    message: e.to_string(),
                })?;
                Ok(Individual {
                    genotype,
                    objectives,
                    fitness: f64::NAN,
                })
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[0x65766f]));
    let init = lhs_sample(
        config.population_size,
        bounds,
        mix_seed(config.seed, &[0x696e6974]),
    )?;
    let mut population = evaluate(init)?;
    let mut archive: Vec<Individual> = Vec::new();
    let mut history = Vec::new();
    let mut best_per_objective: Vec<f64> = Vec::new();
    let mut stagnant = 0usize;

    for generation in 0..=config.generations {
        let mut union: Vec<Individual> = archive.clone();
        union.append(&mut population);
        assign_fitness(&mut union);
        let selected = environmental_selection(&union, config.archive_size);

        let entries = union
            .iter()
            .enumerate()
            .map(|(i, ind)| HistoryEntry {
                individual: i,
                genotype: ind.genotype,
                objectives: ind.objectives.clone(),
                fitness: ind.fitness,
                in_archive: selected.contains(&i),
            })
            .collect();
        history.push(GenerationRecord {
            generation,
            entries,
        });

        archive = selected.iter().map(|&i| union[i].clone()).collect();

        if generation == config.generations {
            break;
        }
        if let Some(window) = config.stagnation_window {
            let n_obj = archive[0].objectives.len();
            let current: Vec<f64> = (0..n_obj)
                .map(|k| {
                    archive
                        .iter()
                        .map(|ind| ind.objectives[k])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let improved = best_per_objective.is_empty()
                || current
                    .iter()
                    .zip(&best_per_objective)
                    .any(|(c, b)| c < b);
            if improved {
                best_per_objective = current;
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= window {
                    break;
                }
            }
        }

        let mates = binary_tournament(&archive, config.population_size, &mut rng);
        let offspring = vary(
            &mates,
            bounds,
            config.crossover_rate,
            config.mutation_rate,
            &mut rng,
        );
        population = evaluate(offspring)?;
    }

    Ok(RunResult { archive, history })
}

/// History CSV rows: `generation,individual,drg,cfw,stpm,obj_rmse,obj_mae,fitness,in_archive`.
pub fn history_to_csv(history: &[GenerationRecord]) -> String {
    let mut out =
        String::from("generation,individual,drg,cfw,stpm,obj_rmse,obj_mae,fitness,in_archive\n");
    for rec in history {
        for e in &rec.entries {
            let obj0 = e.objectives.first().copied().unwrap_or(f64::NAN);
            let obj1 = e.objectives.get(1).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                rec.generation,
                e.individual,
                e.genotype.drg,
                e.genotype.cfw,
                e.genotype.stpm,
                obj0,
                obj1,
                e.fitness,
                e.in_archive as u8
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(objs: &[f64]) -> Individual {
        Individual {
            genotype: ParameterVector::default_configuration(),
            objectives: objs.to_vec(),
            fitness: f64::NAN,
        }
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[0.0, 3.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[0.0, 3.0]).unwrap());
        assert!(dominates(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn fitness_matches_worked_example() {
        // Pool {a=(1,1), b=(2,2), c=(0,3)}: S = {1,0,0}, R = {0,1,0},
        // k = round(sqrt(3)) = 2, sigma_2(a) = |a-c| = 2.23607,
        // D(a) = 1/4.23607 = 0.23607.
        let mut pool = vec![ind(&[1.0, 1.0]), ind(&[2.0, 2.0]), ind(&[0.0, 3.0])];
        assign_fitness(&mut pool);
        assert!((pool[0].fitness - 0.23607).abs() < 1e-5);
        assert!((pool[1].fitness - (1.0 + 1.0 / (5.0f64.sqrt() + 2.0))).abs() < 1e-9);
        assert!(pool[2].fitness < 1.0);
        assert!(pool[0].fitness < 1.0 && pool[1].fitness >= 1.0);
    }

    #[test]
    fn dominating_everything_gives_raw_zero() {
        let mut pool = vec![
            ind(&[0.0, 0.0]),
            ind(&[1.0, 1.0]),
            ind(&[2.0, 0.5]),
            ind(&[0.5, 2.0]),
        ];
        assign_fitness(&mut pool);
        assert!(pool[0].fitness < 1.0);
        for other in &pool[1..] {
            assert!(other.fitness >= 1.0);
        }
    }

    #[test]
    fn fitness_dichotomy_on_random_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..50 {
            let n = rng.random_range(2..25);
            let mut pool: Vec<Individual> = (0..n)
                .map(|_| ind(&[rng.random::<f64>(), rng.random::<f64>()]))
                .collect();
            assign_fitness(&mut pool);
            for i in 0..n {
                let dominated = (0..n).any(|j| {
                    j != i && dominates_unchecked(&pool[j].objectives, &pool[i].objectives)
                });
                assert_eq!(pool[i].fitness < 1.0, !dominated);
            }
        }
    }

    #[test]
    fn selection_under_capacity_fills_with_best_dominated() {
        let mut pool = vec![
            ind(&[1.0, 5.0]),
            ind(&[5.0, 1.0]),
            ind(&[3.0, 3.0]),
            ind(&[4.0, 4.0]),
            ind(&[6.0, 6.0]),
            ind(&[9.0, 9.0]),
        ];
        assign_fitness(&mut pool);
        let kept = environmental_selection(&pool, 5);
        assert_eq!(kept.len(), 5);
        // The three non-dominated members stay, 9,9 (worst) drops.
        for i in [0, 1, 2] {
            assert!(kept.contains(&i));
        }
        assert!(!kept.contains(&5));
    }

    #[test]
    fn truncation_never_removes_an_extreme_first() {
        // Six non-dominated points on a line with a crowded interior.
        let mut pool = vec![
            ind(&[0.0, 5.0]),
            ind(&[1.0, 4.0]),
            ind(&[1.9, 3.1]),
            ind(&[2.0, 3.0]),
            ind(&[3.0, 2.0]),
            ind(&[5.0, 0.0]),
        ];
        assign_fitness(&mut pool);
        let kept = environmental_selection(&pool, 5);
        assert_eq!(kept.len(), 5);
        assert!(kept.contains(&0), "low extreme must survive");
        assert!(kept.contains(&5), "high extreme must survive");
        assert!(!kept.contains(&2) || !kept.contains(&3));
    }

    #[test]
    fn selection_of_single_individual() {
        let mut pool = vec![ind(&[1.0, 1.0])];
        assign_fitness(&mut pool);
        assert_eq!(environmental_selection(&pool, 5), vec![0]);
    }

    #[test]
    fn tournament_probability_matches_exact_value() {
        // The worse individual is only picked when both draws hit it,
        // p = 0.25 exactly.
        let trials = 10_000;
        let mut a = ind(&[0.1, 0.1]);
        a.fitness = 0.2;
        a.genotype = ParameterVector::new(0.5, 0.01, 0.005);
        let mut b = ind(&[5.0, 5.0]);
        b.fitness = 5.0;
        b.genotype = ParameterVector::new(1.5, 0.05, 0.001);
        let archive = vec![a, b.clone()];
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let picks = binary_tournament(&archive, trials, &mut rng);
        let freq =
            picks.iter().filter(|p| **p == b.genotype).count() as f64 / trials as f64;
        assert!((freq - 0.25).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn tournament_edge_cases() {
        let mut solo = ind(&[1.0, 1.0]);
        solo.fitness = 0.4;
        let archive = vec![solo.clone()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks = binary_tournament(&archive, 7, &mut rng);
        assert_eq!(picks.len(), 7);
        assert!(picks.iter().all(|p| *p == solo.genotype));
        assert!(binary_tournament(&archive, 0, &mut rng).is_empty());
    }

    #[test]
    fn vary_with_zero_rates_copies_parents() {
        let bounds = ParameterBounds::default();
        let pool = lhs_sample(6, &bounds, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let offspring = vary(&pool, &bounds, 0.0, 0.0, &mut rng);
        assert_eq!(offspring, pool);
    }

    #[test]
    fn vary_keeps_offspring_in_bounds() {
        let bounds = ParameterBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let pool = lhs_sample(10, &bounds, rng.random()).unwrap();
            let offspring = vary(&pool, &bounds, 0.9, 0.9, &mut rng);
            assert_eq!(offspring.len(), pool.len());
            for o in offspring {
                assert!(bounds.contains(&o));
            }
        }
    }

    fn toy_evaluator(p: &ParameterVector) -> Result<ObjectiveVector> {
        Ok(vec![p.drg * p.drg, (p.drg - 1.0) * (p.drg - 1.0)])
    }

    #[test]
    fn toy_problem_recovers_pareto_set() {
        let bounds = ParameterBounds::default();
        let config = EvolutionConfig {
            seed: 11,
            ..EvolutionConfig::default()
        };
        let result = run_evolution(toy_evaluator, &bounds, &config).unwrap();
        assert!(!result.archive.is_empty());
        for ind in &result.archive {
            assert!(
                ind.genotype.drg <= 1.02,
                "archive member drg {} outside Pareto set",
                ind.genotype.drg
            );
            assert!(bounds.contains(&ind.genotype));
        }
        for (i, a) in result.archive.iter().enumerate() {
            for (j, b) in result.archive.iter().enumerate() {
                if i != j {
                    assert!(!dominates_unchecked(&a.objectives, &b.objectives));
                }
            }
        }
    }

    #[test]
    fn zero_generations_selects_from_initial_population() {
        let bounds = ParameterBounds::default();
        let config = EvolutionConfig {
            generations: 0,
            seed: 2,
            ..EvolutionConfig::default()
        };
        let result = run_evolution(toy_evaluator, &bounds, &config).unwrap();
        assert_eq!(result.history.len(), 1);
        assert!(!result.archive.is_empty());
        let initial = lhs_sample(20, &bounds, mix_seed(2, &[0x696e6974])).unwrap();
        for ind in &result.archive {
            assert!(initial.contains(&ind.genotype));
        }
    }

    #[test]
    fn run_is_deterministic() {
        let bounds = ParameterBounds::default();
        let config = EvolutionConfig {
            generations: 10,
            seed: 9,
            ..EvolutionConfig::default()
        };
        let a = run_evolution(toy_evaluator, &bounds, &config).unwrap();
        let b = run_evolution(toy_evaluator, &bounds, &config).unwrap();
        assert_eq!(history_to_csv(&a.history), history_to_csv(&b.history));
        assert_eq!(a.archive, b.archive);
    }

    #[test]
    fn elitism_per_objective_never_worsens() {
        let bounds = ParameterBounds::default();
        let config = EvolutionConfig {
            generations: 25,
            seed: 13,
            ..EvolutionConfig::default()
        };
        let result = run_evolution(toy_evaluator, &bounds, &config).unwrap();
        let mut best = vec![f64::INFINITY; 2];
        for rec in &result.history {
            let archive_entries: Vec<&HistoryEntry> =
                rec.entries.iter().filter(|e| e.in_archive).collect();
            for k in 0..2 {
                let gen_best = archive_entries
                    .iter()
                    .map(|e| e.objectives[k])
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    gen_best <= best[k] + 1e-12,
                    "objective {k} worsened at generation {}",
                    rec.generation
                );
                best[k] = best[k].min(gen_best);
            }
        }
    }

    #[test]
    fn evaluator_failure_carries_genotype() {
        let bounds = ParameterBounds::default();
        let config = EvolutionConfig {
            seed: 3,
            ..EvolutionConfig::default()
        };
        let err = run_evolution(
            |_p| Err(WavecalError::Config("boom".into())),
            &bounds,
            &config,
        )
        .unwrap_err();
        assert!(matches!(err, WavecalError::Run { .. }));
    }
}
