//! NSGA-II comparison baseline.
//!
//! Binary tournament on (rank, crowding distance), simulated binary
//! crossover, polynomial mutation and elitist (μ + λ) environmental
//! selection. Variation results are clamped to the box.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::ParetoArchive;
use crate::pareto::{dominates, Front};
use crate::problems::{BiObjectiveProblem, DecisionVector, Evaluator, ObjectiveVector};
use crate::rng::RngStreams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nsga2Config {
    pub pop_size: usize,
    pub generations: usize,
    #[serde(default = "default_crossover_prob")]
    pub crossover_prob: f64,
    #[serde(default = "default_index")]
    pub crossover_index: f64,
    /// Per-variable mutation probability; `None` means `1/d`.
    #[serde(default)]
    pub mutation_prob: Option<f64>,
    #[serde(default = "default_index")]
    pub mutation_index: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_crossover_prob() -> f64 {
    0.9
}

fn default_index() -> f64 {
    20.0
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Nsga2Config {
            pop_size: 100,
            generations: 100,
            crossover_prob: default_crossover_prob(),
            crossover_index: default_index(),
            mutation_prob: None,
            mutation_index: default_index(),
            seed: 0,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.pop_size == 0 || !self.pop_size.is_multiple_of(2) {
            return bad(format!(
                "population size must be a positive even number, got {}",
                self.pop_size
            ));
        }
        if self.generations == 0 {
            return bad("generation count must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad(format!(
                "crossover probability {} not in [0, 1]",
                self.crossover_prob
            ));
        }
        if let Some(pm) = self.mutation_prob {
            if !(0.0..=1.0).contains(&pm) {
                return bad(format!("mutation probability {pm} not in [0, 1]"));
            }
        }
        if !(self.crossover_index > 0.0 && self.mutation_index > 0.0) {
            return bad("distribution indices must be positive".into());
        }
        Ok(())
    }

    pub fn mutation_prob_for(&self, dim: usize) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / dim as f64)
    }

    /// `2 · pop · (gen + 1)`: the initial population plus one offspring
    /// population per generation.
    pub fn expected_evaluations(&self) -> u64 {
        2 * self.pop_size as u64 * (self.generations as u64 + 1)
    }

    pub fn metadata(&self, dim: usize) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("algorithm".into(), "nsga2".into());
        m.insert("pop_size".into(), self.pop_size.to_string());
        m.insert("generations".into(), self.generations.to_string());
        m.insert("crossover".into(), "sbx".into());
        m.insert("crossover_prob".into(), self.crossover_prob.to_string());
        m.insert("crossover_index".into(), self.crossover_index.to_string());
        m.insert("mutation".into(), "polynomial".into());
        m.insert(
            "mutation_prob".into(),
            self.mutation_prob_for(dim).to_string(),
        );
        m.insert("mutation_index".into(), self.mutation_index.to_string());
        m.insert("bound_handling".into(), "clamp".into());
        m.insert("seed".into(), self.seed.to_string());
        m.insert(
            "nominal_evaluations".into(),
            (2 * self.pop_size as u64 * self.generations as u64).to_string(),
        );
        m
    }
}

/// Partitions indices into successive non-dominated fronts.
pub fn fast_nondominated_sort(points: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(&points[p], &points[q]) {
                dominates_list[p].push(q);
                dominated_by_count[q] += 1;
            } else if dominates(&points[q], &points[p]) {
                dominates_list[q].push(p);
                dominated_by_count[p] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_list[p] {
                dominated_by_count[q] -= 1;
                if dominated_by_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point within one front.
pub fn crowding_distance(front_points: &[ObjectiveVector]) -> Vec<f64> {
    let n = front_points.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distance = vec![0.0; n];
    for m in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front_points[a].0[m].total_cmp(&front_points[b].0[m]));
        let lo = front_points[order[0]].0[m];
        let hi = front_points[order[n - 1]].0[m];
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            distance[w[1]] += (front_points[w[2]].0[m] - front_points[w[0]].0[m]) / range;
        }
    }
    distance
}

#[derive(Debug, Clone)]
struct Individual {
    x: DecisionVector,
    y: ObjectiveVector,
    rank: usize,
    crowding: f64,
}

fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Keeps the best `size` of `pool` by front rank, then crowding distance.
fn environmental_selection(pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let points: Vec<ObjectiveVector> = pool.iter().map(|ind| ind.y).collect();
    let mut survivors = Vec::with_capacity(size);
    for (rank, front) in fast_nondominated_sort(&points).into_iter().enumerate() {
        if survivors.len() >= size {
            break;
        }
        let crowd = crowding_distance(&front.iter().map(|&i| points[i]).collect::<Vec<_>>());
        let mut members: Vec<Individual> = front
            .iter()
            .zip(crowd)
            .map(|(&i, crowding)| Individual {
                rank,
                crowding,
                ..pool[i].clone()
            })
            .collect();
        let room = size - survivors.len();
        if members.len() > room {
            // stable: equal crowding keeps pool order
            members.sort_by(|a, b| b.crowding.total_cmp(&a.crowding));
            members.truncate(room);
        }
        survivors.extend(members);
    }
    survivors
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if crowded_cmp(b, a) == Ordering::Less {
        b
    } else {
        a
    }
}

/// Bounded simulated binary crossover.
fn sbx<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    problem: &BiObjectiveProblem,
    eta: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if rng.random::<f64>() > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (lo, hi) = (problem.lower()[i], problem.upper()[i]);
        let (y1, y2) = (p1[i].min(p2[i]), p1[i].max(p2[i]));
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        let a = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
        let b = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
        if rng.random::<f64>() <= 0.5 {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation, in place.
fn polynomial_mutation<R: Rng + ?Sized>(
    x: &mut [f64],
    problem: &BiObjectiveProblem,
    prob: f64,
    eta: f64,
    rng: &mut R,
) {
    for (i, v) in x.iter_mut().enumerate() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let (lo, hi) = (problem.lower()[i], problem.upper()[i]);
        let width = hi - lo;
        let d1 = (*v - lo) / width;
        let d2 = (hi - *v) / width;
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u <= 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *v = (*v + dq * width).clamp(lo, hi);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nsga2Outcome {
    pub archive: ParetoArchive,
    pub eval_count: u64,
}

pub fn evolve(config: &Nsga2Config, problem: &BiObjectiveProblem) -> Result<Nsga2Outcome> {
    evolve_with_observer(config, problem, |_, _| {})
}

/// Like [`evolve`], calling `observer(generation, rank_one_front)` after the
/// initial population (generation 0) and after every generation.
pub fn evolve_with_observer<F>(
    config: &Nsga2Config,
    problem: &BiObjectiveProblem,
    mut observer: F,
) -> Result<Nsga2Outcome>
where
    F: FnMut(usize, &Front),
{
    config.validate()?;
    let evaluator = Evaluator::new(problem);
    let mut rng = RngStreams::new(config.seed).main();
    let pm = config.mutation_prob_for(problem.dim());

    let initial = (0..config.pop_size)
        .map(|_| {
            let x = problem.sample_uniform(&mut rng);
            let y = evaluator.evaluate(&x)?;
            Ok(Individual {
                x,
                y,
                rank: 0,
                crowding: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pop = environmental_selection(initial, config.pop_size);
    observer(0, &rank_one(&pop));

    for generation in 1..=config.generations {
        let mut offspring = Vec::with_capacity(config.pop_size);
        while offspring.len() < config.pop_size {
            let p1 = tournament(&pop, &mut rng);
            let p2 = tournament(&pop, &mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < config.crossover_prob {
                sbx(&p1.x, &p2.x, problem, config.crossover_index, &mut rng)
            } else {
                (p1.x.to_vec(), p2.x.to_vec())
            };
            for child in [&mut c1, &mut c2] {
                polynomial_mutation(child, problem, pm, config.mutation_index, &mut rng);
                problem.clamp(child);
            }
            for child in [c1, c2] {
                let y = evaluator.evaluate(&child)?;
                offspring.push(Individual {
                    x: child.into(),
                    y,
                    rank: 0,
                    crowding: 0.0,
                });
            }
        }
        let mut pool = pop;
        pool.extend(offspring);
        pop = environmental_selection(pool, config.pop_size);
        observer(generation, &rank_one(&pop));
    }

    let mut archive = ParetoArchive::new();
    for ind in pop.iter().filter(|ind| ind.rank == 0) {
        archive.push(ind.x.clone(), ind.y);
    }
    Ok(Nsga2Outcome {
        archive,
        eval_count: evaluator.count(),
    })
}

fn rank_one(pop: &[Individual]) -> Front {
    pop.iter()
        .filter(|ind| ind.rank == 0)
        .map(|ind| ind.y)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::{hypervolume_2d, igd, nondominated_filter, reference_front};
    use crate::problems::{convex_problem, kursawe_problem};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ov(a: f64, b: f64) -> ObjectiveVector {
        ObjectiveVector::new(a, b)
    }

    #[test]
    fn sort_examples() {
        assert_eq!(
            fast_nondominated_sort(&[ov(0.0, 2.0), ov(2.0, 0.0), ov(2.0, 2.0)]),
            vec![vec![0, 1], vec![2]]
        );
        assert_eq!(
            fast_nondominated_sort(&[ov(0.0, 3.0), ov(1.0, 2.0), ov(3.0, 0.0)]),
            vec![vec![0, 1, 2]]
        );
        assert_eq!(
            fast_nondominated_sort(&[ov(2.0, 2.0), ov(0.0, 0.0), ov(1.0, 1.0)]),
            vec![vec![1], vec![2], vec![0]]
        );
        assert!(fast_nondominated_sort(&[]).is_empty());
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(
            crowding_distance(&[ov(0.0, 0.0), ov(1.0, 1.0)]),
            vec![f64::INFINITY; 2]
        );
        let d = crowding_distance(&[ov(0.0, 2.0), ov(1.0, 1.0), ov(2.0, 0.0)]);
        assert_eq!(d[1], 2.0);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        let flat = crowding_distance(&[ov(1.0, 0.0), ov(1.0, 1.0), ov(1.0, 2.0), ov(1.0, 3.0)]);
        assert!(flat.iter().all(|v| !v.is_nan()));
        assert!(flat.iter().filter(|v| v.is_finite()).count() >= 1);
    }

    #[test]
    fn config_validation() {
        let p = convex_problem();
        for cfg in [
            Nsga2Config {
                pop_size: 7,
                ..Default::default()
            },
            Nsga2Config {
                pop_size: 0,
                ..Default::default()
            },
            Nsga2Config {
                generations: 0,
                ..Default::default()
            },
            Nsga2Config {
                crossover_prob: 1.2,
                ..Default::default()
            },
            Nsga2Config {
                mutation_prob: Some(-0.1),
                ..Default::default()
            },
            Nsga2Config {
                mutation_index: 0.0,
                ..Default::default()
            },
        ] {
            assert!(
                matches!(evolve(&cfg, &p), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn small_run_structure() {
        let p = convex_problem();
        let cfg = Nsga2Config {
            pop_size: 4,
            generations: 1,
            seed: 2,
            ..Default::default()
        };
        let out = evolve(&cfg, &p).unwrap();
        assert!(!out.archive.is_empty() && out.archive.len() <= 4);
        assert_eq!(out.eval_count, 2 * 4 * 2);
        assert!(out.archive.is_aligned_with(&p));
        assert!(out.archive.front().is_mutually_nondominated());
    }

    #[test]
    fn deterministic_under_seed() {
        let p = kursawe_problem();
        let cfg = Nsga2Config {
            pop_size: 20,
            generations: 10,
            seed: 77,
            ..Default::default()
        };
        assert_eq!(evolve(&cfg, &p).unwrap(), evolve(&cfg, &p).unwrap());
        let other = Nsga2Config {
            seed: 78,
            ..cfg.clone()
        };
        assert_ne!(evolve(&cfg, &p).unwrap(), evolve(&other, &p).unwrap());
    }

    #[test]
    fn converges_on_convex_problem() {
        let p = convex_problem();
        let reference = reference_front("convex", 100).unwrap();
        for seed in [0, 1, 2] {
            let cfg = Nsga2Config {
                pop_size: 100,
                generations: 100,
                seed,
                ..Default::default()
            };
            let out = evolve(&cfg, &p).unwrap();
            assert_eq!(out.eval_count, cfg.expected_evaluations());
            let score = igd(&out.archive.front(), &reference).unwrap();
            assert!(score < 0.5, "seed {seed}: IGD {score}");
        }
    }

    #[test]
    fn elitism_keeps_hypervolume_non_decreasing() {
        let p = convex_problem();
        let r = ov(55.0, 55.0);
        let (mut transitions, mut ok) = (0usize, 0usize);
        for seed in 0..10 {
            let cfg = Nsga2Config {
                pop_size: 40,
                generations: 40,
                seed,
                ..Default::default()
            };
            let mut last: Option<f64> = None;
            evolve_with_observer(&cfg, &p, |_, front| {
                let inside: Front = front
                    .points()
                    .iter()
                    .filter(|q| q.f1() < r.f1() && q.f2() < r.f2())
                    .copied()
                    .collect();
                let hv = hypervolume_2d(&inside, r).unwrap();
                if let Some(prev) = last {
                    transitions += 1;
                    ok += (hv >= prev - 1e-12) as usize;
                }
                last = Some(hv);
            })
            .unwrap();
        }
        assert!(ok as f64 >= 0.95 * transitions as f64, "{ok}/{transitions}");
    }

    #[test]
    fn variation_stays_in_bounds() {
        let p = kursawe_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let a = p.sample_uniform(&mut rng);
            let b = p.sample_uniform(&mut rng);
            let (mut c1, mut c2) = sbx(&a, &b, &p, 20.0, &mut rng);
            polynomial_mutation(&mut c1, &p, 1.0, 20.0, &mut rng);
            polynomial_mutation(&mut c2, &p, 1.0, 20.0, &mut rng);
            assert!(p.contains(&c1) && p.contains(&c2));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn first_front_equals_filter(
            raw in prop::collection::vec((0i32..10, 0i32..10), 0..64)
        ) {
            let points: Vec<ObjectiveVector> =
                raw.iter().map(|&(a, b)| ov(a as f64, b as f64)).collect();
            let fronts = fast_nondominated_sort(&points);
            let total: usize = fronts.iter().map(Vec::len).sum();
            prop_assert_eq!(total, points.len());
            let first: Vec<ObjectiveVector> = fronts
                .first()
                .map(|f| f.iter().map(|&i| points[i]).collect())
                .unwrap_or_default();
            prop_assert_eq!(first, nondominated_filter(&points).into_points());
            // every member of front r+1 is dominated by some member of front r
            for pair in fronts.windows(2) {
                for &q in &pair[1] {
                    prop_assert!(pair[0].iter().any(|&p| dominates(&points[p], &points[q])));
                }
            }
        }
    }
}
