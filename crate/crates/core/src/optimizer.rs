//! Particle-filter optimization with path sampling (PFOPS).
//!
//! A population of particles is carried through the sequence of targets
//! `π_1, …, π_K`. At each step the particles are re-weighted by
//! `π_k / π_{k−1}`, resampled, and optionally moved with a componentwise
//! random-walk Metropolis sweep that leaves `π_k` invariant. The best point
//! seen under `π_k` during step `k` (the incumbent) is one estimated
//! Pareto-optimal decision.
//!
//! Budget accounting: the population is evaluated once at the top of every
//! step (`2N` objective calls) and every Metropolis proposal costs another
//! two, in or out of the box. A run therefore uses exactly `2KN` calls, or
//! `2KN(1 + d)` with the Metropolis sweep enabled.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::{nondominated_indices, Front};
use crate::problems::{BiObjectiveProblem, DecisionVector, Evaluator, ObjectiveVector};
use crate::rng::RngStreams;
use crate::scalarize::{equal_interval_schedule, LambdaSchedule, Scalarization, ScalarizationKind};

/// Resampling scheme name reported in run metadata.
pub const RESAMPLING_SCHEME: &str = "multinomial";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfopsConfig {
    /// Number of target densities `K`.
    pub targets: usize,
    /// Particle count `N`.
    pub particles: usize,
    /// Standard deviation of the componentwise Gaussian proposal.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "yes")]
    pub metropolis_enabled: bool,
    #[serde(default = "yes")]
    pub final_filter_enabled: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kind")]
    pub scalarization: ScalarizationKind,
    #[serde(default)]
    pub utopian: Option<ObjectiveVector>,
}

fn default_sigma() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_kind() -> ScalarizationKind {
    ScalarizationKind::WeightedSum
}

impl Default for PfopsConfig {
    fn default() -> Self {
        PfopsConfig {
            targets: 100,
            particles: 100,
            sigma: default_sigma(),
            metropolis_enabled: true,
            final_filter_enabled: true,
            seed: 0,
            scalarization: default_kind(),
            utopian: None,
        }
    }
}

impl PfopsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.targets < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 target densities, got {}",
                self.targets
            )));
        }
        if self.particles == 0 {
            return Err(Error::InvalidConfig(
                "particle count must be positive".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "proposal standard deviation must be positive, got {}",
                self.sigma
            )));
        }
        match (self.scalarization, self.utopian) {
            (ScalarizationKind::Tchebycheff, None) => Err(Error::InvalidConfig(
                "tchebycheff scalarization requires a utopian point".into(),
            )),
            (ScalarizationKind::WeightedSum, Some(_)) => Err(Error::InvalidConfig(
                "weighted-sum scalarization takes no utopian point".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn scalarization_at(&self, lambda: f64) -> Result<Scalarization> {
        Scalarization::new(self.scalarization, lambda, self.utopian)
    }

    /// Objective calls a run will make.
    pub fn expected_evaluations(&self, dim: usize) -> u64 {
        let base = 2 * self.targets as u64 * self.particles as u64;
        if self.metropolis_enabled {
            base * (1 + dim as u64)
        } else {
            base
        }
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("algorithm".into(), "pfops".into());
        m.insert("targets".into(), self.targets.to_string());
        m.insert("particles".into(), self.particles.to_string());
        m.insert("sigma".into(), self.sigma.to_string());
        m.insert("metropolis".into(), self.metropolis_enabled.to_string());
        m.insert("final_filter".into(), self.final_filter_enabled.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("scalarization".into(), self.scalarization.to_string());
        if let Some(z) = self.utopian {
            m.insert("utopian".into(), format!("{},{}", z.f1(), z.f2()));
        }
        m.insert("lambda_schedule".into(), "equal-interval".into());
        m.insert("resampling".into(), RESAMPLING_SCHEME.into());
        m.insert("out_of_box_proposals".into(), "rejected".into());
        m.insert(
            "nominal_evaluations".into(),
            (2 * self.targets as u64 * self.particles as u64).to_string(),
        );
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub decision: DecisionVector,
    pub objectives: ObjectiveVector,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    particles: Vec<DecisionVector>,
    // objective values of `particles`; empty until evaluated
    objectives: Vec<ObjectiveVector>,
    log_weights: Vec<f64>,
    incumbent: Option<Incumbent>,
}

impl Population {
    /// Equally weighted population from explicit particles.
    pub fn from_particles(particles: Vec<DecisionVector>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidInput("population must not be empty".into()));
        }
        let n = particles.len();
        Ok(Population {
            particles,
            objectives: Vec::new(),
            log_weights: vec![-(n as f64).ln(); n],
            incumbent: None,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[DecisionVector] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn incumbent(&self) -> Option<&Incumbent> {
        self.incumbent.as_ref()
    }

    pub fn is_evaluated(&self) -> bool {
        self.objectives.len() == self.particles.len()
    }

    /// Measures both objectives at every particle.
    pub fn evaluate(&mut self, evaluator: &Evaluator<'_>) -> Result<()> {
        self.objectives = self
            .particles
            .iter()
            .map(|x| evaluator.evaluate(x))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn ensure_evaluated(&mut self, evaluator: &Evaluator<'_>) -> Result<()> {
        if !self.is_evaluated() {
            self.evaluate(evaluator)?;
        }
        Ok(())
    }
}

/// Draws `N` particles uniformly from the problem's box.
pub fn initialize<R: Rng + ?Sized>(
    config: &PfopsConfig,
    problem: &BiObjectiveProblem,
    rng: &mut R,
) -> Population {
    let particles = (0..config.particles.max(1))
        .map(|_| problem.sample_uniform(rng))
        .collect();
    Population::from_particles(particles).expect("at least one particle")
}

/// Sets the incumbent to the particle with the highest `log π`, lowest
/// index on ties.
pub fn update_incumbent(
    pop: &mut Population,
    s: &Scalarization,
    evaluator: &Evaluator<'_>,
) -> Result<()> {
    pop.ensure_evaluated(evaluator)?;
    let mut best = 0;
    let mut best_lp = f64::NEG_INFINITY;
    for (i, y) in pop.objectives.iter().enumerate() {
        let lp = s.log_density_of(*y);
        if lp > best_lp || i == 0 {
            best = i;
            best_lp = lp;
        }
    }
    pop.incumbent = Some(Incumbent {
        decision: pop.particles[best].clone(),
        objectives: pop.objectives[best],
        log_density: best_lp,
    });
    Ok(())
}

/// Numerically stable `ln Σ exp(x_i)`; `−∞` for empty or all-`−∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Incremental importance weights for step `k` (1-based), normalized.
///
/// `log ω̂ = log π_1(x)` at `k = 1`, otherwise `log π_k(x) − log π_{k−1}(x)`.
pub fn importance_weights(
    pop: &mut Population,
    k: usize,
    s_k: &Scalarization,
    s_prev: Option<&Scalarization>,
    evaluator: &Evaluator<'_>,
) -> Result<()> {
    if k == 0 || s_prev.is_some() != (k > 1) {
        return Err(Error::InvalidConfig(format!(
            "step {k}: a previous target is required exactly when k > 1"
        )));
    }
    pop.ensure_evaluated(evaluator)?;
    for (w, y) in pop.log_weights.iter_mut().zip(&pop.objectives) {
        let lw = match s_prev {
            None => s_k.log_density_of(*y),
            Some(prev) => s_k.log_density_of(*y) - prev.log_density_of(*y),
        };
        *w = if lw.is_nan() { f64::NEG_INFINITY } else { lw };
    }
    let norm = log_sum_exp(&pop.log_weights);
    if !norm.is_finite() {
        return Err(Error::DegenerateWeights { step: k });
    }
    for w in &mut pop.log_weights {
        *w -= norm;
    }
    Ok(())
}

/// Multinomial resampling: `N` independent draws from the normalized
/// weights. Weights are reset to `1/N`. Returns the parent index of each
/// offspring.
pub fn resample<R: Rng + ?Sized>(pop: &mut Population, rng: &mut R) -> Vec<usize> {
    let n = pop.len();
    let dist = WeightedIndex::new(pop.log_weights.iter().map(|w| w.exp()))
        .expect("weights normalized before resampling");
    let parents: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
    pop.particles = parents.iter().map(|&j| pop.particles[j].clone()).collect();
    if pop.objectives.len() == n {
        pop.objectives = parents.iter().map(|&j| pop.objectives[j]).collect();
    }
    pop.log_weights = vec![-(n as f64).ln(); n];
    parents
}

struct SweepOutcome {
    best: Option<Incumbent>,
    proposals_accepted: usize,
}

/// One componentwise random-walk Metropolis pass over every particle and
/// coordinate, targeting `π` given by `s`.
///
/// Each particle draws from its own substream `(step, i)`, so particles are
/// swept concurrently without affecting the result. Proposals outside the
/// box have zero density: they are rejected but still charged two
/// evaluations. Any proposal beating the incumbent replaces it. Returns the
/// number of accepted proposals.
pub fn metropolis_sweep(
    pop: &mut Population,
    s: &Scalarization,
    evaluator: &Evaluator<'_>,
    sigma: f64,
    streams: &RngStreams,
    step: usize,
) -> Result<usize> {
    pop.ensure_evaluated(evaluator)?;
    let problem = evaluator.problem();
    let floor = pop
        .incumbent
        .as_ref()
        .map_or(f64::NEG_INFINITY, |inc| inc.log_density);

    let outcomes: Vec<SweepOutcome> = pop
        .particles
        .par_iter_mut()
        .zip(pop.objectives.par_iter_mut())
        .enumerate()
        .map(|(i, (x, y))| -> Result<SweepOutcome> {
            let mut rng = streams.substream(step, i);
            let mut current = s.log_density_of(*y);
            let mut best: Option<Incumbent> = None;
            let mut accepted = 0;
            for j in 0..x.len() {
                let mut proposal = x.clone();
                let z: f64 = rng.sample(StandardNormal);
                proposal.coords_mut()[j] += sigma * z;

                let (lp, y_new) = if problem.contains(&proposal) {
                    let y_new = evaluator.evaluate(&proposal)?;
                    (s.log_density_of(y_new), Some(y_new))
                } else {
                    evaluator.charge(2);
                    (f64::NEG_INFINITY, None)
                };

                let bar = best.as_ref().map_or(floor, |b| b.log_density);
                if let Some(y_new) = y_new {
                    if lp > bar {
                        best = Some(Incumbent {
                            decision: proposal.clone(),
                            objectives: y_new,
                            log_density: lp,
                        });
                    }
                }

                let log_ratio = lp - current;
                let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
                if let (true, Some(y_new)) = (accept, y_new) {
                    *x = proposal;
                    *y = y_new;
                    current = lp;
                    accepted += 1;
                }
            }
            Ok(SweepOutcome {
                best,
                proposals_accepted: accepted,
            })
        })
        .collect::<Result<_>>()?;

    // Reduction in particle order: strict improvement keeps the lowest
    // index on ties.
    let mut accepted = 0;
    for outcome in outcomes {
        accepted += outcome.proposals_accepted;
        if let Some(candidate) = outcome.best {
            let beats = pop
                .incumbent
                .as_ref()
                .is_none_or(|inc| candidate.log_density > inc.log_density);
            if beats {
                pop.incumbent = Some(candidate);
            }
        }
    }
    Ok(accepted)
}

/// Estimated Pareto set with its index-aligned front.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    decisions: Vec<DecisionVector>,
    front: Vec<ObjectiveVector>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        ParetoArchive::default()
    }

    pub fn push(&mut self, decision: DecisionVector, objectives: ObjectiveVector) {
        self.decisions.push(decision);
        self.front.push(objectives);
    }

    pub fn decisions(&self) -> &[DecisionVector] {
        &self.decisions
    }

    pub fn front_points(&self) -> &[ObjectiveVector] {
        &self.front
    }

    pub fn front(&self) -> Front {
        Front::new(self.front.clone())
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Drops every member whose objective vector is dominated by another's.
    pub fn remove_dominated(&mut self) {
        let keep = nondominated_indices(&self.front);
        self.decisions = keep.iter().map(|&i| self.decisions[i].clone()).collect();
        self.front = keep.iter().map(|&i| self.front[i]).collect();
    }

    /// True when `front[i] == F(decisions[i])` for every member.
    pub fn is_aligned_with(&self, problem: &BiObjectiveProblem) -> bool {
        self.decisions.len() == self.front.len()
            && self
                .decisions
                .iter()
                .zip(&self.front)
                .all(|(x, y)| problem.objectives_uncounted(x) == *y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfopsOutcome {
    pub archive: ParetoArchive,
    pub eval_count: u64,
    /// Accepted Metropolis proposals over the whole run.
    pub accepted_moves: usize,
}

/// Runs PFOPS over the equal-interval schedule of `config.targets` steps.
pub fn run(config: &PfopsConfig, problem: &BiObjectiveProblem) -> Result<PfopsOutcome> {
    config.validate()?;
    let schedule = equal_interval_schedule(config.targets)?;
    run_with_schedule(config, problem, &schedule)
}

pub fn run_with_schedule(
    config: &PfopsConfig,
    problem: &BiObjectiveProblem,
    schedule: &LambdaSchedule,
) -> Result<PfopsOutcome> {
    config.validate()?;
    let evaluator = Evaluator::new(problem);
    let streams = RngStreams::new(config.seed);
    let mut rng = streams.main();

    let mut pop = initialize(config, problem, &mut rng);
    let mut archive = ParetoArchive::new();
    let mut accepted_moves = 0;
    let mut prev: Option<Scalarization> = None;

    for (idx, &lambda) in schedule.values().iter().enumerate() {
        let k = idx + 1;
        let s = config.scalarization_at(lambda)?;
        pop.evaluate(&evaluator)?;
        update_incumbent(&mut pop, &s, &evaluator)?;
        importance_weights(&mut pop, k, &s, prev.as_ref(), &evaluator)?;
        resample(&mut pop, &mut rng);
        if config.metropolis_enabled {
            accepted_moves +=
                metropolis_sweep(&mut pop, &s, &evaluator, config.sigma, &streams, k)?;
        }
        let best = pop.incumbent.as_ref().expect("set by update_incumbent");
        archive.push(best.decision.clone(), best.objectives);
        prev = Some(s);
    }

    if config.final_filter_enabled {
        archive.remove_dominated();
    }
    Ok(PfopsOutcome {
        archive,
        eval_count: evaluator.count(),
        accepted_moves,
    })
}
