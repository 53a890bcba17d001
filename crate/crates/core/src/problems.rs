//! Bi-objective benchmark problems and the per-run evaluation counter.
//!
//! A [`BiObjectiveProblem`] is immutable and can be shared freely between
//! threads. Objective calls that should count towards a run's budget go
//! through an [`Evaluator`], which owns the (atomic) counter for that run.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registry names accepted by [`lookup_problem`].
pub const PROBLEM_NAMES: [&str; 3] = ["convex", "fonseca", "kursawe"];

/// A point in the box-constrained decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(coords: Vec<f64>) -> Self {
        DecisionVector(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DecisionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DecisionVector {
    fn from(v: Vec<f64>) -> Self {
        DecisionVector(v)
    }
}

/// Objective values `(f1, f2)` of a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub [f64; 2]);

impl ObjectiveVector {
    pub const fn new(f1: f64, f2: f64) -> Self {
        ObjectiveVector([f1, f2])
    }

    #[inline]
    pub fn f1(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn f2(&self) -> f64 {
        self.0[1]
    }

    pub fn distance(&self, other: &ObjectiveVector) -> f64 {
        (self.f1() - other.f1()).hypot(self.f2() - other.f2())
    }

    pub fn is_finite(&self) -> bool {
        self.f1().is_finite() && self.f2().is_finite()
    }
}

impl From<(f64, f64)> for ObjectiveVector {
    fn from((f1, f2): (f64, f64)) -> Self {
        ObjectiveVector::new(f1, f2)
    }
}

type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Two objectives to be minimized over a box `[lower, upper]`.
#[derive(Clone)]
pub struct BiObjectiveProblem {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    f1: ObjectiveFn,
    f2: ObjectiveFn,
}

impl fmt::Debug for BiObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiObjectiveProblem")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

impl BiObjectiveProblem {
    pub fn new<F1, F2>(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        f1: F1,
        f2: F2,
    ) -> Result<Self>
    where
        F1: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        F2: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidConfig(format!(
                "problem `{name}`: bounds must be non-empty and of equal length"
            )));
        }
        if let Some(j) = (0..lower.len())
            .find(|&j| lower[j].partial_cmp(&upper[j]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidConfig(format!(
                "problem `{name}`: lower[{j}] = {} is not below upper[{j}] = {}",
                lower[j], upper[j]
            )));
        }
        Ok(BiObjectiveProblem {
            name,
            lower,
            upper,
            f1: Arc::new(f1),
            f2: Arc::new(f2),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Inclusive box membership; also false on a dimension mismatch.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    pub fn check_bounds(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                problem: self.name.clone(),
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutOfBounds {
                problem: self.name.clone(),
                point: x.to_vec(),
            });
        }
        Ok(())
    }

    /// Objective values without touching any budget counter. Used for
    /// reference-front construction and for re-deriving archive fronts.
    pub fn objectives_uncounted(&self, x: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new((self.f1)(x), (self.f2)(x))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DecisionVector {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| rng.random_range(lo..=hi))
            .collect::<Vec<_>>()
            .into()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Budget-counting view of a problem for a single run.
///
/// Every single-objective evaluation adds one to the counter, so evaluating
/// both objectives at `n` points adds `2n`.
#[derive(Debug)]
pub struct Evaluator<'p> {
    problem: &'p BiObjectiveProblem,
    evals: AtomicU64,
}

impl<'p> Evaluator<'p> {
    pub fn new(problem: &'p BiObjectiveProblem) -> Self {
        Evaluator {
            problem,
            evals: AtomicU64::new(0),
        }
    }

    pub fn problem(&self) -> &'p BiObjectiveProblem {
        self.problem
    }

    pub fn f1(&self, x: &[f64]) -> Result<f64> {
        self.problem.check_bounds(x)?;
        self.charge(1);
        Ok((self.problem.f1)(x))
    }

    pub fn f2(&self, x: &[f64]) -> Result<f64> {
        self.problem.check_bounds(x)?;
        self.charge(1);
        Ok((self.problem.f2)(x))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        self.problem.check_bounds(x)?;
        self.charge(2);
        Ok(self.problem.objectives_uncounted(x))
    }

    /// Records `n` evaluations that were spent without producing a value
    /// (e.g. proposals rejected for leaving the box).
    pub fn charge(&self, n: u64) {
        self.evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// `f1 = x1² + x2²`, `f2 = (x1 − 5)² + (x2 − 5)²` on `[−5, 10]²`.
pub fn convex_problem() -> BiObjectiveProblem {
    BiObjectiveProblem::new(
        "convex",
        vec![-5.0, -5.0],
        vec![10.0, 10.0],
        |x| x.iter().map(|v| v * v).sum(),
        |x| x.iter().map(|v| (v - 5.0).powi(2)).sum(),
    )
    .expect("static bounds are valid")
}

/// Two-dimensional Fonseca–Fleming on `[−4, 4]²`, squared-deviation form.
pub fn fonseca_fleming_problem() -> BiObjectiveProblem {
    BiObjectiveProblem::new(
        "fonseca",
        vec![-4.0, -4.0],
        vec![4.0, 4.0],
        |x| 1.0 - (-x.iter().map(|v| (v - FRAC_1_SQRT_2).powi(2)).sum::<f64>()).exp(),
        |x| 1.0 - (-x.iter().map(|v| (v + FRAC_1_SQRT_2).powi(2)).sum::<f64>()).exp(),
    )
    .expect("static bounds are valid")
}

/// Three-dimensional Kursawe on `[−5, 5]³`.
pub fn kursawe_problem() -> BiObjectiveProblem {
    BiObjectiveProblem::new(
        "kursawe",
        vec![-5.0; 3],
        vec![5.0; 3],
        |x| {
            x.windows(2)
                .map(|w| -10.0 * (-0.2 * w[0].hypot(w[1])).exp())
                .sum()
        },
        |x| {
            x.iter()
                .map(|v| v.abs().powf(0.8) + 5.0 * (v * v * v).sin())
                .sum()
        },
    )
    .expect("static bounds are valid")
}

pub fn lookup_problem(name: &str) -> Result<BiObjectiveProblem> {
    match name {
        "convex" => Ok(convex_problem()),
        "fonseca" => Ok(fonseca_fleming_problem()),
        "kursawe" => Ok(kursawe_problem()),
        _ => Err(Error::NotFound {
            kind: "problem",
            name: name.to_string(),
            valid: PROBLEM_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}
