//! The path of unnormalized target densities `π_k` between the two objectives.
//!
//! Densities are only ever compared or divided, so the normalizing constant
//! is never needed and everything is kept in log space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{DecisionVector, Evaluator, ObjectiveVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarizationKind {
    /// `−[(1−λ) f1 + λ f2]`
    WeightedSum,
    /// `−max{(1−λ)|f1 − z1*|, λ|f2 − z2*|}`
    Tchebycheff,
}

impl ScalarizationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalarizationKind::WeightedSum => "weighted-sum",
            ScalarizationKind::Tchebycheff => "tchebycheff",
        }
    }
}

impl fmt::Display for ScalarizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalarizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted-sum" => Ok(ScalarizationKind::WeightedSum),
            "tchebycheff" => Ok(ScalarizationKind::Tchebycheff),
            _ => Err(Error::NotFound {
                kind: "scalarization",
                name: s.to_string(),
                valid: vec!["weighted-sum".into(), "tchebycheff".into()],
            }),
        }
    }
}

/// One member of the target family, fixed by its balance parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalarization {
    kind: ScalarizationKind,
    lambda: f64,
    utopian: Option<ObjectiveVector>,
}

impl Scalarization {
    pub fn weighted_sum(lambda: f64) -> Result<Self> {
        Self::new(ScalarizationKind::WeightedSum, lambda, None)
    }

    pub fn tchebycheff(lambda: f64, utopian: ObjectiveVector) -> Result<Self> {
        Self::new(ScalarizationKind::Tchebycheff, lambda, Some(utopian))
    }

    pub fn new(
        kind: ScalarizationKind,
        lambda: f64,
        utopian: Option<ObjectiveVector>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!(
                "balance parameter {lambda} outside [0, 1]"
            )));
        }
        match (kind, utopian) {
            (ScalarizationKind::Tchebycheff, None) => Err(Error::InvalidConfig(
                "tchebycheff scalarization requires a utopian point".into(),
            )),
            (ScalarizationKind::WeightedSum, Some(_)) => Err(Error::InvalidConfig(
                "weighted-sum scalarization takes no utopian point".into(),
            )),
            _ => Ok(Scalarization {
                kind,
                lambda,
                utopian,
            }),
        }
    }

    pub fn kind(&self) -> ScalarizationKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn utopian(&self) -> Option<ObjectiveVector> {
        self.utopian
    }

    /// Same kind and utopian point, different balance.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kind, lambda, self.utopian)
    }

    /// `log π(x)` given the objective values at `x`.
    #[inline]
    pub fn log_density_of(&self, y: ObjectiveVector) -> f64 {
        let l = self.lambda;
        match (self.kind, self.utopian) {
            (ScalarizationKind::WeightedSum, _) => -((1.0 - l) * y.f1() + l * y.f2()),
            (ScalarizationKind::Tchebycheff, Some(z)) => {
                -((1.0 - l) * (y.f1() - z.f1()).abs()).max(l * (y.f2() - z.f2()).abs())
            }
            (ScalarizationKind::Tchebycheff, None) => unreachable!("checked in constructor"),
        }
    }

    /// Evaluates both objectives at `x` (charging the evaluator) and returns
    /// `log π(x)`.
    pub fn log_density(&self, evaluator: &Evaluator<'_>, x: &[f64]) -> Result<f64> {
        Ok(self.log_density_of(evaluator.evaluate(x)?))
    }
}

/// Strictly increasing balance parameters from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSchedule(Vec<f64>);

impl LambdaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidConfig(
                "a schedule needs at least two balance parameters".into(),
            ));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
            return Err(Error::InvalidConfig(
                "a schedule must start at 0 and end at 1".into(),
            ));
        }
        if values
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidConfig(
                "schedule is not strictly increasing".into(),
            ));
        }
        Ok(LambdaSchedule(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `λ_k = (k−1)/(K−1)` for `k = 1..=K`.
pub fn equal_interval_schedule(k: usize) -> Result<LambdaSchedule> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 target densities, got {k}"
        )));
    }
    let last = (k - 1) as f64;
    // the last entry is pinned so rounding can never leave it short of 1
    let values = (0..k)
        .map(|i| if i == k - 1 { 1.0 } else { i as f64 / last })
        .collect();
    LambdaSchedule::new(values)
}

/// Minimizer `(5λ, 5λ)` of `(1−λ) f1 + λ f2` for the convex benchmark.
pub fn analytic_weighted_sum_minimizer_convex(lambda: f64) -> DecisionVector {
    DecisionVector::new(vec![5.0 * lambda, 5.0 * lambda])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::convex_problem;
    use proptest::prelude::*;

    #[test]
    fn schedules() {
        assert_eq!(equal_interval_schedule(2).unwrap().values(), &[0.0, 1.0]);
        assert_eq!(
            equal_interval_schedule(3).unwrap().values(),
            &[0.0, 0.5, 1.0]
        );
        assert_eq!(
            equal_interval_schedule(5).unwrap().values(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(matches!(
            equal_interval_schedule(1),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            equal_interval_schedule(0),
            Err(Error::InvalidConfig(_))
        ));
        let long = equal_interval_schedule(200).unwrap();
        assert_eq!(long.len(), 200);
        assert_eq!(*long.values().last().unwrap(), 1.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(LambdaSchedule::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(LambdaSchedule::new(vec![0.1, 1.0]).is_err());
        assert!(LambdaSchedule::new(vec![0.0, 0.9]).is_err());
    }

    #[test]
    fn log_density_examples() {
        let p = convex_problem();
        let ev = Evaluator::new(&p);
        let s0 = Scalarization::weighted_sum(0.0).unwrap();
        assert_eq!(s0.log_density(&ev, &[0.0, 0.0]).unwrap(), 0.0);
        let half = Scalarization::weighted_sum(0.5).unwrap();
        assert_eq!(half.log_density(&ev, &[0.0, 0.0]).unwrap(), -25.0);
        assert_eq!(ev.count(), 4);

        let t = Scalarization::tchebycheff(0.5, ObjectiveVector::new(0.0, 0.0)).unwrap();
        assert_eq!(t.log_density_of(ObjectiveVector::new(1.0, 3.0)), -1.5);
    }

    #[test]
    fn log_density_rejects_out_of_bounds() {
        let p = convex_problem();
        let ev = Evaluator::new(&p);
        let s = Scalarization::weighted_sum(0.3).unwrap();
        assert!(matches!(
            s.log_density(&ev, &[-6.0, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn constructor_contracts() {
        assert!(Scalarization::weighted_sum(1.5).is_err());
        assert!(Scalarization::weighted_sum(-0.1).is_err());
        assert!(Scalarization::new(ScalarizationKind::Tchebycheff, 0.5, None).is_err());
        assert!(Scalarization::new(
            ScalarizationKind::WeightedSum,
            0.5,
            Some(ObjectiveVector::new(0.0, 0.0))
        )
        .is_err());
        assert_eq!(
            "tchebycheff".parse::<ScalarizationKind>().unwrap(),
            ScalarizationKind::Tchebycheff
        );
        assert!("sum".parse::<ScalarizationKind>().is_err());
    }

    #[test]
    fn analytic_minimizer() {
        assert_eq!(
            analytic_weighted_sum_minimizer_convex(0.0).coords(),
            &[0.0, 0.0]
        );
        assert_eq!(
            analytic_weighted_sum_minimizer_convex(1.0).coords(),
            &[5.0, 5.0]
        );
        assert_eq!(
            analytic_weighted_sum_minimizer_convex(0.5).coords(),
            &[2.5, 2.5]
        );
    }

    // Brute-force grid argmax of the weighted-sum density.
    fn grid_argmax(lambda: f64, step: f64) -> (f64, f64) {
        let p = convex_problem();
        let s = Scalarization::weighted_sum(lambda).unwrap();
        let n = (15.0 / step).round() as usize;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=n {
            let x1 = -5.0 + i as f64 * step;
            for j in 0..=n {
                let x2 = -5.0 + j as f64 * step;
                let v = s.log_density_of(p.objectives_uncounted(&[x1, x2]));
                if v > best.0 {
                    best = (v, x1, x2);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn analytic_minimizer_matches_fine_grid_search() {
        let (x1, x2) = grid_argmax(0.5, 0.01);
        assert!((x1 - 2.5).abs() <= 0.01 && (x2 - 2.5).abs() <= 0.01);
    }

    #[test]
    fn argmax_consistency_over_lambda_grid() {
        for i in 0..=20 {
            let lambda = i as f64 / 20.0;
            let (x1, x2) = grid_argmax(lambda, 0.05);
            let m = analytic_weighted_sum_minimizer_convex(lambda);
            assert!(
                (x1 - m[0]).abs() <= 0.05 + 1e-9,
                "λ={lambda}: {x1} vs {}",
                m[0]
            );
            assert!(
                (x2 - m[1]).abs() <= 0.05 + 1e-9,
                "λ={lambda}: {x2} vs {}",
                m[1]
            );
        }
    }

    proptest! {
        #[test]
        fn endpoints_ignore_the_other_objective(
            f1 in -100.0f64..100.0, f2 in -100.0f64..100.0, d in -50.0f64..50.0
        ) {
            let s0 = Scalarization::weighted_sum(0.0).unwrap();
            let s1 = Scalarization::weighted_sum(1.0).unwrap();
            prop_assert_eq!(
                s0.log_density_of(ObjectiveVector::new(f1, f2)),
                s0.log_density_of(ObjectiveVector::new(f1, f2 + d))
            );
            prop_assert_eq!(
                s1.log_density_of(ObjectiveVector::new(f1, f2)),
                s1.log_density_of(ObjectiveVector::new(f1 + d, f2))
            );
        }

        #[test]
        fn tchebycheff_nonpositive_above_utopia(
            lambda in 0.0f64..=1.0, d1 in 0.0f64..100.0, d2 in 0.0f64..100.0,
            z1 in -30.0f64..0.0, z2 in -30.0f64..0.0
        ) {
            let s = Scalarization::tchebycheff(lambda, ObjectiveVector::new(z1, z2)).unwrap();
            prop_assert!(s.log_density_of(ObjectiveVector::new(z1 + d1, z2 + d2)) <= 0.0);
        }

        #[test]
        fn shifting_f1_up_lowers_weighted_sum_density(
            lambda in 0.0f64..0.999, f1 in -50.0f64..50.0, f2 in -50.0f64..50.0, c in 0.01f64..10.0
        ) {
            let s = Scalarization::weighted_sum(lambda).unwrap();
            prop_assert!(
                s.log_density_of(ObjectiveVector::new(f1 + c, f2))
                    < s.log_density_of(ObjectiveVector::new(f1, f2))
            );
        }
    }
}
