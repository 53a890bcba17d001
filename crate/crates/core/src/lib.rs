//! Multi-objective optimization by particle filtering over a path of
//! scalarized target densities, with benchmark problems, an NSGA-II
//! baseline, front-quality metrics and an experiment runner.

pub mod error;
pub mod experiment;
pub mod nsga2;
pub mod optimizer;
pub mod pareto;
pub mod problems;
pub mod rng;
pub mod scalarize;

pub use error::{Error, Result};
pub use experiment::{
    compare, lookup_preset, presets, run_experiment, run_preset, AlgorithmConfig, Comparison,
    ExperimentPreset, RunReport,
};
pub use nsga2::{evolve as run_nsga2, Nsga2Config, Nsga2Outcome};
pub use optimizer::{run as run_pfops, ParetoArchive, PfopsConfig, PfopsOutcome, Population};
pub use pareto::{dominates, hypervolume_2d, igd, nondominated_filter, reference_front, Front};
pub use problems::{
    lookup_problem, BiObjectiveProblem, DecisionVector, Evaluator, ObjectiveVector,
};
pub use scalarize::{equal_interval_schedule, LambdaSchedule, Scalarization, ScalarizationKind};
