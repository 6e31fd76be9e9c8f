//! Problem generators, experiment configuration and the invariant suite.

pub mod experiment;
pub mod generators;
pub mod suite;

pub use experiment::{execute, run_experiment, ExperimentConfig, ExperimentSummary, GammaRule, ProblemSource, SolverSelection};
pub use generators::{gen_lasso, gen_random_quadratic, GeneratorSpec};
pub use suite::{run_check_suite, SuiteReport};
