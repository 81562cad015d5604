//! Objective functions: noisy analytical benchmarks and external programs.

mod benchmarks;
mod external;
mod noise;

pub use benchmarks::{
    default_wfg4_k, Benchmark, ObjectiveRange, Problem, RANGE_SAMPLES, RANGE_SEED,
};
pub use external::{ExternalCommand, ExternalEvaluator};
pub use noise::{eval_noisy, NoiseLine, NoiseModel, TAU_MAX_FRAC, TAU_MIN_FRAC};

use crate::error::Result;
use crate::rng::StreamRng;
use crate::space::{DesignPoint, SearchSpace};

/// Anything that returns replicated objective vectors for a design point.
pub trait Evaluator: Send + Sync {
    fn space(&self) -> &SearchSpace;

    fn n_objectives(&self) -> usize;

    fn evaluate(&self, point: &DesignPoint, r: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>>;
}

/// A benchmark problem observed through its heteroscedastic noise model.
#[derive(Clone, Debug)]
pub struct NoisyBenchmark {
    pub problem: Problem,
    pub noise: NoiseModel,
}

impl NoisyBenchmark {
    /// Wraps `problem` with the noise model fitted to its cached objective
    /// ranges.
    pub fn new(problem: Problem) -> Self {
        let noise = NoiseModel::for_problem(&problem);
        Self { problem, noise }
    }
}

impl Evaluator for NoisyBenchmark {
    fn space(&self) -> &SearchSpace {
        self.problem.space()
    }

    fn n_objectives(&self) -> usize {
        self.problem.n_objectives()
    }

    fn evaluate(&self, point: &DesignPoint, r: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        eval_noisy(&self.problem, &self.noise, point, r, rng)
    }
}

/// An external program paired with the search space it is evaluated on.
#[derive(Debug)]
pub struct ExternalProblem {
    pub space: SearchSpace,
    pub evaluator: ExternalEvaluator,
}

impl Evaluator for ExternalProblem {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn n_objectives(&self) -> usize {
        self.evaluator.command().n_objectives
    }

    fn evaluate(&self, point: &DesignPoint, r: usize, _rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        self.evaluator.evaluate(point, r)
    }
}
