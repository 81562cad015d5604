//! The sequential optimization loop and macro-replication driver.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{select_infill_gp_motpe, select_infill_gp_pso, MeiContext, PsoConfig};
use crate::archive::{Archive, Merge};
use crate::doe::{latin_hypercube, random_design, DesignScheme};
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel, GpParams};
use crate::pareto::{archive_hypervolume, nondominated_sort, split_gamma};
use crate::problems::Evaluator;
use crate::rng::RngStream;
use crate::scalarize::{build_scalarized_dataset, draw_weights, DEFAULT_RHO};
use crate::space::{sample_uniform, DesignPoint};
use crate::tpe::{build_density_pair, motpe_select, TpeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GpMotpe,
    Gp,
    Motpe,
    Random,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::GpMotpe, Mode::Gp, Mode::Motpe, Mode::Random];

    pub fn name(self) -> &'static str {
        match self {
            Mode::GpMotpe => "gp_motpe",
            Mode::Gp => "gp",
            Mode::Motpe => "motpe",
            Mode::Random => "random",
        }
    }

    fn uses_gp(self) -> bool {
        matches!(self, Mode::GpMotpe | Mode::Gp)
    }

    fn uses_tpe(self) -> bool {
        matches!(self, Mode::GpMotpe | Mode::Motpe)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (expected gp_motpe, gp, motpe or random)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub iterations: usize,
    pub replications: usize,
    pub init_size: usize,
    pub init_scheme: DesignScheme,
    pub gamma: f64,
    pub n_c: usize,
    pub seed: u64,
    pub reference_point: Vec<f64>,
    pub rho: f64,
    pub gp: GpConfig,
    pub pso: PsoConfig,
    pub tpe: TpeConfig,
}

impl RunConfig {
    /// Defaults for an analytical problem of dimension `d`.
    pub fn analytical(mode: Mode, d: usize, reference_point: Vec<f64>) -> Self {
        Self {
            mode,
            iterations: 100,
            replications: 50,
            init_size: crate::doe::default_size(d),
            init_scheme: DesignScheme::Lhs,
            gamma: 0.3,
            n_c: 1000,
            seed: 0,
            reference_point,
            rho: DEFAULT_RHO,
            gp: GpConfig::default(),
            pso: PsoConfig::default(),
            tpe: TpeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.init_size == 0 {
            return Err(Error::Config("init_size must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if self.n_c == 0 {
            return Err(Error::Config("n_c must be >= 1".into()));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config("rho must be finite and >= 0".into()));
        }
        if self.reference_point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("reference_point must be finite".into()));
        }
        self.gp.validate()?;
        self.pso.validate()?;
        self.tpe.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFlags {
    /// No TPE candidate had a positive aggregated score.
    pub q_fallback: bool,
    /// The GP fit needed the escalated jitter ladder.
    pub gp_retry: bool,
    /// The infill point duplicated an archived one and was pooled into it.
    pub pooled: bool,
}

impl TraceFlags {
    /// `|`-separated names of the raised flags, empty if none.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.q_fallback {
            parts.push("q_fallback");
        }
        if self.gp_retry {
            parts.push("gp_retry");
        }
        if self.pooled {
            parts.push("pooled");
        }
        parts.join("|")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    /// 0 for initial-design rows, then 1..=iterations.
    pub iter: usize,
    pub point: DesignPoint,
    /// Sample mean and std of the record the point was merged into.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Scalarization weights, for modes that scalarize.
    pub weights: Option<Vec<f64>>,
    pub hv: f64,
    pub wall_ms: f64,
    pub flags: TraceFlags,
}

#[derive(Debug)]
pub struct RunResult {
    pub mode: Mode,
    pub stream: RngStream,
    /// One row per initial design point, all with the initial hypervolume.
    pub initial: Vec<IterationTrace>,
    pub initial_hv: f64,
    pub traces: Vec<IterationTrace>,
    pub archive: Archive,
    /// Set when the run stopped early; `traces` holds what was completed.
    pub error: Option<Error>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    /// Hypervolume after the initial design followed by one value per
    /// completed iteration.
    pub fn hv_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_hv)
            .chain(self.traces.iter().map(|t| t.hv))
            .collect()
    }

    pub fn final_hv(&self) -> f64 {
        self.traces.last().map_or(self.initial_hv, |t| t.hv)
    }
}

// stream tags
const TAG_DESIGN: u64 = 1;
const TAG_INIT_EVAL: u64 = 2;
const TAG_ITER: u64 = 1_000;
const TAG_WEIGHTS: u64 = 0;
const TAG_GP: u64 = 1;
const TAG_INFILL: u64 = 2;
const TAG_EVAL: u64 = 3;

/// Runs one optimization with streams rooted at `(config.seed, 0)`.
pub fn run(evaluator: &dyn Evaluator, config: &RunConfig) -> Result<RunResult> {
    run_with_stream(evaluator, config, RngStream::new(config.seed, 0))
}

/// Runs one optimization. Configuration and initial-design errors are
/// returned as `Err`; failures after the initial design end the run early
/// and are reported in `RunResult::error`.
pub fn run_with_stream(evaluator: &dyn Evaluator, config: &RunConfig, root: RngStream) -> Result<RunResult> {
    config.validate()?;
    let space = evaluator.space().clone();
    let m = evaluator.n_objectives();
    if m != 2 {
        return Err(Error::Config(format!(
            "hypervolume tracing supports two objectives, the problem has {m}"
        )));
    }
    if config.reference_point.len() != m {
        return Err(Error::Shape {
            expected: m,
            actual: config.reference_point.len(),
        });
    }

    // the initial design depends on the root stream only, so every mode
    // starts from the same archive
    let design = {
        let mut rng = root.derive(TAG_DESIGN).rng();
        match config.init_scheme {
            DesignScheme::Lhs => latin_hypercube(&space, config.init_size, &mut rng),
            DesignScheme::Random => random_design(&space, config.init_size, &mut rng),
        }
    };
    let init_stream = root.derive(TAG_INIT_EVAL);
    let started = Instant::now();
    let observations: Vec<Vec<Vec<f64>>> = design
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluator.evaluate(p, config.replications, &mut init_stream.derive(i as u64).rng()))
        .collect::<Result<_>>()?;
    let init_ms = started.elapsed().as_secs_f64() * 1e3 / design.size() as f64;

    let mut archive = Archive::new(space.clone(), m);
    let mut merged = Vec::with_capacity(design.size());
    for (p, obs) in design.points.iter().zip(observations) {
        merged.push(archive.merge_observation(p.clone(), obs)?);
    }
    let initial_hv = archive_hypervolume(&archive, &config.reference_point);
    let initial = design
        .points
        .iter()
        .zip(&merged)
        .map(|(p, mg)| {
            let rec = &archive.records()[mg.index()];
            IterationTrace {
                iter: 0,
                point: p.clone(),
                mean: rec.sample_mean.clone(),
                std: rec.sample_std(),
                weights: None,
                hv: initial_hv,
                wall_ms: init_ms,
                flags: TraceFlags {
                    pooled: matches!(mg, Merge::Pooled(_)),
                    ..TraceFlags::default()
                },
            }
        })
        .collect();

    let mut state = LoopState {
        config,
        evaluator,
        archive,
        warm: None,
    };
    let mut traces = Vec::with_capacity(config.iterations);
    let mut error = None;
    for it in 1..=config.iterations {
        match state.step(it, root.derive(TAG_ITER + it as u64)) {
            Ok(t) => traces.push(t),
            Err(e) => {
                warn!("{} run aborted at iteration {it}: {e}", config.mode);
                error = Some(e);
                break;
            }
        }
    }
    Ok(RunResult {
        mode: config.mode,
        stream: root,
        initial,
        initial_hv,
        traces,
        archive: state.archive,
        error,
    })
}

struct LoopState<'a> {
    config: &'a RunConfig,
    evaluator: &'a dyn Evaluator,
    archive: Archive,
    warm: Option<GpParams>,
}

impl LoopState<'_> {
    fn step(&mut self, it: usize, stream: RngStream) -> Result<IterationTrace> {
        let cfg = self.config;
        let started = Instant::now();
        let mut flags = TraceFlags::default();
        let space = self.archive.space().clone();
        let infill_stream = stream.derive(TAG_INFILL);

        let weights = cfg
            .mode
            .uses_gp()
            .then(|| draw_weights(self.archive.n_objectives(), cfg.rho, &mut stream.derive(TAG_WEIGHTS).rng()));

        let model_and_data = match &weights {
            Some(w) => {
                let dataset = build_scalarized_dataset(&self.archive, w)?;
                let model = self.fit(&dataset, stream.derive(TAG_GP), &mut flags)?;
                Some((model, dataset))
            }
            None => None,
        };

        let pair = if cfg.mode.uses_tpe() {
            let means = self.archive.means();
            let partition = nondominated_sort(&means);
            let split = split_gamma(&partition, &means, cfg.gamma, &split_reference(&means));
            Some(build_density_pair(&self.archive, &split, &space, &cfg.tpe)?)
        } else {
            None
        };

        let point = match cfg.mode {
            Mode::GpMotpe => {
                let (model, dataset) = model_and_data.as_ref().expect("gp fitted");
                let ctx = MeiContext::new(model, &self.archive, dataset);
                let choice = select_infill_gp_motpe(
                    &ctx,
                    pair.as_ref().expect("densities built"),
                    cfg.n_c,
                    &infill_stream,
                    Some(&self.archive),
                );
                flags.q_fallback = choice.fallback;
                choice.point
            }
            Mode::Gp => {
                let (model, dataset) = model_and_data.as_ref().expect("gp fitted");
                let ctx = MeiContext::new(model, &self.archive, dataset);
                select_infill_gp_pso(&ctx, &space, &cfg.pso, &infill_stream, Some(&self.archive)).point
            }
            Mode::Motpe => motpe_select(pair.as_ref().expect("densities built"), cfg.n_c, &infill_stream),
            Mode::Random => sample_uniform(&space, &mut infill_stream.rng()),
        };

        let obs = self
            .evaluator
            .evaluate(&point, cfg.replications, &mut stream.derive(TAG_EVAL).rng())?;
        let merged = self.archive.merge_observation(point.clone(), obs)?;
        if let Merge::Pooled(i) = merged {
            warn!("iteration {it}: infill point duplicates record {i}; replications pooled");
            flags.pooled = true;
        }
        let rec = &self.archive.records()[merged.index()];
        let hv = archive_hypervolume(&self.archive, &cfg.reference_point);
        debug!("{} iteration {it}: hv {hv}", cfg.mode);
        Ok(IterationTrace {
            iter: it,
            point,
            mean: rec.sample_mean.clone(),
            std: rec.sample_std(),
            weights: weights.map(|w| w.w),
            hv,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            flags,
        })
    }

    /// Fits the GP, retrying once with the escalated jitter ladder.
    fn fit(
        &mut self,
        dataset: &crate::scalarize::ScalarizedDataset,
        stream: RngStream,
        flags: &mut TraceFlags,
    ) -> Result<GpModel> {
        let cfg = self.config;
        let first = GpModel::fit_scalarized(&self.archive, dataset, &cfg.gp, self.warm.as_ref(), &mut stream.rng());
        let model = match first {
            Ok(m) => m,
            Err(e) => {
                warn!("GP fit failed ({e}); retrying with escalated jitter");
                flags.gp_retry = true;
                let escalated = cfg.gp.escalated();
                GpModel::fit_scalarized(&self.archive, dataset, &escalated, self.warm.as_ref(), &mut stream.derive(1).rng())?
            }
        };
        self.warm = Some(model.params().clone());
        Ok(model)
    }
}

/// Reference for the hypervolume tie-break inside the good/poor split: the
/// nadir of the archive means pushed out by 10% of each objective's range.
fn split_reference(means: &[Vec<f64>]) -> Vec<f64> {
    let m = means.first().map_or(0, Vec::len);
    (0..m)
        .map(|j| {
            let (lo, hi) = means
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[j]), b.max(v[j])));
            let span = hi - lo;
            hi + if span > 0.0 { 0.1 * span } else { 1.0 }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub iter: usize,
    pub hv_mean: f64,
    /// Sample standard deviation across runs; 0 for a single run.
    pub hv_std: f64,
    pub n_runs: usize,
}

#[derive(Debug)]
pub struct MacroResult {
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// Stream of macro-replication `k`.
pub fn macro_stream(seed: u64, k: usize) -> RngStream {
    RngStream::new(seed, 0).derive(k as u64 + 1)
}

/// Runs `n_macro` independent replications in parallel and aggregates the
/// hypervolume traces of the runs that completed.
pub fn run_macro(evaluator: &dyn Evaluator, config: &RunConfig, n_macro: usize) -> Result<MacroResult> {
    if n_macro == 0 {
        return Err(Error::Config("n_macro must be >= 1".into()));
    }
    config.validate()?;
    let runs: Vec<RunResult> = (0..n_macro)
        .into_par_iter()
        .map(|k| run_with_stream(evaluator, config, macro_stream(config.seed, k)))
        .collect::<Result<_>>()?;
    let aggregate = aggregate_runs(&runs, config.iterations);
    Ok(MacroResult { runs, aggregate })
}

/// Per-iteration mean and sample std of hypervolume over completed runs.
pub fn aggregate_runs(runs: &[RunResult], iterations: usize) -> Vec<AggregateRow> {
    let done: Vec<Vec<f64>> = runs.iter().filter(|r| r.completed()).map(|r| r.hv_series()).collect();
    if done.len() < runs.len() {
        warn!("{} of {} runs aborted; aggregating the rest", runs.len() - done.len(), runs.len());
    }
    if done.is_empty() {
        return Vec::new();
    }
    (0..=iterations)
        .map(|it| {
            let vals: Vec<f64> = done.iter().map(|s| s[it]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                iter: it,
                hv_mean: mean,
                hv_std: std,
                n_runs: vals.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Benchmark, NoisyBenchmark, Problem};

    fn small(mode: Mode) -> (NoisyBenchmark, RunConfig) {
        let bench = NoisyBenchmark::new(Problem::new(Benchmark::Zdt1, 3).unwrap());
        let mut cfg = RunConfig::analytical(mode, 3, vec![1.0, 10.0]);
        cfg.iterations = 4;
        cfg.replications = 5;
        cfg.init_size = 10;
        cfg.n_c = 200;
        cfg.gp.restarts = 3;
        cfg.pso = PsoConfig {
            swarm: 30,
            iters: 40,
            ..PsoConfig::default()
        };
        cfg.seed = 11;
        (bench, cfg)
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("gpmotpe".parse::<Mode>().is_err());
    }

    #[test]
    fn zero_iterations_rejected() {
        let (bench, mut cfg) = small(Mode::Random);
        cfg.iterations = 0;
        assert!(matches!(run(&bench, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn every_mode_spends_the_budget() {
        for mode in Mode::ALL {
            let (bench, cfg) = small(mode);
            let res = run(&bench, &cfg).unwrap();
            assert!(res.completed(), "{mode}: {:?}", res.error);
            assert_eq!(res.traces.len(), 4);
            assert_eq!(res.archive.len(), 14);
            assert_eq!(res.initial.len(), 10);
            let hv = res.hv_series();
            assert!(hv.windows(2).all(|w| w[1] >= w[0]), "{mode}: {hv:?}");
            for t in &res.traces {
                assert!(bench.space().contains(t.point.coords()));
                assert_eq!(t.weights.is_some(), mode.uses_gp());
            }
        }
    }

    #[test]
    fn modes_share_the_initial_design() {
        let designs: Vec<Vec<DesignPoint>> = Mode::ALL
            .iter()
            .map(|&mode| {
                let (bench, mut cfg) = small(mode);
                cfg.iterations = 1;
                run(&bench, &cfg).unwrap().initial.into_iter().map(|t| t.point).collect()
            })
            .collect();
        assert!(designs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_macro_has_zero_std() {
        let (bench, mut cfg) = small(Mode::Motpe);
        cfg.iterations = 2;
        let res = run_macro(&bench, &cfg, 1).unwrap();
        assert_eq!(res.aggregate.len(), 3);
        assert!(res.aggregate.iter().all(|r| r.hv_std == 0.0 && r.n_runs == 1));
    }

    #[test]
    fn split_reference_lies_beyond_the_nadir() {
        let r = split_reference(&[vec![0.0, 3.0], vec![1.0, 3.0]]);
        assert_eq!(r, vec![1.1, 4.0]);
    }
}
