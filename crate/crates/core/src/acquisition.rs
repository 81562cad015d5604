//! Infill selection by modified expected improvement (MEI).
//!
//! MEI measures improvement against the model's prediction at the archive
//! point with the lowest scalarized sample mean, and uses the noise-free
//! kriging standard deviation, so replicated noisy points do not look
//! uncertain forever.

use log::debug;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::normal;
use crate::rng::RngStream;
use crate::scalarize::ScalarizedDataset;
use crate::space::{DesignPoint, SearchSpace};
use crate::tpe::{aggregated_score, sample_candidates, TpeDensityPair};

/// Below this predictive std the improvement is taken as deterministic.
pub const STD_EPS: f64 = 1e-12;

/// Closed-form MEI for a given reference value and prediction.
pub fn mei_value(z_min: f64, mean: f64, std_ok: f64) -> f64 {
    let diff = z_min - mean;
    if !(std_ok > STD_EPS) {
        return diff.max(0.0);
    }
    let u = diff / std_ok;
    (diff * normal::cdf(u) + std_ok * normal::pdf(u)).max(0.0)
}

pub struct MeiContext<'a> {
    pub model: &'a GpModel,
    pub z_min: f64,
    /// Archive index of the best scalarized sample mean.
    pub x_min: usize,
}

impl<'a> MeiContext<'a> {
    pub fn new(model: &'a GpModel, archive: &Archive, dataset: &ScalarizedDataset) -> Self {
        let x_min = dataset.argmin();
        let z_min = model.predict(&archive.records()[x_min].point).mean;
        Self { model, z_min, x_min }
    }

    pub fn mei(&self, x: &[f64]) -> f64 {
        let p = self.model.predict_coords(x);
        mei_value(self.z_min, p.mean, p.std_ok)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfillChoice {
    pub point: DesignPoint,
    pub mei: f64,
    /// Aggregated score of the point, when TPE candidates were used.
    pub score: Option<f64>,
    /// No candidate had a positive aggregated score.
    pub fallback: bool,
}

/// GP_MOTPE selection: sample `n_c` candidates from `l`, keep those with
/// positive aggregated score and return the one with the largest MEI (lowest
/// index on ties). If none qualifies, the max-score candidate is returned.
///
/// Candidates that already exist in `archive` are skipped unless every
/// candidate does.
pub fn select_infill_gp_motpe(
    ctx: &MeiContext,
    pair: &TpeDensityPair,
    n_c: usize,
    stream: &RngStream,
    archive: Option<&Archive>,
) -> InfillChoice {
    assert!(n_c >= 1);
    let candidates = sample_candidates(pair, n_c, stream);
    let scores: Vec<f64> = candidates.par_iter().map(|c| aggregated_score(pair, c.coords())).collect();
    let fresh: Vec<bool> = candidates
        .iter()
        .map(|c| archive.is_none_or(|a| !a.contains(c.coords())))
        .collect();
    let eligible: Vec<usize> = if fresh.iter().any(|&f| f) {
        (0..n_c).filter(|&i| fresh[i]).collect()
    } else {
        (0..n_c).collect()
    };
    let q: Vec<usize> = eligible.iter().copied().filter(|&i| scores[i] > 0.0).collect();
    if q.is_empty() {
        let mut best = eligible[0];
        for &i in &eligible[1..] {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        debug!("empty candidate set Q; falling back to max-score candidate {best}");
        let point = candidates[best].clone();
        return InfillChoice {
            mei: ctx.mei(point.coords()),
            score: Some(scores[best]),
            point,
            fallback: true,
        };
    }
    let values: Vec<f64> = q.par_iter().map(|&i| ctx.mei(candidates[i].coords())).collect();
    let mut best = 0;
    for k in 1..q.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    let i = q[best];
    InfillChoice {
        point: candidates[i].clone(),
        mei: values[best],
        score: Some(scores[i]),
        fallback: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iters: usize,
    pub cognitive: f64,
    pub social: f64,
    pub inertia: f64,
    /// Stop after this many iterations without improving the global best by
    /// more than `stall_tol`.
    pub stall_iters: usize,
    pub stall_tol: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm: 300,
            iters: 1800,
            cognitive: 0.5,
            social: 0.3,
            inertia: 0.9,
            stall_iters: 200,
            stall_tol: 1e-12,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm < 2 {
            return Err(Error::Config("pso.swarm must be >= 2".into()));
        }
        if self.iters == 0 || self.stall_iters == 0 {
            return Err(Error::Config("pso.iters and pso.stall_iters must be positive".into()));
        }
        for (name, v) in [
            ("pso.cognitive", self.cognitive),
            ("pso.social", self.social),
            ("pso.inertia", self.inertia),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.stall_tol >= 0.0) {
            return Err(Error::Config("pso.stall_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsoResult {
    pub point: DesignPoint,
    pub value: f64,
    pub iterations: usize,
}

/// Global-best particle swarm maximizing `f` over the box. Fitness is taken
/// at the snapped position, so integer dimensions see integer values.
/// Fitness evaluation runs in parallel; all random numbers come from one
/// sequential stream, so results do not depend on the thread count.
pub fn pso_maximize<F>(f: F, space: &SearchSpace, cfg: &PsoConfig, stream: &RngStream) -> PsoResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = stream.rng();
    let d = space.dim();
    let lo: Vec<f64> = space.dims().iter().map(|s| s.lower).collect();
    let hi: Vec<f64> = space.dims().iter().map(|s| s.upper).collect();
    let vmax: Vec<f64> = (0..d).map(|k| 0.5 * (hi[k] - lo[k])).collect();
    let fitness = |x: &[f64]| {
        let v = f(space.snap(x).coords());
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut pos: Vec<Vec<f64>> = (0..cfg.swarm)
        .map(|_| (0..d).map(|k| lo[k] + rng.random::<f64>() * (hi[k] - lo[k])).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..cfg.swarm)
        .map(|_| (0..d).map(|k| (2.0 * rng.random::<f64>() - 1.0) * vmax[k]).collect())
        .collect();
    let mut pbest = pos.clone();
    let mut pbest_val: Vec<f64> = pos.par_iter().map(|x| fitness(x)).collect();
    let mut g = argmax(&pbest_val);
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];

    let mut stall = 0;
    let mut iterations = 0;
    for _ in 0..cfg.iters {
        iterations += 1;
        for i in 0..cfg.swarm {
            let (x, v, p) = (&mut pos[i], &mut vel[i], &pbest[i]);
            for k in 0..d {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[k] = (cfg.inertia * v[k] + cfg.cognitive * r1 * (p[k] - x[k]) + cfg.social * r2 * (gbest[k] - x[k]))
                    .clamp(-vmax[k], vmax[k]);
                x[k] = (x[k] + v[k]).clamp(lo[k], hi[k]);
            }
        }
        let vals: Vec<f64> = pos.par_iter().map(|x| fitness(x)).collect();
        for (i, &val) in vals.iter().enumerate() {
            if val > pbest_val[i] {
                pbest_val[i] = val;
                pbest[i].clone_from(&pos[i]);
            }
        }
        g = argmax(&pbest_val);
        if pbest_val[g] > gbest_val + cfg.stall_tol {
            stall = 0;
        } else {
            stall += 1;
        }
        if pbest_val[g] > gbest_val {
            gbest_val = pbest_val[g];
            gbest.clone_from(&pbest[g]);
        }
        if stall >= cfg.stall_iters {
            break;
        }
    }
    PsoResult {
        point: space.snap(&gbest),
        value: gbest_val,
        iterations,
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Pure-GP selection: PSO-maximized MEI over the whole box. Points already
/// in `archive` get no credit.
pub fn select_infill_gp_pso(
    ctx: &MeiContext,
    space: &SearchSpace,
    cfg: &PsoConfig,
    stream: &RngStream,
    archive: Option<&Archive>,
) -> InfillChoice {
    let res = pso_maximize(
        |x| {
            if archive.is_some_and(|a| a.contains(x)) {
                f64::NEG_INFINITY
            } else {
                ctx.mei(x)
            }
        },
        space,
        cfg,
        stream,
    );
    InfillChoice {
        mei: res.value,
        point: res.point,
        score: None,
        fallback: false,
    }
}
