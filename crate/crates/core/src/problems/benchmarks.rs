//! Deterministic bi-objective test functions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::space::{DesignPoint, DimensionSpec, SearchSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Benchmark {
    Zdt1,
    /// `k` position parameters, `d - k` distance parameters.
    Wfg4 { k: usize },
    Dtlz7,
}

impl Benchmark {
    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Zdt1 => "zdt1",
            Benchmark::Wfg4 { .. } => "wfg4",
            Benchmark::Dtlz7 => "dtlz7",
        }
    }
}

/// Default WFG4 position-parameter count for input dimension `d`.
pub fn default_wfg4_k(d: usize) -> usize {
    if d > 4 {
        4
    } else {
        d.saturating_sub(1).max(1)
    }
}

/// Per-objective `(min, max)` of a deterministic objective over its domain.
pub type ObjectiveRange = Vec<(f64, f64)>;

/// Number of uniform samples used to estimate objective ranges.
pub const RANGE_SAMPLES: usize = 1_000_000;
/// Seed of the range-estimation stream; fixed so ranges are reproducible.
pub const RANGE_SEED: u64 = 0x005e_ed0f_0a9e;

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    kind: Benchmark,
    space: SearchSpace,
}

impl Problem {
    pub fn new(kind: Benchmark, d: usize) -> Result<Self> {
        let space = match kind {
            Benchmark::Zdt1 | Benchmark::Dtlz7 => {
                if d < 2 {
                    return Err(Error::Config(format!("{} needs d >= 2", kind.name())));
                }
                SearchSpace::unit_cube(d)?
            }
            Benchmark::Wfg4 { k } => {
                if k == 0 || k >= d {
                    return Err(Error::Config(format!(
                        "wfg4 needs 1 <= k < d, got k = {k}, d = {d}"
                    )));
                }
                SearchSpace::new(
                    (1..=d)
                        .map(|i| DimensionSpec::continuous(format!("z{i}"), 0.0, 2.0 * i as f64))
                        .collect(),
                )?
            }
        };
        Ok(Self { kind, space })
    }

    /// Looks a built-in up by name. `wfg4_k` is only used for WFG4.
    pub fn by_name(name: &str, d: usize, wfg4_k: Option<usize>) -> Result<Self> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "zdt1" => Benchmark::Zdt1,
            "dtlz7" => Benchmark::Dtlz7,
            "wfg4" => Benchmark::Wfg4 {
                k: wfg4_k.unwrap_or_else(|| default_wfg4_k(d)),
            },
            _ => return Err(Error::UnknownProblem(name.to_string())),
        };
        Self::new(kind, d)
    }

    pub fn kind(&self) -> Benchmark {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n_objectives(&self) -> usize {
        2
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn eval_deterministic(&self, point: &DesignPoint) -> Result<Vec<f64>> {
        self.space.check(point.coords())?;
        Ok(self.eval_unchecked(point.coords()))
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            Benchmark::Zdt1 => zdt1(x),
            Benchmark::Wfg4 { k } => wfg4(x, k),
            Benchmark::Dtlz7 => dtlz7(x),
        }
    }

    /// Per-objective range over the domain, estimated once per process from
    /// [`RANGE_SAMPLES`] uniform points and cached.
    pub fn ideal_range(&self) -> ObjectiveRange {
        static CACHE: OnceLock<Mutex<HashMap<(Benchmark, usize), ObjectiveRange>>> =
            OnceLock::new();
        let key = (self.kind, self.dim());
        let cache = CACHE.get_or_init(Default::default);
        if let Some(r) = cache.lock().expect("range cache poisoned").get(&key) {
            return r.clone();
        }
        let range = self.estimate_range(RANGE_SAMPLES, RngStream::new(RANGE_SEED, 0));
        cache
            .lock()
            .expect("range cache poisoned")
            .insert(key, range.clone());
        range
    }

    /// Componentwise min/max of the objectives over `n` uniform draws.
    pub fn estimate_range(&self, n: usize, stream: RngStream) -> ObjectiveRange {
        const CHUNK: usize = 1 << 14;
        let m = self.n_objectives();
        let chunks = n.div_ceil(CHUNK);
        let partial: Vec<ObjectiveRange> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream.derive(c as u64).rng();
                let mut acc = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
                let count = CHUNK.min(n - c * CHUNK);
                let mut x = vec![0.0; self.dim()];
                for _ in 0..count {
                    for (xi, dim) in x.iter_mut().zip(self.space.dims()) {
                        *xi = dim.lower + rng.random::<f64>() * dim.width();
                    }
                    for (a, f) in acc.iter_mut().zip(self.eval_unchecked(&x)) {
                        a.0 = a.0.min(f);
                        a.1 = a.1.max(f);
                    }
                }
                acc
            })
            .collect();
        partial.into_iter().fold(
            vec![(f64::INFINITY, f64::NEG_INFINITY); m],
            |mut acc, p| {
                for (a, q) in acc.iter_mut().zip(p) {
                    a.0 = a.0.min(q.0);
                    a.1 = a.1.max(q.1);
                }
                acc
            },
        )
    }
}

fn zdt1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (n - 1) as f64;
    let f2 = g * (1.0 - (f1 / g).sqrt());
    vec![f1, f2]
}

fn dtlz7(x: &[f64]) -> Vec<f64> {
    let k = x.len() - 1;
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / k as f64;
    let h = 2.0 - f1 / (1.0 + g) * (1.0 + (3.0 * PI * f1).sin());
    vec![f1, (1.0 + g) * h]
}

fn correct_to_01(v: f64) -> f64 {
    const EPS: f64 = 1e-10;
    if (-EPS..0.0).contains(&v) {
        0.0
    } else if v > 1.0 && v <= 1.0 + EPS {
        1.0
    } else {
        v
    }
}

fn s_multi(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let t1 = (y - c).abs() / (2.0 * ((c - y).floor() + c));
    let t2 = (4.0 * a + 2.0) * PI * (0.5 - t1);
    correct_to_01((1.0 + t2.cos() + 4.0 * b * t1 * t1) / (b + 2.0))
}

/// Two-objective WFG4: multi-modal shift, weighted-sum reduction, concave
/// shape with scaling constants S_m = 2m.
fn wfg4(z: &[f64], k: usize) -> Vec<f64> {
    let y: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| s_multi(zi / (2.0 * (i + 1) as f64), 30.0, 10.0, 0.35))
        .collect();
    let mean = |s: &[f64]| correct_to_01(s.iter().sum::<f64>() / s.len() as f64);
    let position = mean(&y[..k]);
    let distance = mean(&y[k..]);
    let h1 = (position * PI / 2.0).sin();
    let h2 = (position * PI / 2.0).cos();
    vec![distance + 2.0 * h1, distance + 4.0 * h2]
}
