//! Experiment manifests: TOML input with optional keys, resolved into a
//! complete configuration that is written next to the results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gpmotpe::acquisition::PsoConfig;
use gpmotpe::doe::{default_size, DesignScheme};
use gpmotpe::gp::GpConfig;
use gpmotpe::optimizer::{Mode, RunConfig};
use gpmotpe::problems::{
    default_wfg4_k, Benchmark, Evaluator, ExternalCommand, ExternalEvaluator, ExternalProblem, NoisyBenchmark,
    Problem,
};
use gpmotpe::scalarize::DEFAULT_RHO;
use gpmotpe::tpe::TpeConfig;
use gpmotpe::{DimensionSpec, SearchSpace};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GPMOTPE_OUT";

pub const DEFAULT_N_MACRO: usize = 13;
pub const DEFAULT_ITERATIONS: usize = 100;
pub const ANALYTICAL_REPLICATIONS: usize = 50;
pub const EXTERNAL_REPLICATIONS: usize = 10;
pub const EXTERNAL_TIMEOUT_SECS: f64 = 3600.0;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error(transparent)]
    Core(#[from] gpmotpe::Error),
}

fn field(field: &'static str, message: impl Into<String>) -> ManifestError {
    ManifestError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProblemField {
    Name(String),
    Table(ProblemTable),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemTable {
    /// `benchmark` or `external`; inferred when absent.
    pub kind: Option<String>,
    /// Benchmark name; absent for external problems.
    pub name: Option<String>,
    pub dim: Option<usize>,
    pub wfg4_k: Option<usize>,
    /// External program and its arguments.
    pub command: Option<Vec<String>>,
    pub objectives: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub space: Option<Vec<DimensionSpec>>,
}

/// Manifest as written by a user; every key but `problem` is optional.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: Option<String>,
    pub out: Option<PathBuf>,
    pub problem: ProblemField,
    pub dim: Option<usize>,
    pub mode: Option<OneOrMany<Mode>>,
    pub seed: Option<u64>,
    pub n_macro: Option<usize>,
    pub iterations: Option<usize>,
    pub replications: Option<usize>,
    pub init_size: Option<usize>,
    pub init_scheme: Option<DesignScheme>,
    pub gamma: Option<f64>,
    pub n_c: Option<usize>,
    pub reference_point: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub record_wall_time: Option<bool>,
    pub gp: Option<GpConfig>,
    pub pso: Option<PsoConfig>,
    pub tpe: Option<TpeConfig>,
    /// Written by the tool; ignored on input.
    pub metadata: Option<toml::Table>,
}

impl Manifest {
    pub fn from_str(text: &str, path: &Path) -> Result<Self, ManifestError> {
        toml::from_str(text).map_err(|e| ManifestError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text, path)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResolvedProblem {
    Benchmark {
        name: String,
        dim: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        wfg4_k: Option<usize>,
    },
    External {
        command: Vec<String>,
        objectives: usize,
        timeout_secs: f64,
        space: Vec<DimensionSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub tool_version: String,
    /// SHA-256 of the objective ranges anchoring the noise model, or "none".
    pub noise_anchor_digest: String,
    /// Per-objective `[min, max]` anchoring the noise model.
    pub noise_anchors: Vec<[f64; 2]>,
}

/// Fully resolved experiment; serializes to the persisted manifest copy.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolvedManifest {
    pub name: String,
    #[serde(rename = "mode")]
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub n_macro: usize,
    pub iterations: usize,
    pub replications: usize,
    pub init_size: usize,
    pub init_scheme: DesignScheme,
    pub gamma: f64,
    pub n_c: usize,
    pub reference_point: Vec<f64>,
    pub rho: f64,
    pub record_wall_time: bool,
    pub problem: ResolvedProblem,
    pub gp: GpConfig,
    pub pso: PsoConfig,
    pub tpe: TpeConfig,
    pub metadata: Metadata,
}

/// Command-line values that take precedence over manifest keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub modes: Option<Vec<Mode>>,
    pub seed: Option<u64>,
}

/// Reference point used when the manifest gives none.
pub fn default_reference_point(benchmark: &str) -> Option<Vec<f64>> {
    match benchmark {
        "zdt1" => Some(vec![1.0, 10.0]),
        "wfg4" => Some(vec![3.0, 5.0]),
        "dtlz7" => Some(vec![1.0, 23.0]),
        _ => None,
    }
}

fn anchors_digest(anchors: &[(f64, f64)]) -> String {
    let mut h = Sha256::new();
    for (lo, hi) in anchors {
        h.update(lo.to_bits().to_le_bytes());
        h.update(hi.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl Manifest {
    pub fn resolve(&self, overrides: &Overrides) -> Result<ResolvedManifest, ManifestError> {
        let table = match &self.problem {
            ProblemField::Name(n) => ProblemTable {
                name: Some(n.clone()),
                ..ProblemTable::default()
            },
            ProblemField::Table(t) => t.clone(),
        };
        let external = table.command.is_some();
        match (table.kind.as_deref(), external) {
            (None, _) | (Some("benchmark"), false) | (Some("external"), true) => {}
            (Some("external"), false) => return Err(field("problem.command", "required for external problems")),
            (Some(k), _) => return Err(field("problem.kind", format!("unexpected value `{k}`"))),
        }
        let (problem, metadata, ref_default, d) = if external {
            if table.name.is_some() || table.wfg4_k.is_some() {
                return Err(field("problem", "an external problem takes no `name` or `wfg4_k`"));
            }
            let command = table.command.clone().unwrap_or_default();
            if command.is_empty() {
                return Err(field("problem.command", "must name a program"));
            }
            let objectives = table
                .objectives
                .ok_or_else(|| field("problem.objectives", "required for external problems"))?;
            let space = table
                .space
                .clone()
                .ok_or_else(|| field("problem.space", "required for external problems"))?;
            SearchSpace::new(space.clone())?;
            let d = space.len();
            (
                ResolvedProblem::External {
                    command,
                    objectives,
                    timeout_secs: table.timeout_secs.unwrap_or(EXTERNAL_TIMEOUT_SECS),
                    space,
                },
                Metadata {
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    noise_anchor_digest: "none".into(),
                    noise_anchors: Vec::new(),
                },
                None,
                d,
            )
        } else {
            let name = table
                .name
                .clone()
                .ok_or_else(|| field("problem", "give a benchmark name or an external command"))?
                .to_ascii_lowercase();
            let d = table.dim.or(self.dim).unwrap_or(5);
            let wfg4_k = (name == "wfg4").then(|| table.wfg4_k.unwrap_or_else(|| default_wfg4_k(d)));
            if name != "wfg4" && table.wfg4_k.is_some() {
                return Err(field("problem.wfg4_k", "only valid for wfg4"));
            }
            let p = Problem::by_name(&name, d, wfg4_k)?;
            let anchors = p.ideal_range();
            (
                ResolvedProblem::Benchmark {
                    name: name.clone(),
                    dim: d,
                    wfg4_k,
                },
                Metadata {
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    noise_anchor_digest: anchors_digest(&anchors),
                    noise_anchors: anchors.iter().map(|&(a, b)| [a, b]).collect(),
                },
                default_reference_point(&name),
                d,
            )
        };
        if table.dim.is_some() && self.dim.is_some() && table.dim != self.dim {
            return Err(field("dim", "conflicts with problem.dim"));
        }

        let modes = overrides
            .modes
            .clone()
            .or_else(|| self.mode.as_ref().map(OneOrMany::to_vec))
            .unwrap_or_else(|| vec![Mode::GpMotpe]);
        if modes.is_empty() {
            return Err(field("mode", "at least one mode is required"));
        }
        let mut seen = Vec::new();
        for m in &modes {
            if seen.contains(m) {
                return Err(field("mode", format!("`{m}` listed twice")));
            }
            seen.push(*m);
        }
        let reference_point = self
            .reference_point
            .clone()
            .or(ref_default)
            .ok_or_else(|| field("reference_point", "required for external problems"))?;
        let seed = overrides.seed.or(self.seed).unwrap_or(0);
        let name = self.name.clone().unwrap_or_else(|| match &problem {
            ResolvedProblem::Benchmark { name, dim, .. } => format!("{name}-d{dim}-s{seed}"),
            ResolvedProblem::External { .. } => format!("external-s{seed}"),
        });
        let resolved = ResolvedManifest {
            name,
            modes,
            seed,
            n_macro: self.n_macro.unwrap_or(DEFAULT_N_MACRO),
            iterations: self.iterations.unwrap_or(DEFAULT_ITERATIONS),
            replications: self.replications.unwrap_or(if external {
                EXTERNAL_REPLICATIONS
            } else {
                ANALYTICAL_REPLICATIONS
            }),
            init_size: self.init_size.unwrap_or_else(|| default_size(d)),
            init_scheme: self
                .init_scheme
                .unwrap_or(if external { DesignScheme::Random } else { DesignScheme::Lhs }),
            gamma: self.gamma.unwrap_or(0.3),
            n_c: self.n_c.unwrap_or(1000),
            reference_point,
            rho: self.rho.unwrap_or(DEFAULT_RHO),
            record_wall_time: self.record_wall_time.unwrap_or(false),
            problem,
            gp: self.gp.clone().unwrap_or_default(),
            pso: self.pso.clone().unwrap_or_default(),
            tpe: self.tpe.clone().unwrap_or_default(),
            metadata,
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

impl ResolvedManifest {
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.n_macro == 0 {
            return Err(field("n_macro", "must be >= 1"));
        }
        let m = match &self.problem {
            ResolvedProblem::Benchmark { .. } => 2,
            ResolvedProblem::External { objectives, .. } => *objectives,
        };
        if m != 2 {
            return Err(field("problem.objectives", format!("must be 2, got {m}")));
        }
        if self.reference_point.len() != m {
            return Err(field(
                "reference_point",
                format!("needs {m} values, got {}", self.reference_point.len()),
            ));
        }
        for mode in &self.modes {
            self.run_config(*mode).validate()?;
        }
        Ok(())
    }

    pub fn run_config(&self, mode: Mode) -> RunConfig {
        RunConfig {
            mode,
            iterations: self.iterations,
            replications: self.replications,
            init_size: self.init_size,
            init_scheme: self.init_scheme,
            gamma: self.gamma,
            n_c: self.n_c,
            seed: self.seed,
            reference_point: self.reference_point.clone(),
            rho: self.rho,
            gp: self.gp.clone(),
            pso: self.pso.clone(),
            tpe: self.tpe.clone(),
        }
    }

    pub fn evaluator(&self) -> Result<Box<dyn Evaluator>, ManifestError> {
        Ok(match &self.problem {
            ResolvedProblem::Benchmark { name, dim, wfg4_k } => {
                let p = Problem::by_name(name, *dim, *wfg4_k)?;
                debug_assert!(matches!(
                    (p.kind(), wfg4_k),
                    (Benchmark::Wfg4 { .. }, Some(_)) | (Benchmark::Zdt1 | Benchmark::Dtlz7, None)
                ));
                Box::new(NoisyBenchmark::new(p))
            }
            ResolvedProblem::External {
                command,
                objectives,
                timeout_secs,
                space,
            } => Box::new(ExternalProblem {
                space: SearchSpace::new(space.clone())?,
                evaluator: ExternalEvaluator::new(ExternalCommand {
                    argv: command.clone(),
                    n_objectives: *objectives,
                    timeout_secs: *timeout_secs,
                })?,
            }),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved manifest serializes")
    }
}
