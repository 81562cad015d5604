//! The `run`, `hv` and `pareto` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use gpmotpe::optimizer::{run_macro, Mode};
use gpmotpe::pareto::{hypervolume_2d, pareto_front};

use crate::csvio::{self, CsvError};
use crate::manifest::{Manifest, ManifestError, Overrides, ResolvedManifest, OUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] gpmotpe::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{aborted} of {total} runs stopped early; partial traces were written")]
    Aborted { aborted: usize, total: usize },
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Manifest(_) | CliError::Usage(_) => 2,
            CliError::Core(gpmotpe::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

#[derive(Clone, Debug, Default)]
pub struct RunArgs {
    pub manifest: PathBuf,
    pub modes: Option<Vec<Mode>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub initial_hv_mean: f64,
    pub final_hv_mean: f64,
    pub final_hv_std: f64,
    pub completed: usize,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub manifest: ResolvedManifest,
    pub modes: Vec<ModeSummary>,
}

/// Output directory: flag, then manifest key, then `$GPMOTPE_OUT/<name>`,
/// then `runs/<name>`.
pub fn output_dir(flag: Option<&Path>, manifest: &Manifest, name: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &manifest.out {
        return p.clone();
    }
    match std::env::var_os(OUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(name),
        _ => PathBuf::from("runs").join(name),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary, CliError> {
    let manifest = Manifest::load(&args.manifest)?;
    let resolved = manifest.resolve(&Overrides {
        modes: args.modes.clone(),
        seed: args.seed,
    })?;
    let out = output_dir(args.out.as_deref(), &manifest, &resolved.name);
    prepare_output(&out, &resolved, args.force)?;

    let manifest_path = out.join("manifest.toml");
    fs::write(&manifest_path, resolved.to_toml()).map_err(io_err(&manifest_path))?;

    let evaluator = resolved.evaluator()?;
    let space = evaluator.space().clone();
    let (d, m) = (space.dim(), evaluator.n_objectives());
    let mut summaries = Vec::new();
    let mut aborted = 0;
    let mut total = 0;
    for &mode in &resolved.modes {
        let config = resolved.run_config(mode);
        info!("running {mode}: {} macro-replications", resolved.n_macro);
        let result = run_macro(evaluator.as_ref(), &config, resolved.n_macro)?;
        let dir = out.join(mode.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (k, run) in result.runs.iter().enumerate() {
            let rows: Vec<_> = run.initial.iter().chain(&run.traces).cloned().collect();
            let trace_path = dir.join(format!("trace_{k}.csv"));
            csvio::write_trace(create(&trace_path)?, d, m, &rows, resolved.record_wall_time)?;
            let timing_path = dir.join(format!("timing_{k}.csv"));
            csvio::write_timing(create(&timing_path)?, &rows)?;
            let front_path = dir.join(format!("front_{k}.csv"));
            csvio::write_front(create(&front_path)?, d, m, &pareto_front(&run.archive))?;
            if let Some(e) = &run.error {
                warn!("{mode} macro {k} stopped early: {e}");
                aborted += 1;
            }
            total += 1;
        }
        let agg_path = dir.join("aggregate.csv");
        csvio::write_aggregate(create(&agg_path)?, &result.aggregate)?;
        let completed = result.runs.iter().filter(|r| r.completed()).count();
        if let (Some(first), Some(last)) = (result.aggregate.first(), result.aggregate.last()) {
            summaries.push(ModeSummary {
                mode,
                initial_hv_mean: first.hv_mean,
                final_hv_mean: last.hv_mean,
                final_hv_std: last.hv_std,
                completed,
            });
        }
    }
    if aborted > 0 {
        return Err(CliError::Aborted { aborted, total });
    }
    Ok(RunSummary {
        out,
        manifest: resolved,
        modes: summaries,
    })
}

/// Refuses to reuse a non-empty directory unless forced; with `force`, only
/// the files this run writes are removed.
fn prepare_output(out: &Path, resolved: &ResolvedManifest, force: bool) -> Result<(), CliError> {
    let non_empty = fs::read_dir(out).map(|mut it| it.next().is_some()).unwrap_or(false);
    if non_empty {
        if !force {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
        for mode in &resolved.modes {
            let dir = out.join(mode.name());
            if dir.is_dir() {
                fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
            }
        }
    }
    fs::create_dir_all(out).map_err(io_err(out))
}

fn open(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path == Path::new("-") {
        Ok(Box::new(std::io::stdin()))
    } else {
        Ok(Box::new(File::open(path).map_err(io_err(path))?))
    }
}

/// Hypervolume of the nondominated `mean_1, mean_2` rows of a front or
/// trace file.
pub fn cmd_hv(path: &Path, reference: [f64; 2]) -> Result<f64, CliError> {
    let rows = csvio::read_objective_rows(open(path)?)?;
    let mut pts = Vec::with_capacity(rows.len());
    for r in &rows {
        if r.mean.len() != 2 {
            return Err(CsvError::Parse {
                line: r.line,
                message: format!("expected 2 mean columns, found {}", r.mean.len()),
            }
            .into());
        }
        pts.push([r.mean[0], r.mean[1]]);
    }
    Ok(hypervolume_2d(&pts, reference))
}

/// Writes the first front of a trace's sample means.
pub fn cmd_pareto<W: Write>(trace: &Path, out: W) -> Result<usize, CliError> {
    let rows = csvio::read_objective_rows(open(trace)?)?;
    let front = csvio::front_of_rows(&rows);
    let d = rows.first().map_or(0, |r| r.x.len());
    let m = rows.first().map_or(0, |r| r.mean.len());
    csvio::write_front(out, d, m, &front)?;
    Ok(front.len())
}
