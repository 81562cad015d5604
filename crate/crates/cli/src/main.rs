use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpmotpe::optimizer::Mode;
use gpmotpe_cli::commands::{cmd_hv, cmd_pareto, cmd_run, CliError, RunArgs};

#[derive(Parser)]
#[command(name = "gpmotpe", version, about = "Multi-objective Bayesian optimization under heteroscedastic noise")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GPMOTPE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated modes: gp_motpe, gp, motpe, random.
        #[arg(long, value_delimiter = ',')]
        mode: Option<Vec<Mode>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $GPMOTPE_OUT/<name> or runs/<name>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite results in a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Print the hypervolume of a front or trace CSV.
    Hv {
        csv: PathBuf,
        /// Reference point, e.g. `1,10`.
        #[arg(long = "ref", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        reference: Vec<f64>,
    },
    /// Extract the Pareto front of a trace CSV.
    Pareto {
        trace: PathBuf,
        /// Output file [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            manifest,
            mode,
            seed,
            out,
            force,
        } => {
            let summary = cmd_run(&RunArgs {
                manifest,
                modes: mode,
                seed,
                out,
                force,
            })?;
            println!("results in {}", summary.out.display());
            for s in &summary.modes {
                println!(
                    "{:<9} hv initial {:.6} final {:.6} +/- {:.6} ({} runs)",
                    s.mode, s.initial_hv_mean, s.final_hv_mean, s.final_hv_std, s.completed
                );
            }
        }
        Command::Hv { csv, reference } => {
            if reference.len() != 2 {
                return Err(CliError::Usage(format!("--ref needs 2 values, got {}", reference.len())));
            }
            let hv = cmd_hv(&csv, [reference[0], reference[1]])?;
            println!("{}", gpmotpe_cli::csvio::fmt_f64(hv));
        }
        Command::Pareto { trace, out } => match out {
            Some(path) => {
                let file = std::fs::File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                cmd_pareto(&trace, std::io::BufWriter::new(file))?;
            }
            None => {
                cmd_pareto(&trace, std::io::stdout().lock())?;
            }
        },
    }
    Ok(())
}
