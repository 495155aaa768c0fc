use std::path::PathBuf;
use std::process::ExitCode;

use brpi_core::experiment::{
    exploit_checkpoint, rerun_metagame, run_experiment_with, ExperimentConfig, RunOptions,
};
use brpi_core::metagame::DEFAULT_LEAGUE_TAUS;
use brpi_core::plot::{emit_plot_data, PlotKind};
use brpi_core::responses::{BaseSource, CandidateSource, SbrConfig};
use brpi_core::Error;
use clap::{Parser, Subcommand};

/// Normal-form game dynamics experiments.
#[derive(Parser, Debug)]
#[command(name = "brpi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run (or resume) every stage of an experiment config.
    Run {
        config: PathBuf,
        /// Run directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to $BRPI_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Emit tidy CSV for plotting.
    Plot {
        run_dir: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
    },
    /// Recompute Nash leagues at the given temperatures.
    Metagame {
        run_dir: PathBuf,
        #[arg(long = "tau")]
        taus: Vec<f64>,
        #[arg(long)]
        run: Option<String>,
        /// Rebuild the table from this many stored checkpoints.
        #[arg(long)]
        checkpoints: Option<usize>,
    },
    /// Lower-bound a checkpoint's exploitability with an SBR agent.
    Exploit {
        run_dir: PathBuf,
        #[arg(long)]
        checkpoint: usize,
        #[arg(long)]
        run: Option<String>,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long = "base-samples", default_value_t = 2)]
        b: usize,
        #[arg(long = "candidates", default_value_t = 16)]
        c: usize,
        #[arg(long = "candidate-source", value_parser = parse_candidates, default_value = "initial")]
        source: CandidateSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> Result<PlotKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_candidates(s: &str) -> Result<CandidateSource, String> {
    CandidateSource::ALL
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown candidate source `{s}`"))
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run {
            config,
            out,
            workers,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let opts = RunOptions {
                workers,
                ..RunOptions::default()
            };
            let summary = run_experiment_with(&cfg, out.as_deref(), &opts)?;
            println!("{}", summary.dir.display());
        }
        Command::Plot { run_dir, kind } => {
            for path in emit_plot_data(&run_dir, kind)? {
                println!("{}", path.display());
            }
        }
        Command::Metagame {
            run_dir,
            taus,
            run,
            checkpoints,
        } => {
            let taus = if taus.is_empty() {
                DEFAULT_LEAGUE_TAUS.to_vec()
            } else {
                taus
            };
            for (label, doc) in rerun_metagame(&run_dir, run.as_deref(), &taus, checkpoints)? {
                let summary = serde_json::json!({ "run": label, "checkpoints": doc.checkpoints, "leagues": doc.leagues });
                println!("{summary}");
            }
        }
        Command::Exploit {
            run_dir,
            checkpoint,
            run,
            episodes,
            b,
            c,
            source,
            seed,
        } => {
            let sbr = SbrConfig::new(b, c, source, BaseSource::Latest);
            let (label, est) =
                exploit_checkpoint(&run_dir, run.as_deref(), checkpoint, &sbr, episodes, seed)?;
            let summary =
                serde_json::json!({ "run": label, "checkpoint": checkpoint, "estimate": est });
            println!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
