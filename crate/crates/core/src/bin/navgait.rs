use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use navgait::env::EnvironmentLayout;
use navgait::harness::plot::plot_data;
use navgait::harness::{
    evaluate_checkpoint, robustness_sweep, sweep_csv, train, Checkpoint, ExperimentConfig, SweepGrid,
};
use navgait::{Error, Result};

#[derive(Parser)]
#[command(name = "navgait", version, about = "Train and evaluate navigation and gait policies with PPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint written by the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a course.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Sample actions instead of using the mean.
        #[arg(long)]
        stochastic: bool,
        /// Write a per-step trajectory CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Displace obstacles and the destination and evaluate each cell.
    Robustness {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        grid: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a metrics CSV into plain x-y series.
    PlotData {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Print the text form of a checkpoint.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// The course given on the command line, else the one the checkpoint was
/// trained on.
fn course(path: &Option<PathBuf>, ck: &Checkpoint) -> Result<EnvironmentLayout> {
    match path.as_ref().or(ck.config.layout.as_ref()) {
        Some(p) => EnvironmentLayout::load(p),
        None => Ok(EnvironmentLayout::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, resume } => {
            let cfg = ExperimentConfig::load(&config)?;
            let resume = resume.as_deref().map(Checkpoint::load).transpose()?;
            let out = train(&cfg, resume)?;
            let ck = &out.checkpoint;
            println!(
                "trained {} updates, {} env steps; output in {}",
                ck.updates,
                ck.env_steps,
                cfg.output_dir.display()
            );
            if let Some(last) = out.rows.last() {
                println!("last return_mean = {} length_mean = {}", last.return_mean, last.length_mean);
            }
        }
        Command::Eval {
            checkpoint,
            layout,
            episodes,
            stochastic,
            trace,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let layout = course(&layout, &ck)?;
            let mut writer = trace
                .as_ref()
                .map(|p| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e)))
                .transpose()?;
            let report = evaluate_checkpoint(
                &ck,
                &layout,
                episodes,
                !stochastic,
                writer.as_mut().map(|w| w as &mut dyn Write),
            )?;
            if let (Some(w), Some(p)) = (writer.as_mut(), &trace) {
                w.flush().map_err(|e| Error::io(p, e))?;
            }
            print!("{}", report.to_text());
        }
        Command::Robustness {
            checkpoint,
            layout,
            grid,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let layout = course(&layout, &ck)?;
            let grid = SweepGrid::load(&grid)?;
            let csv = sweep_csv(&robustness_sweep(&ck, &layout, &grid)?);
            match out {
                Some(p) => std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))?,
                None => print!("{}", csv),
            }
        }
        Command::PlotData { metrics, out, points } => {
            for p in plot_data(&metrics, &out, points)? {
                println!("{}", p.display());
            }
        }
        Command::Export { checkpoint } => {
            print!("{}", Checkpoint::load(&checkpoint)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; --help and --version are not
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
