//! Command-line front end for the detection pipeline.
//!
//! Every subcommand reads the same TOML configuration. Stages verify the
//! stamps of the artifacts they consume and refuse stale ones, except that
//! `train-recon` mines the graph itself when it is missing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cscad::pipeline::{evaluate_files, write_report, Overrides, Pipeline, PipelineConfig};
use cscad::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cscad",
    version,
    about = "Collective anomaly detection from broken feature correlations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine extended mutual information and build the correlation graph.
    Mine(Common),
    /// Train the graph-convolutional VAE (mines first if needed).
    TrainRecon(Common),
    /// Self-label the training split and train the discriminator.
    TrainDisc(Common),
    /// Score the held-out split, or `--input`, with both trained networks.
    Detect {
        #[command(flatten)]
        common: Common,
        /// CSV to score instead of the held-out split.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compute precision, recall and F1 for the detect stage's output, or
    /// for an explicit predictions/truth pair.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "truth")]
        predictions: Option<PathBuf>,
        #[arg(long, requires = "predictions")]
        truth: Option<PathBuf>,
    },
    /// mine, train-recon, train-disc, detect and evaluate in order.
    RunAll(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace both GCN layers with identity (VAE-DN ablation).
    #[arg(long)]
    no_gcn: bool,
    /// Feed only the reconstruction error to the discriminator.
    #[arg(long)]
    no_sigma: bool,
    /// Fraction of samples self-labeled as anomalies.
    #[arg(long, value_name = "P")]
    negatives: Option<f64>,
    /// File of known anomaly sample ids, one per line.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::load(&self.config)?;
        config.apply(&Overrides {
            seed: self.seed,
            no_gcn: self.no_gcn,
            no_sigma: self.no_sigma,
            negatives: self.negatives,
            known_anomalies: self.labels.clone(),
            output_dir: self.output_dir.clone(),
        });
        Ok(config)
    }

    fn pipeline(&self) -> Result<Pipeline> {
        self.config().and_then(Pipeline::new).map_err(|e| e.in_stage("config"))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mine(c) => {
            let graph = c.pipeline()?.mine()?;
            println!("graph with {} nodes and {} edges", graph.dim(), graph.edge_count());
        }
        Command::TrainRecon(c) => {
            let model = c.pipeline()?.train_recon()?;
            if let Some(last) = model.history.last() {
                println!("final epoch loss {:.6}", last.total);
            }
        }
        Command::TrainDisc(c) => {
            let sel = c.pipeline()?.train_disc()?;
            println!(
                "{} positives, {} negatives ({} ground truth)",
                sel.positives.len(),
                sel.negatives.len(),
                sel.ground_truth_count()
            );
        }
        Command::Detect { common, input } => {
            let mut pipeline = common
                .config()
                .and_then(|c| Pipeline::with_input(c, input))
                .map_err(|e| e.in_stage("config"))?;
            let probs = pipeline.detect()?;
            let flagged = probs.iter().filter(|&&p| cscad::disc::decide(p)).count();
            println!("{flagged} of {} samples flagged", probs.len());
        }
        Command::Evaluate {
            common,
            predictions,
            truth,
        } => {
            let report = match (predictions, truth) {
                (Some(p), Some(t)) => {
                    let dir = common.config().map_err(|e| e.in_stage("config"))?.output_dir;
                    let report = evaluate_files(&p, &t).map_err(|e| e.in_stage("evaluate"))?;
                    std::fs::create_dir_all(&dir)
                        .map_err(|source| Error::Io {
                            path: dir.clone(),
                            source,
                        })
                        .and_then(|()| write_report(&dir, &report))
                        .map_err(|e| e.in_stage("evaluate"))?;
                    report
                }
                _ => common.pipeline()?.evaluate()?,
            };
            print!("{}", report.to_text());
        }
        Command::RunAll(c) => {
            let report = c.pipeline()?.run_all()?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Stage errors already print their cause.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
