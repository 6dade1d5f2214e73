use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ferlink::pipeline::{self, Subset};
use ferlink::{Error, Result, RunConfig};
use log::{error, info};

#[derive(Parser)]
#[command(name = "ferlink", version, about = "Vehicular channel FER labeling and classification")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "FERLINK_CONFIG")]
    config: Option<PathBuf>,

    /// Override the master seed of the configuration.
    #[arg(long, global = true, env = "FERLINK_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FERLINK_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate unlabeled channel regions.
    Generate {
        /// Region source; repeat for a mixed dataset.
        #[arg(long, required = true, value_parser = ["gscm", "tdl"])]
        kind: Vec<String>,
        /// Regions per source.
        #[arg(long, env = "FERLINK_COUNT")]
        count: usize,
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
    },
    /// Measure FER per region and attach class labels.
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
        /// Frames per region (overrides phy.frames_per_region).
        #[arg(long, env = "FERLINK_FRAMES")]
        frames: Option<u64>,
    },
    /// Train the classifier on the training split of a labeled container.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
    },
    /// Confusion matrix and accuracies of a trained model.
    Eval {
        /// Training output directory or checkpoint file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
    },
    /// Classify every sample of a container, including imported measurements.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
    },
    /// Derive class boundaries by k-means over labeled FERs.
    KmeansClasses {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the scheme JSON here.
        #[arg(long, env = "FERLINK_OUT")]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Also relabel the container with the new scheme.
        #[arg(long)]
        apply: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), cli.seed)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Generate { kind, count, out } => {
            let c = pipeline::generate(&cfg, &kind, count, &out)?;
            for (source, n) in pipeline::source_counts(&c) {
                info!("{source}: {n} regions");
            }
            println!("{} regions written to {}", c.len(), out.display());
        }
        Command::Label { input, out, frames } => {
            if let Some(f) = frames {
                cfg.phy.frames_per_region = f;
            }
            let o = pipeline::label(&cfg, &input, &out)?;
            let counts = pipeline::class_counts(&o.container, cfg.class_scheme.num_classes());
            println!(
                "labeled {} regions ({} skipped); class counts {:?}",
                o.container.len() - o.skipped.len(),
                o.skipped.len(),
                counts
            );
        }
        Command::Train { input, out } => {
            let o = pipeline::train(&cfg, &input, &out)?;
            println!(
                "trained {} epochs{}; final loss {:.6}",
                o.report.epoch_losses.len(),
                if o.report.stopped_early { " (early stop)" } else { "" },
                o.report.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Eval { model, input, subset, out } => {
            let m = pipeline::evaluate(&model, &input, subset, &out)?;
            let per_class: Vec<String> = m
                .per_class_accuracy
                .iter()
                .map(|a| a.map_or("-".into(), |v| format!("{:.4}", v)))
                .collect();
            println!("accuracy {:.4} on {} samples; per class [{}]", m.accuracy, m.samples, per_class.join(", "));
        }
        Command::Predict { model, input, out } => {
            let p = pipeline::predict(&model, &input, &out)?;
            println!("{} predictions written to {}", p.len(), out.display());
        }
        Command::KmeansClasses { input, out, classes, apply } => {
            if classes < 2 {
                return Err(Error::Config("--classes must be at least 2".into()));
            }
            let scheme = pipeline::kmeans_classes(&cfg, &input, classes, apply)?;
            let mut bytes = serde_json::to_vec_pretty(&scheme)?;
            bytes.push(b'\n');
            std::fs::write(&out, bytes).map_err(|source| Error::Io { path: out.clone(), source })?;
            println!("boundaries {:?}", scheme.boundaries);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
