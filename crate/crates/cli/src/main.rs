mod commands;
mod config;
mod layout;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lcfn_core::evaluation::{Phase, STANDARD_KS};
use lcfn_core::io::RecordFormat;
use lcfn_core::spectral::demo::DemoSignal;

use config::{parse_list, parse_ratios, RunConfig};
use layout::{DirLock, Layout};

#[derive(Parser)]
#[command(name = "lcfn", version, about = "Low-pass graph convolutional recommender pipeline")]
struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory shared by all pipeline stages.
    #[arg(long, global = true, default_value = "lcfn-out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct TrainArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    reg_lambda: Option<f64>,
    /// Width K of every embedding level.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Total width D; K = D / (layers + 1).
    #[arg(long)]
    total_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    /// E.g. `F1@2` or `NDCG@10`.
    #[arg(long)]
    selection_metric: Option<String>,
    /// Comma-separated cut-offs reported on validation.
    #[arg(long)]
    eval_ks: Option<String>,
}

impl TrainArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<()> {
        let pairs: [(&str, Option<String>); 11] = [
            ("learning_rate", self.learning_rate.map(|v| v.to_string())),
            ("reg_lambda", self.reg_lambda.map(|v| v.to_string())),
            ("total_dim", self.total_dim.map(|v| v.to_string())),
            ("embed_dim", self.embed_dim.map(|v| v.to_string())),
            ("layers", self.layers.map(|v| v.to_string())),
            ("cutoff_ratio", self.cutoff.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("negatives_per_positive", self.negatives.map(|v| v.to_string())),
            ("selection_metric", self.selection_metric.clone()),
            ("eval_ks", self.eval_ks.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                c.set(key, &v)?;
            }
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse an interaction log, binarize it and apply n-core filtering.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// `tsv` or `movielens`.
        #[arg(long, default_value = "tsv")]
        format: String,
        #[arg(long)]
        core_user: Option<usize>,
        #[arg(long)]
        core_item: Option<usize>,
    },
    /// Split the dataset into train, validation and test files.
    Split {
        /// Comma-separated train,validation,test ratios.
        #[arg(long)]
        ratios: Option<String>,
    },
    /// Compute and cache the passband eigenbases of the training graphs.
    Eigen {
        #[arg(long)]
        cutoff: Option<f64>,
        /// Recompute even when the caches are current.
        #[arg(long)]
        force: bool,
    },
    /// Train matrix factorization embeddings used as initialization.
    Pretrain(TrainArgs),
    /// Train the graph convolutional model.
    Train {
        #[command(flatten)]
        args: TrainArgs,
        /// Start from `lcfn pretrain` embeddings.
        #[arg(long)]
        pretrained: bool,
    },
    /// Grid-search learning rate and regularization.
    Tune {
        #[command(flatten)]
        args: TrainArgs,
        #[arg(long)]
        pretrained: bool,
        /// Follow the coarse grid with a fine grid around its winner.
        #[arg(long)]
        fine: bool,
    },
    /// Score a checkpoint on the validation or test split.
    Evaluate {
        /// Defaults to the `lcfn train` checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        phase: String,
        /// Comma-separated cut-offs.
        #[arg(long)]
        ks: Option<String>,
    },
    /// Spectrum of sinusoids on a cycle graph and their low-pass separation.
    DemoGft {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// `s1`, `s2` or `s3`.
        #[arg(long, default_value = "s3")]
        signal: String,
        /// Retained share of the frequency range.
        #[arg(long, default_value_t = 0.3)]
        passband: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    let layout = Layout::new(cli.out.clone());
    let _lock = DirLock::acquire(&layout.root)?;
    let seed = config.train.seed;

    match cli.command {
        Command::Ingest { input, format, core_user, core_item } => {
            let format: RecordFormat = format.parse()?;
            commands::ingest(
                &layout,
                &input,
                format,
                core_user.unwrap_or(config.core_user),
                core_item.unwrap_or(config.core_item),
            )
        }
        Command::Split { ratios } => {
            let ratios = match ratios {
                Some(r) => parse_ratios(&r)?,
                None => config.ratios,
            };
            commands::split_cmd(&layout, ratios, seed)
        }
        Command::Eigen { cutoff, force } => {
            let f = cutoff.unwrap_or(config.train.cutoff_ratio);
            commands::eigen(&layout, f, seed, force)
        }
        Command::Pretrain(args) => {
            args.apply(&mut config)?;
            commands::pretrain(&layout, &config.resolved_train()?)
        }
        Command::Train { args, pretrained } => {
            args.apply(&mut config)?;
            commands::train_cmd(&layout, &config.resolved_train()?, pretrained)
        }
        Command::Tune { args, pretrained, fine } => {
            args.apply(&mut config)?;
            commands::tune_cmd(&layout, &config.resolved_train()?, pretrained, fine)
        }
        Command::Evaluate { checkpoint, phase, ks } => {
            let phase: Phase = phase.parse()?;
            let ks = match ks {
                Some(k) => parse_list(&k)?,
                None => STANDARD_KS.to_vec(),
            };
            commands::evaluate_cmd(&layout, checkpoint, phase, &ks, seed).map(|_| ())
        }
        Command::DemoGft { n, signal, passband, csv } => {
            let signal: DemoSignal = signal.parse()?;
            commands::demo_gft(&layout, n, signal, passband, csv)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
