use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use textjscc::channels::ChannelKind;
use textjscc::config::TrainConfig;
use textjscc::data::Corpus;
use textjscc::harness::{self, SweepSpec};
use textjscc::Result;

#[derive(Parser)]
#[command(name = "textjscc", version, about = "Learned joint source-channel coding for short text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where sentences come from: a TSV file, or a generated corpus.
#[derive(Args)]
struct CorpusArgs {
    /// TSV file of `source<TAB>target` lines.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Seed of the synthetic corpus used when no file is given.
    #[arg(long, default_value_t = 1)]
    synth_seed: u64,
    /// Size of the synthetic corpus used when no file is given.
    #[arg(long, default_value_t = 2000)]
    synth_size: usize,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        harness::corpus_or_synth(self.corpus.as_deref(), self.synth_seed, self.synth_size)
    }
}

#[derive(Args)]
struct GridArgs {
    /// Comma-separated channel kinds.
    #[arg(long, default_value = "bec,bsc,dc", value_delimiter = ',')]
    channels: Vec<ChannelKind>,
    /// Comma-separated, strictly increasing P_e values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Held-out sentences per point.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use add-one smoothing for BLEU on n-gram orders 2 to 4.
    #[arg(long)]
    smooth_bleu: bool,
}

impl GridArgs {
    fn spec(&self) -> Result<SweepSpec> {
        SweepSpec::new(
            self.channels.clone(),
            self.grid.clone().unwrap_or_else(SweepSpec::default_grid),
            self.samples,
            self.seed,
        )
        .map(|s| s.smoothed(self.smooth_bleu))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes vocab, final and best checkpoints and a loss log.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// `key = value` model and training settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint over channels and a P_e grid.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// CSV output; a gnuplot script is written beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Send one sentence through every channel and print the outputs.
    Transmit {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sentence: String,
        #[arg(long, default_value_t = 0.0)]
        pe: f64,
        /// Restrict the printout to one channel kind.
        #[arg(long)]
        channel: Option<ChannelKind>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the Huffman + convolutional-code chain over the same grid.
    Baseline {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Checkpoint whose encoder scores similarity and whose split is used.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Config giving the split seed and fractions when no checkpoint is given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Letter statistics and per-token overhead of the classical chain.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 512)]
        vocab_target: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sentence-pair corpus as TSV.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn split_config(config: Option<&Path>) -> Result<TrainConfig> {
    Ok(harness::load_config(config)?.1)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            corpus,
            config,
            out,
            seed,
            resume,
            quiet,
        } => {
            let (model, mut train) = harness::load_config(config.as_deref())?;
            if let Some(s) = seed {
                train.seed = s;
            }
            let summary = harness::cmd_train(&corpus.load()?, &model, &train, &out, resume.as_deref(), !quiet)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "trained {} epochs ({} steps); best validation loss {:.4}; outputs in {}",
                summary.log.len(),
                summary.steps,
                summary.best_valid,
                out.display()
            );
        }
        Command::Sweep {
            checkpoint,
            corpus,
            grid,
            out,
        } => {
            let rows = harness::cmd_sweep(&checkpoint, &corpus.load()?, &grid.spec()?, &out)?;
            print!("{}", harness::sweep_csv(&rows));
        }
        Command::Transmit {
            checkpoint,
            sentence,
            pe,
            channel,
            seed,
        } => {
            let mut report = harness::cmd_transmit(&checkpoint, &sentence, pe, seed)?;
            if let Some(kind) = channel {
                report.lines.retain(|l| l.channel == kind);
            }
            print!("{report}");
        }
        Command::Baseline {
            corpus,
            grid,
            checkpoint,
            config,
            out,
        } => {
            let split = split_config(config.as_deref())?;
            let rows = harness::cmd_baseline(&corpus.load()?, &grid.spec()?, checkpoint.as_deref(), &split, &out)?;
            print!("{}", harness::sweep_csv(&rows));
        }
        Command::Stats {
            corpus,
            vocab_target,
            out,
        } => {
            let report = harness::cmd_stats(&corpus.load()?, vocab_target, out.as_deref())?;
            print!("{report}");
        }
        Command::Synth { seed, size, out } => {
            let c = harness::cmd_synth(seed, size, &out)?;
            println!("wrote {} pairs to {}", c.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
