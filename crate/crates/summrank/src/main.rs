use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use summrank::config::{invalid, RunConfig};
use summrank::{exit_code, formats, stages};
use summrank_core::features::Normalization;
use summrank_core::pseudo::PseudoMethod;
use summrank_core::synth::{generate, Plant, SynthConfig, DEFAULT_VOCAB_SIZE};

/// Reference-free re-ranking of summary candidates.
#[derive(Debug, Parser)]
#[command(name = "summrank", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-document work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pseudo-target method (lead3, random3, salient-r1, salient-r2, salient-rl).
    #[arg(long, global = true)]
    pseudo: Option<PseudoMethod>,
    /// Comma-separated evaluation strategies.
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Seed of the coefficient search.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per search stage.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Feature normalization (none, per_instance_minmax).
    #[arg(long, global = true)]
    normalization: Option<Normalization>,
    /// Comma-separated semantic scorers, in feature order.
    #[arg(long, global = true, value_delimiter = ',')]
    semantic: Option<Vec<String>>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the candidate feature matrix.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one pseudo-target per document.
    PseudoTargets {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the combination coefficients against pseudo-targets.
    Estimate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        pseudo_targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trial log (CSV).
        #[arg(long)]
        log: PathBuf,
    },
    /// Pick one candidate per document.
    Rerank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        coefficients: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score selections and baselines against references.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write selected summaries as pseudo-labels for self-training.
    ExportLabels {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage through files in one directory.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write labels.jsonl.
        #[arg(long)]
        export: bool,
    },
    /// Generate a synthetic corpus with a planted best candidate.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Where to write the planted indices.
        #[arg(long)]
        plants: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
        vocab: usize,
        #[arg(long, default_value = "bleu-oracle")]
        plant: Plant,
        /// Generator seed.
        #[arg(long = "synth-seed", default_value_t = 0)]
        synth_seed: u64,
    },
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = g.pseudo {
        config.pseudo.method = m;
    }
    if let Some(s) = &g.strategies {
        config.evaluation.strategies = s.clone();
    }
    if let Some(seed) = g.seed {
        config.estimation.seed = seed;
    }
    if let Some(t) = g.trials {
        config.estimation.trials_per_search = t;
    }
    if let Some(n) = g.normalization {
        config.features.normalization = n;
    }
    if let Some(s) = &g.semantic {
        config.features.semantic = s.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    if let Command::Synth { out, plants, docs, k, vocab, plant, synth_seed } = &cli.command {
        let config = SynthConfig { seed: *synth_seed, n_docs: *docs, k: *k, vocab_size: *vocab, plant: *plant };
        let corpus = generate(&config)?;
        formats::write_corpus(out, &corpus.documents)?;
        if let Some(p) = plants {
            formats::write_plants(p, &corpus.plants)?;
        }
        return Ok(());
    }
    let config = load_config(&cli.global)?;
    match &cli.command {
        Command::Features { corpus, out } => stages::run_features(&config, corpus, out),
        Command::PseudoTargets { corpus, out } => stages::run_pseudo_targets(&config, corpus, out),
        Command::Estimate { corpus, features, pseudo_targets, out, log } => {
            stages::run_estimate(&config, corpus, features, pseudo_targets, out, log)
        }
        Command::Rerank { features, coefficients, out } => stages::run_rerank(&config, features, coefficients, out),
        Command::Evaluate { corpus, features, selection, out_dir } => {
            stages::run_evaluate(&config, corpus, features, selection, out_dir)
        }
        Command::ExportLabels { corpus, selection, out } => stages::run_export(&config, corpus, selection, out),
        Command::Pipeline { corpus, out_dir, export } => stages::run_pipeline(&config, corpus, out_dir, *export),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("summrank: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
