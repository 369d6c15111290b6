use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wordseg::evaluator::EvalConfig;
use wordseg::pipeline::{self, EvalInputs, PipelineConfig, StageStatus};
use wordseg::synth::{self, SynthConfig};

/// Unsupervised word segmentation with duration-penalised dynamic programming.
#[derive(Parser)]
#[command(name = "wordseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the unit codebook and segment utterances into acoustic units.
    Units(StageArgs),
    /// Train the autoencoder and segment unit sequences into words.
    Words(StageArgs),
    /// Embed word segments and cluster them into a lexicon.
    Lexicon(StageArgs),
    /// Run units, words and lexicon in order.
    Pipeline(StageArgs),
    /// Score a segmentation against reference alignments.
    Eval(EvalArgs),
    /// Write a synthetic corpus with reference alignments.
    Synth(SynthArgs),
}

#[derive(Args)]
struct StageArgs {
    /// TOML config; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long)]
    num_units: Option<usize>,
    #[arg(long)]
    lambda_units: Option<f64>,
    #[arg(long)]
    max_unit_len: Option<usize>,
    #[arg(long)]
    lambda_words: Option<f64>,
    #[arg(long)]
    max_word_len: Option<usize>,
    #[arg(long)]
    lexicon_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Rerun stages even when their outputs are up to date.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    max_seq_len: Option<usize>,
    /// Fit the unit codebook on a seeded sample of at most this many frames.
    #[arg(long)]
    kmeans_max_frames: Option<usize>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    normalize_embeddings: bool,
    #[arg(long)]
    dump_embeddings: bool,
}

impl StageArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_toml_file(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set! {
            manifest => manifest,
            work_dir => work_dir,
            num_units => num_units,
            lambda_units => units.lambda,
            max_unit_len => units.max_len,
            lambda_words => words.lambda,
            max_word_len => words.max_len,
            seed => seed,
            epochs => autoencoder.epochs,
            learning_rate => autoencoder.learning_rate,
            batch_size => autoencoder.batch_size,
            emb_dim => autoencoder.emb_dim,
            hidden_dim => autoencoder.hidden_dim,
            max_seq_len => autoencoder.max_seq_len,
        }
        if self.lexicon_size.is_some() {
            cfg.lexicon_size = self.lexicon_size;
        }
        if self.kmeans_max_frames.is_some() {
            cfg.unit_kmeans_max_frames = self.kmeans_max_frames;
        }
        cfg.standardize |= self.standardize;
        cfg.normalize_embeddings |= self.normalize_embeddings;
        cfg.dump_embeddings |= self.dump_embeddings;
        cfg.force = self.force;
        cfg.jobs = self.jobs;
        if cfg.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Segmentation JSONL to score.
    #[arg(long)]
    segments: PathBuf,
    /// Reference word alignments (TSV).
    #[arg(long)]
    word_alignments: PathBuf,
    /// Reference phone alignments (TSV); needed for NED.
    #[arg(long)]
    phone_alignments: Option<PathBuf>,
    /// Skip NED.
    #[arg(long)]
    no_ned: bool,
    /// Boundary tolerance in seconds.
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
    #[arg(long, default_value_t = 0.5)]
    overlap_frac: f64,
    #[arg(long, default_value_t = 0.03)]
    overlap_abs: f64,
    /// Count utterance-initial and -final boundaries.
    #[arg(long)]
    include_edges: bool,
    /// Sample at most this many same-cluster pairs for NED.
    #[arg(long)]
    ned_pair_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    num_utterances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise standard deviation relative to the centroid scale.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

fn report_stage(name: &str, status: StageStatus) {
    match status {
        StageStatus::Ran => log::info!("{name}: done"),
        StageStatus::UpToDate => eprintln!("{name}: outputs up to date, skipped (use --force to rerun)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Units(args) => {
            let cfg = args.resolve()?;
            pipeline::write_effective_config(&cfg)?;
            report_stage("units", pipeline::run_units(&cfg)?);
        }
        Command::Words(args) => {
            let cfg = args.resolve()?;
            pipeline::write_effective_config(&cfg)?;
            report_stage("words", pipeline::run_words(&cfg)?);
        }
        Command::Lexicon(args) => {
            let cfg = args.resolve()?;
            if cfg.lexicon_size.is_none() {
                bail!("the lexicon stage needs --lexicon-size (or lexicon_size in the config)");
            }
            pipeline::write_effective_config(&cfg)?;
            report_stage("lexicon", pipeline::run_lexicon(&cfg)?);
        }
        Command::Pipeline(args) => {
            let cfg = args.resolve()?;
            if cfg.lexicon_size.is_none() {
                bail!("the pipeline needs --lexicon-size (or lexicon_size in the config)");
            }
            pipeline::write_effective_config(&cfg)?;
            report_stage("units", pipeline::run_units(&cfg)?);
            report_stage("words", pipeline::run_words(&cfg)?);
            report_stage("lexicon", pipeline::run_lexicon(&cfg)?);
        }
        Command::Eval(args) => {
            let cfg = EvalConfig {
                tolerance: args.tolerance,
                overlap_frac: args.overlap_frac,
                overlap_abs: args.overlap_abs,
                exclude_edges: !args.include_edges,
                ned_pair_cap: args.ned_pair_cap,
                seed: args.seed,
            };
            let inputs = EvalInputs {
                segments: args.segments,
                word_alignments: args.word_alignments,
                phone_alignments: args.phone_alignments,
                ned: !args.no_ned,
            };
            let text = pipeline::run_eval(&inputs, &cfg)?.to_text(&cfg);
            match args.out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Synth(args) => {
            let cfg = SynthConfig {
                num_utterances: args.num_utterances,
                seed: args.seed,
                noise: args.noise,
                ..Default::default()
            };
            let corpus = synth::generate(&cfg)?;
            synth::write_corpus(&corpus, &args.out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
