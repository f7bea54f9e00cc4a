use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use embias::analysis::{self, BiasTrace};
use embias::corpus::{self, Vocabulary};
use embias::experiment::{self, ExperimentConfig};
use embias::glove::{self, TrainConfig, WeightingConfig};
use embias::sgns::{self, SgnsConfig};
use embias::{cooccur, io, pmi, CoocTable, RunManifest};

/// Train GloVe and SGNS embeddings and track how GloVe's bias terms
/// converge toward log co-occurrence counts.
#[derive(Parser)]
#[command(name = "embias", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count tokens and write a min-count filtered vocabulary.
    Vocab(VocabArgs),
    /// Build the symmetric windowed co-occurrence table.
    Count(CountArgs),
    /// Train GloVe on a co-occurrence table.
    TrainGlove(GloveArgs),
    /// Train SGNS on a co-occurrence table or directly on a corpus.
    TrainSgns(SgnsArgs),
    /// Write the (shifted) PMI of every observed cell.
    Pmi(PmiArgs),
    /// Correlate saved bias vectors with log counts.
    Analyze(AnalyzeArgs),
    /// Full pipeline: vocabulary, counting, then GloVe once per --x-max
    /// with per-epoch bias correlations.
    Experiment(ExperimentArgs),
}

#[derive(Args, Serialize)]
struct VocabArgs {
    /// Whitespace-tokenized text files, read as one stream.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CountArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Count every pair in the window as 1 instead of 1/distance.
    #[arg(long)]
    no_distance_weighting: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TableArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// Binary table written by `count`.
    #[arg(long)]
    cooc: PathBuf,
}

#[derive(Args, Serialize)]
struct GloveArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value_t = 100.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    #[command(flatten)]
    train: GloveTrainArgs,
    #[arg(long, default_value_t = analysis::DEFAULT_PAIR_SAMPLE)]
    pair_sample: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct GloveTrainArgs {
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// More than 1 trains lock-free and gives up bit reproducibility.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Clip each cell's gradient scale to [-CLIP, CLIP].
    #[arg(long, default_value_t = 100.0)]
    clip: f64,
    #[arg(long)]
    no_clip: bool,
}

impl GloveTrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            iterations: self.iters,
            eta: self.eta,
            seed: self.seed,
            threads: self.threads,
            clip: (!self.no_clip).then_some(self.clip),
        }
    }
}

#[derive(Args, Serialize)]
struct SgnsArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// Train on the expected objective over this table.
    #[arg(long, conflicts_with = "inputs", required_unless_present = "inputs")]
    cooc: Option<PathBuf>,
    /// Train word2vec-style on these text files.
    inputs: Vec<PathBuf>,
    /// Window for corpus training.
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    k: u32,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    /// Exponent on unigram counts for the noise distribution.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct PmiArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Subtract log k; 1 gives plain PMI.
    #[arg(long, default_value_t = 5)]
    k: u32,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    table: TableArgs,
    /// `token bias` file, e.g. biases.txt from train-glove.
    #[arg(long)]
    biases: PathBuf,
    #[arg(long)]
    context_biases: PathBuf,
    #[arg(long, default_value_t = analysis::DEFAULT_PAIR_SAMPLE)]
    pair_sample: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write token,count,log_count,bias rows here.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long)]
    no_distance_weighting: bool,
    /// Repeat to train once per value.
    #[arg(long = "x-max", default_values_t = [100.0])]
    x_max: Vec<f64>,
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    #[command(flatten)]
    train: GloveTrainArgs,
    #[arg(long, default_value_t = analysis::DEFAULT_PAIR_SAMPLE)]
    pair_sample: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(short, long)]
    quiet: bool,
}

/// Invalid flag values found after parsing. Reported like clap errors.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn manifest<C: Serialize, P: AsRef<Path>>(
    cmd: &str,
    cfg: &C,
    seed: u64,
    threads: usize,
    inputs: &[P],
) -> Result<RunManifest> {
    Ok(RunManifest::new(cmd, cfg, seed, threads, inputs)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_table(args: &TableArgs) -> Result<(Vocabulary, CoocTable)> {
    let vocab = Vocabulary::load(&args.vocab)?;
    let table = CoocTable::load(&args.cooc, vocab.len())?;
    Ok((vocab, table))
}

fn vocab(args: &VocabArgs) -> Result<()> {
    if args.min_count == 0 {
        return Err(Usage("--min-count must be at least 1".into()).into());
    }
    let texts = corpus::read_texts(&args.inputs)?;
    let v = Vocabulary::from_counts(corpus::count_texts(&texts), args.min_count)?;
    v.save(&args.out)?;
    manifest("vocab", args, 0, 1, &args.inputs)?.write(sidecar(&args.out))?;
    eprintln!("{} words", v.len());
    Ok(())
}

fn count(args: &CountArgs) -> Result<()> {
    let v = Vocabulary::load(&args.vocab)?;
    let texts = corpus::read_texts(&args.inputs)?;
    let stream = corpus::encode_texts(&texts, &v);
    drop(texts);
    let shards = std::thread::available_parallelism().map_or(1, |n| n.get());
    let table = cooccur::count_sharded(&stream, args.window, !args.no_distance_weighting, shards)?;
    table.save(&args.out)?;
    let mut inputs = args.inputs.clone();
    inputs.push(args.vocab.clone());
    manifest("count", args, 0, 1, &inputs)?.write(sidecar(&args.out))?;
    eprintln!(
        "{} tokens, {} cells, total {}",
        stream.len(),
        table.nnz(),
        table.total()
    );
    Ok(())
}

fn train_glove(args: &GloveArgs) -> Result<()> {
    let (v, table) = load_table(&args.table)?;
    let wcfg = WeightingConfig::new(args.x_max, args.alpha)?;
    let tcfg = args.train.config();
    create_dir(&args.out_dir)?;
    manifest(
        "train-glove",
        args,
        tcfg.seed,
        tcfg.threads,
        &[&args.table.vocab, &args.table.cooc],
    )?
    .write(args.out_dir.join("manifest.json"))?;
    let mut trace = BiasTrace::new();
    let params = glove::train(&table, &tcfg, &wcfg, |rep, p| {
        let rec = analysis::correlate_biases(p, &table, rep.epoch, args.pair_sample, tcfg.seed)?;
        eprintln!(
            "iter {:>3}: cost {:.6e} r_word {:.4} r_context {:.4} r_sum {:.4}",
            rep.epoch, rep.running_cost, rec.r_word, rec.r_context, rec.r_sum
        );
        trace.push(rec)
    })?;
    let out = &args.out_dir;
    trace.export(out.join("trace.csv"))?;
    params.save_embeddings(&v, out.join("vectors.txt"))?;
    params.save_context_embeddings(&v, out.join("context_vectors.txt"))?;
    params.save_biases(&v, out.join("biases.txt"))?;
    params.save_context_biases(&v, out.join("context_biases.txt"))?;
    analysis::export_scatter(&params, &v, &table, out.join("scatter.csv"))?;
    Ok(())
}

fn train_sgns(args: &SgnsArgs) -> Result<()> {
    let v = Vocabulary::load(&args.vocab)?;
    let cfg = SgnsConfig {
        k: args.k,
        dim: args.dim,
        eta: args.eta,
        epochs: args.iters,
        seed: args.seed,
        smoothing: args.smoothing,
        threads: args.threads,
    };
    create_dir(&args.out_dir)?;
    let report = |e: &sgns::SgnsEpoch, _: &embias::SgnsParams| {
        eprintln!("iter {:>3}: objective {:.6e}", e.epoch, e.objective);
        Ok(())
    };
    let mut inputs = vec![args.vocab.clone()];
    let params = if let Some(cooc) = &args.cooc {
        inputs.push(cooc.clone());
        let table = CoocTable::load(cooc, v.len())?;
        let params = sgns::train_matrix(&table, &cfg, report)?;
        let r = pmi::residual_report(&params, &table, cfg.k)?;
        eprintln!("shifted-PMI residual: max {:.4}, mean {:.4}", r.max_abs, r.mean_abs);
        params
    } else {
        inputs.extend(args.inputs.iter().cloned());
        let texts = corpus::read_texts(&args.inputs)?;
        let stream = corpus::encode_texts(&texts, &v);
        drop(texts);
        let (params, stats) = sgns::train_stream(&stream, &v, args.window, &cfg, report)?;
        eprintln!(
            "{} positive, {} negative updates",
            stats.positive_updates, stats.negative_updates
        );
        params
    };
    manifest("train-sgns", args, cfg.seed, cfg.threads, &inputs)?.write(args.out_dir.join("manifest.json"))?;
    params.save_embeddings(&v, args.out_dir.join("vectors.txt"))?;
    params.save_context_embeddings(&v, args.out_dir.join("context_vectors.txt"))?;
    Ok(())
}

fn pmi_cmd(args: &PmiArgs) -> Result<()> {
    let (_, table) = load_table(&args.table)?;
    pmi::shifted_pmi_matrix(&table, args.k)?.write_csv(&args.out)?;
    manifest("pmi", args, 0, 1, &[&args.table.vocab, &args.table.cooc])?.write(sidecar(&args.out))?;
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let (v, table) = load_table(&args.table)?;
    let wb = io::read_scalars(&args.biases, &v)?;
    let cb = io::read_scalars(&args.context_biases, &v)?;
    let (r_word, r_context, r_sum) = analysis::correlate_bias_vectors(&wb, &cb, &table, args.pair_sample, args.seed)?;
    println!("r_word\t{r_word}\nr_context\t{r_context}\nr_sum\t{r_sum}");
    if let Some(path) = &args.scatter {
        analysis::write_scatter(&analysis::scatter_rows(&wb, &v, &table)?, path)?;
        let inputs = [&args.table.vocab, &args.table.cooc, &args.biases, &args.context_biases];
        manifest("analyze", args, args.seed, 1, &inputs)?.write(sidecar(path))?;
    }
    Ok(())
}

fn experiment_cmd(args: &ExperimentArgs) -> Result<()> {
    let t = args.train.config();
    let cfg = ExperimentConfig {
        min_count: args.min_count,
        window: args.window,
        distance_weighting: !args.no_distance_weighting,
        x_max: args.x_max.clone(),
        alpha: args.alpha,
        dim: t.dim,
        iterations: t.iterations,
        eta: t.eta,
        seed: t.seed,
        threads: t.threads,
        pair_sample: args.pair_sample,
        clip: t.clip,
    };
    let quiet = args.quiet;
    let outcome = experiment::run_with_progress(&args.inputs, &args.out_dir, &cfg, |line| {
        if !quiet {
            eprintln!("{line}");
        }
    })?;
    for run in &outcome.runs {
        let (first, last) = (run.trace.first(), run.trace.last());
        if let (Some(first), Some(last)) = (first, last) {
            println!(
                "x_max={}: r_word {:.4} -> {:.4}, cost reduced {:.1}%, trace {}",
                experiment::x_max_label(run.x_max),
                first.r_word,
                last.r_word,
                100.0 * run.cost_reduction(),
                run.trace_path.display()
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Vocab(a) => vocab(a),
        Command::Count(a) => count(a),
        Command::TrainGlove(a) => train_glove(a),
        Command::TrainSgns(a) => train_sgns(a),
        Command::Pmi(a) => pmi_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Experiment(a) => experiment_cmd(a),
    }
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.downcast_ref::<Usage>().is_some()
        || matches!(err.downcast_ref::<embias::Error>(), Some(embias::Error::Config(_)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_usage(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
