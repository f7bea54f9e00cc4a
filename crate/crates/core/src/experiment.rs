//! End-to-end bias convergence run.
//!
//! Builds the vocabulary and co-occurrence table once, then trains GloVe
//! once per `x_max`, recording bias/log-count correlations after every
//! epoch. Output layout under the run directory:
//!
//! ```text
//! manifest.json
//! vocab.txt
//! cooc.bin
//! trace_xmax{X}.csv            iter,r_word,r_context,r_sum
//! costs_xmax{X}.csv            iter,cost   (iter 0 = initialization)
//! scatter_xmax{X}_iter1.csv    token,count,log_count,bias
//! scatter_xmax{X}_final.csv
//! biases_xmax{X}.txt           token bias
//! context_biases_xmax{X}.txt
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, BiasTrace, DEFAULT_PAIR_SAMPLE};
use crate::cooccur::{self, CoocTable};
use crate::corpus::{self, Vocabulary};
use crate::glove::{self, GloveParams, TrainConfig, WeightingConfig};
use crate::manifest::RunManifest;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub min_count: u64,
    pub window: usize,
    pub distance_weighting: bool,
    pub x_max: Vec<f64>,
    pub alpha: f64,
    pub dim: usize,
    pub iterations: usize,
    pub eta: f64,
    pub seed: u64,
    pub threads: usize,
    pub pair_sample: usize,
    pub clip: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            min_count: 100,
            window: 10,
            distance_weighting: true,
            x_max: vec![100.0],
            alpha: 0.75,
            dim: 300,
            iterations: 50,
            eta: 0.05,
            seed: 1,
            threads: 1,
            pair_sample: DEFAULT_PAIR_SAMPLE,
            clip: Some(100.0),
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            iterations: self.iterations,
            eta: self.eta,
            seed: self.seed,
            threads: self.threads,
            clip: self.clip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_max.is_empty() {
            return Err(Error::Config("at least one x_max is required".into()));
        }
        for &x_max in &self.x_max {
            WeightingConfig::new(x_max, self.alpha)?;
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        self.train_config().validate()
    }
}

/// Results for one `x_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightingRun {
    pub x_max: f64,
    pub trace: BiasTrace,
    /// Total weighted cost at initialization, then after each epoch.
    pub costs: Vec<f64>,
    pub trace_path: PathBuf,
}

impl WeightingRun {
    /// Fraction of the initial cost removed by training.
    pub fn cost_reduction(&self) -> f64 {
        match (self.costs.first(), self.costs.last()) {
            (Some(&first), Some(&last)) if first > 0.0 => 1.0 - last / first,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub vocab_size: usize,
    pub tokens: usize,
    pub nnz: usize,
    pub runs: Vec<WeightingRun>,
}

/// `10` → `10`, `2.5` → `2.5`.
pub fn x_max_label(x_max: f64) -> String {
    x_max.to_string()
}

pub fn trace_file(x_max: f64) -> String {
    format!("trace_xmax{}.csv", x_max_label(x_max))
}

/// Run the whole pipeline over `inputs`, writing into `out_dir`.
pub fn run<P: AsRef<Path>>(
    inputs: &[P],
    out_dir: impl AsRef<Path>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    run_with_progress(inputs, out_dir, cfg, |_| {})
}

/// As [`run`], calling `progress` with a one-line status after each step.
pub fn run_with_progress<P: AsRef<Path>>(
    inputs: &[P],
    out_dir: impl AsRef<Path>,
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("input file list"));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    RunManifest::new("experiment", cfg, cfg.seed, cfg.threads, inputs)?.write(out_dir.join("manifest.json"))?;

    let texts = corpus::read_texts(inputs)?;
    let vocab = Vocabulary::from_counts(corpus::count_texts(&texts), cfg.min_count)?;
    if vocab.is_empty() {
        return Err(Error::Empty("vocabulary (lower --min-count?)"));
    }
    vocab.save(out_dir.join("vocab.txt"))?;
    let stream = corpus::encode_texts(&texts, &vocab);
    drop(texts);
    progress(&format!(
        "vocabulary: {} words, {} tokens in stream",
        vocab.len(),
        stream.len()
    ));

    let table = cooccur::count_sharded(
        &stream,
        cfg.window,
        cfg.distance_weighting,
        rayon::current_num_threads(),
    )?;
    table.save(out_dir.join("cooc.bin"))?;
    progress(&format!(
        "co-occurrence: {} cells, total {}",
        table.nnz(),
        table.total()
    ));

    let mut runs = Vec::with_capacity(cfg.x_max.len());
    for &x_max in &cfg.x_max {
        let wcfg = WeightingConfig::new(x_max, cfg.alpha)?;
        let run = train_one(&table, &vocab, cfg, &wcfg, out_dir, &mut progress)?;
        runs.push(run);
    }
    Ok(ExperimentOutcome {
        vocab_size: vocab.len(),
        tokens: stream.len(),
        nnz: table.nnz(),
        runs,
    })
}

fn train_one(
    table: &CoocTable,
    vocab: &Vocabulary,
    cfg: &ExperimentConfig,
    wcfg: &WeightingConfig,
    out_dir: &Path,
    progress: &mut impl FnMut(&str),
) -> Result<WeightingRun> {
    let label = x_max_label(wcfg.x_max);
    let tcfg = cfg.train_config();
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let init = GloveParams::random(table.vocab_size(), tcfg.dim, &mut rng);
    let mut costs = vec![glove::total_cost(&init, table, wcfg)];
    let mut trace = BiasTrace::new();
    let iter1_path = out_dir.join(format!("scatter_xmax{label}_iter1.csv"));

    let params = glove::train_from(init, table, &tcfg, wcfg, &mut rng, |report, params| {
        let rec = analysis::correlate_biases(params, table, report.epoch, cfg.pair_sample, cfg.seed)?;
        let cost = glove::total_cost(params, table, wcfg);
        progress(&format!(
            "x_max={label} iter {:>3}: cost {cost:.6e} r_word {:.4} r_context {:.4} r_sum {:.4}",
            report.epoch, rec.r_word, rec.r_context, rec.r_sum
        ));
        costs.push(cost);
        trace.push(rec)?;
        if report.epoch == 1 {
            analysis::export_scatter(params, vocab, table, &iter1_path)?;
        }
        Ok(())
    })?;

    let trace_path = out_dir.join(trace_file(wcfg.x_max));
    trace.export(&trace_path)?;
    analysis::export_scatter(
        &params,
        vocab,
        table,
        out_dir.join(format!("scatter_xmax{label}_final.csv")),
    )?;
    params.save_biases(vocab, out_dir.join(format!("biases_xmax{label}.txt")))?;
    params.save_context_biases(vocab, out_dir.join(format!("context_biases_xmax{label}.txt")))?;
    write_costs(&costs, &out_dir.join(format!("costs_xmax{label}.csv")))?;
    Ok(WeightingRun {
        x_max: wcfg.x_max,
        trace,
        costs,
        trace_path,
    })
}

fn write_costs(costs: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "iter,cost")?;
        for (i, c) in costs.iter().enumerate() {
            writeln!(out, "{i},{c}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Read back a `costs_xmax{X}.csv` file.
pub fn load_costs(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("iter,cost") {
        return Err(Error::format(path, "expected header iter,cost"));
    }
    lines
        .map(|l| {
            l.split_once(',')
                .and_then(|(_, c)| c.parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad line {l:?}")))
        })
        .collect()
}
