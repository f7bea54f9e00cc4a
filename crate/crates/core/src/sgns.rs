//! Skip-gram with negative sampling.
//!
//! Two trainers share one parameter type:
//!
//! * [`train_matrix`] maximizes the expected objective summed over the
//!   observed cells of a table. Each cell contributes
//!   `#(w,c)·log σ(x) + k·#(w)·#(c)/Σ#(w) · log σ(−x)` with
//!   `x = W_i·C_j`, whose stationary point is `PMI(w,c) − log k`.
//! * [`train_stream`] is the sampled algorithm: one positive and `k`
//!   negative updates per (center, context) pair in the window, with
//!   negatives drawn from the unigram distribution raised to `smoothing`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::cooccur::CoocTable;
use crate::corpus::{TokenStream, Vocabulary};
use crate::glove::dot;
use crate::hogwild::{self, partition, Slots};
use crate::{io, Error, Result};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgnsConfig {
    /// Negative samples per positive pair.
    pub k: u32,
    pub dim: usize,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Exponent applied to unigram counts for the noise distribution.
    pub smoothing: f64,
    /// More than one thread trains Hogwild-style and is not reproducible.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            k: 5,
            dim: 300,
            eta: 0.05,
            epochs: 50,
            seed: 1,
            smoothing: 1.0,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(Error::Config(format!(
                "smoothing must be in (0, 1], got {}",
                self.smoothing
            )));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Word and context matrices, row-major `|V| × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsParams {
    dim: usize,
    vocab_size: usize,
    words: Vec<f64>,
    contexts: Vec<f64>,
}

impl SgnsParams {
    /// Word vectors uniform in `(−0.5/dim, 0.5/dim)`; context vectors
    /// drawn the same way (word2vec zeroes them, which stalls the
    /// matrix-form gradient at the origin).
    pub fn random<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let scale = 0.5 / dim as f64;
        let n = vocab_size * dim;
        let words = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let contexts = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        SgnsParams {
            dim,
            vocab_size,
            words,
            contexts,
        }
    }

    pub fn from_parts(dim: usize, words: Vec<f64>, contexts: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if words.len() % dim != 0 || words.len() != contexts.len() {
            return Err(Error::DimMismatch {
                expected: words.len(),
                found: contexts.len(),
            });
        }
        Ok(SgnsParams {
            dim,
            vocab_size: words.len() / dim,
            words,
            contexts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn word(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.words[i * self.dim..(i + 1) * self.dim]
    }

    pub fn context(&self, j: u32) -> &[f64] {
        let j = j as usize;
        &self.contexts[j * self.dim..(j + 1) * self.dim]
    }

    pub fn words(&self) -> &[f64] {
        &self.words
    }

    pub fn contexts(&self) -> &[f64] {
        &self.contexts
    }

    /// `W_i·C_j`.
    pub fn predict(&self, i: u32, j: u32) -> f64 {
        dot(self.word(i), self.context(j))
    }

    pub fn is_finite(&self) -> bool {
        self.words.iter().chain(&self.contexts).all(|x| x.is_finite())
    }

    pub fn save_embeddings(&self, vocab: &Vocabulary, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::write_vectors(path, vocab, &self.words, self.dim)
    }

    pub fn save_context_embeddings(&self, vocab: &Vocabulary, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::write_vectors(path, vocab, &self.contexts, self.dim)
    }
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)`, accurate in both tails.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn check_counts(counts: &[f64]) -> Result<()> {
    match counts.iter().find(|&&c| !(c > 0.0)) {
        Some(&bad) => Err(Error::NonPositiveCount(bad)),
        None => Ok(()),
    }
}

/// Expected negative mass `k·#(w)·#(c)/Σ#(w)` of a cell.
#[inline]
fn noise_mass(n_w: f64, n_c: f64, total: f64, k: u32) -> f64 {
    k as f64 * n_w * (n_c / total)
}

/// Per-cell expected objective at `x = W_i·C_j`.
pub fn expected_local_objective(x: f64, n_wc: f64, n_w: f64, n_c: f64, total: f64, k: u32) -> Result<f64> {
    check_counts(&[n_wc, n_w, n_c, total, k as f64])?;
    Ok(n_wc * log_sigmoid(x) + noise_mass(n_w, n_c, total, k) * log_sigmoid(-x))
}

/// Derivative of [`expected_local_objective`] with respect to `x`.
pub fn local_derivative(x: f64, n_wc: f64, n_w: f64, n_c: f64, total: f64, k: u32) -> Result<f64> {
    check_counts(&[n_wc, n_w, n_c, total, k as f64])?;
    Ok(n_wc * sigmoid(-x) - noise_mass(n_w, n_c, total, k) * sigmoid(x))
}

/// Closed-form stationary point: `PMI(w,c) − log k`.
pub fn solve_optimum(n_wc: f64, n_w: f64, n_c: f64, total: f64, k: u32) -> Result<f64> {
    check_counts(&[n_wc, n_w, n_c, total, k as f64])?;
    Ok(n_wc.ln() - n_w.ln() - n_c.ln() + total.ln() - (k as f64).ln())
}

#[derive(Clone, Copy)]
struct MatrixCell {
    word: u32,
    context: u32,
    positive: f64,
    negative: f64,
}

struct MatrixShared<'a, S: ?Sized> {
    dim: usize,
    words: &'a S,
    contexts: &'a S,
    grad_words: &'a S,
    grad_contexts: &'a S,
}

impl<S: Slots + ?Sized> MatrixShared<'_, S> {
    /// Standard AdaGrad ascent: accumulate the squared gradient, then step.
    #[inline]
    fn ascend(&self, params: &S, acc: &S, idx: usize, grad: f64, eta: f64) -> f64 {
        let a = acc.read(idx) + grad * grad;
        acc.write(idx, a);
        if a == 0.0 {
            return params.read(idx);
        }
        let v = params.read(idx) + eta * grad / a.sqrt();
        params.write(idx, v);
        v
    }

    fn run(&self, cells: &[MatrixCell], order: &[u32], eta: f64) -> Result<f64, (u32, u32)> {
        let d = self.dim;
        let mut objective = 0.0;
        for &k in order {
            let cell = cells[k as usize];
            let (wi, cj) = (cell.word as usize * d, cell.context as usize * d);
            let mut x = 0.0;
            for t in 0..d {
                x += self.words.read(wi + t) * self.contexts.read(cj + t);
            }
            let g = cell.positive * sigmoid(-x) - cell.negative * sigmoid(x);
            objective += cell.positive * log_sigmoid(x) + cell.negative * log_sigmoid(-x);
            let mut finite = g.is_finite();
            for t in 0..d {
                let w = self.words.read(wi + t);
                let c = self.contexts.read(cj + t);
                finite &= self.ascend(self.words, self.grad_words, wi + t, g * c, eta).is_finite();
                finite &= self
                    .ascend(self.contexts, self.grad_contexts, cj + t, g * w, eta)
                    .is_finite();
            }
            if !finite {
                return Err((cell.word, cell.context));
            }
        }
        Ok(objective)
    }
}

/// Reported after each epoch of either trainer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgnsEpoch {
    /// 1-based.
    pub epoch: usize,
    /// Matrix trainer: expected objective accumulated over the epoch.
    /// Stream trainer: mean log-likelihood per update.
    pub objective: f64,
}

/// Gradient ascent on the expected objective summed over observed cells,
/// with per-parameter AdaGrad and cells shuffled each epoch.
pub fn train_matrix<F>(table: &CoocTable, cfg: &SgnsConfig, mut on_epoch: F) -> Result<SgnsParams>
where
    F: FnMut(&SgnsEpoch, &SgnsParams) -> Result<()>,
{
    cfg.validate()?;
    if table.is_empty() {
        return Err(Error::Empty("co-occurrence table"));
    }
    let total = table.total();
    let cells = table
        .cells()
        .iter()
        .map(|c| MatrixCell {
            word: c.word,
            context: c.context,
            positive: c.weight,
            negative: noise_mass(
                table.word_marginals()[c.word as usize],
                table.context_marginals()[c.context as usize],
                total,
                cfg.k,
            ),
        })
        .collect::<Vec<_>>();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = SgnsParams::random(table.vocab_size(), cfg.dim, &mut rng);
    let mut grad_words = vec![0.0; params.words.len()];
    let mut grad_contexts = vec![0.0; params.contexts.len()];
    let mut order: Vec<u32> = (0..cells.len() as u32).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let outcome = if cfg.threads == 1 {
            MatrixShared {
                dim: params.dim,
                words: hogwild::cells(&mut params.words),
                contexts: hogwild::cells(&mut params.contexts),
                grad_words: hogwild::cells(&mut grad_words),
                grad_contexts: hogwild::cells(&mut grad_contexts),
            }
            .run(&cells, &order, cfg.eta)
        } else {
            let shared = MatrixShared {
                dim: params.dim,
                words: hogwild::atomics(&mut params.words),
                contexts: hogwild::atomics(&mut params.contexts),
                grad_words: hogwild::atomics(&mut grad_words),
                grad_contexts: hogwild::atomics(&mut grad_contexts),
            };
            let (shared, cells, order) = (&shared, &cells, &order);
            std::thread::scope(|s| {
                let handles: Vec<_> = partition(order.len(), cfg.threads)
                    .into_iter()
                    .map(|r| s.spawn(move || shared.run(cells, &order[r], cfg.eta)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked"))
                    .sum::<Result<f64, _>>()
            })
        };
        let objective = outcome.map_err(|(word, context)| Error::NonFinite { epoch, word, context })?;
        on_epoch(&SgnsEpoch { epoch, objective }, &params)?;
    }
    Ok(params)
}

/// Counters from a stream training run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub positive_updates: u64,
    pub negative_updates: u64,
}

/// Noise distribution over context ids, `count^smoothing`, sampled in
/// O(1) through an alias table.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    alias: WeightedAliasIndex<f64>,
}

impl NoiseSampler {
    pub fn new<I: IntoIterator<Item = u64>>(counts: I, smoothing: f64) -> Result<Self> {
        let weights: Vec<f64> = counts.into_iter().map(|n| (n as f64).powf(smoothing)).collect();
        if weights.is_empty() {
            return Err(Error::Empty("noise distribution"));
        }
        let alias =
            WeightedAliasIndex::new(weights).map_err(|e| Error::Config(format!("invalid noise distribution: {e}")))?;
        Ok(NoiseSampler { alias })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.alias.sample(rng) as u32
    }
}

struct StreamShared<'a, S: ?Sized> {
    dim: usize,
    words: &'a S,
    contexts: &'a S,
}

struct StreamJob<'a> {
    ids: &'a [u32],
    range: std::ops::Range<usize>,
    window: usize,
    k: u32,
    noise: &'a NoiseSampler,
    /// Learning rate decays linearly from `eta` to `eta · 1e-4` across
    /// `steps_total` positions.
    eta: f64,
    steps_done: u64,
    /// Global positions covered per local position; concurrent threads
    /// each see `1/threads` of the epoch.
    stride: u64,
    steps_total: u64,
}

impl<S: Slots + ?Sized> StreamShared<'_, S> {
    #[inline]
    fn update(&self, wi: usize, target: u32, label: f64, lr: f64, delta: &mut [f64]) -> (f64, bool) {
        let d = self.dim;
        let cj = target as usize * d;
        let mut x = 0.0;
        for t in 0..d {
            x += self.words.read(wi + t) * self.contexts.read(cj + t);
        }
        let g = lr * (label - sigmoid(x));
        let mut finite = g.is_finite();
        for (t, dt) in delta.iter_mut().enumerate().take(d) {
            *dt += g * self.contexts.read(cj + t);
            let c = self.contexts.read(cj + t) + g * self.words.read(wi + t);
            finite &= c.is_finite();
            self.contexts.write(cj + t, c);
        }
        let ll = if label > 0.5 { log_sigmoid(x) } else { log_sigmoid(-x) };
        (ll, finite)
    }

    #[allow(clippy::needless_range_loop)] // q is compared with p to skip the center
    fn run<R: Rng>(&self, job: &StreamJob<'_>, rng: &mut R) -> Result<(StreamStats, f64), (u32, u32)> {
        let d = self.dim;
        let ids = job.ids;
        let mut delta = vec![0.0; d];
        let mut stats = StreamStats::default();
        let mut ll = 0.0;
        for (n, p) in job.range.clone().enumerate() {
            let progress = (job.steps_done + n as u64 * job.stride) as f64 / job.steps_total.max(1) as f64;
            let lr = job.eta * (1.0 - progress).max(1e-4);
            let center = ids[p];
            let wi = center as usize * d;
            let lo = p.saturating_sub(job.window);
            let hi = (p + job.window).min(ids.len() - 1);
            for q in lo..=hi {
                if q == p {
                    continue;
                }
                let context = ids[q];
                delta.iter_mut().for_each(|x| *x = 0.0);
                let (l, mut finite) = self.update(wi, context, 1.0, lr, &mut delta);
                ll += l;
                stats.positive_updates += 1;
                for _ in 0..job.k {
                    let noise = job.noise.sample(rng);
                    let (l, ok) = self.update(wi, noise, 0.0, lr, &mut delta);
                    ll += l;
                    finite &= ok;
                    stats.negative_updates += 1;
                }
                for (t, dt) in delta.iter().enumerate() {
                    let w = self.words.read(wi + t) + dt;
                    finite &= w.is_finite();
                    self.words.write(wi + t, w);
                }
                if !finite {
                    return Err((center, context));
                }
            }
        }
        Ok((stats, ll))
    }
}

/// Sampled SGNS over a token stream with a symmetric window.
///
/// Negative contexts come from `vocab` counts raised to `cfg.smoothing`;
/// a negative equal to the positive context is kept, matching the
/// expected objective.
pub fn train_stream<F>(
    stream: &TokenStream,
    vocab: &Vocabulary,
    window: usize,
    cfg: &SgnsConfig,
    mut on_epoch: F,
) -> Result<(SgnsParams, StreamStats)>
where
    F: FnMut(&SgnsEpoch, &SgnsParams) -> Result<()>,
{
    cfg.validate()?;
    if window == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    if stream.is_empty() {
        return Err(Error::Empty("token stream"));
    }
    if stream.vocab_size() != vocab.len() {
        return Err(Error::VocabMismatch {
            expected: vocab.len(),
            found: stream.vocab_size(),
        });
    }
    let noise = NoiseSampler::new(vocab.counts(), cfg.smoothing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = SgnsParams::random(vocab.len(), cfg.dim, &mut rng);
    let ids = stream.ids();
    let steps_total = (ids.len() * cfg.epochs) as u64;
    let mut stats = StreamStats::default();

    for epoch in 1..=cfg.epochs {
        let steps_before = ((epoch - 1) * ids.len()) as u64;
        let ranges = partition(ids.len(), cfg.threads);
        let mut thread_rngs: Vec<ChaCha8Rng> = ranges.iter().map(|_| ChaCha8Rng::seed_from_u64(rng.random())).collect();
        let jobs: Vec<StreamJob> = ranges
            .into_iter()
            .map(|range| StreamJob {
                ids,
                steps_done: steps_before,
                stride: cfg.threads as u64,
                range,
                window,
                k: cfg.k,
                noise: &noise,
                eta: cfg.eta,
                steps_total,
            })
            .collect();
        let outcome: Vec<Result<(StreamStats, f64), (u32, u32)>> = if cfg.threads == 1 {
            let shared = StreamShared {
                dim: params.dim,
                words: hogwild::cells(&mut params.words),
                contexts: hogwild::cells(&mut params.contexts),
            };
            vec![shared.run(&jobs[0], &mut thread_rngs[0])]
        } else {
            let shared = StreamShared {
                dim: params.dim,
                words: hogwild::atomics(&mut params.words),
                contexts: hogwild::atomics(&mut params.contexts),
            };
            let shared = &shared;
            std::thread::scope(|s| {
                let handles: Vec<_> = jobs
                    .iter()
                    .zip(thread_rngs.iter_mut())
                    .map(|(job, rng)| s.spawn(move || shared.run(job, rng)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked"))
                    .collect()
            })
        };
        let mut ll = 0.0;
        let mut epoch_stats = StreamStats::default();
        for r in outcome {
            let (s, l) = r.map_err(|(word, context)| Error::NonFinite { epoch, word, context })?;
            epoch_stats.positive_updates += s.positive_updates;
            epoch_stats.negative_updates += s.negative_updates;
            ll += l;
        }
        stats.positive_updates += epoch_stats.positive_updates;
        stats.negative_updates += epoch_stats.negative_updates;
        let updates = epoch_stats.positive_updates + epoch_stats.negative_updates;
        let objective = if updates == 0 { 0.0 } else { ll / updates as f64 };
        on_epoch(&SgnsEpoch { epoch, objective }, &params)?;
    }
    Ok((params, stats))
}
