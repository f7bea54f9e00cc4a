//! GloVe: weighted least squares on `log #(w,c)` with free biases.
//!
//! The local cost of an observed cell is
//! `f(x) · (W_i·C_j + b_W_i + b_C_j − log x)²` with the capped power
//! weighting `f`. Unobserved cells contribute nothing. Training is SGD
//! over shuffled cells with per-parameter AdaGrad, as in the reference
//! GloVe tool: each step divides by the square root of the accumulator
//! before adding the squared scaled step to it, starting from 1.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cooccur::CoocTable;
use crate::corpus::Vocabulary;
use crate::hogwild::{self, partition, Slots};
use crate::{io, Error, Result};

/// Parameters of the weighting function `f`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightingConfig {
    pub x_max: f64,
    pub alpha: f64,
}

impl WeightingConfig {
    pub fn new(x_max: f64, alpha: f64) -> Result<Self> {
        let cfg = WeightingConfig { x_max, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(Error::Config(format!("x_max must be positive, got {}", self.x_max)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

impl Default for WeightingConfig {
    fn default() -> Self {
        WeightingConfig {
            x_max: 100.0,
            alpha: 0.75,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub iterations: usize,
    /// Initial AdaGrad learning rate.
    pub eta: f64,
    pub seed: u64,
    /// More than one thread trains Hogwild-style and is not reproducible.
    pub threads: usize,
    /// Clamp for the scalar residual gradient; `None` disables clipping.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            iterations: 50,
            eta: 0.05,
            seed: 1,
            threads: 1,
            clip: Some(100.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// The weighting function: `(x / x_max)^alpha` below `x_max`, else 1.
pub fn weight_f(x: f64, cfg: &WeightingConfig) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositiveCount(x));
    }
    Ok(weight_unchecked(x, cfg))
}

#[inline]
fn weight_unchecked(x: f64, cfg: &WeightingConfig) -> f64 {
    if x < cfg.x_max {
        (x / cfg.x_max).powf(cfg.alpha)
    } else {
        1.0
    }
}

/// Word and context matrices, biases and their AdaGrad accumulators.
/// Matrices are row-major `|V| × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct GloveParams {
    dim: usize,
    vocab_size: usize,
    words: Vec<f64>,
    contexts: Vec<f64>,
    word_bias: Vec<f64>,
    context_bias: Vec<f64>,
    grad_words: Vec<f64>,
    grad_contexts: Vec<f64>,
    grad_word_bias: Vec<f64>,
    grad_context_bias: Vec<f64>,
}

impl GloveParams {
    /// All parameters uniform in `(−0.5/dim, 0.5/dim)`, accumulators at 1.
    pub fn random<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let scale = 0.5 / dim as f64;
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..scale)).collect() };
        let words = draw(vocab_size * dim);
        let contexts = draw(vocab_size * dim);
        let word_bias = draw(vocab_size);
        let context_bias = draw(vocab_size);
        Self::from_parts(dim, words, contexts, word_bias, context_bias).expect("shapes agree")
    }

    pub fn from_parts(
        dim: usize,
        words: Vec<f64>,
        contexts: Vec<f64>,
        word_bias: Vec<f64>,
        context_bias: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        let vocab_size = word_bias.len();
        for (len, per_row) in [(words.len(), dim), (contexts.len(), dim), (context_bias.len(), 1)] {
            if len != vocab_size * per_row {
                return Err(Error::VocabMismatch {
                    expected: vocab_size,
                    found: len / per_row,
                });
            }
        }
        Ok(GloveParams {
            dim,
            vocab_size,
            grad_words: vec![1.0; words.len()],
            grad_contexts: vec![1.0; contexts.len()],
            grad_word_bias: vec![1.0; vocab_size],
            grad_context_bias: vec![1.0; vocab_size],
            words,
            contexts,
            word_bias,
            context_bias,
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

    pub fn word_mut(&mut self, i: u32) -> &mut [f64] {
        let i = i as usize;
        &mut self.words[i * self.dim..(i + 1) * self.dim]
    }

    pub fn context_mut(&mut self, j: u32) -> &mut [f64] {
        let j = j as usize;
        &mut self.contexts[j * self.dim..(j + 1) * self.dim]
    }

    pub fn words(&self) -> &[f64] {
        &self.words
    }

    pub fn contexts(&self) -> &[f64] {
        &self.contexts
    }

    pub fn word_biases(&self) -> &[f64] {
        &self.word_bias
    }

    pub fn context_biases(&self) -> &[f64] {
        &self.context_bias
    }

    pub fn word_biases_mut(&mut self) -> &mut [f64] {
        &mut self.word_bias
    }

    pub fn context_biases_mut(&mut self) -> &mut [f64] {
        &mut self.context_bias
    }

    /// `W_i·C_j + b_W_i + b_C_j`, the model's estimate of `log #(w_i, c_j)`.
    pub fn predict(&self, i: u32, j: u32) -> f64 {
        dot(self.word(i), self.context(j)) + self.word_bias[i as usize] + self.context_bias[j as usize]
    }

    pub fn is_finite(&self) -> bool {
        [&self.words, &self.contexts, &self.word_bias, &self.context_bias]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_ids(&self, i: u32, j: u32) -> Result<()> {
        for id in [i, j] {
            if id as usize >= self.vocab_size {
                return Err(Error::IdOutOfRange {
                    id: id as u64,
                    vocab_size: self.vocab_size,
                });
            }
        }
        Ok(())
    }

    pub fn save_embeddings(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        io::write_vectors(path, vocab, &self.words, self.dim)
    }

    pub fn save_context_embeddings(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        io::write_vectors(path, vocab, &self.contexts, self.dim)
    }

    pub fn save_biases(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        io::write_scalars(path, vocab, &self.word_bias)
    }

    pub fn save_context_biases(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        io::write_scalars(path, vocab, &self.context_bias)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Local cost of one observed cell.
pub fn local_cost(params: &GloveParams, i: u32, j: u32, count: f64, cfg: &WeightingConfig) -> Result<f64> {
    let f = weight_f(count, cfg)?;
    params.check_ids(i, j)?;
    let r = params.predict(i, j) - count.ln();
    Ok(f * r * r)
}

/// Gradients of [`local_cost`] with respect to the parameters it touches.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGradients {
    pub word: Vec<f64>,
    pub context: Vec<f64>,
    pub word_bias: f64,
    pub context_bias: f64,
}

pub fn local_gradients(
    params: &GloveParams,
    i: u32,
    j: u32,
    count: f64,
    cfg: &WeightingConfig,
) -> Result<LocalGradients> {
    let f = weight_f(count, cfg)?;
    params.check_ids(i, j)?;
    let g = 2.0 * f * (params.predict(i, j) - count.ln());
    Ok(LocalGradients {
        word: params.context(j).iter().map(|c| g * c).collect(),
        context: params.word(i).iter().map(|w| g * w).collect(),
        word_bias: g,
        context_bias: g,
    })
}

/// Total weighted cost over every observed cell of `table`.
pub fn total_cost(params: &GloveParams, table: &CoocTable, cfg: &WeightingConfig) -> f64 {
    table
        .cells()
        .iter()
        .map(|c| {
            let r = params.predict(c.word, c.context) - c.weight.ln();
            weight_unchecked(c.weight, cfg) * r * r
        })
        .sum()
}

/// Passed to the epoch callback.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Sum of local costs seen during the epoch, each evaluated just
    /// before its update.
    pub running_cost: f64,
}

#[derive(Clone, Copy)]
struct Prepared {
    word: u32,
    context: u32,
    log_x: f64,
    f_x: f64,
}

struct Shared<'a, S: ?Sized> {
    dim: usize,
    words: &'a S,
    contexts: &'a S,
    word_bias: &'a S,
    context_bias: &'a S,
    grad_words: &'a S,
    grad_contexts: &'a S,
    grad_word_bias: &'a S,
    grad_context_bias: &'a S,
}

/// Epoch-level failure location, converted to [`Error::NonFinite`].
struct Blowup {
    word: u32,
    context: u32,
}

impl<S: Slots + ?Sized> Shared<'_, S> {
    #[inline]
    fn adagrad(&self, params: &S, acc: &S, idx: usize, grad: f64, eta: f64) -> f64 {
        let step = eta * grad;
        let v = params.read(idx) - step / acc.read(idx).sqrt();
        params.write(idx, v);
        acc.write(idx, acc.read(idx) + step * step);
        v
    }

    fn run(&self, cells: &[Prepared], order: &[u32], eta: f64, clip: Option<f64>) -> Result<f64, Blowup> {
        let d = self.dim;
        let mut cost = 0.0;
        for &k in order {
            let cell = cells[k as usize];
            let (i, j) = (cell.word as usize, cell.context as usize);
            let (wi, cj) = (i * d, j * d);
            let mut pred = self.word_bias.read(i) + self.context_bias.read(j);
            for t in 0..d {
                pred += self.words.read(wi + t) * self.contexts.read(cj + t);
            }
            let r = pred - cell.log_x;
            let mut g = 2.0 * cell.f_x * r;
            if !g.is_finite() {
                return Err(Blowup {
                    word: cell.word,
                    context: cell.context,
                });
            }
            cost += cell.f_x * r * r;
            if let Some(c) = clip {
                g = g.clamp(-c, c);
            }
            let mut finite = true;
            for t in 0..d {
                let w = self.words.read(wi + t);
                let c = self.contexts.read(cj + t);
                finite &= self
                    .adagrad(self.words, self.grad_words, wi + t, g * c, eta)
                    .is_finite();
                finite &= self
                    .adagrad(self.contexts, self.grad_contexts, cj + t, g * w, eta)
                    .is_finite();
            }
            finite &= self.adagrad(self.word_bias, self.grad_word_bias, i, g, eta).is_finite();
            finite &= self
                .adagrad(self.context_bias, self.grad_context_bias, j, g, eta)
                .is_finite();
            if !finite {
                return Err(Blowup {
                    word: cell.word,
                    context: cell.context,
                });
            }
        }
        Ok(cost)
    }
}

/// Train on every observed cell of `table` for `tcfg.iterations` epochs.
///
/// `on_epoch` runs on the calling thread after each epoch, with no
/// training in flight. Returning an error stops training.
pub fn train<F>(table: &CoocTable, tcfg: &TrainConfig, wcfg: &WeightingConfig, on_epoch: F) -> Result<GloveParams>
where
    F: FnMut(&EpochReport, &GloveParams) -> Result<()>,
{
    tcfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let params = GloveParams::random(table.vocab_size(), tcfg.dim, &mut rng);
    train_from(params, table, tcfg, wcfg, &mut rng, on_epoch)
}

/// Continue training from existing parameters with the given generator.
pub fn train_from<F>(
    mut params: GloveParams,
    table: &CoocTable,
    tcfg: &TrainConfig,
    wcfg: &WeightingConfig,
    rng: &mut ChaCha8Rng,
    mut on_epoch: F,
) -> Result<GloveParams>
where
    F: FnMut(&EpochReport, &GloveParams) -> Result<()>,
{
    tcfg.validate()?;
    wcfg.validate()?;
    if table.is_empty() {
        return Err(Error::Empty("co-occurrence table"));
    }
    if params.vocab_size != table.vocab_size() {
        return Err(Error::VocabMismatch {
            expected: params.vocab_size,
            found: table.vocab_size(),
        });
    }
    if params.dim != tcfg.dim {
        return Err(Error::DimMismatch {
            expected: tcfg.dim,
            found: params.dim,
        });
    }
    let cells: Vec<Prepared> = table
        .cells()
        .iter()
        .map(|c| Prepared {
            word: c.word,
            context: c.context,
            log_x: c.weight.ln(),
            f_x: weight_unchecked(c.weight, wcfg),
        })
        .collect();
    let mut order: Vec<u32> = (0..cells.len() as u32).collect();

    for epoch in 1..=tcfg.iterations {
        order.shuffle(rng);
        let outcome = if tcfg.threads == 1 {
            run_single(&mut params, &cells, &order, tcfg)
        } else {
            run_hogwild(&mut params, &cells, &order, tcfg)
        };
        let running_cost = outcome.map_err(|b| Error::NonFinite {
            epoch,
            word: b.word,
            context: b.context,
        })?;
        on_epoch(&EpochReport { epoch, running_cost }, &params)?;
    }
    Ok(params)
}

fn run_single(p: &mut GloveParams, cells: &[Prepared], order: &[u32], tcfg: &TrainConfig) -> Result<f64, Blowup> {
    let shared = Shared {
        dim: p.dim,
        words: hogwild::cells(&mut p.words),
        contexts: hogwild::cells(&mut p.contexts),
        word_bias: hogwild::cells(&mut p.word_bias),
        context_bias: hogwild::cells(&mut p.context_bias),
        grad_words: hogwild::cells(&mut p.grad_words),
        grad_contexts: hogwild::cells(&mut p.grad_contexts),
        grad_word_bias: hogwild::cells(&mut p.grad_word_bias),
        grad_context_bias: hogwild::cells(&mut p.grad_context_bias),
    };
    shared.run(cells, order, tcfg.eta, tcfg.clip)
}

fn run_hogwild(p: &mut GloveParams, cells: &[Prepared], order: &[u32], tcfg: &TrainConfig) -> Result<f64, Blowup> {
    let shared = Shared {
        dim: p.dim,
        words: hogwild::atomics(&mut p.words),
        contexts: hogwild::atomics(&mut p.contexts),
        word_bias: hogwild::atomics(&mut p.word_bias),
        context_bias: hogwild::atomics(&mut p.context_bias),
        grad_words: hogwild::atomics(&mut p.grad_words),
        grad_contexts: hogwild::atomics(&mut p.grad_contexts),
        grad_word_bias: hogwild::atomics(&mut p.grad_word_bias),
        grad_context_bias: hogwild::atomics(&mut p.grad_context_bias),
    };
    let shared = &shared;
    let results: Vec<Result<f64, Blowup>> = std::thread::scope(|s| {
        let handles: Vec<_> = partition(order.len(), tcfg.threads)
            .into_iter()
            .map(|range| s.spawn(move || shared.run(cells, &order[range], tcfg.eta, tcfg.clip)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    results.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::CoocCell;

    const CFG: WeightingConfig = WeightingConfig {
        x_max: 100.0,
        alpha: 0.75,
    };

    fn one_dim(w: f64, c: f64) -> GloveParams {
        GloveParams::from_parts(1, vec![w], vec![c], vec![0.0], vec![0.0]).unwrap()
    }

    #[test]
    fn weighting_examples() {
        assert_eq!(weight_f(100.0, &CFG).unwrap(), 1.0);
        assert_eq!(weight_f(200.0, &CFG).unwrap(), 1.0);
        assert!((weight_f(6.25, &CFG).unwrap() - 0.125).abs() < 1e-15);
        assert!(weight_f(0.0, &CFG).is_err());
        assert!(weight_f(-1.0, &CFG).is_err());
    }

    #[test]
    fn weighting_config_bounds() {
        assert!(WeightingConfig::new(0.0, 0.75).is_err());
        assert!(WeightingConfig::new(10.0, 0.0).is_err());
        assert!(WeightingConfig::new(10.0, 1.5).is_err());
        assert!(WeightingConfig::new(10.0, 1.0).is_ok());
    }

    #[test]
    fn zero_residual_costs_nothing() {
        let count = 7.5f64;
        let mut p = one_dim(2.0, 0.5);
        p.word_biases_mut()[0] = count.ln() - 1.0;
        assert!(local_cost(&p, 0, 0, count, &CFG).unwrap().abs() < 1e-15);
        let g = local_gradients(&p, 0, 0, count, &CFG).unwrap();
        assert_eq!(g.word_bias, 0.0);
        assert_eq!(g.word, [0.0]);
        assert_eq!(g.context, [0.0]);
    }

    #[test]
    fn unit_residual_at_count_one() {
        // f(1) = (1/100)^0.75 = 10^-1.5
        let p = one_dim(1.0, 1.0);
        let cost = local_cost(&p, 0, 0, 1.0, &CFG).unwrap();
        assert!((cost - 0.031_622_776_601_683_79).abs() < 1e-15);
    }

    #[test]
    fn saturated_weight_gives_squared_residual() {
        let p = one_dim(3.0, 1.0);
        let count = 150.0f64;
        let r = 3.0 - count.ln();
        assert!((local_cost(&p, 0, 0, count, &CFG).unwrap() - r * r).abs() < 1e-12);
    }

    #[test]
    fn bias_gradient_worked_case() {
        let p = one_dim(2.0, 3.0);
        let cfg = WeightingConfig::new(1.0, 0.75).unwrap();
        let g = local_gradients(&p, 0, 0, std::f64::consts::E, &cfg).unwrap();
        assert!((g.word_bias - 10.0).abs() < 1e-12);
        assert!((g.word[0] - 30.0).abs() < 1e-12);
        assert!((g.context[0] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_count_rejected() {
        let p = one_dim(1.0, 1.0);
        assert!(matches!(
            local_cost(&p, 0, 0, 0.0, &CFG),
            Err(Error::NonPositiveCount(_))
        ));
        assert!(local_gradients(&p, 0, 0, -2.0, &CFG).is_err());
        assert!(local_cost(&p, 0, 1, 1.0, &CFG).is_err());
    }

    #[test]
    fn zero_iterations_rejected() {
        let t = CoocTable::from_cells(1, vec![CoocCell::new(0, 0, 5.0)]).unwrap();
        let tcfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&t, &tcfg, &CFG, |_, _| Ok(())), Err(Error::Config(_))));
    }

    #[test]
    fn empty_table_rejected() {
        let t = CoocTable::empty(3);
        assert!(matches!(
            train(&t, &TrainConfig::default(), &CFG, |_, _| Ok(())),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn single_cell_converges() {
        let t = CoocTable::from_cells(1, vec![CoocCell::new(0, 0, 5.0)]).unwrap();
        // f(5) ≈ 0.106 makes every step small; the default rate needs
        // ~300 epochs to get below 1e-6.
        let tcfg = TrainConfig {
            dim: 4,
            iterations: 200,
            eta: 0.2,
            ..TrainConfig::default()
        };
        let p = train(&t, &tcfg, &CFG, |_, _| Ok(())).unwrap();
        assert!(local_cost(&p, 0, 0, 5.0, &CFG).unwrap() < 1e-6);
    }

    #[test]
    fn callback_sees_every_epoch_and_can_abort() {
        let t = CoocTable::from_cells(2, vec![CoocCell::new(0, 1, 2.0), CoocCell::new(1, 0, 2.0)]).unwrap();
        let tcfg = TrainConfig {
            dim: 2,
            iterations: 7,
            ..TrainConfig::default()
        };
        let mut seen = Vec::new();
        train(&t, &tcfg, &CFG, |r, p| {
            assert!(p.is_finite());
            seen.push(r.epoch);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (1..=7).collect::<Vec<_>>());

        let err = train(&t, &tcfg, &CFG, |r, _| {
            if r.epoch == 3 {
                Err(Error::Config("stop".into()))
            } else {
                Ok(())
            }
        });
        assert!(err.is_err());
    }

    #[test]
    fn blowup_reports_epoch_and_cell() {
        let t = CoocTable::from_cells(2, vec![CoocCell::new(1, 0, 3.0)]).unwrap();
        let tcfg = TrainConfig {
            dim: 1,
            iterations: 2,
            ..TrainConfig::default()
        };
        let mut p = GloveParams::random(2, 1, &mut ChaCha8Rng::seed_from_u64(0));
        p.word_mut(1)[0] = f64::NAN;
        let err = train_from(p, &t, &tcfg, &CFG, &mut ChaCha8Rng::seed_from_u64(0), |_, _| Ok(())).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFinite {
                epoch: 1,
                word: 1,
                context: 0
            }
        ));
    }

    #[test]
    fn hogwild_trains_too() {
        let cells: Vec<CoocCell> = (0..20u32)
            .flat_map(|i| (0..20u32).map(move |j| CoocCell::new(i, j, 1.0 + ((i * 7 + j * 3) % 11) as f64)))
            .collect();
        let t = CoocTable::from_cells(20, cells).unwrap();
        let tcfg = TrainConfig {
            dim: 8,
            iterations: 30,
            threads: 4,
            ..TrainConfig::default()
        };
        let mut first = None;
        let p = train(&t, &tcfg, &CFG, |r, _| {
            first.get_or_insert(r.running_cost);
            Ok(())
        })
        .unwrap();
        assert!(p.is_finite());
        assert!(total_cost(&p, &t, &CFG) < first.unwrap());
    }
}
