//! Correlation of GloVe biases with log marginal counts.
//!
//! At the SGNS optimum `W_i·C_j = log #(w,c) − log #(w) − log #(c) +
//! log Σ#(w) − log k`; matching that against GloVe's
//! `W_i·C_j = log #(w,c) − b_W_i − b_C_j` suggests the learned biases
//! should track the log marginals. This module measures how closely
//! they do, per epoch.

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cooccur::CoocTable;
use crate::corpus::Vocabulary;
use crate::glove::GloveParams;
use crate::{Error, Result};

/// Default number of observed cells sampled for the pair correlation.
pub const DEFAULT_PAIR_SAMPLE: usize = 100_000;

pub const TRACE_HEADER: [&str; 4] = ["iter", "r_word", "r_context", "r_sum"];
pub const SCATTER_HEADER: [&str; 4] = ["token", "count", "log_count", "bias"];

/// Single-pass co-moment accumulator (Welford's update).
///
/// Inputs are shifted by the first observation, which keeps the running
/// means small when the data sit far from zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoMoments {
    n: u64,
    shift_x: f64,
    shift_y: f64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl CoMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        if self.n == 0 {
            self.shift_x = x;
            self.shift_y = y;
        }
        let (x, y) = (x - self.shift_x, y - self.shift_y);
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        let dx2 = x - self.mean_x;
        let dy2 = y - self.mean_y;
        self.m2_x += dx * dx2;
        self.m2_y += dy * dy2;
        self.c_xy += dx * dy2;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn correlation(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::TooFewObservations(self.n as usize));
        }
        if self.m2_x == 0.0 || self.m2_y == 0.0 {
            return Err(Error::ConstantVector);
        }
        Ok((self.c_xy / (self.m2_x.sqrt() * self.m2_y.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut m = CoMoments::default();
    for (&a, &b) in x.iter().zip(y) {
        m.push(a, b);
    }
    m.correlation()
}

/// Correlations after one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `b_W_i` against `log #(w_i)` over the vocabulary.
    pub r_word: f64,
    /// `b_C_j` against `log #(c_j)` over the vocabulary.
    pub r_context: f64,
    /// `b_W_i + b_C_j` against `log #(w_i) + log #(c_j)` over sampled
    /// observed cells.
    pub r_sum: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiasTrace {
    records: Vec<TraceRecord>,
}

impl BiasTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Iterations must be ≥ 1 and strictly increasing.
    pub fn push(&mut self, rec: TraceRecord) -> Result<()> {
        let last = self.records.last().map_or(0, |r| r.iteration);
        if rec.iteration <= last {
            return Err(Error::Config(format!(
                "trace iteration {} does not follow {last}",
                rec.iteration
            )));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `iter,r_word,r_context,r_sum`.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if self.records.is_empty() {
            return Err(Error::Empty("trace"));
        }
        let mut w = csv_writer(path)?;
        let mut write = || -> csv::Result<()> {
            w.write_record(TRACE_HEADER)?;
            for r in &self.records {
                w.write_record([
                    r.iteration.to_string(),
                    r.r_word.to_string(),
                    r.r_context.to_string(),
                    r.r_sum.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| csv_error(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_csv(path, &TRACE_HEADER)?;
        let mut trace = BiasTrace::new();
        for (n, row) in rows.iter().enumerate() {
            let field = |i: usize| -> Result<f64> {
                row[i]
                    .parse()
                    .map_err(|_| Error::format(path, format!("record {}: bad {:?}", n + 1, TRACE_HEADER[i])))
            };
            let iteration = row[0]
                .parse()
                .map_err(|_| Error::format(path, format!("record {}: bad iter", n + 1)))?;
            trace.push(TraceRecord {
                iteration,
                r_word: field(1)?,
                r_context: field(2)?,
                r_sum: field(3)?,
            })?;
        }
        Ok(trace)
    }
}

fn log_marginals(marginals: &[f64]) -> Result<Vec<f64>> {
    marginals
        .iter()
        .enumerate()
        .map(|(id, &m)| {
            if m > 0.0 {
                Ok(m.ln())
            } else {
                Err(Error::ZeroMarginal { id: id as u32 })
            }
        })
        .collect()
}

/// Correlate bias vectors with log marginals of `table`.
///
/// `r_sum` uses `pair_sample` observed cells drawn without replacement
/// with a generator seeded by `seed`, or every cell if the table has no
/// more than that.
pub fn correlate_bias_vectors(
    word_bias: &[f64],
    context_bias: &[f64],
    table: &CoocTable,
    pair_sample: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if table.vocab_size() == 0 {
        return Err(Error::Empty("vocabulary"));
    }
    for len in [word_bias.len(), context_bias.len()] {
        if len != table.vocab_size() {
            return Err(Error::VocabMismatch {
                expected: table.vocab_size(),
                found: len,
            });
        }
    }
    if pair_sample == 0 {
        return Err(Error::Config("pair sample must be at least 1".into()));
    }
    let log_w = log_marginals(table.word_marginals())?;
    let log_c = log_marginals(table.context_marginals())?;
    let r_word = pearson_r(word_bias, &log_w)?;
    let r_context = pearson_r(context_bias, &log_c)?;

    let cells = table.cells();
    let mut pairs = CoMoments::default();
    let mut add = |k: usize| {
        let c = &cells[k];
        let (i, j) = (c.word as usize, c.context as usize);
        pairs.push(word_bias[i] + context_bias[j], log_w[i] + log_c[j]);
    };
    if pair_sample >= cells.len() {
        (0..cells.len()).for_each(&mut add);
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, cells.len(), pair_sample).into_vec();
        picked.sort_unstable();
        picked.into_iter().for_each(&mut add);
    }
    let r_sum = pairs.correlation()?;
    Ok((r_word, r_context, r_sum))
}

/// One trace record for `params` at `iteration`.
pub fn correlate_biases(
    params: &GloveParams,
    table: &CoocTable,
    iteration: usize,
    pair_sample: usize,
    seed: u64,
) -> Result<TraceRecord> {
    let (r_word, r_context, r_sum) =
        correlate_bias_vectors(params.word_biases(), params.context_biases(), table, pair_sample, seed)?;
    Ok(TraceRecord {
        iteration,
        r_word,
        r_context,
        r_sum,
    })
}

/// One row per vocabulary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterRow {
    pub token: String,
    /// Word marginal `#(w)` from the co-occurrence table.
    pub count: f64,
    pub log_count: f64,
    pub bias: f64,
}

pub fn scatter_rows(word_bias: &[f64], vocab: &Vocabulary, table: &CoocTable) -> Result<Vec<ScatterRow>> {
    if vocab.len() != table.vocab_size() || word_bias.len() != vocab.len() {
        return Err(Error::VocabMismatch {
            expected: vocab.len(),
            found: table.vocab_size().max(word_bias.len()),
        });
    }
    vocab
        .tokens()
        .zip(table.word_marginals())
        .zip(word_bias)
        .enumerate()
        .map(|(id, ((tok, &count), &bias))| {
            if !(count > 0.0) {
                return Err(Error::ZeroMarginal { id: id as u32 });
            }
            Ok(ScatterRow {
                token: tok.to_string(),
                count,
                log_count: count.ln(),
                bias,
            })
        })
        .collect()
}

/// CSV with header `token,count,log_count,bias`.
pub fn export_scatter(
    params: &GloveParams,
    vocab: &Vocabulary,
    table: &CoocTable,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_scatter(&scatter_rows(params.word_biases(), vocab, table)?, path)
}

pub fn write_scatter(rows: &[ScatterRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut write = || -> csv::Result<()> {
        w.write_record(SCATTER_HEADER)?;
        for r in rows {
            w.write_record([
                r.token.clone(),
                r.count.to_string(),
                r.log_count.to_string(),
                r.bias.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_error(path, e))
}

pub fn load_scatter(path: impl AsRef<Path>) -> Result<Vec<ScatterRow>> {
    let path = path.as_ref();
    read_csv(path, &SCATTER_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(n, row)| {
            let num = |i: usize| -> Result<f64> {
                row[i]
                    .parse()
                    .map_err(|_| Error::format(path, format!("record {}: bad {}", n + 1, SCATTER_HEADER[i])))
            };
            Ok(ScatterRow {
                token: row[0].clone(),
                count: num(1)?,
                log_count: num(2)?,
                bias: num(3)?,
            })
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(path, format!("expected header {}", header.join(","))));
    }
    rdr.records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| csv_error(path, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::CoocCell;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 5.0, 8.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 7.0).collect();
        assert!((pearson_r(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        let expected = 3.0 * 3f64.sqrt() / (2.0 * 7f64.sqrt());
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.98198).abs() < 1e-5);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ConstantVector)
        ));
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::ConstantVector)
        ));
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch(2, 1))
        ));
        assert!(matches!(pearson_r(&[1.0], &[1.0]), Err(Error::TooFewObservations(1))));
    }

    fn toy_table() -> CoocTable {
        let mut cells = Vec::new();
        for i in 0..6u32 {
            for j in 0..6u32 {
                if (i + j) % 3 != 0 {
                    cells.push(CoocCell::new(i, j, 1.0 + (i * j) as f64 + i as f64 * 0.5));
                }
            }
        }
        CoocTable::from_cells(6, cells).unwrap()
    }

    #[test]
    fn perfect_and_inverse_bias_correlation() {
        let t = toy_table();
        let log_w: Vec<f64> = t.word_marginals().iter().map(|m| m.ln()).collect();
        let log_c: Vec<f64> = t.context_marginals().iter().map(|m| m.ln()).collect();
        let (rw, rc, rs) = correlate_bias_vectors(&log_w, &log_c, &t, 1000, 0).unwrap();
        assert!((rw - 1.0).abs() < 1e-12);
        assert!((rc - 1.0).abs() < 1e-12);
        assert!((rs - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = log_w.iter().map(|v| -v).collect();
        let (rw, _, _) = correlate_bias_vectors(&neg, &log_c, &t, 1000, 0).unwrap();
        assert!((rw + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_pairs_are_deterministic() {
        let t = toy_table();
        let wb: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let cb: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).cos()).collect();
        let a = correlate_bias_vectors(&wb, &cb, &t, 5, 42).unwrap();
        let b = correlate_bias_vectors(&wb, &cb, &t, 5, 42).unwrap();
        assert_eq!(a, b);
        let all = correlate_bias_vectors(&wb, &cb, &t, t.nnz(), 42).unwrap();
        let more = correlate_bias_vectors(&wb, &cb, &t, t.nnz() * 10, 7).unwrap();
        assert_eq!(all, more);
    }

    #[test]
    fn zero_marginal_rejected() {
        let t = CoocTable::from_cells(3, vec![CoocCell::new(0, 1, 1.0), CoocCell::new(1, 0, 2.0)]).unwrap();
        let err = correlate_bias_vectors(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], &t, 10, 0).unwrap_err();
        assert!(matches!(err, Error::ZeroMarginal { id: 2 }));
        let err = correlate_bias_vectors(&[], &[], &CoocTable::empty(0), 10, 0).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn trace_must_increase() {
        let rec = |iteration| TraceRecord {
            iteration,
            r_word: 0.0,
            r_context: 0.0,
            r_sum: 0.0,
        };
        let mut t = BiasTrace::new();
        assert!(t.push(rec(0)).is_err());
        t.push(rec(1)).unwrap();
        t.push(rec(3)).unwrap();
        assert!(t.push(rec(3)).is_err());
    }

    #[test]
    fn trace_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let mut t = BiasTrace::new();
        t.push(TraceRecord {
            iteration: 1,
            r_word: 0.1 + 0.2,
            r_context: -1.0 / 3.0,
            r_sum: 0.5,
        })
        .unwrap();
        t.export(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), "iter,r_word,r_context,r_sum");
        assert_eq!(BiasTrace::load(&path).unwrap(), t);
        assert!(BiasTrace::new().export(&path).is_err());
    }

    #[test]
    fn scatter_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scatter.csv");
        let vocab = Vocabulary::from_entries(vec![("a".into(), 3), ("b,c".into(), 2), ("\"q\"".into(), 1)]).unwrap();
        let t = CoocTable::from_cells(
            3,
            vec![
                CoocCell::new(0, 1, 2.5),
                CoocCell::new(1, 2, 1.0),
                CoocCell::new(2, 0, 0.5),
            ],
        )
        .unwrap();
        let p = GloveParams::from_parts(1, vec![0.0; 3], vec![0.0; 3], vec![0.25, -1e-7, 3.0], vec![0.0; 3]).unwrap();
        export_scatter(&p, &vocab, &t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        let rows = load_scatter(&path).unwrap();
        assert_eq!(rows, scatter_rows(p.word_biases(), &vocab, &t).unwrap());
        assert_eq!(rows[1].token, "b,c");
        assert_eq!(rows[2].token, "\"q\"");
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        std::fs::write(&path, "iter,r\n1,0.5\n").unwrap();
        assert!(matches!(BiasTrace::load(&path), Err(Error::Format { .. })));
    }
}
