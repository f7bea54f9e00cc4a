//! Sparse symmetric co-occurrence counting.
//!
//! Counting is done in exact integer arithmetic. With distance weighting
//! each pair at distance `d` contributes `L / d` units, where `L` is the
//! least common multiple of `1..=window`; the final weight is `units / L`.
//! Sums of integers do not depend on order, so any sharding of the stream
//! produces a bit-identical table.

use std::collections::HashMap;
use std::fs::File;
use std::hash::{BuildHasherDefault, Hasher};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::TokenStream;
use crate::{Error, Result};

/// Size of one on-disk record: two `u32` ids and one `f64` weight.
pub const RECORD_BYTES: usize = 16;

/// One observed (word, context) pair. `weight` is always positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoocCell {
    pub word: u32,
    pub context: u32,
    pub weight: f64,
}

impl CoocCell {
    pub fn new(word: u32, context: u32, weight: f64) -> Self {
        CoocCell { word, context, weight }
    }
}

/// Observed cells sorted by `(word, context)` plus row/column marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct CoocTable {
    vocab_size: usize,
    cells: Vec<CoocCell>,
    word_marginals: Vec<f64>,
    context_marginals: Vec<f64>,
    total: f64,
}

impl CoocTable {
    pub fn empty(vocab_size: usize) -> Self {
        CoocTable {
            vocab_size,
            cells: Vec::new(),
            word_marginals: vec![0.0; vocab_size],
            context_marginals: vec![0.0; vocab_size],
            total: 0.0,
        }
    }

    /// Build a table from arbitrary cells. Duplicate keys are summed; the
    /// summation order is fixed by sorting, so the result does not depend
    /// on the order of `cells`.
    pub fn from_cells(vocab_size: usize, mut cells: Vec<CoocCell>) -> Result<Self> {
        for c in &cells {
            for id in [c.word, c.context] {
                if id as usize >= vocab_size {
                    return Err(Error::IdOutOfRange {
                        id: id as u64,
                        vocab_size,
                    });
                }
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::NonPositiveCount(c.weight));
            }
        }
        cells.sort_unstable_by(|a, b| {
            (a.word, a.context)
                .cmp(&(b.word, b.context))
                .then(a.weight.total_cmp(&b.weight))
        });
        cells.dedup_by(|next, kept| {
            if (next.word, next.context) == (kept.word, kept.context) {
                kept.weight += next.weight;
                true
            } else {
                false
            }
        });
        Ok(Self::from_sorted_unique(vocab_size, cells))
    }

    fn from_sorted_unique(vocab_size: usize, cells: Vec<CoocCell>) -> Self {
        let mut word_marginals = vec![0.0; vocab_size];
        let mut context_marginals = vec![0.0; vocab_size];
        for c in &cells {
            word_marginals[c.word as usize] += c.weight;
            context_marginals[c.context as usize] += c.weight;
        }
        let total = word_marginals.iter().sum();
        CoocTable {
            vocab_size,
            cells,
            word_marginals,
            context_marginals,
            total,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn cells(&self) -> &[CoocCell] {
        &self.cells
    }

    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `#(w)` for every word id.
    pub fn word_marginals(&self) -> &[f64] {
        &self.word_marginals
    }

    /// `#(c)` for every context id.
    pub fn context_marginals(&self) -> &[f64] {
        &self.context_marginals
    }

    /// Grand total `Σ_w #(w)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn get(&self, word: u32, context: u32) -> Option<f64> {
        self.cells
            .binary_search_by(|c| (c.word, c.context).cmp(&(word, context)))
            .ok()
            .map(|i| self.cells[i].weight)
    }

    /// Cell-wise sum of tables over the same vocabulary.
    pub fn merge(tables: &[CoocTable]) -> Result<CoocTable> {
        let Some(first) = tables.first() else {
            return Err(Error::Empty("table list"));
        };
        let vocab_size = first.vocab_size;
        if let Some(t) = tables.iter().find(|t| t.vocab_size != vocab_size) {
            return Err(Error::VocabMismatch {
                expected: vocab_size,
                found: t.vocab_size,
            });
        }
        let cells = tables.iter().flat_map(|t| t.cells.iter().copied()).collect();
        CoocTable::from_cells(vocab_size, cells)
    }

    /// Write little-endian `(u32, u32, f64)` records, no header.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for c in &self.cells {
            let mut rec = [0u8; RECORD_BYTES];
            rec[0..4].copy_from_slice(&c.word.to_le_bytes());
            rec[4..8].copy_from_slice(&c.context.to_le_bytes());
            rec[8..16].copy_from_slice(&c.weight.to_le_bytes());
            out.write_all(&rec).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a triple file written by [`CoocTable::save`] (or any tool
    /// using the same record layout).
    pub fn load(path: impl AsRef<Path>, vocab_size: usize) -> Result<CoocTable> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, vocab_size)
    }

    pub fn decode(bytes: &[u8], vocab_size: usize) -> Result<CoocTable> {
        let trailing = bytes.len() % RECORD_BYTES;
        if trailing != 0 {
            return Err(Error::TruncatedRecord {
                offset: (bytes.len() - trailing) as u64,
                trailing,
            });
        }
        let cells = bytes
            .chunks_exact(RECORD_BYTES)
            .map(|rec| {
                CoocCell::new(
                    u32::from_le_bytes(rec[0..4].try_into().unwrap()),
                    u32::from_le_bytes(rec[4..8].try_into().unwrap()),
                    f64::from_le_bytes(rec[8..16].try_into().unwrap()),
                )
            })
            .collect();
        CoocTable::from_cells(vocab_size, cells)
    }
}

/// Multiplicative hash for packed id pairs; SipHash dominates counting
/// time otherwise.
#[derive(Default)]
struct PairHasher(u64);

impl Hasher for PairHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ b as u64).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.0 = (n ^ (n >> 29)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 ^= self.0 >> 32;
    }
}

type UnitMap = HashMap<u64, u128, BuildHasherDefault<PairHasher>>;

#[inline]
fn pack(word: u32, context: u32) -> u64 {
    (word as u64) << 32 | context as u64
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Units per unit of weight: `lcm(1..=window)` when weighting by `1/d`.
fn unit_scale(window: usize, distance_weighting: bool) -> Result<u64> {
    if !distance_weighting {
        return Ok(1);
    }
    let mut l: u64 = 1;
    for d in 1..=window as u64 {
        l = (l / gcd(l, d))
            .checked_mul(d)
            .ok_or_else(|| Error::Config(format!("window {window} too large for exact 1/d weighting")))?;
    }
    Ok(l)
}

/// Count pairs whose left position lies in `start..end`. Reads up to
/// `window` ids past `end`.
#[allow(clippy::needless_range_loop)] // q - p is the distance
fn count_range(ids: &[u32], start: usize, end: usize, window: usize, scale: u64, weighted: bool) -> UnitMap {
    let mut units = UnitMap::default();
    for p in start..end {
        let w = ids[p];
        let last = (p + window).min(ids.len() - 1);
        for q in p + 1..=last {
            let c = ids[q];
            let add = if weighted { (scale / (q - p) as u64) as u128 } else { 1 };
            *units.entry(pack(w, c)).or_insert(0) += add;
            *units.entry(pack(c, w)).or_insert(0) += add;
        }
    }
    units
}

fn into_table(units: UnitMap, vocab_size: usize, scale: u64) -> CoocTable {
    let mut keyed: Vec<(u64, u128)> = units.into_iter().collect();
    keyed.sort_unstable_by_key(|&(k, _)| k);
    let cells = keyed
        .into_iter()
        .map(|(k, u)| CoocCell::new((k >> 32) as u32, k as u32, u as f64 / scale as f64))
        .collect();
    CoocTable::from_sorted_unique(vocab_size, cells)
}

/// Symmetric windowed counting, single-threaded.
///
/// Every position pair `(p, p + d)` with `1 ≤ d ≤ window` adds `1/d`
/// (or 1 without distance weighting) to both `(id(p), id(p+d))` and
/// `(id(p+d), id(p))`.
pub fn count(stream: &TokenStream, window: usize, distance_weighting: bool) -> Result<CoocTable> {
    count_sharded(stream, window, distance_weighting, 1)
}

/// Counting over `shards` disjoint slices of the stream, run in parallel.
/// Each shard reads `window` ids past its end so boundary pairs are seen
/// exactly once. The result is bit-identical to [`count`].
pub fn count_sharded(
    stream: &TokenStream,
    window: usize,
    distance_weighting: bool,
    shards: usize,
) -> Result<CoocTable> {
    if window == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let scale = unit_scale(window, distance_weighting)?;
    let ids = stream.ids();
    let vocab_size = stream.vocab_size();
    if ids.len() < 2 {
        return Ok(CoocTable::empty(vocab_size));
    }
    let shards = shards.clamp(1, ids.len());
    let bounds: Vec<(usize, usize)> = (0..shards)
        .map(|s| (s * ids.len() / shards, (s + 1) * ids.len() / shards))
        .collect();
    let units = bounds
        .into_par_iter()
        .map(|(start, end)| count_range(ids, start, end, window, scale, distance_weighting))
        .reduce(UnitMap::default, |mut a, mut b| {
            if a.len() < b.len() {
                std::mem::swap(&mut a, &mut b);
            }
            for (k, u) in b {
                *a.entry(k).or_insert(0) += u;
            }
            a
        });
    Ok(into_table(units, vocab_size, scale))
}
