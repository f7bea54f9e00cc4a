//! Tokenization, vocabulary construction and id encoding.
//!
//! Words and contexts share one vocabulary. Ids are dense and assigned by
//! descending count, ties broken lexicographically, so a vocabulary is a
//! pure function of the token multiset and `min_count`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::{Error, Result};

/// Chunks below this size are not worth a rayon task.
const MIN_CHUNK_BYTES: usize = 1 << 20;

/// Split on Unicode whitespace and lowercase. Never yields empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Token counts over a sequence of tokens.
pub fn count_tokens<S: AsRef<str>>(tokens: &[S]) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for tok in tokens {
        *counts.entry(tok.as_ref().to_lowercase()).or_insert(0) += 1;
    }
    counts
}

/// Token counts over raw texts, scanned in parallel shards.
///
/// Integer counts merge exactly, so the result equals a sequential scan.
pub fn count_texts<S: AsRef<str> + Sync>(texts: &[S]) -> HashMap<String, u64> {
    texts
        .iter()
        .flat_map(|t| shard_text(t.as_ref(), rayon::current_num_threads()))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let mut counts: HashMap<String, u64> = HashMap::new();
            for tok in chunk.split_whitespace() {
                *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
            }
            counts
        })
        .reduce(HashMap::new, merge_counts)
}

fn merge_counts(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (tok, n) in b {
        *a.entry(tok).or_insert(0) += n;
    }
    a
}

/// Split `text` into at most `parts` pieces, cutting only right after a
/// whitespace character so no token straddles two pieces.
pub(crate) fn shard_text(text: &str, parts: usize) -> Vec<&str> {
    let parts = parts.max(1).min(text.len() / MIN_CHUNK_BYTES + 1);
    let target = text.len() / parts;
    let mut out = Vec::with_capacity(parts);
    let mut rest = text;
    while out.len() + 1 < parts && rest.len() > target {
        let mut cut = target;
        while !rest.is_char_boundary(cut) {
            cut += 1;
        }
        match rest[cut..].find(char::is_whitespace) {
            Some(ws) => {
                let at = cut + ws;
                let ws_len = rest[at..].chars().next().map_or(1, char::len_utf8);
                out.push(&rest[..at + ws_len]);
                rest = &rest[at + ws_len..];
            }
            None => break,
        }
    }
    out.push(rest);
    out
}

/// Ordered word list with counts and the inverse token → id map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Keep tokens with count ≥ `min_count`, ordered by descending count
    /// and then lexicographically.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|&(_, n)| n >= min_count).collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(entries)
    }

    /// Wrap an already ordered entry list, rebuilding the index.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.len() > u32::MAX as usize {
            return Err(Error::Config("vocabulary exceeds 32-bit ids".into()));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (tok, _)) in entries.iter().enumerate() {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        Ok(Vocabulary { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|(t, _)| t.as_str())
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.entries.get(id as usize).map(|&(_, n)| n)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(_, n)| n)
    }

    /// Writes `token count\n` per entry, in id order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (tok, n) in &self.entries {
            writeln!(out, "{tok} {n}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (tok, count) = line
                .split_once(' ')
                .ok_or_else(|| Error::format(path, format!("line {}: expected `token count`", lineno + 1)))?;
            let count: u64 = count
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad count {count:?}", lineno + 1)))?;
            if tok.is_empty() {
                return Err(Error::format(path, format!("line {}: empty token", lineno + 1)));
            }
            entries.push((tok.to_string(), count));
        }
        Self::from_entries(entries)
    }
}

/// Build a vocabulary from a token sequence.
pub fn build_vocab<S: AsRef<str>>(tokens: &[S], min_count: u64) -> Result<Vocabulary> {
    Vocabulary::from_counts(count_tokens(tokens), min_count)
}

/// A corpus as in-vocabulary ids. Out-of-vocabulary tokens are dropped,
/// so window distances are measured over surviving tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    ids: Vec<u32>,
    vocab_size: usize,
}

impl TokenStream {
    pub fn new(ids: Vec<u32>, vocab_size: usize) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(Error::IdOutOfRange {
                id: bad as u64,
                vocab_size,
            });
        }
        Ok(TokenStream { ids, vocab_size })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn decode<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.ids
            .iter()
            .map(|&id| vocab.token(id).expect("stream ids are in range"))
            .collect()
    }
}

/// Map tokens to ids, dropping out-of-vocabulary tokens.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TokenStream {
    TokenStream {
        ids: tokens.iter().filter_map(|t| vocab.id(t.as_ref())).collect(),
        vocab_size: vocab.len(),
    }
}

/// Tokenize and encode raw texts in one pass, concatenated in order.
pub fn encode_texts<S: AsRef<str> + Sync>(texts: &[S], vocab: &Vocabulary) -> TokenStream {
    let chunks: Vec<&str> = texts
        .iter()
        .flat_map(|t| shard_text(t.as_ref(), rayon::current_num_threads()))
        .collect();
    let pieces: Vec<Vec<u32>> = chunks
        .par_iter()
        .map(|chunk| {
            let mut lower = String::new();
            chunk
                .split_whitespace()
                .filter_map(|tok| {
                    if tok.chars().any(char::is_uppercase) {
                        lower.clear();
                        lower.push_str(&tok.to_lowercase());
                        vocab.id(&lower)
                    } else {
                        vocab.id(tok)
                    }
                })
                .collect()
        })
        .collect();
    TokenStream {
        ids: pieces.concat(),
        vocab_size: vocab.len(),
    }
}

/// Read UTF-8 corpus files in argument order.
pub fn read_texts<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<String>> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            std::fs::read_to_string(p).map_err(|e| Error::io(p, e))
        })
        .collect()
}
