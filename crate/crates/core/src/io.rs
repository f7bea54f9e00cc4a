//! Plain-text formats for embeddings and per-word scalars.
//!
//! Vectors: `token v1 v2 … vd\n`; scalars: `token value\n`; both in id
//! order. Floats are written with Rust's shortest round-trip formatting,
//! so reading a file back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::{Error, Result};

/// Write row-major `data`, one row of `dim` values per vocabulary entry.
pub fn write_vectors(path: impl AsRef<Path>, vocab: &Vocabulary, data: &[f64], dim: usize) -> Result<()> {
    let path = path.as_ref();
    if data.len() != vocab.len() * dim {
        return Err(Error::VocabMismatch {
            expected: vocab.len(),
            found: data.len() / dim.max(1),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for (tok, row) in vocab.tokens().zip(data.chunks_exact(dim.max(1))) {
            out.write_all(tok.as_bytes())?;
            for v in row {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Write one scalar per vocabulary entry.
pub fn write_scalars(path: impl AsRef<Path>, vocab: &Vocabulary, values: &[f64]) -> Result<()> {
    write_vectors(path, vocab, values, 1)
}

/// Tokens and row-major values of a vector file. All rows must share one
/// dimension.
pub fn read_vectors(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<f64>, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split(' ');
        let tok = fields
            .next()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::format(path, format!("line {}: missing token", lineno + 1)))?;
        let before = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad number {f:?}", lineno + 1)))?;
            data.push(v);
        }
        let row = data.len() - before;
        match dim {
            None => dim = Some(row),
            Some(d) if d != row => {
                return Err(Error::format(
                    path,
                    format!("line {}: expected {d} values, found {row}", lineno + 1),
                ))
            }
            _ => {}
        }
        tokens.push(tok.to_string());
    }
    Ok((tokens, data, dim.unwrap_or(0)))
}

/// Read a scalar file, checking it lines up with `vocab`.
pub fn read_scalars(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let (tokens, values, dim) = read_vectors(path)?;
    if !tokens.is_empty() && dim != 1 {
        return Err(Error::format(path, format!("expected one value per line, found {dim}")));
    }
    if tokens.len() != vocab.len() {
        return Err(Error::VocabMismatch {
            expected: vocab.len(),
            found: tokens.len(),
        });
    }
    if let Some((i, tok)) = tokens
        .iter()
        .enumerate()
        .find(|&(i, t)| vocab.token(i as u32) != Some(t.as_str()))
    {
        return Err(Error::format(
            path,
            format!("line {}: token {tok:?} does not match vocabulary", i + 1),
        ));
    }
    Ok(values)
}
