//! Pointwise mutual information over observed cells, and residuals of
//! trained models against the targets their objectives are solved by.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cooccur::{CoocCell, CoocTable};
use crate::glove::GloveParams;
use crate::sgns::SgnsParams;
use crate::{Error, Result};

/// `log #(w,c) − log #(w) − log #(c) + log Σ#(w)` for an observed cell.
///
/// An unobserved cell is an error, never `−∞`.
pub fn pmi(table: &CoocTable, i: u32, j: u32) -> Result<f64> {
    for id in [i, j] {
        if id as usize >= table.vocab_size() {
            return Err(Error::IdOutOfRange {
                id: id as u64,
                vocab_size: table.vocab_size(),
            });
        }
    }
    let n_wc = table.get(i, j).ok_or(Error::UnobservedCell { word: i, context: j })?;
    cell_pmi(table, n_wc, i, j)
}

fn cell_pmi(table: &CoocTable, n_wc: f64, i: u32, j: u32) -> Result<f64> {
    let n_w = table.word_marginals()[i as usize];
    let n_c = table.context_marginals()[j as usize];
    if !(n_w > 0.0) {
        return Err(Error::ZeroMarginal { id: i });
    }
    if !(n_c > 0.0) {
        return Err(Error::ZeroMarginal { id: j });
    }
    Ok(n_wc.ln() - n_w.ln() - n_c.ln() + table.total().ln())
}

/// Sparse PMI values over the observed cells of a table, optionally
/// shifted by `log k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PmiMatrix {
    vocab_size: usize,
    /// Same order as the source table's cells.
    cells: Vec<CoocCell>,
    k: u32,
}

impl PmiMatrix {
    pub fn cells(&self) -> &[CoocCell] {
        &self.cells
    }

    /// The `k` whose log was subtracted; 1 means unshifted.
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn shift(&self) -> f64 {
        (self.k as f64).ln()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.cells
            .binary_search_by(|c| (c.word, c.context).cmp(&(i, j)))
            .ok()
            .map(|n| self.cells[n].weight)
    }

    /// `i,j,value` per observed cell, no header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for c in &self.cells {
                writeln!(out, "{},{},{}", c.word, c.context, c.weight)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

pub fn pmi_matrix(table: &CoocTable) -> Result<PmiMatrix> {
    shifted_pmi_matrix(table, 1)
}

/// `PMI − log k` on every observed cell.
pub fn shifted_pmi_matrix(table: &CoocTable, k: u32) -> Result<PmiMatrix> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let shift = (k as f64).ln();
    let cells = table
        .cells()
        .iter()
        .map(|c| {
            Ok(CoocCell::new(
                c.word,
                c.context,
                cell_pmi(table, c.weight, c.word, c.context)? - shift,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(PmiMatrix {
        vocab_size: table.vocab_size(),
        cells,
        k,
    })
}

/// A trained model whose prediction for a cell can be compared with the
/// value its objective is solved by.
pub trait Factorization {
    fn vocab_size(&self) -> usize;

    /// The model's value for cell `(i, j)`.
    fn predict(&self, i: u32, j: u32) -> f64;

    /// What `predict` equals at the optimum for an observed cell.
    fn target(&self, table: &CoocTable, cell: &CoocCell, k: u32) -> Result<f64>;
}

impl Factorization for SgnsParams {
    fn vocab_size(&self) -> usize {
        SgnsParams::vocab_size(self)
    }

    fn predict(&self, i: u32, j: u32) -> f64 {
        SgnsParams::predict(self, i, j)
    }

    /// Shifted PMI.
    fn target(&self, table: &CoocTable, cell: &CoocCell, k: u32) -> Result<f64> {
        Ok(cell_pmi(table, cell.weight, cell.word, cell.context)? - (k as f64).ln())
    }
}

impl Factorization for GloveParams {
    fn vocab_size(&self) -> usize {
        GloveParams::vocab_size(self)
    }

    /// `W_i·C_j + b_W_i + b_C_j`.
    fn predict(&self, i: u32, j: u32) -> f64 {
        GloveParams::predict(self, i, j)
    }

    /// `log #(w,c)`; `k` is unused.
    fn target(&self, _table: &CoocTable, cell: &CoocCell, _k: u32) -> Result<f64> {
        Ok(cell.weight.ln())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSummary {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub cells: usize,
}

/// Absolute residuals `predict − target` over every observed cell.
pub fn residual_report<M: Factorization + ?Sized>(model: &M, table: &CoocTable, k: u32) -> Result<ResidualSummary> {
    if model.vocab_size() != table.vocab_size() {
        return Err(Error::VocabMismatch {
            expected: table.vocab_size(),
            found: model.vocab_size(),
        });
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut max_abs: f64 = 0.0;
    let mut sum = 0.0;
    for c in table.cells() {
        let r = (model.predict(c.word, c.context) - model.target(table, c, k)?).abs();
        max_abs = max_abs.max(r);
        sum += r;
    }
    let cells = table.nnz();
    Ok(ResidualSummary {
        max_abs,
        mean_abs: if cells == 0 { 0.0 } else { sum / cells as f64 },
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 4/10/20/100 cell padded out with other ids so the marginals
    /// come out exactly as stated.
    fn worked_table() -> CoocTable {
        CoocTable::from_cells(
            3,
            vec![
                CoocCell::new(0, 0, 4.0),
                CoocCell::new(0, 2, 6.0),
                CoocCell::new(1, 0, 16.0),
                CoocCell::new(1, 1, 74.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn worked_pmi() {
        let t = worked_table();
        assert!((pmi(&t, 0, 0).unwrap() - 2f64.ln()).abs() < 1e-12);
        let m = shifted_pmi_matrix(&t, 5).unwrap();
        assert!((m.get(0, 0).unwrap() - 0.4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn independence_is_zero() {
        let cells = (0..2)
            .flat_map(|i| (0..2).map(move |j| CoocCell::new(i, j, 3.0)))
            .collect();
        let t = CoocTable::from_cells(2, cells).unwrap();
        for c in t.cells() {
            assert!(pmi(&t, c.word, c.context).unwrap().abs() < 1e-15);
        }
        let m = shifted_pmi_matrix(&t, 4).unwrap();
        for c in m.cells() {
            assert!((c.weight + 4f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn k_one_is_plain_pmi() {
        let t = worked_table();
        assert_eq!(shifted_pmi_matrix(&t, 1).unwrap(), pmi_matrix(&t).unwrap());
        assert!(shifted_pmi_matrix(&t, 0).is_err());
    }

    #[test]
    fn unobserved_and_zero_marginal_are_distinct_errors() {
        let t = worked_table();
        assert!(matches!(
            pmi(&t, 2, 2),
            Err(Error::UnobservedCell { word: 2, context: 2 })
        ));
        assert!(matches!(pmi(&t, 7, 0), Err(Error::IdOutOfRange { .. })));
        // id 2 has a context marginal but no word marginal
        let err = cell_pmi(&t, 1.0, 2, 0).unwrap_err();
        assert!(matches!(err, Error::ZeroMarginal { id: 2 }));
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pmi.csv");
        let t = CoocTable::from_cells(2, vec![CoocCell::new(0, 1, 1.0), CoocCell::new(1, 0, 1.0)]).unwrap();
        pmi_matrix(&t).unwrap().write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected = format!("0,1,{v}\n1,0,{v}\n", v = 2f64.ln());
        assert_eq!(text, expected);
    }

    #[test]
    fn analytic_sgns_optimum_has_no_residual() {
        // Full rank: W = identity, C_j = column j of the target matrix.
        let t = worked_table();
        let m = shifted_pmi_matrix(&t, 5).unwrap();
        let n = t.vocab_size();
        let mut words = vec![0.0; n * n];
        let mut contexts = vec![0.0; n * n];
        for i in 0..n {
            words[i * n + i] = 1.0;
        }
        for c in m.cells() {
            contexts[c.context as usize * n + c.word as usize] = c.weight;
        }
        let p = SgnsParams::from_parts(n, words, contexts).unwrap();
        let r = residual_report(&p, &t, 5).unwrap();
        assert!(r.max_abs < 1e-9);
        assert_eq!(r.cells, 4);
    }

    #[test]
    fn exact_glove_solution_has_no_residual() {
        let t = CoocTable::from_cells(
            2,
            vec![CoocCell::new(0, 1, 2f64.exp()), CoocCell::new(1, 0, 5f64.exp())],
        )
        .unwrap();
        let mut p = GloveParams::from_parts(1, vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).unwrap();
        p.word_biases_mut().copy_from_slice(&[2.0, 5.0]);
        let r = residual_report(&p, &t, 1).unwrap();
        assert!(r.max_abs < 1e-12);

        let wrong = GloveParams::from_parts(1, vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert!(matches!(
            residual_report(&wrong, &t, 1),
            Err(Error::VocabMismatch { .. })
        ));
    }

    #[test]
    fn scale_invariance() {
        let t = worked_table();
        let scaled = CoocTable::from_cells(
            3,
            t.cells()
                .iter()
                .map(|c| CoocCell::new(c.word, c.context, c.weight * 3.5))
                .collect(),
        )
        .unwrap();
        for c in t.cells() {
            let a = pmi(&t, c.word, c.context).unwrap();
            let b = pmi(&scaled, c.word, c.context).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
