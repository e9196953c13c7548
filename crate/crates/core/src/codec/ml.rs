use super::{xor_into, EncodingSymbol};
use crate::{Error, Result};

/// A dense GF(2) row vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRow {
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(width: usize) -> Self {
        Self {
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_indices(width: usize, indices: &[usize]) -> Self {
        let mut row = Self::zeros(width);
        for &i in indices {
            row.set(i);
        }
        row
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

/// The system `G x = y`: one row per received symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    k: usize,
    rows: Vec<BitRow>,
    rhs: Vec<Vec<u8>>,
}

impl GeneratorMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn from_symbols<'a>(
        k: usize,
        symbols: impl IntoIterator<Item = &'a EncodingSymbol>,
    ) -> Self {
        let mut g = Self::new(k);
        for y in symbols {
            g.push_row(BitRow::from_indices(k, &y.neighbors), y.payload.clone());
        }
        g
    }

    pub fn push_row(&mut self, row: BitRow, payload: Vec<u8>) {
        self.rows.push(row);
        self.rhs.push(payload);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rhs = vec![Vec::new(); rows.len()];
        eliminate(self.k, &mut rows, &mut rhs).len()
    }

    /// For each input, whether the system pins it down uniquely (ignores
    /// payloads).
    pub fn recoverable(&self) -> Vec<bool> {
        let mut rows = self.rows.clone();
        let mut rhs = vec![Vec::new(); rows.len()];
        let pivots = eliminate(self.k, &mut rows, &mut rhs);
        determined(self.k, &rows, &pivots)
    }
}

/// Result of maximum-likelihood decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MlOutcome {
    Solved(Vec<Vec<u8>>),
    Incomplete {
        /// Inputs not determined by the received system.
        unrecoverable: Vec<usize>,
        /// Payloads of the inputs that are determined.
        partial: Vec<Option<Vec<u8>>>,
    },
}

/// Solves `G x = y` by Gauss-Jordan elimination over GF(2).
pub fn ml_decode(g: &GeneratorMatrix) -> Result<MlOutcome> {
    let mut rows = g.rows.clone();
    let mut rhs = g.rhs.clone();
    let pivots = eliminate(g.k, &mut rows, &mut rhs);
    for (i, (row, payload)) in rows.iter().zip(&rhs).enumerate().skip(pivots.len()) {
        debug_assert!(row.is_zero());
        if payload.iter().any(|b| *b != 0) {
            return Err(Error::DataCorruption(format!(
                "row {i} reduces to 0 = nonzero; the system is inconsistent"
            )));
        }
    }
    let fixed = determined(g.k, &rows, &pivots);
    let mut partial = vec![None; g.k];
    for (r, &col) in pivots.iter().enumerate() {
        if fixed[col] {
            partial[col] = Some(rhs[r].clone());
        }
    }
    if fixed.iter().all(|f| *f) {
        return Ok(MlOutcome::Solved(
            partial
                .into_iter()
                .map(|p| p.expect("all determined"))
                .collect(),
        ));
    }
    Ok(MlOutcome::Incomplete {
        unrecoverable: (0..g.k).filter(|&j| !fixed[j]).collect(),
        partial,
    })
}

/// Reduces to row echelon form in place; returns the pivot column of each of
/// the leading rows.
fn eliminate(k: usize, rows: &mut [BitRow], rhs: &mut [Vec<u8>]) -> Vec<usize> {
    let mut pivots = Vec::new();
    for col in 0..k {
        let r = pivots.len();
        let Some(p) = (r..rows.len()).find(|&i| rows[i].get(col)) else {
            continue;
        };
        rows.swap(r, p);
        rhs.swap(r, p);
        let pivot_row = rows[r].clone();
        let pivot_rhs = rhs[r].clone();
        for i in (0..rows.len()).filter(|&i| i != r) {
            if rows[i].get(col) {
                rows[i].xor_assign(&pivot_row);
                xor_into(&mut rhs[i], &pivot_rhs);
            }
        }
        pivots.push(col);
        if pivots.len() == rows.len() {
            break;
        }
    }
    pivots
}

/// A variable is determined iff its reduced pivot row has no other ones.
fn determined(k: usize, rows: &[BitRow], pivots: &[usize]) -> Vec<bool> {
    let mut fixed = vec![false; k];
    for (r, &col) in pivots.iter().enumerate() {
        fixed[col] = rows[r].count_ones() == 1;
    }
    fixed
}
