use rand::Rng;

use crate::codec::{EncodingSymbol, InputBlock};
use crate::degree::{DegreeDistribution, DegreeSource};
use crate::{Error, Result};

/// Delete-and-Conquer encoder state: the inputs still eligible for selection
/// and the degree distribution rescaled to their count.
#[derive(Debug, Clone)]
pub struct DncState {
    k: usize,
    active: Vec<usize>,
    deleted: Vec<bool>,
    source: DegreeSource,
    dist: DegreeDistribution,
}

impl DncState {
    pub fn new(k: usize, source: DegreeSource) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let dist = source.for_block(k)?;
        Ok(Self {
            k,
            active: (0..k).collect(),
            deleted: vec![false; k],
            source,
            dist,
        })
    }

    /// Inputs still selectable, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn is_deleted(&self, j: usize) -> bool {
        self.deleted[j]
    }

    /// Number of deleted inputs `m`.
    pub fn deleted_count(&self) -> usize {
        self.k - self.active.len()
    }

    pub fn distribution(&self) -> &DegreeDistribution {
        &self.dist
    }

    /// Deletes `neighbors` from the active set and rescales the degree
    /// distribution. Returns whether anything changed.
    pub fn dnc_ack(&mut self, neighbors: &[usize]) -> Result<bool> {
        let mut changed = false;
        for &j in neighbors {
            if j >= self.k {
                return Err(Error::Protocol(format!(
                    "ack names input {j} >= k = {}",
                    self.k
                )));
            }
            if !self.deleted[j] {
                self.deleted[j] = true;
                changed = true;
            }
        }
        if changed {
            self.active.retain(|&j| !self.deleted[j]);
            if !self.active.is_empty() {
                self.dist = self.source.for_block(self.active.len())?;
            }
        }
        Ok(changed)
    }
}

/// Next Delete-and-Conquer symbol: uniform selection over the active inputs
/// with a degree drawn from the rescaled distribution.
pub fn dnc_next<R: Rng + ?Sized>(
    block: &InputBlock,
    state: &DncState,
    seq: u32,
    rng: &mut R,
) -> Result<EncodingSymbol> {
    let active = state.active();
    if active.is_empty() {
        return Err(Error::Protocol(
            "every input symbol has been deleted".into(),
        ));
    }
    let degree = state.dist.sample_degree(rng).min(active.len());
    let neighbors = rand::seq::index::sample(rng, active.len(), degree)
        .into_iter()
        .map(|i| active[i])
        .collect();
    EncodingSymbol::from_block(block, seq, neighbors)
}
