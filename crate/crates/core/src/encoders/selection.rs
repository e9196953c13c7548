use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::labels::LabelState;
use crate::codec::{EncodingSymbol, InputBlock};
use crate::degree::DegreeDistribution;
use crate::Result;

/// How neighbors are drawn from the `U`/`D` pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Weighted draws from `P_U` and `P_D`.
    #[default]
    Probabilistic,
    /// Always the highest-weight members of each pool (ties to the lower
    /// index).
    Deterministic,
}

/// What to do when `D` holds fewer than `d - 1` inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shortfall {
    /// Send a lower-degree symbol: one `U` member plus all of `D`.
    #[default]
    Truncate,
    /// Make up the missing neighbors from `U`.
    FillFromU,
}

/// One of the two weighted selection pools.
#[derive(Debug, Clone)]
struct Pool {
    members: Vec<usize>,
    weights: Vec<f64>,
    index: Option<WeightedIndex<f64>>,
    // member positions sorted by descending weight, for deterministic mode
    ranked: Vec<usize>,
}

impl Pool {
    fn new(members: Vec<usize>, weights: Vec<f64>) -> Self {
        let index = WeightedIndex::new(&weights).ok();
        let mut ranked: Vec<usize> = (0..members.len()).collect();
        ranked.sort_by(|&a, &b| {
            weights[b]
                .total_cmp(&weights[a])
                .then(members[a].cmp(&members[b]))
        });
        Self {
            members,
            weights,
            index,
            ranked,
        }
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    /// Draws `count` more members, excluding positions already in `taken`,
    /// by sequential draw-and-renormalize.
    fn draw<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        mode: SelectionMode,
        taken: &mut Vec<usize>,
    ) {
        let count = count.min(self.len() - taken.len());
        if count == 0 {
            return;
        }
        if mode == SelectionMode::Deterministic {
            let picks: Vec<usize> = self
                .ranked
                .iter()
                .copied()
                .filter(|p| !taken.contains(p))
                .take(count)
                .collect();
            taken.extend(picks);
            return;
        }
        let total: f64 = self.weights.iter().sum();
        for _ in 0..count {
            let excluded: f64 = taken.iter().map(|&p| self.weights[p]).sum();
            let pick = match &self.index {
                // Rejection against an already-taken member is the same law
                // as renormalizing over the rest; only use it while cheap.
                Some(index) if excluded < 0.5 * total => loop {
                    let p = index.sample(rng);
                    if !taken.contains(&p) {
                        break p;
                    }
                },
                _ => {
                    let rest: Vec<usize> = (0..self.len()).filter(|p| !taken.contains(p)).collect();
                    let w: Vec<f64> = rest.iter().map(|&p| self.weights[p]).collect();
                    match WeightedIndex::new(&w) {
                        Ok(ix) => rest[ix.sample(rng)],
                        Err(_) => rest[rng.gen_range(0..rest.len())],
                    }
                }
            };
            taken.push(pick);
        }
    }
}

/// Cached `U`/`D` pools for a fixed label vector.
#[derive(Debug, Clone)]
pub struct NonuniformSelector {
    u: Pool,
    d: Pool,
    shortfall: Shortfall,
}

impl NonuniformSelector {
    pub fn new(labels: &LabelState) -> Self {
        Self::with_shortfall(labels, Shortfall::default())
    }

    pub fn with_shortfall(labels: &LabelState, shortfall: Shortfall) -> Self {
        let part = labels.partition();
        let q = labels.q();
        let uw = part.u.iter().map(|&j| 1.0 - q[j]).collect();
        let dw = part.d.iter().map(|&j| q[j]).collect();
        Self {
            u: Pool::new(part.u, uw),
            d: Pool::new(part.d, dw),
            shortfall,
        }
    }

    pub fn total(&self) -> usize {
        self.u.len() + self.d.len()
    }

    /// Picks `degree` distinct inputs: one from `U` and the rest from `D`.
    ///
    /// If `U` is empty everything comes from `D`. If `D` runs short the
    /// symbol is either cut down or topped up from `U`, per [`Shortfall`].
    /// `degree` is capped at `k`.
    pub fn select<R: Rng + ?Sized>(
        &self,
        degree: usize,
        mode: SelectionMode,
        rng: &mut R,
    ) -> Vec<usize> {
        let degree = degree.min(self.total());
        let mut from_u = Vec::new();
        let mut from_d = Vec::new();
        if self.u.len() == 0 {
            self.d.draw(rng, degree, mode, &mut from_d);
        } else if degree > 0 {
            self.u.draw(rng, 1, mode, &mut from_u);
            let want_d = (degree - 1).min(self.d.len());
            self.d.draw(rng, want_d, mode, &mut from_d);
            if self.shortfall == Shortfall::FillFromU {
                self.u.draw(rng, degree - 1 - want_d, mode, &mut from_u);
            }
        }
        let mut out: Vec<usize> = from_u
            .into_iter()
            .map(|p| self.u.members[p])
            .chain(from_d.into_iter().map(|p| self.d.members[p]))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Builds the next All-Distance (or Quantized-Distance) symbol from the
/// current label estimates.
pub fn all_distance_next<R: Rng + ?Sized>(
    block: &InputBlock,
    labels: &LabelState,
    dist: &DegreeDistribution,
    seq: u32,
    mode: SelectionMode,
    rng: &mut R,
) -> Result<EncodingSymbol> {
    let selector = NonuniformSelector::new(labels);
    next_with_selector(block, &selector, dist, seq, mode, rng)
}

pub(crate) fn next_with_selector<R: Rng + ?Sized>(
    block: &InputBlock,
    selector: &NonuniformSelector,
    dist: &DegreeDistribution,
    seq: u32,
    mode: SelectionMode,
    rng: &mut R,
) -> Result<EncodingSymbol> {
    let degree = dist.sample_degree(rng);
    let neighbors = selector.select(degree, mode, rng);
    EncodingSymbol::from_block(block, seq, neighbors)
}
