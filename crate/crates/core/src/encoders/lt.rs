use rand::Rng;

use crate::codec::{EncodingSymbol, InputBlock};
use crate::degree::DegreeDistribution;
use crate::Result;

/// Classic LT symbol: a sampled degree and that many distinct inputs chosen
/// uniformly at random.
pub fn lt_next<R: Rng + ?Sized>(
    block: &InputBlock,
    dist: &DegreeDistribution,
    seq: u32,
    rng: &mut R,
) -> Result<EncodingSymbol> {
    let k = block.k();
    let degree = dist.sample_degree(rng).min(k);
    let neighbors = rand::seq::index::sample(rng, k, degree).into_vec();
    EncodingSymbol::from_block(block, seq, neighbors)
}
