//! Symbols, XOR arithmetic over GF(2), and the two decoders.

mod ml;
mod peeling;

pub use ml::{ml_decode, BitRow, GeneratorMatrix, MlOutcome};
pub use peeling::PeelingDecoder;

use crate::{Error, Result};

/// The `k` source payloads being transmitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBlock {
    payloads: Vec<Vec<u8>>,
    symbol_size: usize,
}

impl InputBlock {
    pub fn new(payloads: Vec<Vec<u8>>) -> Result<Self> {
        let Some(first) = payloads.first() else {
            return Err(Error::InvalidArgument(
                "input block needs at least one symbol".into(),
            ));
        };
        let symbol_size = first.len();
        if let Some((i, p)) = payloads
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != symbol_size)
        {
            return Err(Error::InvalidArgument(format!(
                "symbol {i} has {} bytes, expected {symbol_size}",
                p.len()
            )));
        }
        Ok(Self {
            payloads,
            symbol_size,
        })
    }

    /// A block of `k` symbols of `symbol_size` random bytes.
    pub fn random<R: rand::Rng + ?Sized>(
        k: usize,
        symbol_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let payloads = (0..k)
            .map(|_| {
                let mut p = vec![0u8; symbol_size];
                rng.fill_bytes(&mut p);
                p
            })
            .collect();
        Self::new(payloads)
    }

    pub fn k(&self) -> usize {
        self.payloads.len()
    }

    pub fn symbol_size(&self) -> usize {
        self.symbol_size
    }

    pub fn payload(&self, index: usize) -> &[u8] {
        &self.payloads[index]
    }

    pub fn payloads(&self) -> &[Vec<u8>] {
        &self.payloads
    }
}

/// One transmitted symbol: the XOR of the inputs listed in `neighbors`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingSymbol {
    pub seq: u32,
    /// Strictly increasing input indices.
    pub neighbors: Vec<usize>,
    pub payload: Vec<u8>,
}

impl EncodingSymbol {
    /// Builds a symbol from `block`; `neighbors` may be given in any order.
    pub fn from_block(block: &InputBlock, seq: u32, mut neighbors: Vec<usize>) -> Result<Self> {
        neighbors.sort_unstable();
        if neighbors.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate neighbor in {neighbors:?}"
            )));
        }
        let payload = xor_combine(block, &neighbors)?;
        Ok(Self {
            seq,
            neighbors,
            payload,
        })
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// Byte-wise XOR of the selected payloads.
pub fn xor_combine(block: &InputBlock, neighbors: &[usize]) -> Result<Vec<u8>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("empty neighbor set".into()));
    }
    let mut out = vec![0u8; block.symbol_size()];
    for &j in neighbors {
        if j >= block.k() {
            return Err(Error::InvalidArgument(format!(
                "neighbor {j} out of range for k = {}",
                block.k()
            )));
        }
        xor_into(&mut out, block.payload(j));
    }
    Ok(out)
}

pub(crate) fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a ^= b;
    }
}

/// Number of neighbors of `y` that are not in `recovered`.
pub fn distance(y: &EncodingSymbol, recovered: &[bool]) -> usize {
    y.neighbors
        .iter()
        .filter(|&&j| !recovered.get(j).copied().unwrap_or(false))
        .count()
}
