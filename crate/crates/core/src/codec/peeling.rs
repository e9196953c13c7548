use super::{distance, xor_into, EncodingSymbol};
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct Pending {
    residual: Vec<usize>,
    payload: Vec<u8>,
    alive: bool,
}

/// Peeling (belief-propagation) decoder for the erasure channel.
///
/// Arriving symbols are reduced against the recovered set immediately, so
/// every buffered symbol always has residual degree >= 2.
#[derive(Debug, Clone)]
pub struct PeelingDecoder {
    k: usize,
    symbol_size: usize,
    recovered: Vec<Option<Vec<u8>>>,
    recovered_mask: Vec<bool>,
    recovered_count: usize,
    pending: Vec<Pending>,
    // input index -> pending symbols that still reference it
    waiting: Vec<Vec<usize>>,
}

impl PeelingDecoder {
    pub fn new(k: usize, symbol_size: usize) -> Self {
        Self {
            k,
            symbol_size,
            recovered: vec![None; k],
            recovered_mask: vec![false; k],
            recovered_count: 0,
            pending: Vec::new(),
            waiting: vec![Vec::new(); k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn recovered_count(&self) -> usize {
        self.recovered_count
    }

    pub fn is_complete(&self) -> bool {
        self.recovered_count == self.k
    }

    /// `mask[j]` is true once input `j` has been recovered.
    pub fn recovered_mask(&self) -> &[bool] {
        &self.recovered_mask
    }

    pub fn recovered_payload(&self, index: usize) -> Option<&[u8]> {
        self.recovered.get(index).and_then(|p| p.as_deref())
    }

    /// Number of buffered symbols that have not been fully reduced.
    pub fn pending_len(&self) -> usize {
        self.pending.iter().filter(|p| p.alive).count()
    }

    /// Residual neighbor sets of the buffered symbols.
    pub fn pending_residuals(&self) -> impl Iterator<Item = &[usize]> {
        self.pending
            .iter()
            .filter(|p| p.alive)
            .map(|p| p.residual.as_slice())
    }

    /// Distance of `y` to the current recovered set.
    pub fn distance(&self, y: &EncodingSymbol) -> usize {
        distance(y, &self.recovered_mask)
    }

    /// Consumes `y` and returns every input recovered as a result, in
    /// recovery order.
    pub fn peel(&mut self, y: &EncodingSymbol) -> Result<Vec<usize>> {
        if y.neighbors.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "symbol {} has no neighbors",
                y.seq
            )));
        }
        if y.payload.len() != self.symbol_size {
            return Err(Error::InvalidArgument(format!(
                "symbol {} carries {} bytes, expected {}",
                y.seq,
                y.payload.len(),
                self.symbol_size
            )));
        }
        if let Some(&j) = y.neighbors.iter().find(|&&j| j >= self.k) {
            return Err(Error::InvalidArgument(format!(
                "symbol {} references input {j} >= k = {}",
                y.seq, self.k
            )));
        }

        let mut payload = y.payload.clone();
        let mut residual = Vec::with_capacity(y.neighbors.len());
        for &j in &y.neighbors {
            match &self.recovered[j] {
                Some(p) => xor_into(&mut payload, p),
                None => residual.push(j),
            }
        }

        let mut newly = Vec::new();
        match residual.len() {
            0 => check_zero(&payload, y.seq)?,
            1 => {
                self.recover(residual[0], payload, &mut newly)?;
                self.propagate(&mut newly)?;
            }
            _ => {
                let id = self.pending.len();
                for &j in &residual {
                    self.waiting[j].push(id);
                }
                self.pending.push(Pending {
                    residual,
                    payload,
                    alive: true,
                });
            }
        }
        Ok(newly)
    }

    fn recover(&mut self, index: usize, payload: Vec<u8>, newly: &mut Vec<usize>) -> Result<()> {
        match &self.recovered[index] {
            Some(existing) if *existing != payload => Err(Error::DataCorruption(format!(
                "input {index} recovered twice with different payloads"
            ))),
            Some(_) => Ok(()),
            None => {
                self.recovered[index] = Some(payload);
                self.recovered_mask[index] = true;
                self.recovered_count += 1;
                newly.push(index);
                Ok(())
            }
        }
    }

    fn propagate(&mut self, newly: &mut Vec<usize>) -> Result<()> {
        let mut cursor = 0;
        while cursor < newly.len() {
            let j = newly[cursor];
            cursor += 1;
            let value = self.recovered[j].clone().expect("recovered above");
            for id in std::mem::take(&mut self.waiting[j]) {
                let sym = &mut self.pending[id];
                if !sym.alive {
                    continue;
                }
                if let Some(pos) = sym.residual.iter().position(|&x| x == j) {
                    sym.residual.swap_remove(pos);
                    xor_into(&mut sym.payload, &value);
                }
                match sym.residual.len() {
                    0 => {
                        sym.alive = false;
                        check_zero(&sym.payload, id as u32)?;
                    }
                    1 => {
                        sym.alive = false;
                        let target = sym.residual[0];
                        let payload = std::mem::take(&mut sym.payload);
                        self.recover(target, payload, newly)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

fn check_zero(payload: &[u8], seq: u32) -> Result<()> {
    if payload.iter().any(|b| *b != 0) {
        return Err(Error::DataCorruption(format!(
            "symbol {seq} reduces to a nonzero payload with no unknowns"
        )));
    }
    Ok(())
}
