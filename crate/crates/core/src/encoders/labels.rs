use crate::{Error, Result};

/// Inputs with an estimate below this go to the "undecoded" pool.
pub const DECODED_THRESHOLD: f64 = 0.5;

/// Neighbor sets of every transmitted symbol, indexed by sequence number.
#[derive(Debug, Clone, Default)]
pub struct SentLog {
    neighbors: Vec<Vec<usize>>,
}

impl SentLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the next transmission; sequence numbers must be consecutive
    /// from zero.
    pub fn record(&mut self, seq: u32, neighbors: &[usize]) -> Result<()> {
        if seq as usize != self.neighbors.len() {
            return Err(Error::Protocol(format!(
                "expected seq {}, got {seq}",
                self.neighbors.len()
            )));
        }
        self.neighbors.push(neighbors.to_vec());
        Ok(())
    }

    pub fn neighbors(&self, seq: u32) -> Result<&[usize]> {
        self.neighbors
            .get(seq as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Protocol(format!("unknown seq {seq}")))
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// The encoder's split of the inputs into likely-undecoded (`u`) and
/// likely-decoded (`d`) sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub u: Vec<usize>,
    pub d: Vec<usize>,
}

/// Per-input estimates `q_j` of the probability that the decoder already has
/// input `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelState {
    q: Vec<f64>,
}

impl LabelState {
    pub fn new(k: usize) -> Self {
        Self { q: vec![0.0; k] }
    }

    pub fn from_estimates(q: Vec<f64>) -> Result<Self> {
        if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "estimate {v} outside [0, 1]"
            )));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    /// Folds a reported distance `f` for symbol `seq` into the estimates.
    ///
    /// The symbol's label is `l = d - n`, with `n` the neighbors already at
    /// one. A zero distance marks every neighbor decoded; otherwise each
    /// neighbor below one moves up to `(l - f) / l` if that is larger.
    /// Returns whether any estimate changed.
    pub fn update_labels(&mut self, log: &SentLog, seq: u32, f: usize) -> Result<bool> {
        let neighbors = log.neighbors(seq)?;
        let degree = neighbors.len();
        if f > degree {
            return Err(Error::Protocol(format!(
                "distance {f} exceeds degree {degree} of symbol {seq}"
            )));
        }
        let mut changed = false;
        if f == 0 {
            for &j in neighbors {
                changed |= self.q[j] != 1.0;
                self.q[j] = 1.0;
            }
            return Ok(changed);
        }
        let label = neighbors.iter().filter(|&&j| self.q[j] < 1.0).count();
        if f > label {
            return Err(Error::Protocol(format!(
                "distance {f} for symbol {seq} exceeds its label {label}"
            )));
        }
        let estimate = (label - f) as f64 / label as f64;
        for &j in neighbors {
            if self.q[j] < 1.0 && estimate > self.q[j] {
                self.q[j] = estimate;
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Applies one quantized bit: `true` marks all neighbors decoded, `false`
    /// puts neighbors that are not already at one back to zero.
    pub fn quantized_apply(&mut self, log: &SentLog, seq: u32, bit: bool) -> Result<bool> {
        let neighbors = log.neighbors(seq)?;
        let mut changed = false;
        for &j in neighbors {
            let target = if bit {
                1.0
            } else if self.q[j] < 1.0 {
                0.0
            } else {
                continue;
            };
            changed |= self.q[j] != target;
            self.q[j] = target;
        }
        Ok(changed)
    }

    pub fn partition(&self) -> Partition {
        let (d, u): (Vec<usize>, Vec<usize>) =
            (0..self.q.len()).partition(|&j| self.q[j] >= DECODED_THRESHOLD);
        Partition { u, d }
    }

    /// The selection distributions over all `k` inputs: `P_U` weights `1 - q`
    /// on `U`, `P_D` weights `q` on `D`. An empty set yields all zeros.
    pub fn selection_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.q.len();
        let mut pu = vec![0.0; k];
        let mut pd = vec![0.0; k];
        for (j, &q) in self.q.iter().enumerate() {
            if q < DECODED_THRESHOLD {
                pu[j] = 1.0 - q;
            } else {
                pd[j] = q;
            }
        }
        for v in [&mut pu, &mut pd] {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter_mut().for_each(|x| *x /= s);
            }
        }
        (pu, pd)
    }

    /// Elementwise minimum, used to merge the views of several receivers.
    pub fn min_with(&mut self, other: &LabelState) {
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a = a.min(*b);
        }
    }

    pub fn set_all_decoded(&mut self) {
        self.q.iter_mut().for_each(|q| *q = 1.0);
    }
}
