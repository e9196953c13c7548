//! Degree distributions: Ideal and Robust Soliton construction, rescaling to a
//! shrunken block, and sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::{Error, Result};

/// Parameters of the Robust Soliton distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustSolitonParams {
    pub k: usize,
    pub c: f64,
    pub delta: f64,
}

impl RobustSolitonParams {
    pub const DEFAULT_C: f64 = 0.1;
    pub const DEFAULT_DELTA: f64 = 0.5;

    pub fn new(k: usize, c: f64, delta: f64) -> Result<Self> {
        let params = Self { k, c, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn with_defaults(k: usize) -> Result<Self> {
        Self::new(k, Self::DEFAULT_C, Self::DEFAULT_DELTA)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter(
                "block length k must be >= 1".into(),
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "c must be > 0, got {}",
                self.c
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// A probability mass function over degrees `1..=support_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    /// `pmf[d - 1]` is the probability of degree `d`.
    pmf: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from nonnegative weights indexed by `degree - 1`,
    /// normalizing them to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "degree distribution is empty".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "invalid degree weight {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("degree weights sum to zero".into()));
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sampler = WeightedIndex::new(&pmf)
            .map_err(|e| Error::InvalidParameter(format!("degree distribution: {e}")))?;
        Ok(Self { pmf, sampler })
    }

    /// Point mass at degree `d`.
    pub fn point_mass(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("degree must be >= 1".into()));
        }
        let mut w = vec![0.0; d];
        w[d - 1] = 1.0;
        Self::from_weights(w)
    }

    /// Largest degree that can be drawn (`d_max`).
    pub fn support_size(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of degree `d`; zero outside the support.
    pub fn prob(&self, d: usize) -> f64 {
        if d == 0 {
            return 0.0;
        }
        self.pmf.get(d - 1).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// Restricts the distribution to degrees `<= max_degree` and renormalizes.
    ///
    /// If no mass remains below the cut, all of it moves to `max_degree`.
    pub fn truncated(&self, max_degree: usize) -> Result<Self> {
        if max_degree == 0 {
            return Err(Error::InvalidParameter("max degree must be >= 1".into()));
        }
        if max_degree >= self.support_size() {
            return Ok(self.clone());
        }
        let head = self.pmf[..max_degree].to_vec();
        if head.iter().sum::<f64>() > 0.0 {
            Self::from_weights(head)
        } else {
            Self::point_mass(max_degree)
        }
    }

    /// Draws a degree in `1..=support_size`.
    pub fn sample_degree<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng) + 1
    }
}

impl Distribution<usize> for DegreeDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_degree(rng)
    }
}

/// Ideal Soliton: `1/k` at degree one and `1/(d(d-1))` for `2 <= d <= k`.
pub fn ideal_soliton(k: usize) -> Result<DegreeDistribution> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "block length k must be >= 1".into(),
        ));
    }
    DegreeDistribution::from_weights(ideal_weights(k))
}

fn ideal_weights(k: usize) -> Vec<f64> {
    (1..=k)
        .map(|d| {
            if d == 1 {
                1.0 / k as f64
            } else {
                1.0 / (d as f64 * (d as f64 - 1.0))
            }
        })
        .collect()
}

/// Robust Soliton distribution.
///
/// With `R = c ln(k/delta) sqrt(k)` and spike position `s = min(ceil(k/R), k)`,
/// `tau(d) = R/(dk)` for `d < s` and `tau(s) = R ln(R/delta)/k`. Falls back to
/// the Ideal Soliton when `k/R < 1` or when `R <= delta` (nonpositive spike).
pub fn robust_soliton(params: &RobustSolitonParams) -> Result<DegreeDistribution> {
    params.validate()?;
    let k = params.k;
    let kf = k as f64;
    let r = params.c * (kf / params.delta).ln() * kf.sqrt();
    let mut weights = ideal_weights(k);
    if !(r > params.delta) || kf / r < 1.0 {
        return DegreeDistribution::from_weights(weights);
    }
    let spike = ((kf / r).ceil() as usize).clamp(1, k);
    for (i, w) in weights.iter_mut().enumerate().take(spike) {
        let d = i + 1;
        *w += if d < spike {
            r / (d as f64 * kf)
        } else {
            r * (r / params.delta).ln() / kf
        };
    }
    DegreeDistribution::from_weights(weights)
}

/// Robust Soliton rebuilt over the `k - m` inputs left after `m` deletions.
pub fn rescale(params: &RobustSolitonParams, m: usize) -> Result<DegreeDistribution> {
    params.validate()?;
    if m >= params.k {
        return Err(Error::InvalidParameter(format!(
            "cannot delete {m} of {} input symbols",
            params.k
        )));
    }
    robust_soliton(&RobustSolitonParams {
        k: params.k - m,
        ..*params
    })
}

/// Where an encoder gets its degree distribution for a block of a given size.
#[derive(Debug, Clone, PartialEq)]
pub enum DegreeSource {
    /// Robust Soliton, reconstructed for every block size.
    RobustSoliton { c: f64, delta: f64 },
    /// A fixed pmf; shrinking blocks truncate and renormalize it.
    Fixed(DegreeDistribution),
}

impl Default for DegreeSource {
    fn default() -> Self {
        Self::RobustSoliton {
            c: RobustSolitonParams::DEFAULT_C,
            delta: RobustSolitonParams::DEFAULT_DELTA,
        }
    }
}

impl DegreeSource {
    /// Distribution to use when `active` input symbols are selectable.
    pub fn for_block(&self, active: usize) -> Result<DegreeDistribution> {
        match self {
            Self::RobustSoliton { c, delta } => {
                robust_soliton(&RobustSolitonParams::new(active, *c, *delta)?)
            }
            Self::Fixed(dist) => dist.truncated(active),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RobustSoliton { c, delta } => RobustSolitonParams::new(1, *c, *delta).map(|_| ()),
            Self::Fixed(_) => Ok(()),
        }
    }
}
