//! Exact results for tiny blocks: the k=2 formulas, the k=3 Delete-and-Conquer
//! absorbing Markov chain and its closed forms, and cost-weighted tuning of
//! the k=3 degree distribution.

use nalgebra::{SMatrix, SVector};

use crate::{Error, Result};

/// Expectations for `k = 2` where degree one has probability `2p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K2Expectations {
    pub n_del: f64,
    pub f_del: f64,
    pub n_lt: f64,
    pub savings: f64,
}

pub fn k2_expected(p: f64) -> Result<K2Expectations> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1/2]")));
    }
    Ok(K2Expectations {
        n_del: (4.0 * p * p + 1.0) / (2.0 * p),
        f_del: 2.0 * p,
        n_lt: (4.0 * p * p - p + 1.0) / (2.0 * p * (1.0 - p)),
        savings: 2.0 * p * p / (1.0 - p),
    })
}

/// Degree probabilities for a three-symbol block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeProbs3 {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl DegreeProbs3 {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        if [p1, p2, p3].iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "probabilities must be >= 0, got ({p1}, {p2}, {p3})"
            )));
        }
        if (p1 + p2 + p3 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {}, not 1",
                p1 + p2 + p3
            )));
        }
        Ok(Self { p1, p2, p3 })
    }

    /// `p3` is whatever is left over.
    pub fn from_p1_p2(p1: f64, p2: f64) -> Result<Self> {
        let p3 = 1.0 - p1 - p2;
        Self::new(p1, p2, if p3.abs() < 1e-12 { 0.0 } else { p3 })
    }

    /// Degree-one probability once one symbol is deleted.
    pub fn p1_prime(&self) -> f64 {
        self.p1 / (self.p1 + self.p2)
    }

    pub fn p2_prime(&self) -> f64 {
        self.p2 / (self.p1 + self.p2)
    }

    fn require_p1(&self) -> Result<()> {
        if self.p1 > 0.0 {
            Ok(())
        } else {
            Err(Error::SingularModel(
                "degree-one probability p1 must be > 0".into(),
            ))
        }
    }
}

pub type Transition = SMatrix<f64, 10, 10>;
pub type Transient = SMatrix<f64, 9, 9>;

/// The k=3 Delete-and-Conquer chain: nine transient states and one absorbing
/// state (everything decoded).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    p: Transition,
    n: Transient,
}

/// Builds the chain from the hard-coded transition matrix.
pub fn build_markov_k3(p: &DegreeProbs3) -> Result<MarkovModel> {
    p.require_p1()?;
    let DegreeProbs3 { p1, p2, p3 } = *p;
    let a = p.p1_prime();
    let b = p.p2_prime();
    #[rustfmt::skip]
    let rows = [
        0.0, p1,  p2,       p3,  0.0, 0.0,                  0.0,          0.0,          0.0,            0.0,
        0.0, 0.0, 0.0,      0.0, a,   0.0,                  0.0,          b,            0.0,            0.0,
        // p3 here is the degree-three probability; nothing else keeps the
        // row stochastic.
        0.0, 0.0, p2 / 3.0, 0.0, 0.0, p3,                   2.0 * p1 / 3.0, p1 / 3.0,   2.0 * p2 / 3.0, 0.0,
        0.0, 0.0, 0.0,      p3,  0.0, p2,                   0.0,          p1,           0.0,            0.0,
        0.0, 0.0, 0.0,      0.0, 0.0, 0.0,                  0.0,          0.0,          0.0,            1.0,
        0.0, 0.0, 0.0,      0.0, 0.0, (p2 + 3.0 * p3) / 3.0, 0.0,         p1 / 3.0,     2.0 * p2 / 3.0, 2.0 * p1 / 3.0,
        0.0, 0.0, 0.0,      0.0, 0.0, 0.0,                  a / 2.0,      0.0,          0.0,            1.0 - a / 2.0,
        0.0, 0.0, 0.0,      0.0, 0.0, 0.0,                  0.0,          1.0 - a,      0.0,            a,
        0.0, 0.0, 0.0,      0.0, 0.0, 0.0,                  0.0,          0.0,          1.0 - p1,       p1,
        0.0, 0.0, 0.0,      0.0, 0.0, 0.0,                  0.0,          0.0,          0.0,            1.0,
    ];
    let p = Transition::from_row_slice(&rows);
    let q: Transient = p.fixed_view::<9, 9>(0, 0).into_owned();
    let n = (Transient::identity() - q)
        .try_inverse()
        .ok_or_else(|| Error::SingularModel("I - Q is not invertible".into()))?;
    if n.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularModel(
            "fundamental matrix is not finite".into(),
        ));
    }
    Ok(MarkovModel { p, n })
}

impl MarkovModel {
    pub fn transition(&self) -> &Transition {
        &self.p
    }

    /// `N = (I - Q)^-1`.
    pub fn fundamental(&self) -> &Transient {
        &self.n
    }

    /// `H = (N - I) N_dg^-1`: entry `(i, j)` is the probability of ever
    /// visiting `j` from `i`.
    pub fn visit_probabilities(&self) -> Transient {
        let diag_inv = Transient::from_diagonal(&self.n.diagonal().map(|d| 1.0 / d));
        (self.n - Transient::identity()) * diag_inv
    }

    /// `pi0 N c`: expected transmissions until absorption.
    pub fn expected_steps(&self) -> f64 {
        let pi0 = SVector::<f64, 9>::from_fn(|i, _| if i == 0 { 1.0 } else { 0.0 });
        (pi0.transpose() * self.n * SVector::<f64, 9>::repeat(1.0))[0]
    }

    /// `h12 + h12 h25 + h13 h37 + h13 h38 + h14 h48` (1-based states).
    pub fn feedback_from_visits(&self) -> f64 {
        let h = self.visit_probabilities();
        let v = |i: usize, j: usize| h[(i - 1, j - 1)];
        v(1, 2) + v(1, 2) * v(2, 5) + v(1, 3) * v(3, 7) + v(1, 3) * v(3, 8) + v(1, 4) * v(4, 8)
    }

    /// Expected number of times the chain takes one of `edges` (1-based).
    pub fn expected_transitions(&self, edges: &[(usize, usize)]) -> f64 {
        edges
            .iter()
            .filter(|(i, _)| *i <= 9)
            .map(|&(i, j)| self.n[(0, i - 1)] * self.p[(i - 1, j - 1)])
            .sum()
    }
}

/// Closed-form expected forward transmissions for Delete-and-Conquer, k=3.
pub fn k3_ndel(p: &DegreeProbs3) -> Result<f64> {
    p.require_p1()?;
    let DegreeProbs3 { p1, p2, .. } = *p;
    Ok(1.0 / p1 + p2 / (3.0 * p1 + 2.0 * p2) + p2 * p2 / (p1 + p2)
        - 8.0 * p2.powi(3) / ((p1 + 2.0 * p2) * (p2 - 3.0))
        + (3.0 * p1 - 4.0 * p2 + 3.0 * p1 * p2 - 3.0 * p2.powi(3) + 3.0) / (3.0 - p2))
}

/// Closed-form expected feedback messages for Delete-and-Conquer, k=3.
pub fn k3_fdel(p: &DegreeProbs3) -> Result<f64> {
    p.require_p1()?;
    let DegreeProbs3 { p1, p2, .. } = *p;
    Ok(3.0 * p1 / (3.0 * p1 + 2.0 * p2) + 6.0 * p1 / (3.0 - p2) + p1 * p1 / (p1 + p2) - 2.0 * p1)
}

/// Closed-form expected transmissions for plain LT, k=3.
pub fn k3_nlt(p: &DegreeProbs3) -> Result<f64> {
    p.require_p1()?;
    let DegreeProbs3 { p1, p2, .. } = *p;
    Ok(1.0 / p1
        + 6.0 * p1 / (p1 - 3.0)
        + 18.0 * p1 / ((3.0 - p2) * (3.0 - 2.0 * p1 - p2))
        + 9.0 * p1 / (2.0 * (p1 + p2) * (3.0 * p1 + 2.0 * p2)))
}

/// Per-message costs of forward (`c1`) and feedback (`c2`) transmissions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub c1: f64,
    pub c2: f64,
}

impl CostModel {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) || !(c2 >= 0.0 && c2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need C1 > 0 and C2 >= 0, got ({c1}, {c2})"
            )));
        }
        Ok(Self { c1, c2 })
    }

    /// `C1 n_del + C2 f_del`.
    pub fn objective(&self, p: &DegreeProbs3) -> Result<f64> {
        Ok(self.c1 * k3_ndel(p)? + self.c2 * k3_fdel(p)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub p1: f64,
    pub p2: f64,
    pub objective: f64,
}

impl Optimum {
    pub fn probs(&self) -> DegreeProbs3 {
        DegreeProbs3::from_p1_p2(self.p1, self.p2).expect("optimum lies in the simplex")
    }
}

/// Grid search over the simplex, then one pass at ten times the resolution
/// around the best grid point.
pub fn optimize_costs(cost: &CostModel, grid_step: f64) -> Result<Optimum> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::InvalidParameter(format!(
            "grid step {grid_step} outside (0, 0.1]"
        )));
    }
    let steps = (1.0 / grid_step).round() as i64;
    let coarse = search(cost, grid_step, (1, steps), (0, steps), None)?;
    let fine = grid_step / 10.0;
    let c1 = (coarse.p1 / fine).round() as i64;
    let c2 = (coarse.p2 / fine).round() as i64;
    let refined = search(
        cost,
        fine,
        (c1 - 10, c1 + 10),
        (c2 - 10, c2 + 10),
        Some(coarse),
    )?;
    Ok(refined)
}

fn search(
    cost: &CostModel,
    step: f64,
    (lo1, hi1): (i64, i64),
    (lo2, hi2): (i64, i64),
    start: Option<Optimum>,
) -> Result<Optimum> {
    let mut best = start;
    for i in lo1.max(1)..=hi1 {
        let p1 = i as f64 * step;
        for j in lo2.max(0)..=hi2 {
            let p2 = j as f64 * step;
            if p1 + p2 > 1.0 + 1e-9 {
                break;
            }
            let Ok(p) = DegreeProbs3::from_p1_p2(p1, p2) else {
                continue;
            };
            let objective = cost.objective(&p)?;
            if best.is_none_or(|b| objective < b.objective) {
                best = Some(Optimum { p1, p2, objective });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty search grid".into()))
}

/// Whether feedback pays for itself at `p`: `f_del / (n_lt - n_del) <= C1 / C2`.
pub fn feedback_worthwhile(cost: &CostModel, p: &DegreeProbs3) -> Result<bool> {
    if cost.c2 == 0.0 {
        return Ok(true);
    }
    let gain = k3_nlt(p)? - k3_ndel(p)?;
    if gain <= 0.0 {
        return Ok(false);
    }
    Ok(k3_fdel(p)? / gain <= cost.c1 / cost.c2)
}
