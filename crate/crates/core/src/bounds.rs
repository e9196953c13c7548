//! Union bounds on the probability that maximum-likelihood decoding leaves a
//! given input undetermined, with and without acknowledgment feedback.
//!
//! The sum over all `x` with `x_j = 1` is grouped by how many ones `x` has in
//! each acknowledgment stratum, which is all the summand depends on.

use crate::degree::{DegreeDistribution, DegreeSource};
use crate::{Error, Result};

/// `ln n!` for `n <= max`.
#[derive(Debug, Clone)]
struct LogFactorials(Vec<f64>);

impl LogFactorials {
    fn new(max: usize) -> Self {
        let mut t = Vec::with_capacity(max + 1);
        t.push(0.0);
        for n in 1..=max {
            t.push(t[n - 1] + (n as f64).ln());
        }
        Self(t)
    }

    /// `ln C(n, r)`, or `None` when the coefficient is zero.
    fn ln_choose(&self, n: usize, r: usize) -> Option<f64> {
        (r <= n).then(|| self.0[n] - self.0[r] - self.0[n - r])
    }
}

fn row_zero_prob_with(lf: &LogFactorials, active: usize, w_bar: usize, d: usize) -> f64 {
    if w_bar == 0 {
        return 1.0;
    }
    let total = lf.ln_choose(active, d).expect("d <= active");
    (0..=w_bar.min(d))
        .step_by(2)
        .filter_map(|u| Some(lf.ln_choose(w_bar, u)? + lf.ln_choose(active - w_bar, d - u)?))
        .map(|ln| (ln - total).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Probability that a uniformly random degree-`d` row over the `k - m`
/// unacknowledged inputs meets the `w_bar` ones of `x` an even number of
/// times.
pub fn row_zero_prob(k: usize, m: usize, w_bar: usize, d: usize) -> Result<f64> {
    if m >= k {
        return Err(Error::InvalidArgument(format!("m = {m} must be < k = {k}")));
    }
    let active = k - m;
    if w_bar > active {
        return Err(Error::InvalidArgument(format!(
            "w_bar = {w_bar} exceeds k - m = {active}"
        )));
    }
    if d == 0 || d > active {
        return Err(Error::InvalidArgument(format!(
            "degree {d} outside [1, {active}]"
        )));
    }
    Ok(row_zero_prob_with(
        &LogFactorials::new(active),
        active,
        w_bar,
        d,
    ))
}

fn check_support(k: usize, m: usize, dist: &DegreeDistribution) -> Result<()> {
    if m >= k {
        return Err(Error::InvalidArgument(format!("m = {m} must be < k = {k}")));
    }
    if dist.support_size() > k - m {
        return Err(Error::InvalidArgument(format!(
            "degree distribution reaches {} but only {} inputs are unacknowledged",
            dist.support_size(),
            k - m
        )));
    }
    Ok(())
}

/// `sum_d dist(d) row_zero_prob(k, m, w_bar, d)` for every `w_bar` in
/// `0..=k-m`.
fn interval_table(lf: &LogFactorials, k: usize, m: usize, dist: &DegreeDistribution) -> Vec<f64> {
    let active = k - m;
    (0..=active)
        .map(|w_bar| {
            if w_bar == 0 {
                return 1.0;
            }
            dist.pmf()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(i, p)| p * row_zero_prob_with(lf, active, w_bar, i + 1))
                .sum::<f64>()
                .min(1.0)
        })
        .collect()
}

/// Probability that one row drawn with degree law `dist` over the `k - m`
/// unacknowledged inputs is orthogonal to `x`.
pub fn interval_zero_prob(
    k: usize,
    m: usize,
    dist: &DegreeDistribution,
    w_bar: usize,
) -> Result<f64> {
    check_support(k, m, dist)?;
    if w_bar > k - m {
        return Err(Error::InvalidArgument(format!(
            "w_bar = {w_bar} exceeds k - m = {}",
            k - m
        )));
    }
    let lf = LogFactorials::new(k);
    Ok(interval_table(&lf, k, m, dist)[w_bar])
}

/// `min(1, sum_{w=1}^{k} C(k-1, w-1) q_w^n)` with `q_w` the one-row zero
/// probability at weight `w`.
pub fn ml_failure_bound_nofeedback(k: usize, n: usize, dist: &DegreeDistribution) -> Result<f64> {
    check_support(k, 0, dist)?;
    let lf = LogFactorials::new(k);
    let table = interval_table(&lf, k, 0, dist);
    let total: f64 = (1..=k)
        .filter_map(|w| {
            let ln_count = lf.ln_choose(k - 1, w - 1)?;
            power_term(ln_count, &[(table[w], n)])
        })
        .sum();
    Ok(total.min(1.0))
}

/// `exp(ln_count + sum len * ln q)`, or `None` for an exact zero.
fn power_term(ln_count: f64, factors: &[(f64, usize)]) -> Option<f64> {
    let mut ln = ln_count;
    for &(q, len) in factors {
        if len == 0 {
            continue;
        }
        if q <= 0.0 {
            return None;
        }
        ln += len as f64 * q.ln();
    }
    Some(ln.exp())
}

/// One acknowledgment event: after the `t`-th received symbol the encoder
/// has deleted `m` inputs in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub t: usize,
    pub m: usize,
}

/// Acknowledgment events in receive order. Interval `i` covers received
/// symbols `(t_i, t_{i+1}]` and uses the `m_i` acknowledged before it, with
/// `t_0 = m_0 = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeedbackSchedule {
    events: Vec<ScheduleEvent>,
}

impl FeedbackSchedule {
    pub fn new(events: Vec<ScheduleEvent>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if e.t == 0 {
                return Err(Error::InvalidArgument("event times start at 1".into()));
            }
            if let Some(prev) = i.checked_sub(1).map(|p| events[p]) {
                if e.t <= prev.t {
                    return Err(Error::InvalidArgument(format!(
                        "event times must increase: {} after {}",
                        e.t, prev.t
                    )));
                }
                if e.m < prev.m {
                    return Err(Error::InvalidArgument(format!(
                        "acknowledged counts must not decrease: {} after {}",
                        e.m, prev.m
                    )));
                }
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[ScheduleEvent] {
        &self.events
    }

    /// Number of feedback events `L`.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Total acknowledged inputs after the last event.
    pub fn final_m(&self) -> usize {
        self.events.last().map_or(0, |e| e.m)
    }

    /// `(length, m)` of every receive interval up to `n`, including empty
    /// ones so that interval `i` lines up with event `i`.
    pub fn intervals(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let (mut t, mut m) = (0, 0);
        for e in &self.events {
            if e.t > n {
                return Err(Error::InvalidArgument(format!(
                    "event at t = {} lies beyond n = {n}",
                    e.t
                )));
            }
            out.push((e.t - t, m));
            (t, m) = (e.t, e.m);
        }
        out.push((n - t, m));
        Ok(out)
    }
}

/// Which group of inputs the target `j` belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetStratum {
    /// Never acknowledged; the worst case.
    #[default]
    NeverAcked,
    /// Acknowledged by event `i` (1-based).
    AckedAt(usize),
}

/// How the bound treats acknowledged inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AckedColumns {
    /// `x` ranges over all vectors; ones on deleted inputs are invisible to
    /// later rows.
    #[default]
    Unknown,
    /// The decoder already holds every acknowledged input, so `x` is zero
    /// there.
    Known,
}

/// Limits on the profile enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundLimits {
    pub max_events: usize,
    pub max_k: usize,
}

impl Default for BoundLimits {
    fn default() -> Self {
        Self {
            max_events: 4,
            max_k: 200,
        }
    }
}

/// Per-interval degree distributions for `schedule`, each built for the
/// inputs still unacknowledged in that interval.
pub fn schedule_distributions(
    k: usize,
    n: usize,
    schedule: &FeedbackSchedule,
    source: &DegreeSource,
) -> Result<Vec<DegreeDistribution>> {
    schedule
        .intervals(n)?
        .into_iter()
        .map(|(_, m)| {
            if m >= k {
                return Err(Error::InvalidArgument(format!("m = {m} must be < k = {k}")));
            }
            source.for_block(k - m)
        })
        .collect()
}

/// Union bound on the probability that input `j` is not determined after `n`
/// received symbols under `schedule`, with default limits.
pub fn ml_failure_bound_feedback(
    k: usize,
    n: usize,
    schedule: &FeedbackSchedule,
    dists: &[DegreeDistribution],
    target: TargetStratum,
    acked: AckedColumns,
) -> Result<f64> {
    ml_failure_bound_feedback_with(k, n, schedule, dists, target, acked, BoundLimits::default())
}

pub fn ml_failure_bound_feedback_with(
    k: usize,
    n: usize,
    schedule: &FeedbackSchedule,
    dists: &[DegreeDistribution],
    target: TargetStratum,
    acked: AckedColumns,
    limits: BoundLimits,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if schedule.len() > limits.max_events || k > limits.max_k {
        return Err(Error::Capacity(format!(
            "L = {} and k = {k} exceed the enumeration limits (L <= {}, k <= {})",
            schedule.len(),
            limits.max_events,
            limits.max_k
        )));
    }
    if schedule.final_m() >= k {
        return Err(Error::InvalidArgument(format!(
            "{} acknowledged inputs leave nothing undecoded in a block of {k}",
            schedule.final_m()
        )));
    }
    let intervals = schedule.intervals(n)?;
    if dists.len() != intervals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} distributions for {} intervals",
            dists.len(),
            intervals.len()
        )));
    }
    for (&(_, m), dist) in intervals.iter().zip(dists) {
        check_support(k, m, dist)?;
    }

    // Strata 0..L-1 are acknowledged by event i+1; stratum L never is.
    let mut sizes: Vec<usize> = Vec::with_capacity(schedule.len() + 1);
    let mut prev = 0;
    for e in schedule.events() {
        sizes.push(e.m - prev);
        prev = e.m;
    }
    sizes.push(k - prev);
    let target_stratum = match target {
        TargetStratum::NeverAcked => schedule.len(),
        TargetStratum::AckedAt(i) if (1..=schedule.len()).contains(&i) => i - 1,
        TargetStratum::AckedAt(i) => {
            return Err(Error::InvalidArgument(format!(
                "no acknowledgment event {i}"
            )));
        }
    };
    if sizes[target_stratum] == 0 {
        return Err(Error::InvalidArgument("the target stratum is empty".into()));
    }
    if acked == AckedColumns::Known && target_stratum != schedule.len() {
        // The decoder already has j.
        return Ok(0.0);
    }

    let lf = LogFactorials::new(k);
    let tables: Vec<Vec<f64>> = intervals
        .iter()
        .zip(dists)
        .map(|(&(_, m), dist)| interval_table(&lf, k, m, dist))
        .collect();

    let caps: Vec<usize> = sizes
        .iter()
        .enumerate()
        .map(|(s, &size)| match acked {
            AckedColumns::Known if s != schedule.len() => 0,
            _ => size,
        })
        .collect();
    let mut counts = vec![0usize; sizes.len()];
    counts[target_stratum] = 1;
    let mut total = 0.0;
    loop {
        total += profile_term(&lf, &sizes, &counts, target_stratum, &intervals, &tables);
        if !advance(&mut counts, &caps, target_stratum) {
            break;
        }
    }
    Ok(total.min(1.0))
}

/// Odometer step over `counts[s] in [lo_s, caps[s]]`, with `lo = 1` for the
/// target stratum.
fn advance(counts: &mut [usize], caps: &[usize], target: usize) -> bool {
    for s in 0..counts.len() {
        if counts[s] < caps[s] {
            counts[s] += 1;
            return true;
        }
        counts[s] = usize::from(s == target);
    }
    false
}

fn profile_term(
    lf: &LogFactorials,
    sizes: &[usize],
    counts: &[usize],
    target: usize,
    intervals: &[(usize, usize)],
    tables: &[Vec<f64>],
) -> f64 {
    let mut ln_count = 0.0;
    for (s, (&size, &a)) in sizes.iter().zip(counts).enumerate() {
        let c = if s == target {
            lf.ln_choose(size - 1, a - 1)
        } else {
            lf.ln_choose(size, a)
        };
        match c {
            Some(c) => ln_count += c,
            None => return 0.0,
        }
    }
    // In interval i the first i strata are deleted and invisible to rows.
    let factors: Vec<(f64, usize)> = intervals
        .iter()
        .enumerate()
        .map(|(i, &(len, _))| {
            let w_bar: usize = counts[i..].iter().sum();
            (tables[i][w_bar], len)
        })
        .collect();
    power_term(ln_count, &factors).unwrap_or(0.0)
}
