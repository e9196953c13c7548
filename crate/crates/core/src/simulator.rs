//! Complete encoder, erasure channel, decoder and feedback sessions.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{FeedbackSchedule, ScheduleEvent};
use crate::codec::{EncodingSymbol, InputBlock, PeelingDecoder};
use crate::degree::{DegreeDistribution, DegreeSource};
use crate::encoders::{
    dnc_next, lt_next, next_with_selector, DncState, LabelState, NonuniformSelector, SelectionMode,
    SentLog, Shortfall,
};
use crate::feedback::{
    feedback_bit_cost, AckRule, DistanceTiming, FeedbackAgent, FeedbackKind, FeedbackMessage,
    FeedbackPolicy,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Lt,
    AllDistance,
    Quantized,
    Dnc,
}

impl Scheme {
    pub fn feedback_kind(self) -> FeedbackKind {
        match self {
            Scheme::Lt => FeedbackKind::None,
            Scheme::AllDistance => FeedbackKind::AllDistance,
            Scheme::Quantized => FeedbackKind::Quantized,
            Scheme::Dnc => FeedbackKind::Dnc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub scheme: Scheme,
    pub k: usize,
    pub symbol_size: usize,
    pub degrees: DegreeSource,
    pub s: usize,
    pub p_fb: f64,
    pub ack_rule: AckRule,
    pub timing: DistanceTiming,
    pub selection: SelectionMode,
    pub shortfall: Shortfall,
    /// Forward-channel erasure probability, per receiver.
    pub erasure_p: f64,
    pub receivers: usize,
    pub seed: u64,
    pub trials: usize,
    /// Transmission limit; `None` means `50 k`.
    pub cap: Option<usize>,
}

impl SessionConfig {
    pub fn new(scheme: Scheme, k: usize) -> Self {
        Self {
            scheme,
            k,
            symbol_size: 1,
            degrees: DegreeSource::default(),
            s: 10,
            p_fb: 1.0,
            ack_rule: AckRule::default(),
            timing: DistanceTiming::default(),
            selection: SelectionMode::default(),
            shortfall: Shortfall::default(),
            erasure_p: 0.0,
            receivers: 1,
            seed: 0,
            trials: 100,
            cap: None,
        }
    }

    pub fn policy(&self) -> FeedbackPolicy {
        FeedbackPolicy {
            kind: self.scheme.feedback_kind(),
            s: self.s,
            p_fb: self.p_fb,
            ack_rule: self.ack_rule,
            timing: self.timing,
        }
    }

    pub fn cap(&self) -> usize {
        self.cap.unwrap_or(50 * self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.symbol_size == 0 {
            return Err(Error::InvalidParameter("symbol size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.erasure_p) {
            return Err(Error::InvalidParameter(format!(
                "erasure probability {} outside [0, 1)",
                self.erasure_p
            )));
        }
        if self.receivers == 0 {
            return Err(Error::InvalidParameter("need at least one receiver".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if self.k > u32::MAX as usize {
            return Err(Error::InvalidParameter(
                "k does not fit the sequence space".into(),
            ));
        }
        self.degrees.validate()?;
        self.policy().validate()
    }
}

/// Metrics after one forward transmission. `received` and `recovered` refer
/// to the slowest receiver; feedback counts are summed over receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub sent: usize,
    pub received: usize,
    pub recovered: usize,
    pub feedback_msgs: u64,
    pub feedback_bits: u64,
    /// Label error right after a report from the slowest receiver.
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionSummary {
    /// Forward transmissions `n`.
    pub forward_total: usize,
    /// Symbols that reached the slowest receiver.
    pub received_total: usize,
    /// Feedback messages, terminations excluded.
    pub feedback_total: u64,
    pub feedback_bits: u64,
    pub overhead: f64,
    /// Sum of transmitted degrees divided by `k`.
    pub average_input_degree: f64,
}

/// A change in the number of deleted inputs, stamped with the slowest
/// receiver's received count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckEvent {
    pub received: usize,
    pub deleted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub trial: usize,
    pub k: usize,
    /// Empty when rows were not requested.
    pub rows: Vec<TraceRow>,
    pub acks: Vec<AckEvent>,
    pub summary: SessionSummary,
}

impl SessionTrace {
    /// Collapses the acknowledgment events into a bound schedule.
    pub fn schedule(&self) -> Result<FeedbackSchedule> {
        let mut events: Vec<ScheduleEvent> = Vec::new();
        for a in &self.acks {
            match events.last_mut() {
                Some(last) if last.t == a.received => last.m = a.deleted,
                _ => events.push(ScheduleEvent {
                    t: a.received,
                    m: a.deleted,
                }),
            }
        }
        FeedbackSchedule::new(events)
    }
}

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Payload,
    Encoder,
    Channel(usize),
    Coin(usize),
}

fn stream_rng(seed: u64, trial: usize, stream: Stream) -> ChaCha8Rng {
    let (kind, index) = match stream {
        Stream::Payload => (0u64, 0u64),
        Stream::Encoder => (1, 0),
        Stream::Channel(r) => (2, r as u64),
        Stream::Coin(r) => (3, r as u64),
    };
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_mut(8).zip([seed, trial as u64, kind, index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Encoder-side state of each scheme.
enum Encoder {
    Lt(DegreeDistribution),
    Labels {
        dist: DegreeDistribution,
        views: Vec<LabelState>,
        selector: NonuniformSelector,
        shortfall: Shortfall,
        dirty: bool,
    },
    Dnc {
        state: DncState,
        acked: Vec<Vec<bool>>,
    },
}

struct Receiver {
    decoder: PeelingDecoder,
    agent: FeedbackAgent,
    channel: ChaCha8Rng,
    coin: ChaCha8Rng,
    received: usize,
    done_at: Option<usize>,
    // (received, recovered, mae) after every transmission
    history: Vec<(usize, usize, Option<f64>)>,
}

pub fn mae(q: &[f64], truth: &[bool]) -> Result<f64> {
    if q.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates for {} inputs",
            q.len(),
            truth.len()
        )));
    }
    if q.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = q
        .iter()
        .zip(truth)
        .map(|(q, &b)| (q - if b { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(total / q.len() as f64)
}

/// Runs trial `trial` of `config`, keeping per-transmission rows.
pub fn run_session(config: &SessionConfig, trial: usize) -> Result<SessionTrace> {
    run_session_with(config, trial, true)
}

/// Runs one trial; `keep_rows = false` skips the per-transmission trace.
pub fn run_session_with(
    config: &SessionConfig,
    trial: usize,
    keep_rows: bool,
) -> Result<SessionTrace> {
    config.validate()?;
    let k = config.k;
    let block = InputBlock::random(
        k,
        config.symbol_size,
        &mut stream_rng(config.seed, trial, Stream::Payload),
    )?;
    let mut enc_rng = stream_rng(config.seed, trial, Stream::Encoder);
    let policy = config.policy();
    let mut receivers: Vec<Receiver> = (0..config.receivers)
        .map(|r| {
            Ok(Receiver {
                decoder: PeelingDecoder::new(k, config.symbol_size),
                agent: FeedbackAgent::new(policy)?,
                channel: stream_rng(config.seed, trial, Stream::Channel(r)),
                coin: stream_rng(config.seed, trial, Stream::Coin(r)),
                received: 0,
                done_at: None,
                history: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;

    let mut encoder = match config.scheme {
        Scheme::Lt => Encoder::Lt(config.degrees.for_block(k)?),
        Scheme::AllDistance | Scheme::Quantized => {
            let views = vec![LabelState::new(k); config.receivers];
            Encoder::Labels {
                dist: config.degrees.for_block(k)?,
                selector: NonuniformSelector::with_shortfall(&views[0], config.shortfall),
                views,
                shortfall: config.shortfall,
                dirty: false,
            }
        }
        Scheme::Dnc => Encoder::Dnc {
            state: DncState::new(k, config.degrees.clone())?,
            acked: vec![vec![false; k]; config.receivers],
        },
    };

    let cap = config.cap();
    let mut log = SentLog::new();
    let mut totals = Vec::new(); // cumulative (messages, bits) per transmission
    let (mut feedback_msgs, mut feedback_bits) = (0u64, 0u64);
    let mut degree_sum = 0usize;
    let mut deletions: Vec<(usize, usize)> = Vec::new(); // (sent, deleted)
    let mut sent = 0usize;

    while receivers.iter().any(|r| r.done_at.is_none()) {
        if sent == cap {
            return Err(Error::CapExceeded { cap });
        }
        let seq = sent as u32;
        let y = next_symbol(&block, &mut encoder, config.selection, seq, &mut enc_rng)?;
        log.record(seq, &y.neighbors)?;
        sent += 1;
        degree_sum += y.degree();

        for r in 0..receivers.len() {
            let rx = &mut receivers[r];
            // Always drawn, so erasure patterns do not depend on feedback.
            let erased = rx.channel.gen::<f64>() < config.erasure_p;
            let mut mae_now = None;
            if rx.done_at.is_none() && !erased {
                rx.received += 1;
                let msgs = rx.agent.on_receive(&mut rx.decoder, &y, &mut rx.coin)?;
                let mut reported = false;
                for msg in &msgs {
                    if msg.is_terminate() {
                        rx.done_at = Some(sent);
                    } else {
                        reported = true;
                        feedback_msgs += 1;
                        feedback_bits += feedback_bit_cost(msg, d_max(&encoder));
                    }
                }
                let before = deleted_count(&encoder);
                let done: Vec<bool> = receivers.iter().map(|rx| rx.done_at.is_some()).collect();
                apply_feedback(&mut encoder, &log, r, &msgs, &done)?;
                if reported {
                    if let Encoder::Labels { views, .. } = &encoder {
                        mae_now = Some(mae(views[r].q(), receivers[r].decoder.recovered_mask())?);
                    }
                }
                let after = deleted_count(&encoder);
                if after != before {
                    deletions.push((sent, after));
                }
            }
            let rx = &mut receivers[r];
            rx.history
                .push((rx.received, rx.decoder.recovered_count(), mae_now));
        }
        totals.push((feedback_msgs, feedback_bits));
    }

    // The slowest receiver finished last; ties go to the lowest index.
    let slowest = (0..receivers.len())
        .max_by_key(|&r| (receivers[r].done_at, std::cmp::Reverse(r)))
        .expect("at least one receiver");
    let rx = &receivers[slowest];
    let rows = if keep_rows {
        rx.history
            .iter()
            .zip(&totals)
            .enumerate()
            .map(
                |(i, (&(received, recovered, mae), &(msgs, bits)))| TraceRow {
                    t: i + 1,
                    sent: i + 1,
                    received,
                    recovered,
                    feedback_msgs: msgs,
                    feedback_bits: bits,
                    mae,
                },
            )
            .collect()
    } else {
        Vec::new()
    };
    let acks = deletions
        .into_iter()
        .map(|(at, deleted)| AckEvent {
            received: rx.history[at - 1].0,
            deleted,
        })
        .collect();
    Ok(SessionTrace {
        trial,
        k,
        rows,
        acks,
        summary: SessionSummary {
            forward_total: sent,
            received_total: rx.received,
            feedback_total: feedback_msgs,
            feedback_bits,
            overhead: sent as f64 / k as f64,
            average_input_degree: degree_sum as f64 / k as f64,
        },
    })
}

fn next_symbol(
    block: &InputBlock,
    encoder: &mut Encoder,
    mode: SelectionMode,
    seq: u32,
    rng: &mut ChaCha8Rng,
) -> Result<EncodingSymbol> {
    match encoder {
        Encoder::Lt(dist) => lt_next(block, dist, seq, rng),
        Encoder::Labels {
            dist,
            views,
            selector,
            shortfall,
            dirty,
        } => {
            if *dirty {
                *selector = NonuniformSelector::with_shortfall(&merged_labels(views), *shortfall);
                *dirty = false;
            }
            next_with_selector(block, selector, dist, seq, mode, rng)
        }
        Encoder::Dnc { state, .. } => dnc_next(block, state, seq, rng),
    }
}

/// With several receivers the encoder selects against the most pessimistic
/// view of each input.
fn merged_labels(views: &[LabelState]) -> LabelState {
    let mut merged = views[0].clone();
    for v in &views[1..] {
        merged.min_with(v);
    }
    merged
}

fn d_max(encoder: &Encoder) -> usize {
    match encoder {
        Encoder::Lt(dist) | Encoder::Labels { dist, .. } => dist.support_size(),
        Encoder::Dnc { state, .. } => state.distribution().support_size(),
    }
}

fn deleted_count(encoder: &Encoder) -> usize {
    match encoder {
        Encoder::Dnc { state, .. } => state.deleted_count(),
        _ => 0,
    }
}

fn apply_feedback(
    encoder: &mut Encoder,
    log: &SentLog,
    r: usize,
    msgs: &[FeedbackMessage],
    done: &[bool],
) -> Result<()> {
    match encoder {
        Encoder::Lt(_) => {}
        Encoder::Labels { views, dirty, .. } => {
            for msg in msgs {
                match msg {
                    FeedbackMessage::DistanceReport { entries } => {
                        for e in entries {
                            *dirty |= views[r].update_labels(log, e.seq, e.distance as usize)?;
                        }
                    }
                    FeedbackMessage::QuantizedReport { first_seq, bits } => {
                        for (i, &bit) in bits.iter().enumerate() {
                            *dirty |= views[r].quantized_apply(log, first_seq + i as u32, bit)?;
                        }
                    }
                    FeedbackMessage::Terminate => {
                        views[r].set_all_decoded();
                        *dirty = true;
                    }
                    FeedbackMessage::DeleteAck { .. } => {
                        return Err(Error::Protocol(
                            "acknowledgment sent to a label encoder".into(),
                        ));
                    }
                }
            }
        }
        Encoder::Dnc { state, acked } => {
            for msg in msgs {
                match msg {
                    FeedbackMessage::DeleteAck { seq } => {
                        for &j in log.neighbors(*seq)? {
                            acked[r][j] = true;
                        }
                    }
                    FeedbackMessage::Terminate => {}
                    _ => {
                        return Err(Error::Protocol(
                            "distance report sent to a Delete-and-Conquer encoder".into(),
                        ));
                    }
                }
            }
            if msgs.is_empty() || done.iter().all(|d| *d) {
                return Ok(());
            }
            // Deleted once every receiver has acknowledged it or finished.
            let deletable: Vec<usize> = (0..acked[r].len())
                .filter(|&j| !state.is_deleted(j))
                .filter(|&j| (0..acked.len()).all(|i| done[i] || acked[i][j]))
                .collect();
            state.dnc_ack(&deletable)?;
            if state.active().is_empty() {
                return Err(Error::Protocol(
                    "every input deleted before all receivers finished".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Runs every trial of `config` in parallel; results are in trial order.
pub fn run_trials(config: &SessionConfig) -> Result<Vec<SessionTrace>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_session_with(config, t, true))
        .collect()
}

/// Like [`run_trials`] but keeps only the summaries.
pub fn run_summaries(config: &SessionConfig) -> Result<Vec<SessionSummary>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_session_with(config, t, false).map(|s| s.summary))
        .collect()
}

/// `(received, recovered fraction)` after each received symbol of the
/// slowest receiver.
pub fn intermediate_curve(trace: &SessionTrace) -> Vec<(usize, f64)> {
    let mut curve: Vec<(usize, f64)> = Vec::new();
    for row in &trace.rows {
        let point = (row.received, row.recovered as f64 / trace.k as f64);
        match curve.last_mut() {
            Some(last) if last.0 == row.received => *last = point,
            _ if row.received == 0 => {}
            _ => curve.push(point),
        }
    }
    curve
}

/// Recovered fraction after `received` symbols, or 1 once the receiver has
/// finished earlier.
pub fn recovered_fraction_at(trace: &SessionTrace, received: usize) -> f64 {
    let curve = intermediate_curve(trace);
    match curve.iter().rev().find(|(r, _)| *r <= received) {
        Some(&(_, f)) => f,
        None => 0.0,
    }
}

/// Mean over sessions of the summed transmitted degrees divided by `k`.
pub fn average_input_degree(summaries: &[SessionSummary]) -> Result<f64> {
    if summaries.is_empty() {
        return Err(Error::InvalidArgument("no sessions to average".into()));
    }
    Ok(summaries
        .iter()
        .map(|s| s.average_input_degree)
        .sum::<f64>()
        / summaries.len() as f64)
}

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "t",
    "sent",
    "received",
    "recovered",
    "feedback_msgs",
    "feedback_bits",
    "mae",
];

/// Writes one row per transmission of every trace. Missing MAE values are
/// left empty.
pub fn export_csv(traces: &[SessionTrace], path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(CSV_HEADER).map_err(io)?;
    for trace in traces {
        for row in &trace.rows {
            w.write_record([
                trace.trial.to_string(),
                row.t.to_string(),
                row.sent.to_string(),
                row.received.to_string(),
                row.recovered.to_string(),
                row.feedback_msgs.to_string(),
                row.feedback_bits.to_string(),
                row.mae.map(|m| format!("{m:.6}")).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
