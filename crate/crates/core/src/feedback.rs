//! Decoder-side feedback policies and the feedback wire format.

use rand::Rng;

use crate::codec::{EncodingSymbol, PeelingDecoder};
use crate::{Error, Result};

/// Which feedback the decoder produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackKind {
    AllDistance,
    Quantized,
    Dnc,
    #[default]
    None,
}

/// Which distances trigger a Delete-and-Conquer acknowledgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AckRule {
    /// Distance 0 or 1 (the protocol as specified).
    #[default]
    ZeroOrOne,
    /// Distance exactly 1; a diagnostic variant.
    OneOnly,
}

impl AckRule {
    fn acks(self, distance: usize) -> bool {
        match self {
            AckRule::ZeroOrOne => distance <= 1,
            AckRule::OneOnly => distance == 1,
        }
    }
}

/// When the distance carried by All-Distance and Quantized reports is
/// measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceTiming {
    /// Against the recovered set as the symbol arrives.
    Arrival,
    /// After the symbol has been peeled, counting only neighbors still
    /// unknown.
    #[default]
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackPolicy {
    pub kind: FeedbackKind,
    /// Received symbols per report for the distance schemes.
    pub s: usize,
    /// Acknowledgment probability for Delete-and-Conquer.
    pub p_fb: f64,
    pub ack_rule: AckRule,
    pub timing: DistanceTiming,
}

impl Default for FeedbackPolicy {
    fn default() -> Self {
        Self {
            kind: FeedbackKind::None,
            s: 10,
            p_fb: 1.0,
            ack_rule: AckRule::ZeroOrOne,
            timing: DistanceTiming::Residual,
        }
    }
}

impl FeedbackPolicy {
    pub fn new(kind: FeedbackKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidParameter(
                "feedback interval s must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_fb) {
            return Err(Error::InvalidParameter(format!(
                "p_fb = {} outside [0, 1]",
                self.p_fb
            )));
        }
        Ok(())
    }
}

/// One `(seq, distance)` pair of a distance report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceEntry {
    pub seq: u32,
    pub distance: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeedbackMessage {
    DistanceReport {
        entries: Vec<DistanceEntry>,
    },
    /// `bits[i]` belongs to symbol `first_seq + i`; `true` means most of its
    /// neighbors are recovered.
    QuantizedReport {
        first_seq: u32,
        bits: Vec<bool>,
    },
    DeleteAck {
        seq: u32,
    },
    Terminate,
}

impl FeedbackMessage {
    pub fn is_terminate(&self) -> bool {
        matches!(self, FeedbackMessage::Terminate)
    }
}

const TAG_DISTANCE: u8 = 0;
const TAG_QUANTIZED: u8 = 1;
const TAG_ACK: u8 = 2;
const TAG_TERMINATE: u8 = 3;

pub fn encode_wire(msg: &FeedbackMessage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match msg {
        FeedbackMessage::DistanceReport { entries } => {
            let n = u16::try_from(entries.len()).map_err(|_| {
                Error::Encoding(format!(
                    "{} entries exceed the u16 count field",
                    entries.len()
                ))
            })?;
            out.push(TAG_DISTANCE);
            out.extend_from_slice(&n.to_le_bytes());
            for e in entries {
                out.extend_from_slice(&e.seq.to_le_bytes());
                out.extend_from_slice(&e.distance.to_le_bytes());
            }
        }
        FeedbackMessage::QuantizedReport { first_seq, bits } => {
            let n = u16::try_from(bits.len()).map_err(|_| {
                Error::Encoding(format!("{} bits exceed the u16 count field", bits.len()))
            })?;
            out.push(TAG_QUANTIZED);
            out.extend_from_slice(&first_seq.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
            out.extend(bits.chunks(8).map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << i))
            }));
        }
        FeedbackMessage::DeleteAck { seq } => {
            out.push(TAG_ACK);
            out.extend_from_slice(&seq.to_le_bytes());
        }
        FeedbackMessage::Terminate => out.push(TAG_TERMINATE),
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.bytes.len() < N {
            return Err(Error::Malformed("message truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        self.take().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }
}

pub fn decode_wire(bytes: &[u8]) -> Result<FeedbackMessage> {
    let Some((&tag, rest)) = bytes.split_first() else {
        return Err(Error::Malformed("empty message".into()));
    };
    let mut r = Reader { bytes: rest };
    let msg = match tag {
        TAG_DISTANCE => {
            let n = r.u16()?;
            let entries = (0..n)
                .map(|_| {
                    Ok(DistanceEntry {
                        seq: r.u32()?,
                        distance: r.u16()?,
                    })
                })
                .collect::<Result<_>>()?;
            FeedbackMessage::DistanceReport { entries }
        }
        TAG_QUANTIZED => {
            let first_seq = r.u32()?;
            let n = r.u16()? as usize;
            let nbytes = n.div_ceil(8);
            if r.bytes.len() < nbytes {
                return Err(Error::Malformed("quantized report truncated".into()));
            }
            let (packed, rest) = r.bytes.split_at(nbytes);
            r.bytes = rest;
            if n % 8 != 0 && packed[nbytes - 1] >> (n % 8) != 0 {
                return Err(Error::Malformed("nonzero padding bits".into()));
            }
            let bits = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
            FeedbackMessage::QuantizedReport { first_seq, bits }
        }
        TAG_ACK => FeedbackMessage::DeleteAck { seq: r.u32()? },
        TAG_TERMINATE => FeedbackMessage::Terminate,
        other => return Err(Error::Malformed(format!("unknown tag {other}"))),
    };
    if !r.bytes.is_empty() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes",
            r.bytes.len()
        )));
    }
    Ok(msg)
}

/// Feedback bits charged for `msg` when degrees are at most `d_max`.
pub fn feedback_bit_cost(msg: &FeedbackMessage, d_max: usize) -> u64 {
    match msg {
        FeedbackMessage::DistanceReport { entries } => {
            let per_entry = u64::from(usize::BITS - d_max.leading_zeros());
            per_entry * entries.len() as u64
        }
        FeedbackMessage::QuantizedReport { bits, .. } => bits.len() as u64,
        FeedbackMessage::DeleteAck { .. } => 1,
        FeedbackMessage::Terminate => 0,
    }
}

/// The decoder half of a session: buffers distances or bits between reports
/// and decides when to acknowledge.
#[derive(Debug, Clone)]
pub struct FeedbackAgent {
    policy: FeedbackPolicy,
    since_report: usize,
    distances: Vec<DistanceEntry>,
    first_seq: Option<u32>,
    bits: Vec<bool>,
    terminated: bool,
}

impl FeedbackAgent {
    pub fn new(policy: FeedbackPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            policy,
            since_report: 0,
            distances: Vec::new(),
            first_seq: None,
            bits: Vec::new(),
            terminated: false,
        })
    }

    pub fn policy(&self) -> &FeedbackPolicy {
        &self.policy
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Handles one intact symbol: measures its distance, peels it and returns
    /// the feedback to send, if any.
    ///
    /// Acknowledgments always use the arrival distance; distance reports use
    /// the policy's [`DistanceTiming`].
    ///
    /// Delete-and-Conquer draws one coin from `rng` per received symbol so
    /// that runs at different `p_fb` share their randomness.
    pub fn on_receive<R: Rng + ?Sized>(
        &mut self,
        decoder: &mut PeelingDecoder,
        y: &EncodingSymbol,
        rng: &mut R,
    ) -> Result<Vec<FeedbackMessage>> {
        if self.terminated {
            return Ok(Vec::new());
        }
        let distance = decoder.distance(y);
        decoder.peel(y)?;
        let reported = match self.policy.timing {
            DistanceTiming::Arrival => distance,
            DistanceTiming::Residual => decoder.distance(y),
        };
        let coin: f64 = if self.policy.kind == FeedbackKind::Dnc {
            rng.gen()
        } else {
            1.0
        };

        if decoder.is_complete() {
            self.terminated = true;
            return Ok(vec![FeedbackMessage::Terminate]);
        }

        let mut out = Vec::new();
        match self.policy.kind {
            FeedbackKind::None => {}
            FeedbackKind::Dnc => {
                if self.policy.ack_rule.acks(distance) && coin < self.policy.p_fb {
                    out.push(FeedbackMessage::DeleteAck { seq: y.seq });
                }
            }
            FeedbackKind::AllDistance => {
                let distance = u16::try_from(reported)
                    .map_err(|_| Error::Encoding(format!("distance {reported} exceeds u16")))?;
                self.distances.push(DistanceEntry {
                    seq: y.seq,
                    distance,
                });
                self.since_report += 1;
                if self.since_report == self.policy.s {
                    self.since_report = 0;
                    out.push(FeedbackMessage::DistanceReport {
                        entries: std::mem::take(&mut self.distances),
                    });
                }
            }
            FeedbackKind::Quantized => {
                // Ratios of exactly one half count as "mostly undecoded".
                let bit = 2 * reported < y.degree();
                let first = *self.first_seq.get_or_insert(y.seq);
                let offset = y.seq.checked_sub(first).ok_or_else(|| {
                    Error::Protocol(format!("seq {} arrived before {first}", y.seq))
                })? as usize;
                // Erased symbols in between are reported as 0, which leaves
                // the encoder's binary labels unchanged.
                self.bits.resize(offset, false);
                self.bits.push(bit);
                self.since_report += 1;
                if self.since_report == self.policy.s {
                    self.since_report = 0;
                    self.first_seq = None;
                    out.push(FeedbackMessage::QuantizedReport {
                        first_seq: first,
                        bits: std::mem::take(&mut self.bits),
                    });
                }
            }
        }
        Ok(out)
    }
}
