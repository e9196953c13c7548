//! Encoder state machines: baseline LT, All-Distance, Quantized-Distance and
//! Delete-and-Conquer.
//!
//! All-Distance and Quantized-Distance share the label machinery in
//! [`LabelState`] and differ only in how feedback updates it.

mod dnc;
mod labels;
mod lt;
mod selection;

pub use dnc::{dnc_next, DncState};
pub use labels::{LabelState, Partition, SentLog, DECODED_THRESHOLD};
pub use lt::lt_next;
pub use selection::{all_distance_next, NonuniformSelector, SelectionMode, Shortfall};

pub(crate) use selection::next_with_selector;
