//! Conversation event logs and derivation of observation classes.
//!
//! A conversation is classified from its raw event sequence:
//!
//! * **Signaled abandonment** — the customer closed the conversation before
//!   any agent was assigned. Their queue time is their exact patience.
//! * **Uncertain** — an agent was assigned but the customer never wrote
//!   afterwards; the metadata cannot tell a silent abandonment (the customer
//!   had already left) from a served customer who had nothing more to say.
//! * **Served** — an agent was assigned and the customer wrote afterwards.
//!
//! Timestamps are epoch milliseconds; derived durations are minutes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::types::{ClassLabel, Dataset, ObservationTriple, TimeUnit};
use crate::{Error, Result};

/// Milliseconds per minute.
const MS_PER_MIN: f64 = 60_000.0;

/// Kind of a conversation event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    EnterQueue,
    CustomerMessage,
    AgentMessage,
    AgentAssigned,
    Close,
}

/// Party that closed a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closer {
    Customer,
    Agent,
    System,
    Manager,
}

/// One raw event-log record.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationEvent {
    /// Opaque conversation identifier.
    pub conversation_id: String,
    /// Event kind.
    pub kind: EventKind,
    /// Absolute time, epoch milliseconds.
    pub timestamp_ms: i64,
    /// Closing party; present iff `kind` is [`EventKind::Close`].
    pub closer: Option<Closer>,
    /// Word count, for message events.
    pub word_count: Option<u32>,
    /// Character count, for message events.
    pub char_count: Option<u32>,
}

/// Name of the covariate attached by [`derive_class`].
pub const IN_QUEUE_WORDS: &str = "in_queue_words";

/// Classification output plus derivation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConversation {
    /// Observable class.
    pub label: ClassLabel,
    /// The censored observation (u in minutes, covariate = in-queue words).
    pub triple: ObservationTriple,
    /// Total customer words written before agent assignment (before close
    /// for signaled abandonments).
    pub in_queue_words: u32,
    /// Total customer characters written in the same window.
    pub in_queue_chars: u32,
    /// The customer wrote nothing at any point; such conversations are kept
    /// as uncertain but tallied in the build report.
    pub silent_throughout: bool,
}

/// Classify one conversation's events and derive its observation.
///
/// Events must belong to a single conversation; they are processed in
/// timestamp order. Errors: structural violations (missing/duplicated
/// `enter_queue`, duplicated `close` or `agent_assigned`), conversations
/// that were neither served nor customer-closed, agent/system closes before
/// any assignment, and non-positive derived durations.
pub fn derive_class(events: &[ConversationEvent]) -> Result<(ClassLabel, ObservationTriple)> {
    derive_conversation(events).map(|d| (d.label, d.triple))
}

/// Like [`derive_class`], with diagnostics retained.
pub fn derive_conversation(events: &[ConversationEvent]) -> Result<DerivedConversation> {
    if events.is_empty() {
        return Err(Error::malformed("conversation with no events"));
    }
    let mut sorted: Vec<&ConversationEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.timestamp_ms);

    let id = &sorted[0].conversation_id;
    if sorted.iter().any(|e| &e.conversation_id != id) {
        return Err(Error::malformed("events from multiple conversations in one group"));
    }

    let mut enter: Option<i64> = None;
    let mut assigned: Option<i64> = None;
    let mut close: Option<(i64, Closer)> = None;
    for e in &sorted {
        match e.kind {
            EventKind::EnterQueue => {
                if enter.replace(e.timestamp_ms).is_some() {
                    return Err(Error::malformed(format!("{id}: duplicate enter_queue")));
                }
            }
            EventKind::AgentAssigned => {
                if assigned.replace(e.timestamp_ms).is_some() {
                    return Err(Error::malformed(format!("{id}: duplicate agent_assigned")));
                }
            }
            EventKind::Close => {
                let closer = e
                    .closer
                    .ok_or_else(|| Error::malformed(format!("{id}: close without closer")))?;
                if close.replace((e.timestamp_ms, closer)).is_some() {
                    return Err(Error::malformed(format!("{id}: duplicate close")));
                }
            }
            EventKind::CustomerMessage | EventKind::AgentMessage => {}
        }
    }
    let enter = enter.ok_or_else(|| Error::malformed(format!("{id}: missing enter_queue")))?;

    let customer_close_in_queue = match (close, assigned) {
        (Some((t, Closer::Customer)), Some(a)) if t < a => Some(t),
        (Some((t, Closer::Customer)), None) => Some(t),
        _ => None,
    };

    // Customer words before assignment (or before the in-queue close).
    let window_end = assigned.or(customer_close_in_queue.or(close.map(|(t, _)| t)));
    let in_queue = |e: &ConversationEvent| {
        e.kind == EventKind::CustomerMessage && window_end.map_or(true, |w| e.timestamp_ms <= w)
    };
    let in_queue_words: u32 =
        sorted.iter().filter(|e| in_queue(e)).filter_map(|e| e.word_count).sum();
    let in_queue_chars: u32 =
        sorted.iter().filter(|e| in_queue(e)).filter_map(|e| e.char_count).sum();
    let any_customer_message = sorted.iter().any(|e| e.kind == EventKind::CustomerMessage);

    let minutes_since_enter = |t: i64| (t - enter) as f64 / MS_PER_MIN;

    let (label, triple) = if let Some(t) = customer_close_in_queue {
        (ClassLabel::SignaledAbandon, ObservationTriple::signaled_abandon(minutes_since_enter(t)))
    } else if let Some(a) = assigned {
        let wrote_after = sorted
            .iter()
            .any(|e| e.kind == EventKind::CustomerMessage && e.timestamp_ms > a);
        if wrote_after {
            (ClassLabel::Served, ObservationTriple::served(minutes_since_enter(a)))
        } else {
            (ClassLabel::Uncertain(None), ObservationTriple::uncertain(minutes_since_enter(a)))
        }
    } else {
        return Err(Error::malformed(format!(
            "{id}: conversation neither served nor customer-closed"
        )));
    };

    if !(triple.u > 0.0) {
        return Err(Error::invalid(format!(
            "{id}: non-positive observed duration ({} min)",
            triple.u
        )));
    }

    Ok(DerivedConversation {
        label,
        triple: triple.with_covariates(alloc::vec![f64::from(in_queue_words)]),
        in_queue_words,
        in_queue_chars,
        silent_throughout: !any_customer_message,
    })
}

/// Tally of a [`build_dataset`] run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// Conversations converted to observations.
    pub accepted: usize,
    /// Rejected conversations: (group index, diagnostic).
    pub rejected: Vec<(usize, Error)>,
    /// Accepted uncertain conversations where the customer never wrote.
    pub silent_throughout: usize,
    /// Class labels of the accepted conversations, in dataset order.
    pub labels: Vec<ClassLabel>,
}

/// Convert grouped per-conversation event lists into a dataset (durations in
/// minutes, covariate column [`IN_QUEUE_WORDS`]). Malformed conversations are
/// counted and reported in the [`BuildReport`], never silently dropped.
pub fn build_dataset<I>(groups: I) -> (Dataset, BuildReport)
where
    I: IntoIterator<Item = Vec<ConversationEvent>>,
{
    let mut observations = Vec::new();
    let mut report = BuildReport::default();
    for (idx, group) in groups.into_iter().enumerate() {
        match derive_conversation(&group) {
            Ok(derived) => {
                report.accepted += 1;
                if derived.silent_throughout {
                    report.silent_throughout += 1;
                }
                report.labels.push(derived.label);
                observations.push(derived.triple);
            }
            Err(e) => report.rejected.push((idx, e)),
        }
    }
    let dataset = Dataset::with_covariates(
        observations,
        TimeUnit::Minutes,
        alloc::vec![String::from(IN_QUEUE_WORDS)],
    )
    .expect("derived observations satisfy dataset invariants");
    (dataset, report)
}
