//! File formats: observation-triple CSV, event-log JSONL, and feature CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patience_core::classify::{Column, ColumnKind, FeatureMatrix, Party};
use patience_core::events::{BuildReport, Closer, ConversationEvent, EventKind};
use patience_core::types::{Dataset, ObservationTriple, TimeUnit};
use serde::Deserialize;

/// Read the triple CSV (`u,y,delta,x1,...,xk`; `u` in decimal minutes,
/// `delta` ∈ {0,1,NA}).
pub fn read_triples(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "u" || cols[1] != "y" || cols[2] != "delta" {
        bail!("expected CSV header starting with u,y,delta, got {:?}", cols);
    }
    let covariate_names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let k = covariate_names.len();
    let mut observations = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let at = |i: usize| -> Result<&str> {
            record.get(i).with_context(|| format!("row {}: missing column {i}", line + 2))
        };
        let u: f64 = at(0)?.parse().with_context(|| format!("row {}: bad u", line + 2))?;
        let y = match at(1)? {
            "0" => false,
            "1" => true,
            other => bail!("row {}: y must be 0 or 1, got {other:?}", line + 2),
        };
        let delta = match at(2)? {
            "0" => Some(false),
            "1" => Some(true),
            "NA" => None,
            other => bail!("row {}: delta must be 0, 1, or NA, got {other:?}", line + 2),
        };
        let covariates = if k > 0 {
            let mut x = Vec::with_capacity(k);
            for j in 0..k {
                x.push(
                    at(3 + j)?
                        .parse()
                        .with_context(|| format!("row {}: bad covariate {}", line + 2, cols[3 + j]))?,
                );
            }
            Some(x)
        } else {
            None
        };
        let obs = ObservationTriple { u, y, delta, covariates };
        obs.validate().with_context(|| format!("row {}: inadmissible observation", line + 2))?;
        observations.push(obs);
    }
    let dataset = if k > 0 {
        Dataset::with_covariates(observations, TimeUnit::Minutes, covariate_names)
    } else {
        Dataset::new(observations, TimeUnit::Minutes)
    };
    dataset.map_err(|e| anyhow::anyhow!("{e}"))
}

/// Write the triple CSV. Values are printed with the shortest
/// round-trippable decimal representation, so read-back is bit-exact.
pub fn write_triples(dataset: &Dataset, out: &mut dyn Write) -> Result<()> {
    let minutes = dataset.converted_to(TimeUnit::Minutes);
    let mut header = String::from("u,y,delta");
    if let Some(names) = &minutes.covariate_names {
        for name in names {
            header.push(',');
            header.push_str(name);
        }
    }
    writeln!(out, "{header}")?;
    for obs in &minutes.observations {
        let delta = match obs.delta {
            Some(true) => "1",
            Some(false) => "0",
            None => "NA",
        };
        write!(out, "{},{},{}", obs.u, u8::from(obs.y), delta)?;
        if let Some(x) = &obs.covariates {
            for v in x {
                write!(out, ",{v}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One event-log JSONL record.
#[derive(Debug, Deserialize)]
struct EventRecord {
    conversation_id: String,
    kind: String,
    t: i64,
    #[serde(default)]
    closer: Option<String>,
    #[serde(default)]
    n_words: Option<u32>,
    #[serde(default)]
    n_chars: Option<u32>,
}

fn parse_event(record: EventRecord, line: usize) -> Result<ConversationEvent> {
    let kind = match record.kind.as_str() {
        "enter_queue" => EventKind::EnterQueue,
        "customer_message" => EventKind::CustomerMessage,
        "agent_message" => EventKind::AgentMessage,
        "agent_assigned" => EventKind::AgentAssigned,
        "close" => EventKind::Close,
        other => bail!("line {line}: unknown event kind {other:?}"),
    };
    let closer = match record.closer.as_deref() {
        None => None,
        Some("customer") => Some(Closer::Customer),
        Some("agent") => Some(Closer::Agent),
        Some("system") => Some(Closer::System),
        Some("manager") => Some(Closer::Manager),
        Some(other) => bail!("line {line}: unknown closer {other:?}"),
    };
    Ok(ConversationEvent {
        conversation_id: record.conversation_id,
        kind,
        timestamp_ms: record.t,
        closer,
        word_count: record.n_words,
        char_count: record.n_chars,
    })
}

/// Read an event-log JSONL file, group events per conversation (first-seen
/// order, sorted by timestamp within each conversation), and derive the
/// observation dataset.
pub fn read_events(path: &Path) -> Result<(Dataset, BuildReport)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<ConversationEvent>> =
        std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(line)
            .with_context(|| format!("line {}: unparsable event record", i + 1))?;
        let event = parse_event(record, i + 1)?;
        groups.entry(event.conversation_id.clone()).or_insert_with(|| {
            order.push(event.conversation_id.clone());
            Vec::new()
        });
        groups.get_mut(&event.conversation_id).expect("just inserted").push(event);
    }
    let grouped = order.into_iter().map(|id| {
        let mut events = groups.remove(&id).expect("grouped");
        events.sort_by_key(|e| e.timestamp_ms);
        events
    });
    Ok(patience_core::events::build_dataset(grouped))
}

/// Read the feature CSV: `conv_id,customer:<token>,...,agent:<token>,...,
/// meta:<name>,...,label`. The label column is optional.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.first() != Some(&"conv_id") {
        bail!("expected first feature column conv_id, got {:?}", cols.first());
    }
    let mut columns = Vec::new();
    let mut label_index = None;
    for (j, col) in cols.iter().enumerate().skip(1) {
        if *col == "label" {
            label_index = Some(j);
        } else if col.starts_with("customer:") {
            // Keep the prefixed name so token names can repeat across parties.
            columns.push(Column { name: col.to_string(), kind: ColumnKind::Token(Party::Customer) });
        } else if col.starts_with("agent:") {
            columns.push(Column { name: col.to_string(), kind: ColumnKind::Token(Party::Agent) });
        } else if col.starts_with("meta:") {
            columns.push(Column { name: col.to_string(), kind: ColumnKind::Metadata });
        } else {
            bail!("feature column {col:?} must be prefixed customer:, agent:, or meta:, or be the label");
        }
    }
    let mut rows = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for (j, _) in cols.iter().enumerate().skip(1) {
            let value = record
                .get(j)
                .with_context(|| format!("row {}: missing column {j}", line + 2))?;
            if Some(j) == label_index {
                labels.push(match value {
                    "0" => false,
                    "1" => true,
                    other => bail!("row {}: label must be 0 or 1, got {other:?}", line + 2),
                });
            } else {
                row.push(value.parse::<f64>().with_context(|| {
                    format!("row {}: bad feature value in column {}", line + 2, cols[j])
                })?);
            }
        }
        rows.push(row);
    }
    let matrix = FeatureMatrix {
        columns,
        rows,
        labels: if label_index.is_some() { Some(labels) } else { None },
    };
    matrix.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(matrix)
}
