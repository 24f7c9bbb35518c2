//! Episode traces: a JSON-lines file whose first line is the header (enough
//! to regenerate the scene and agent) and whose remaining lines are one
//! record per step. Traces from the same seed and config are byte-identical.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::grid::Cell;
use crate::perception::NoiseConfig;
use crate::world::{Action, Event, Pose, SceneConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub scene: SceneConfig,
    pub agent: AgentConfig,
    pub noise: NoiseConfig,
    pub budget: u32,
    /// Hash of the canonical run configuration, for pairing with reports.
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u32,
    pub phase: String,
    pub action: Action,
    /// `None` when the action was rejected as invalid.
    pub event: Option<Event>,
    /// Pose after the action resolved.
    pub pose: Pose,
    /// Navigation target the agent was committed to, if any.
    pub goal: Option<Cell>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace is empty")]
    Empty,
}

pub fn write_trace<W: Write>(
    mut w: W,
    header: &TraceHeader,
    records: &[TraceRecord],
) -> Result<(), TraceError> {
    let mut line = serde_json::to_string(header).expect("header serializes");
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for rec in records {
        let mut line = serde_json::to_string(rec).expect("record serializes");
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<(TraceHeader, Vec<TraceRecord>), TraceError> {
    let mut lines = r.lines().enumerate();
    let header = loop {
        let Some((i, line)) = lines.next() else {
            return Err(TraceError::Empty);
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str(&line).map_err(|source| TraceError::Json {
            line: i + 1,
            source,
        })?;
    };
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| TraceError::Json {
            line: i + 1,
            source,
        })?);
    }
    Ok((header, records))
}
