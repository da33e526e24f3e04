//! Newline-delimited JSON messages between a session and its clients.
//!
//! Every message is one JSON object per line carrying a `type` tag and the
//! schema version `v`.
//!
//! Events (service to client):
//!
//! ```text
//! {"type":"tick","v":1,"tick":12,"round":1,"phase":"Rest","label":"Baseline",
//!  "quality":0,"features":[..9 numbers..],"predicted":"Baseline",
//!  "proba":{"Baseline":0.97,"Low":0.02,"High":0.01}}
//! {"type":"phase","v":1,"tick":91,"round":1,"phase":"1-Back","label":"Low","source":"timer"}
//! {"type":"gap","v":1,"after_tick":40,"reason":"stalled","missing":0}
//! {"type":"gap","v":1,"after_tick":40,"reason":"dropped","missing":7}
//! {"type":"session","v":1,"state":"started","participant":"P01"}
//! {"type":"tlx","v":1,"participant":"P01","phase":"2-Back","scores":[..6..],"composite":55.0}
//! {"type":"ack","v":1,"command":"mark_phase","ok":true}
//! ```
//!
//! `label`, `predicted` and `proba` are `null` when the phase is unlabeled
//! or no model is loaded. `missing` counts events a slow client lost.
//!
//! Commands (client to service):
//!
//! ```text
//! {"type":"start","v":1,"participant":"P01"}
//! {"type":"stop","v":1}
//! {"type":"mark_phase","v":1,"phase":"1-Back"}
//! {"type":"tlx_submit","v":1,"participant":"P01","phase":"2-Back",
//!  "scores":[mental,physical,temporal,performance,effort,frustration]}
//! ```
//!
//! `mark_phase` also accepts `"abort"`. TLX subscale scores are 0 to 100 in
//! steps of 5; the composite is their unweighted mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cogload::{FeatureVector, LoadLabel, FEATURE_DIM};

pub const WIRE_VERSION: u32 = 1;
pub const TLX_SUBSCALES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct Proba {
    pub baseline: f64,
    pub low: f64,
    pub high: f64,
}

impl From<[f64; 3]> for Proba {
    fn from(p: [f64; 3]) -> Self {
        Self {
            baseline: p[0],
            low: p[1],
            high: p[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSource {
    Timer,
    Operator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReason {
    /// The source produced no tick for longer than the stall limit.
    Stalled,
    /// This subscriber fell behind and lost events.
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Started,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Tick {
        v: u32,
        tick: u32,
        round: u8,
        phase: String,
        label: Option<LoadLabel>,
        quality: u8,
        features: [f64; FEATURE_DIM],
        predicted: Option<LoadLabel>,
        proba: Option<Proba>,
    },
    Phase {
        v: u32,
        /// First tick of the new phase.
        tick: u32,
        round: u8,
        phase: String,
        label: Option<LoadLabel>,
        source: PhaseSource,
    },
    Gap {
        v: u32,
        after_tick: u32,
        reason: GapReason,
        missing: u64,
    },
    Session {
        v: u32,
        state: SessionState,
        participant: String,
    },
    Tlx {
        v: u32,
        participant: String,
        phase: String,
        scores: [u8; TLX_SUBSCALES],
        composite: f64,
    },
    Ack {
        v: u32,
        command: String,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

impl Event {
    #[allow(clippy::too_many_arguments)]
    pub fn tick(
        tick: u32,
        round: u8,
        phase: &str,
        label: Option<LoadLabel>,
        quality: u8,
        features: &FeatureVector,
        predicted: Option<LoadLabel>,
        proba: Option<[f64; 3]>,
    ) -> Self {
        Event::Tick {
            v: WIRE_VERSION,
            tick,
            round,
            phase: phase.to_string(),
            label,
            quality,
            features: features.to_array(),
            predicted,
            proba: proba.map(Proba::from),
        }
    }

    pub fn gap(after_tick: u32, reason: GapReason, missing: u64) -> Self {
        Event::Gap {
            v: WIRE_VERSION,
            after_tick,
            reason,
            missing,
        }
    }

    pub fn ack(command: &str, result: Result<(), String>) -> Self {
        Event::Ack {
            v: WIRE_VERSION,
            command: command.to_string(),
            ok: result.is_ok(),
            error: result.err(),
        }
    }

    /// Tick number for tick events.
    pub fn tick_number(&self) -> Option<u32> {
        match self {
            Event::Tick { tick, .. } => Some(*tick),
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Start {
        v: u32,
        #[serde(default)]
        participant: Option<String>,
    },
    Stop {
        v: u32,
    },
    MarkPhase {
        v: u32,
        phase: String,
    },
    TlxSubmit {
        v: u32,
        participant: String,
        phase: String,
        scores: Vec<u8>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Start { .. } => "start",
            Command::Stop { .. } => "stop",
            Command::MarkPhase { .. } => "mark_phase",
            Command::TlxSubmit { .. } => "tlx_submit",
        }
    }

    fn version(&self) -> u32 {
        match self {
            Command::Start { v, .. }
            | Command::Stop { v }
            | Command::MarkPhase { v, .. }
            | Command::TlxSubmit { v, .. } => *v,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("command serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported schema version {found}, expected {WIRE_VERSION}")]
    Version { found: u32 },
    #[error("TLX needs {TLX_SUBSCALES} scores, got {0}")]
    TlxIncomplete(usize),
    #[error("TLX score {0} is not a multiple of 5 in 0..=100")]
    TlxScore(u8),
}

pub fn parse_command(line: &str) -> Result<Command, WireError> {
    let cmd: Command = serde_json::from_str(line.trim()).map_err(|e| WireError::Malformed(e.to_string()))?;
    if cmd.version() != WIRE_VERSION {
        return Err(WireError::Version { found: cmd.version() });
    }
    Ok(cmd)
}

pub fn parse_event(line: &str) -> Result<Event, WireError> {
    serde_json::from_str(line.trim()).map_err(|e| WireError::Malformed(e.to_string()))
}

/// Checks a raw TLX submission and returns the six scores with their
/// unweighted mean.
pub fn validate_tlx(scores: &[u8]) -> Result<([u8; TLX_SUBSCALES], f64), WireError> {
    let arr: [u8; TLX_SUBSCALES] = scores
        .try_into()
        .map_err(|_| WireError::TlxIncomplete(scores.len()))?;
    if let Some(&bad) = arr.iter().find(|&&s| s > 100 || s % 5 != 0) {
        return Err(WireError::TlxScore(bad));
    }
    let composite = arr.iter().map(|&s| f64::from(s)).sum::<f64>() / TLX_SUBSCALES as f64;
    Ok((arr, composite))
}
