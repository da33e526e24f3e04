//! The per-session pipeline loop: ticks in, log rows and events out.

use std::io::Write;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::time::{Duration, Instant};

use thiserror::Error;

use cogload::ingest::{CsvError, SessionLogWriter};
use cogload::{LoadLabel, SampleRecord};

use crate::bus::EventBus;
use crate::session::{Session, SessionError};
use crate::wire::{Event, GapReason, SessionState, WIRE_VERSION};

pub const STALL_LIMIT: Duration = Duration::from_secs(3);
pub const POLL_INTERVAL: Duration = Duration::from_millis(50);

/// Operator input delivered to a running session.
#[derive(Debug)]
pub enum Control {
    MarkPhase {
        phase: String,
        reply: Option<Sender<Result<(), SessionError>>>,
    },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub stall_limit: Duration,
    pub poll_interval: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stall_limit: STALL_LIMIT,
            poll_interval: POLL_INTERVAL,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("session log: {0}")]
    Log(#[from] CsvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndReason {
    PlanComplete,
    Stopped,
    Aborted,
    SourceEnded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub ticks: u32,
    pub stalls: u32,
    pub end: EndReason,
    /// One entry per tick; `None` without a model.
    pub predictions: Vec<Option<LoadLabel>>,
    /// Receipt of a record to publication of its tick event.
    pub max_latency: Duration,
    pub mean_latency: Duration,
}

/// Apply queued operator input; true when the operator stopped the session.
fn drain_control(session: &mut Session, control: &Receiver<Control>) -> bool {
    loop {
        match control.try_recv() {
            Ok(Control::MarkPhase { phase, reply }) => {
                let result = session.mark_phase(&phase);
                if let Some(r) = reply {
                    let _ = r.send(result);
                }
            }
            Ok(Control::Stop) => {
                session.stop();
                return true;
            }
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => return false,
        }
    }
}

/// Drive `session` until its plan completes, the operator stops or aborts
/// it, or the tick source hangs up.
///
/// A source silent for longer than the stall limit produces one `gap`
/// event per silence; the session keeps waiting.
pub fn run_session<W: Write>(
    mut session: Session,
    ticks: &Receiver<SampleRecord>,
    control: &Receiver<Control>,
    bus: &EventBus,
    mut log: Option<&mut SessionLogWriter<W>>,
    options: RunOptions,
) -> Result<RunSummary, RunError> {
    bus.publish(&Event::Session {
        v: WIRE_VERSION,
        state: SessionState::Started,
        participant: session.participant().to_string(),
    });
    let mut predictions = Vec::new();
    let mut stalls = 0;
    let mut stalled = false;
    let mut last_tick = Instant::now();
    let mut total_latency = Duration::ZERO;
    let mut max_latency = Duration::ZERO;

    let end = loop {
        if drain_control(&mut session, control) {
            break EndReason::Stopped;
        }
        if session.is_complete() {
            break EndReason::PlanComplete;
        }
        match ticks.recv_timeout(options.poll_interval) {
            Ok(record) => {
                let received = Instant::now();
                // marks that arrived while waiting apply at this boundary
                if drain_control(&mut session, control) {
                    break EndReason::Stopped;
                }
                let out = match session.process(record) {
                    Ok(out) => out,
                    Err(SessionError::SessionEnded) => break EndReason::Aborted,
                    Err(e) => return Err(e.into()),
                };
                if let Some(w) = log.as_deref_mut() {
                    w.append(&out.record)?;
                }
                for e in &out.events {
                    bus.publish(e);
                }
                let latency = received.elapsed();
                total_latency += latency;
                max_latency = max_latency.max(latency);
                predictions.push(out.predicted);
                last_tick = received;
                stalled = false;
            }
            Err(RecvTimeoutError::Timeout) => {
                if !stalled && last_tick.elapsed() > options.stall_limit {
                    stalled = true;
                    stalls += 1;
                    bus.publish(&Event::gap(session.ticks(), GapReason::Stalled, 0));
                }
            }
            Err(RecvTimeoutError::Disconnected) => break EndReason::SourceEnded,
        }
    };

    if let Some(w) = log {
        w.flush()?;
    }
    bus.publish(&Event::Session {
        v: WIRE_VERSION,
        state: SessionState::Ended,
        participant: session.participant().to_string(),
    });
    let n = session.ticks();
    Ok(RunSummary {
        ticks: n,
        stalls,
        end,
        predictions,
        max_latency,
        mean_latency: if n == 0 { Duration::ZERO } else { total_latency / n },
    })
}
