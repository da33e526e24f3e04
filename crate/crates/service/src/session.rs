//! Phase tracking, featurization and classification for one live session.

use std::sync::Arc;

use thiserror::Error;

use cogload::features::{FeatureError, StreamFeaturizer, DEFAULT_RR_WINDOW};
use cogload::plan::PlanError;
use cogload::{FeatureVector, ForestModel, LoadLabel, SampleRecord, SessionPlan, FEATURE_DIM};

use crate::wire::{Event, PhaseSource, WIRE_VERSION};

pub const ABORT: &str = "abort";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("phase {0:?} is not in the plan")]
    UnknownPhase(String),
    #[error("session has ended")]
    SessionEnded,
    #[error("model expects {found} features, sessions produce {expected}")]
    ModelDimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Jump(usize),
    Abort,
}

/// Everything produced for one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    /// The record as logged: session participant, round, task and tick.
    pub record: SampleRecord,
    pub features: FeatureVector,
    pub predicted: Option<LoadLabel>,
    pub proba: Option<[f64; 3]>,
    /// A phase event when this tick opened a phase, then the tick event.
    pub events: Vec<Event>,
}

/// One participant working through a [`SessionPlan`].
///
/// Phases advance on the plan's timers unless an operator mark is pending;
/// a mark takes effect at the next tick boundary and the last mark before
/// that boundary wins.
pub struct Session {
    participant: String,
    plan: SessionPlan,
    /// `(round, phase index)` in schedule order.
    slots: Vec<(u8, usize)>,
    slot: usize,
    ticks_in_slot: u32,
    ticks: u32,
    started: bool,
    ended: bool,
    pending: Option<Pending>,
    featurizer: StreamFeaturizer,
    model: Option<Arc<ForestModel>>,
}

impl Session {
    pub fn new(
        participant: impl Into<String>,
        plan: SessionPlan,
        model: Option<Arc<ForestModel>>,
    ) -> Result<Self, SessionError> {
        plan.validate()?;
        if let Some(m) = &model {
            if m.n_features() != FEATURE_DIM {
                return Err(SessionError::ModelDimMismatch {
                    expected: FEATURE_DIM,
                    found: m.n_features(),
                });
            }
        }
        let slots = (1..=plan.rounds)
            .flat_map(|r| (0..plan.phases.len()).map(move |i| (r, i)))
            .collect();
        Ok(Self {
            participant: participant.into(),
            plan,
            slots,
            slot: 0,
            ticks_in_slot: 0,
            ticks: 0,
            started: false,
            ended: false,
            pending: None,
            featurizer: StreamFeaturizer::new(DEFAULT_RR_WINDOW),
            model,
        })
    }

    pub fn participant(&self) -> &str {
        &self.participant
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn ticks(&self) -> u32 {
        self.ticks
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    /// The timer has run out on the final phase and no mark is pending.
    pub fn is_complete(&self) -> bool {
        self.ended
            || (self.pending.is_none()
                && self.slot + 1 == self.slots.len()
                && self.ticks_in_slot >= self.plan.phases[self.slots[self.slot].1].duration_s)
    }

    pub fn current_phase(&self) -> (u8, &str) {
        let (round, idx) = self.slots[self.slot];
        (round, &self.plan.phases[idx].name)
    }

    /// Schedule a transition to the next occurrence of `phase` (or restart
    /// it if it does not occur again), or end the session with `"abort"`.
    pub fn mark_phase(&mut self, phase: &str) -> Result<(), SessionError> {
        if self.ended {
            return Err(SessionError::SessionEnded);
        }
        if phase == ABORT {
            self.pending = Some(Pending::Abort);
            return Ok(());
        }
        let idx = self
            .plan
            .phase_index(phase)
            .ok_or_else(|| SessionError::UnknownPhase(phase.to_string()))?;
        let from = if self.started { self.slot + 1 } else { self.slot };
        let target = (from..self.slots.len())
            .find(|&s| self.slots[s].1 == idx)
            .or_else(|| (0..=self.slot).rev().find(|&s| self.slots[s].1 == idx))
            .expect("phase index exists in every round");
        self.pending = Some(Pending::Jump(target));
        Ok(())
    }

    pub fn stop(&mut self) {
        self.ended = true;
    }

    fn phase_event(&self, source: PhaseSource) -> Event {
        let (round, idx) = self.slots[self.slot];
        let p = &self.plan.phases[idx];
        Event::Phase {
            v: WIRE_VERSION,
            tick: self.ticks + 1,
            round,
            phase: p.name.clone(),
            label: p.label,
            source,
        }
    }

    /// Label, featurize and classify the next tick. The source's tick number
    /// is replaced by the session's own consecutive count.
    pub fn process(&mut self, mut record: SampleRecord) -> Result<TickOutput, SessionError> {
        if self.ended {
            return Err(SessionError::SessionEnded);
        }
        let mut events = Vec::with_capacity(2);
        match self.pending.take() {
            Some(Pending::Abort) => {
                self.ended = true;
                return Err(SessionError::SessionEnded);
            }
            Some(Pending::Jump(target)) => {
                self.slot = target;
                self.ticks_in_slot = 0;
                events.push(self.phase_event(PhaseSource::Operator));
            }
            None if !self.started => events.push(self.phase_event(PhaseSource::Timer)),
            None => {
                let duration = self.plan.phases[self.slots[self.slot].1].duration_s;
                if self.ticks_in_slot >= duration {
                    if self.slot + 1 == self.slots.len() {
                        self.ended = true;
                        return Err(SessionError::SessionEnded);
                    }
                    self.slot += 1;
                    self.ticks_in_slot = 0;
                    events.push(self.phase_event(PhaseSource::Timer));
                }
            }
        }
        self.started = true;
        self.ticks += 1;
        self.ticks_in_slot += 1;

        let (round, idx) = self.slots[self.slot];
        let phase = &self.plan.phases[idx];
        record.participant_id.clone_from(&self.participant);
        record.round = round;
        record.task = phase.task;
        record.tick = self.ticks;

        let features = self.featurizer.push(&record)?;
        let (predicted, proba) = match &self.model {
            Some(m) => {
                let x = features.to_array();
                let predicted = m.predict(&x).map_err(|_| SessionError::ModelDimMismatch {
                    expected: FEATURE_DIM,
                    found: m.n_features(),
                })?;
                let proba = m.proba_by_label(&x).expect("dimension checked");
                (Some(predicted), Some(proba))
            }
            None => (None, None),
        };
        events.push(Event::tick(
            self.ticks,
            round,
            &phase.name,
            phase.label,
            record.quality,
            &features,
            predicted,
            proba,
        ));
        Ok(TickOutput {
            record,
            features,
            predicted,
            proba,
            events,
        })
    }
}
