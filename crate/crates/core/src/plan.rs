//! Scripted phase schedule of a recording session.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{LoadLabel, Task};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub task: Task,
    /// `None` for unlabeled phases.
    pub label: Option<LoadLabel>,
    pub duration_s: u32,
    /// Free text, e.g. `">60%"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_requirement: Option<String>,
}

impl Phase {
    pub fn new(name: impl Into<String>, task: Task, duration_s: u32) -> Self {
        Self {
            name: name.into(),
            task,
            label: task.label(),
            duration_s,
            accuracy_requirement: None,
        }
    }

    pub fn with_requirement(mut self, text: impl Into<String>) -> Self {
        self.accuracy_requirement = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("plan has no phases")]
    NoPhases,
    #[error("plan needs at least one round")]
    NoRounds,
    #[error("phase {0:?} has zero duration")]
    ZeroDuration(String),
    #[error("phase {name:?} label {label:?} disagrees with task {task}")]
    LabelMismatch {
        name: String,
        task: Task,
        label: Option<LoadLabel>,
    },
    #[error("invalid plan JSON: {0}")]
    Json(String),
}

/// Ordered phases, repeated `rounds` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub phases: Vec<Phase>,
    pub rounds: u8,
}

impl Default for SessionPlan {
    /// Rest 90 s, 1-Back 75 s, 2-Back 95 s, two rounds.
    fn default() -> Self {
        Self {
            phases: vec![
                Phase::new("Rest", Task::Rest, 90),
                Phase::new("1-Back", Task::OneBack, 75).with_requirement(">60%"),
                Phase::new("2-Back", Task::TwoBack, 95).with_requirement(">50%"),
            ],
            rounds: 2,
        }
    }
}

impl SessionPlan {
    /// A single unlabeled phase of `duration_s`, for free-form sessions.
    pub fn free_form(name: impl Into<String>, task: Task, duration_s: u32) -> Self {
        Self {
            phases: vec![Phase::new(name, task, duration_s)],
            rounds: 1,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.phases.is_empty() {
            return Err(PlanError::NoPhases);
        }
        if self.rounds == 0 {
            return Err(PlanError::NoRounds);
        }
        for p in &self.phases {
            if p.duration_s == 0 {
                return Err(PlanError::ZeroDuration(p.name.clone()));
            }
            if p.label != p.task.label() {
                return Err(PlanError::LabelMismatch {
                    name: p.name.clone(),
                    task: p.task,
                    label: p.label,
                });
            }
        }
        Ok(())
    }

    pub fn ticks_per_round(&self) -> u32 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }

    pub fn total_ticks(&self) -> u32 {
        self.ticks_per_round() * u32::from(self.rounds)
    }

    pub fn phase_index(&self, name: &str) -> Option<usize> {
        self.phases.iter().position(|p| p.name == name)
    }

    /// Timer-driven schedule: `(round, phase index)` for each tick in order,
    /// rounds numbered from 1.
    pub fn schedule(&self) -> impl Iterator<Item = (u8, usize)> + '_ {
        (1..=self.rounds).flat_map(move |round| {
            self.phases
                .iter()
                .enumerate()
                .flat_map(move |(i, p)| std::iter::repeat_n((round, i), p.duration_s as usize))
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: SessionPlan = serde_json::from_str(text).map_err(|e| PlanError::Json(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_is_the_protocol() {
        let p = SessionPlan::default();
        p.validate().unwrap();
        let summary: Vec<(&str, Option<LoadLabel>, u32, Option<&str>)> = p
            .phases
            .iter()
            .map(|ph| (ph.name.as_str(), ph.label, ph.duration_s, ph.accuracy_requirement.as_deref()))
            .collect();
        assert_eq!(
            summary,
            vec![
                ("Rest", Some(LoadLabel::Baseline), 90, None),
                ("1-Back", Some(LoadLabel::Low), 75, Some(">60%")),
                ("2-Back", Some(LoadLabel::High), 95, Some(">50%")),
            ]
        );
        assert_eq!(p.rounds, 2);
        assert_eq!(p.ticks_per_round(), 260);
        assert_eq!(p.total_ticks(), 520);
    }

    #[test]
    fn schedule_follows_durations() {
        let p = SessionPlan::default();
        let s: Vec<(u8, usize)> = p.schedule().collect();
        assert_eq!(s.len(), 520);
        assert_eq!(s[0], (1, 0));
        assert_eq!(s[89], (1, 0));
        assert_eq!(s[90], (1, 1));
        assert_eq!(s[165], (1, 2));
        assert_eq!(s[260], (2, 0));
        assert_eq!(s.iter().filter(|(_, i)| *i == 2).count(), 190);
    }

    #[test]
    fn json_round_trip() {
        let p = SessionPlan::default();
        assert_eq!(SessionPlan::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn invalid_plans() {
        let mut p = SessionPlan::default();
        p.phases[1].duration_s = 0;
        assert_eq!(p.validate(), Err(PlanError::ZeroDuration("1-Back".into())));
        let mut p = SessionPlan::default();
        p.phases[0].label = Some(LoadLabel::High);
        assert!(matches!(p.validate(), Err(PlanError::LabelMismatch { .. })));
        assert!(matches!(SessionPlan::from_json("{"), Err(PlanError::Json(_))));
        let empty = SessionPlan { phases: vec![], rounds: 1 };
        assert_eq!(empty.validate(), Err(PlanError::NoPhases));
    }
}
