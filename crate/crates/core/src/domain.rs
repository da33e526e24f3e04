//! Shared vocabulary: frequency bands, tasks, load labels and exam difficulty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of EEG bands reported per tick.
pub const BAND_COUNT: usize = 8;

/// Eight band amplitudes plus HRV.
pub const FEATURE_DIM: usize = BAND_COUNT + 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct ParseNameError {
    pub kind: &'static str,
    pub value: String,
}

/// EEG frequency bands in device order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Delta,
    Theta,
    LowAlpha,
    HighAlpha,
    LowBeta,
    HighBeta,
    LowGamma,
    MiddleGamma,
}

impl Band {
    pub const ALL: [Band; BAND_COUNT] = [
        Band::Delta,
        Band::Theta,
        Band::LowAlpha,
        Band::HighAlpha,
        Band::LowBeta,
        Band::HighBeta,
        Band::LowGamma,
        Band::MiddleGamma,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Snake-case column stem, e.g. `low_alpha`.
    pub fn column(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::LowAlpha => "low_alpha",
            Band::HighAlpha => "high_alpha",
            Band::LowBeta => "low_beta",
            Band::HighBeta => "high_beta",
            Band::LowGamma => "low_gamma",
            Band::MiddleGamma => "middle_gamma",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Band::Delta => "Delta",
            Band::Theta => "Theta",
            Band::LowAlpha => "Low Alpha",
            Band::HighAlpha => "High Alpha",
            Band::LowBeta => "Low Beta",
            Band::HighBeta => "High Beta",
            Band::LowGamma => "Low Gamma",
            Band::MiddleGamma => "Middle Gamma",
        }
    }
}

/// Ordinal cognitive-load class. The derived ordering (Baseline < Low < High)
/// is the class order used for tie-breaking everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LoadLabel {
    Baseline,
    Low,
    High,
}

impl LoadLabel {
    pub const ALL: [LoadLabel; 3] = [LoadLabel::Baseline, LoadLabel::Low, LoadLabel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<LoadLabel> {
        LoadLabel::ALL.get(index).copied()
    }

    /// Quantified load level: Baseline 0, Low 1, High 2.
    pub fn quantified(self) -> f64 {
        match self {
            LoadLabel::Baseline => 0.0,
            LoadLabel::Low => 1.0,
            LoadLabel::High => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LoadLabel::Baseline => "Baseline",
            LoadLabel::Low => "Low",
            LoadLabel::High => "High",
        }
    }
}

impl fmt::Display for LoadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LoadLabel {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Baseline" => Ok(LoadLabel::Baseline),
            "Low" => Ok(LoadLabel::Low),
            "High" => Ok(LoadLabel::High),
            _ => Err(ParseNameError {
                kind: "load label",
                value: s.to_string(),
            }),
        }
    }
}

/// Exam difficulty in the cross-task experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Low,
    High,
}

impl Difficulty {
    pub const ALL: [Difficulty; 2] = [Difficulty::Low, Difficulty::High];

    /// Quantified difficulty: Low 1, High 2.
    pub fn quantified(self) -> f64 {
        match self {
            Difficulty::Low => 1.0,
            Difficulty::High => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Low => "Low",
            Difficulty::High => "High",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the participant was doing during a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Rest,
    OneBack,
    TwoBack,
    ExamLow,
    ExamHigh,
    Unlabeled,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Rest,
        Task::OneBack,
        Task::TwoBack,
        Task::ExamLow,
        Task::ExamHigh,
        Task::Unlabeled,
    ];

    /// Training label induced by the task. Exam tasks carry a difficulty,
    /// not a ground-truth load label.
    pub fn label(self) -> Option<LoadLabel> {
        match self {
            Task::Rest => Some(LoadLabel::Baseline),
            Task::OneBack => Some(LoadLabel::Low),
            Task::TwoBack => Some(LoadLabel::High),
            Task::ExamLow | Task::ExamHigh | Task::Unlabeled => None,
        }
    }

    pub fn difficulty(self) -> Option<Difficulty> {
        match self {
            Task::ExamLow => Some(Difficulty::Low),
            Task::ExamHigh => Some(Difficulty::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Rest => "Rest",
            Task::OneBack => "OneBack",
            Task::TwoBack => "TwoBack",
            Task::ExamLow => "ExamLow",
            Task::ExamHigh => "ExamHigh",
            Task::Unlabeled => "Unlabeled",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ParseNameError {
                kind: "task",
                value: s.to_string(),
            })
    }
}
