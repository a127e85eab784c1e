//! Typing speed and information transfer rate.
//!
//! ITR here is the equal-likelihood, error-free rate: each action carries
//! `log2(m)` bits for an alphabet of `m` choices. Commands are drawn from the
//! ten buttons, letters from the 72-symbol alphabet.

use serde::Serialize;
use thiserror::Error;

use crate::session::{EventKind, SessionEvent};

/// Number of selectable buttons at each level.
pub const M_COMMANDS: u32 = 10;
/// Size of the typing alphabet.
pub const M_LETTERS: u32 = 72;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("alphabet size must be at least 2")]
    DegenerateAlphabet,
    #[error("event log is empty")]
    EmptyLog,
}

/// Bits per minute for `actions` choices among `m` alternatives in `duration_s`.
pub fn itr(actions: f64, m: u32, duration_s: f64) -> Result<f64, MetricsError> {
    if m < 2 {
        return Err(MetricsError::DegenerateAlphabet);
    }
    if duration_s.is_nan() || duration_s <= 0.0 {
        return Err(MetricsError::ZeroDuration);
    }
    Ok(actions * f64::from(m).log2() / (duration_s / 60.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub letters: f64,
    pub commands: f64,
    pub duration_s: f64,
    pub speed_lpm: f64,
    pub itr_com_bpm: f64,
    pub itr_letter_bpm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deletion_s_per_letter: Option<f64>,
}

impl MetricsReport {
    /// Speed and both ITRs from raw counts.
    pub fn from_counts(
        letters: f64,
        commands: f64,
        duration_s: f64,
        m_com: u32,
        m_letter: u32,
    ) -> Result<Self, MetricsError> {
        let itr_com_bpm = itr(commands, m_com, duration_s)?;
        Ok(Self {
            letters,
            commands,
            duration_s,
            speed_lpm: letters / (duration_s / 60.0),
            itr_com_bpm,
            itr_letter_bpm: itr(letters, m_letter, duration_s)?,
            deletion_s_per_letter: None,
        })
    }

    /// All-zero report, used where a session has nothing to measure yet.
    pub fn zero() -> Self {
        Self {
            letters: 0.0,
            commands: 0.0,
            duration_s: 0.0,
            speed_lpm: 0.0,
            itr_com_bpm: 0.0,
            itr_letter_bpm: 0.0,
            deletion_s_per_letter: None,
        }
    }

    /// `itr_com / itr_letter`; NaN when no letters were typed.
    pub fn itr_ratio(&self) -> f64 {
        self.itr_com_bpm / self.itr_letter_bpm
    }
}

/// Metrics for a session log.
///
/// Letters are typed characters; commands are all events except no-ops.
/// Duration runs from session start (t = 0) to the last event. The deletion
/// time is the mean gap between each deletion and the event before it (or
/// session start).
pub fn report_from_log(
    events: &[SessionEvent],
    m_com: u32,
    m_letter: u32,
) -> Result<MetricsReport, MetricsError> {
    let last = events.last().ok_or(MetricsError::EmptyLog)?;
    let letters = events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::CharTyped(_)))
        .count();
    let commands = events.iter().filter(|e| e.kind != EventKind::NoOp).count();
    let duration_s = last.t_ms as f64 / 1000.0;
    let mut report =
        MetricsReport::from_counts(letters as f64, commands as f64, duration_s, m_com, m_letter)?;

    let mut prev = 0u64;
    let mut gaps = Vec::new();
    for e in events {
        if matches!(e.kind, EventKind::Deleted(_)) {
            gaps.push((e.t_ms - prev) as f64 / 1000.0);
        }
        prev = e.t_ms;
    }
    if !gaps.is_empty() {
        report.deletion_s_per_letter = Some(gaps.iter().sum::<f64>() / gaps.len() as f64);
    }
    Ok(report)
}
