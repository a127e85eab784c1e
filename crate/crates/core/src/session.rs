//! Typing session state machine.
//!
//! A session starts at level 1 with the alphabetical layout. A group button
//! descends to level 2; a character button types and returns to level 1;
//! GO BACK returns without typing; DELETE erases the last character from
//! either level and always leaves the session at level 1. Every command
//! appends one [`SessionEvent`] to the log, and replaying the logged command
//! ids against a fresh session reproduces the same state.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{level1_layout, level2_layout, CharGroup, CommandId, CommandLabel, Layout, Level};
use crate::ppm::PredModel;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("target text contains {0:?}, which is not in the character set")]
    TargetNotNormalized(char),
    #[error("session has no target text")]
    NoTarget,
    #[error("event time {t_ms} ms is earlier than the previous event at {last_ms} ms")]
    TimeWentBackwards { t_ms: u64, last_ms: u64 },
    #[error("transcript line {line}: {reason}")]
    BadTranscript { line: usize, reason: String },
    #[error("transcript I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    DescendToLevel2,
    CharTyped(char),
    Deleted(char),
    WentBack,
    NoOp,
}

impl EventKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EventKind::DescendToLevel2 => "descend",
            EventKind::CharTyped(_) => "char",
            EventKind::Deleted(_) => "delete",
            EventKind::WentBack => "goback",
            EventKind::NoOp => "noop",
        }
    }

    pub fn char(&self) -> Option<char> {
        match *self {
            EventKind::CharTyped(c) | EventKind::Deleted(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionEvent {
    /// Milliseconds since session start.
    pub t_ms: u64,
    pub kind: EventKind,
    pub command: CommandId,
    pub level_at_event: Level,
    /// Length of the entered text after the event.
    pub text_len: usize,
}

/// One line of the JSON-lines transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub t_ms: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char: Option<char>,
    pub cmd: u8,
    pub level: u8,
    pub text_len: usize,
}

impl From<&SessionEvent> for TranscriptLine {
    fn from(e: &SessionEvent) -> Self {
        Self {
            t_ms: e.t_ms,
            kind: e.kind.tag().to_string(),
            char: e.kind.char(),
            cmd: e.command.get(),
            level: e.level_at_event.number(),
            text_len: e.text_len,
        }
    }
}

impl TranscriptLine {
    fn into_event(self, line: usize) -> Result<SessionEvent, SessionError> {
        let bad = |reason: &str| SessionError::BadTranscript {
            line,
            reason: reason.to_string(),
        };
        let need_char = || self.char.ok_or_else(|| bad("missing \"char\""));
        let kind = match self.kind.as_str() {
            "descend" => EventKind::DescendToLevel2,
            "char" => EventKind::CharTyped(need_char()?),
            "delete" => EventKind::Deleted(need_char()?),
            "goback" => EventKind::WentBack,
            "noop" => EventKind::NoOp,
            _ => return Err(bad("unknown event kind")),
        };
        let level_at_event = match self.level {
            1 => Level::One,
            2 => Level::Two,
            _ => return Err(bad("level must be 1 or 2")),
        };
        Ok(SessionEvent {
            t_ms: self.t_ms,
            kind,
            command: CommandId::new(self.cmd).map_err(|e| bad(&e.to_string()))?,
            level_at_event,
            text_len: self.text_len,
        })
    }
}

/// Writes events as JSON lines.
pub fn write_transcript<W: Write>(mut out: W, events: &[SessionEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, &TranscriptLine::from(e))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines transcript. Blank lines are skipped.
pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<SessionEvent>, SessionError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TranscriptLine =
            serde_json::from_str(&line).map_err(|e| SessionError::BadTranscript {
                line: i + 1,
                reason: e.to_string(),
            })?;
        events.push(parsed.into_event(i + 1)?);
    }
    Ok(events)
}

#[derive(Debug, Clone)]
pub struct TypingSession {
    model: Arc<PredModel>,
    text_entered: String,
    level: Level,
    current_layout: Layout,
    selected_group: Option<CharGroup>,
    target: Option<String>,
    started_at_ms: u64,
    last_event_ms: u64,
    events: Vec<SessionEvent>,
}

impl TypingSession {
    /// Starts a session at level 1 with empty text. `started_at_ms` is the
    /// wall-clock start; event times are relative to it.
    pub fn new(
        model: Arc<PredModel>,
        target: Option<String>,
        started_at_ms: u64,
    ) -> Result<Self, SessionError> {
        if let Some(t) = &target {
            if let Some(c) = t.chars().find(|&c| !model.charset().contains(c)) {
                return Err(SessionError::TargetNotNormalized(c));
            }
        }
        let current_layout = level1_layout("", &model);
        Ok(Self {
            model,
            text_entered: String::new(),
            level: Level::One,
            current_layout,
            selected_group: None,
            target,
            started_at_ms,
            last_event_ms: 0,
            events: Vec::new(),
        })
    }

    /// Applies one button press at `t_ms` (relative to session start).
    pub fn apply_command(&mut self, command: CommandId, t_ms: u64) -> Result<SessionEvent, SessionError> {
        if t_ms < self.last_event_ms {
            return Err(SessionError::TimeWentBackwards {
                t_ms,
                last_ms: self.last_event_ms,
            });
        }
        let level_at_event = self.level;
        let kind = if command == CommandId::DELETE {
            let kind = match self.text_entered.pop() {
                Some(c) => EventKind::Deleted(c),
                None => EventKind::NoOp,
            };
            if kind != EventKind::NoOp || self.level == Level::Two {
                self.enter_level1();
            }
            kind
        } else {
            match *self.current_layout.label(command) {
                CommandLabel::Group(g) => {
                    self.level = Level::Two;
                    self.selected_group = Some(g);
                    self.current_layout = level2_layout(&g);
                    EventKind::DescendToLevel2
                }
                CommandLabel::Char(c) => {
                    self.text_entered.push(c);
                    self.enter_level1();
                    EventKind::CharTyped(c)
                }
                CommandLabel::GoBack => {
                    self.enter_level1();
                    EventKind::WentBack
                }
                CommandLabel::Delete => unreachable!("DELETE only sits at command 6"),
            }
        };
        let event = SessionEvent {
            t_ms,
            kind,
            command,
            level_at_event,
            text_len: self.text_entered.chars().count(),
        };
        self.last_event_ms = t_ms;
        self.events.push(event);
        Ok(event)
    }

    fn enter_level1(&mut self) {
        self.level = Level::One;
        self.selected_group = None;
        self.current_layout = level1_layout(&self.text_entered, &self.model);
    }

    /// True when the entered text equals the target exactly.
    pub fn is_complete(&self) -> Result<bool, SessionError> {
        self.target
            .as_deref()
            .map(|t| t == self.text_entered)
            .ok_or(SessionError::NoTarget)
    }

    /// The last five characters typed (fewer if the text is shorter).
    pub fn last_five(&self) -> &str {
        last_chars(&self.text_entered, 5)
    }

    pub fn text_entered(&self) -> &str {
        &self.text_entered
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn layout(&self) -> &Layout {
        &self.current_layout
    }

    pub fn selected_group(&self) -> Option<&CharGroup> {
        self.selected_group.as_ref()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn model(&self) -> &Arc<PredModel> {
        &self.model
    }

    pub fn started_at_ms(&self) -> u64 {
        self.started_at_ms
    }

    pub fn last_event_ms(&self) -> u64 {
        self.last_event_ms
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// Re-applies the command ids of a logged session to a fresh one.
    pub fn replay(
        model: Arc<PredModel>,
        target: Option<String>,
        events: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let mut session = Self::new(model, target, 0)?;
        for e in events {
            session.apply_command(e.command, e.t_ms)?;
        }
        Ok(session)
    }
}

fn last_chars(s: &str, n: usize) -> &str {
    let count = s.chars().count();
    if count <= n {
        return s;
    }
    let start = s.char_indices().nth(count - n).map_or(0, |(i, _)| i);
    &s[start..]
}
