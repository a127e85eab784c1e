//! Two-level command layouts.
//!
//! Level 1 shows nine groups of eight characters plus DELETE; level 2 splits
//! the chosen group four and four around GO BACK and DELETE. The level-1
//! ordering is built from three tiers: successors predicted by the context
//! model, then characters by unigram frequency, then whatever remains in
//! canonical order. Until the entered text is at least as long as the model
//! order (and always for order 0) the groups are the canonical order chunked.

use std::collections::HashSet;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::charset::CHARSET_SIZE;
use crate::ppm::PredModel;

pub const COMMAND_COUNT: usize = 10;
pub const GROUP_SIZE: usize = 8;
pub const GROUP_COUNT: usize = 9;

/// Commands that carry a group or character, in reading order. Level 1 uses
/// all nine; level 2 skips GO BACK as well.
const LEVEL1_SLOTS: [u8; GROUP_COUNT] = [1, 2, 3, 4, 5, 7, 8, 9, 10];
const LEVEL2_SLOTS: [u8; GROUP_SIZE] = [1, 2, 3, 4, 7, 8, 9, 10];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("command {command} cannot move from level {from} to level {to}")]
    InvalidCommandForTransition { command: u8, from: Level, to: Level },
    #[error("command id {0} is outside 1..=10")]
    BadCommandId(u8),
}

/// A button index, 1 through 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct CommandId(u8);

impl CommandId {
    pub const GO_BACK: CommandId = CommandId(5);
    pub const DELETE: CommandId = CommandId(6);

    pub fn new(id: u8) -> Result<Self, LayoutError> {
        if (1..=COMMAND_COUNT as u8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(LayoutError::BadCommandId(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = CommandId> {
        (1..=COMMAND_COUNT as u8).map(CommandId)
    }

    fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub fn number(self) -> u8 {
        match self {
            Level::One => 1,
            Level::Two => 2,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.number().fmt(f)
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

/// Eight distinct characters shown on one level-1 button.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CharGroup([char; GROUP_SIZE]);

impl CharGroup {
    pub fn chars(&self) -> &[char; GROUP_SIZE] {
        &self.0
    }

    pub fn contains(&self, c: char) -> bool {
        self.0.contains(&c)
    }

    pub fn position(&self, c: char) -> Option<usize> {
        self.0.iter().position(|&x| x == c)
    }
}

impl fmt::Display for CharGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

impl TryFrom<&str> for CharGroup {
    type Error = String;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        let chars: Vec<char> = s.chars().collect();
        let arr: [char; GROUP_SIZE] = chars
            .try_into()
            .map_err(|_| format!("group {s:?} must have {GROUP_SIZE} characters"))?;
        let distinct: HashSet<char> = arr.iter().copied().collect();
        if distinct.len() != GROUP_SIZE {
            return Err(format!("group {s:?} repeats a character"));
        }
        Ok(Self(arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandLabel {
    Group(CharGroup),
    Char(char),
    Delete,
    GoBack,
}

impl CommandLabel {
    /// Text shown on the button.
    pub fn caption(&self) -> String {
        match self {
            CommandLabel::Group(g) => g.to_string(),
            CommandLabel::Char(c) => c.to_string(),
            CommandLabel::Delete => "DELETE".into(),
            CommandLabel::GoBack => "GO BACK".into(),
        }
    }
}

impl Serialize for CommandLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CommandLabel::Group(g) => {
                let mut st = s.serialize_struct("CommandLabel", 2)?;
                st.serialize_field("kind", "group")?;
                st.serialize_field("chars", &g.to_string())?;
                st.end()
            }
            CommandLabel::Char(c) => {
                let mut st = s.serialize_struct("CommandLabel", 2)?;
                st.serialize_field("kind", "char")?;
                st.serialize_field("char", c)?;
                st.end()
            }
            CommandLabel::Delete | CommandLabel::GoBack => {
                let kind = if *self == CommandLabel::Delete { "delete" } else { "goback" };
                let mut st = s.serialize_struct("CommandLabel", 1)?;
                st.serialize_field("kind", kind)?;
                st.end()
            }
        }
    }
}

/// The ten labels currently on screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Layout {
    level: Level,
    labels: [CommandLabel; COMMAND_COUNT],
}

impl Layout {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn labels(&self) -> &[CommandLabel; COMMAND_COUNT] {
        &self.labels
    }

    pub fn label(&self, id: CommandId) -> &CommandLabel {
        &self.labels[id.index()]
    }

    /// Level-1 groups in reading order (DELETE skipped). Empty at level 2.
    pub fn groups(&self) -> Vec<CharGroup> {
        self.labels
            .iter()
            .filter_map(|l| match l {
                CommandLabel::Group(g) => Some(*g),
                _ => None,
            })
            .collect()
    }

    /// Locates `c` among the level-1 groups: 1-based reading position and
    /// the command that selects that group.
    pub fn find_group(&self, c: char) -> Option<(usize, CommandId)> {
        LEVEL1_SLOTS.iter().enumerate().find_map(|(i, &slot)| {
            match &self.labels[usize::from(slot - 1)] {
                CommandLabel::Group(g) if g.contains(c) => Some((i + 1, CommandId(slot))),
                _ => None,
            }
        })
    }

    /// Locates `c` among the level-2 characters: 1-based reading position and
    /// the command that types it.
    pub fn find_char(&self, c: char) -> Option<(usize, CommandId)> {
        LEVEL2_SLOTS.iter().enumerate().find_map(|(i, &slot)| {
            match self.labels[usize::from(slot - 1)] {
                CommandLabel::Char(x) if x == c => Some((i + 1, CommandId(slot))),
                _ => None,
            }
        })
    }

    /// Group labels and DELETE as short captions, for display.
    pub fn captions(&self) -> Vec<String> {
        self.labels.iter().map(CommandLabel::caption).collect()
    }
}

fn chunk_level1(order: &[char]) -> Layout {
    debug_assert_eq!(order.len(), CHARSET_SIZE);
    let mut labels = [CommandLabel::Delete; COMMAND_COUNT];
    for (chunk, &slot) in order.chunks_exact(GROUP_SIZE).zip(&LEVEL1_SLOTS) {
        let group = CharGroup(chunk.try_into().expect("chunk of eight"));
        labels[usize::from(slot - 1)] = CommandLabel::Group(group);
    }
    Layout {
        level: Level::One,
        labels,
    }
}

/// The canonical-order layout used before prediction starts.
pub fn alphabetical_layout(model: &PredModel) -> Layout {
    chunk_level1(model.charset().symbols())
}

/// Level-1 layout for the text typed so far.
pub fn level1_layout(text_entered: &str, model: &PredModel) -> Layout {
    let k = model.order();
    if k == 0 || text_entered.chars().count() < k {
        return alphabetical_layout(model);
    }
    let charset = model.charset();
    let mut placed = HashSet::with_capacity(CHARSET_SIZE);
    let mut ordering = Vec::with_capacity(CHARSET_SIZE);

    let predicted = model.predict_after(text_entered).into_iter().map(|(c, _)| c);
    let frequent = model.frequency_ranking().iter().copied();
    let remaining = charset.symbols().iter().copied();
    for c in predicted.chain(frequent).chain(remaining) {
        if charset.contains(c) && placed.insert(c) {
            ordering.push(c);
        }
    }
    chunk_level1(&ordering)
}

/// Level-2 layout: first four characters, GO BACK, DELETE, last four.
pub fn level2_layout(group: &CharGroup) -> Layout {
    let c = group.chars();
    Layout {
        level: Level::Two,
        labels: [
            CommandLabel::Char(c[0]),
            CommandLabel::Char(c[1]),
            CommandLabel::Char(c[2]),
            CommandLabel::Char(c[3]),
            CommandLabel::GoBack,
            CommandLabel::Delete,
            CommandLabel::Char(c[4]),
            CommandLabel::Char(c[5]),
            CommandLabel::Char(c[6]),
            CommandLabel::Char(c[7]),
        ],
    }
}

/// Computes the layout that follows pressing `command` on `current`.
///
/// Moving to level 2 requires a group button on a level-1 layout. Moving to
/// level 1 requires a character button or GO BACK on a level-2 layout; a
/// character is appended to `text_entered` before the new layout is built.
/// DELETE is not a level transition and is rejected here.
pub fn next_layout(
    change_level_to: Level,
    command: CommandId,
    text_entered: &str,
    current: &Layout,
    model: &PredModel,
) -> Result<Layout, LayoutError> {
    let invalid = || LayoutError::InvalidCommandForTransition {
        command: command.get(),
        from: current.level,
        to: change_level_to,
    };
    match (current.level, change_level_to, current.label(command)) {
        (Level::One, Level::Two, CommandLabel::Group(g)) => Ok(level2_layout(g)),
        (Level::Two, Level::One, CommandLabel::Char(c)) => {
            let mut text = String::with_capacity(text_entered.len() + c.len_utf8());
            text.push_str(text_entered);
            text.push(*c);
            Ok(level1_layout(&text, model))
        }
        (Level::Two, Level::One, CommandLabel::GoBack) => Ok(level1_layout(text_entered, model)),
        _ => Err(invalid()),
    }
}
