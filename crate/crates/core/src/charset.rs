//! The typing alphabet.
//!
//! A [`CharacterSet`] is an ordered roster of exactly 72 distinct characters.
//! The position of a character in the roster is its canonical rank, which is
//! used everywhere a deterministic tie-break or an "alphabetical" order is
//! needed.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Number of symbols in every character set.
pub const CHARSET_SIZE: usize = 72;

/// End-of-text marker recorded by the context model. Never a typeable symbol.
pub const END_OF_TEXT: char = '$';

/// Default roster: uppercase, lowercase, digits, specials, space, hyphen.
const DEFAULT_SYMBOLS: &str = concat!(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "abcdefghijklmnopqrstuvwxyz",
    "0123456789",
    ".,\"';?|_",
    " ",
    "-",
);

#[derive(Debug, Error)]
pub enum CharsetError {
    #[error("character set must have {CHARSET_SIZE} symbols, found {0}")]
    WrongCount(usize),
    #[error("symbol {0:?} appears more than once")]
    DuplicateSymbol(char),
    #[error("the end-of-text marker {END_OF_TEXT:?} cannot be a typing symbol")]
    ReservedSymbol,
    #[error("line {line}: expected exactly one character, found {found:?}")]
    NotOneCharacter { line: usize, found: String },
    #[error("reading character set: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered 72-symbol typing alphabet with canonical ranks.
#[derive(Clone, PartialEq, Eq)]
pub struct CharacterSet {
    symbols: Vec<char>,
    rank: HashMap<char, usize>,
}

impl CharacterSet {
    /// Builds a character set from an ordered roster, validating the invariants.
    pub fn new(symbols: Vec<char>) -> Result<Self, CharsetError> {
        if symbols.len() != CHARSET_SIZE {
            return Err(CharsetError::WrongCount(symbols.len()));
        }
        let mut rank = HashMap::with_capacity(CHARSET_SIZE);
        for (i, &c) in symbols.iter().enumerate() {
            if c == END_OF_TEXT {
                return Err(CharsetError::ReservedSymbol);
            }
            if rank.insert(c, i).is_some() {
                return Err(CharsetError::DuplicateSymbol(c));
            }
        }
        Ok(Self { symbols, rank })
    }

    /// Reads a roster file: UTF-8, one character per line, in rank order.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CharsetError> {
        let raw = std::fs::read_to_string(path)?;
        Self::parse(&raw)
    }

    /// Parses the contents of a roster file.
    pub fn parse(raw: &str) -> Result<Self, CharsetError> {
        let body = raw.strip_suffix('\n').unwrap_or(raw);
        let mut symbols = Vec::with_capacity(CHARSET_SIZE);
        for (i, line) in body.split('\n').enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let mut chars = line.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => symbols.push(c),
                _ => {
                    return Err(CharsetError::NotOneCharacter {
                        line: i + 1,
                        found: line.to_string(),
                    })
                }
            }
        }
        Self::new(symbols)
    }

    /// Serializes to the roster file format (one character per line).
    pub fn to_file_contents(&self) -> String {
        let mut out = String::with_capacity(CHARSET_SIZE * 2);
        for &c in &self.symbols {
            out.push(c);
            out.push('\n');
        }
        out
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn rank(&self, c: char) -> Option<usize> {
        self.rank.get(&c).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.rank.contains_key(&c)
    }

    /// True when every character of `text` belongs to the set.
    pub fn covers(&self, text: &str) -> bool {
        text.chars().all(|c| self.contains(c))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl Default for CharacterSet {
    fn default() -> Self {
        Self::new(DEFAULT_SYMBOLS.chars().collect()).expect("default roster is valid")
    }
}

impl fmt::Debug for CharacterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.symbols.iter().collect();
        f.debug_tuple("CharacterSet").field(&s).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roster_order_and_size() {
        let cs = CharacterSet::default();
        assert_eq!(cs.len(), 72);
        assert_eq!(&cs.symbols()[..3], &['A', 'B', 'C']);
        assert_eq!(cs.rank('a'), Some(26));
        assert_eq!(cs.rank('0'), Some(52));
        assert_eq!(cs.rank('.'), Some(62));
        assert_eq!(cs.rank('_'), Some(69));
        assert_eq!(cs.rank(' '), Some(70));
        assert_eq!(cs.rank('-'), Some(71));
        assert!(!cs.contains(END_OF_TEXT));
        let expected: String = ('A'..='Z')
            .chain('a'..='z')
            .chain('0'..='9')
            .chain(".,\"';?|_ -".chars())
            .collect();
        assert_eq!(cs.symbols().iter().collect::<String>(), expected);
    }

    #[test]
    fn rank_is_a_bijection() {
        let cs = CharacterSet::default();
        for (i, &c) in cs.symbols().iter().enumerate() {
            assert_eq!(cs.rank(c), Some(i));
        }
    }

    #[test]
    fn parse_round_trips_file_contents() {
        let cs = CharacterSet::default();
        let parsed = CharacterSet::parse(&cs.to_file_contents()).unwrap();
        assert_eq!(parsed, cs);
    }

    #[test]
    fn parse_rejects_wrong_count() {
        let cs = CharacterSet::default();
        let short: String = cs.symbols()[..71].iter().map(|c| format!("{c}\n")).collect();
        assert!(matches!(
            CharacterSet::parse(&short),
            Err(CharsetError::WrongCount(71))
        ));
    }

    #[test]
    fn parse_rejects_duplicates() {
        let mut symbols = CharacterSet::default().symbols().to_vec();
        symbols[1] = 'A';
        let raw: String = symbols.iter().map(|c| format!("{c}\n")).collect();
        assert!(matches!(
            CharacterSet::parse(&raw),
            Err(CharsetError::DuplicateSymbol('A'))
        ));
    }

    #[test]
    fn parse_rejects_multi_char_lines_and_marker() {
        assert!(matches!(
            CharacterSet::parse("AB\n"),
            Err(CharsetError::NotOneCharacter { line: 1, .. })
        ));
        let mut symbols = CharacterSet::default().symbols().to_vec();
        symbols[71] = '$';
        assert!(matches!(
            CharacterSet::new(symbols),
            Err(CharsetError::ReservedSymbol)
        ));
    }

    #[test]
    fn load_reports_missing_file() {
        let err = CharacterSet::load("/nonexistent/charset.txt").unwrap_err();
        assert!(matches!(err, CharsetError::Io(_)));
    }
}
