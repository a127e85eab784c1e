//! Training text ingestion.

use std::path::Path;

use crate::charset::CharacterSet;

/// Normalized training text, split into documents.
///
/// Every character of every document is a member of the character set the
/// corpus was normalized against. Each document ends with its own
/// end-of-text event when a model is trained on it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<String>,
}

impl Corpus {
    /// Wraps documents that are already known to be normalized.
    ///
    /// Returns `None` when any character falls outside `cs`.
    pub fn from_normalized(documents: Vec<String>, cs: &CharacterSet) -> Option<Self> {
        documents
            .iter()
            .all(|d| cs.covers(d))
            .then_some(Self { documents })
    }

    /// Reads a UTF-8 file as one document. A trailing line terminator at the
    /// end of the file is not part of the document.
    pub fn read_file(
        path: impl AsRef<Path>,
        cs: &CharacterSet,
        normalize_text: bool,
    ) -> std::io::Result<Option<Self>> {
        let raw = std::fs::read_to_string(path)?;
        let raw = raw
            .strip_suffix("\r\n")
            .or_else(|| raw.strip_suffix('\n'))
            .unwrap_or(&raw);
        if normalize_text {
            Ok(Some(normalize(raw, cs)))
        } else {
            Ok(Self::from_normalized(vec![raw.to_string()], cs))
        }
    }

    pub fn documents(&self) -> &[String] {
        &self.documents
    }

    pub fn push(&mut self, other: Corpus) {
        self.documents.extend(other.documents);
    }

    /// Total number of characters across documents.
    pub fn char_count(&self) -> usize {
        self.documents.iter().map(|d| d.chars().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.iter().all(String::is_empty)
    }
}

impl FromIterator<Corpus> for Corpus {
    fn from_iter<I: IntoIterator<Item = Corpus>>(iter: I) -> Self {
        let mut out = Corpus::default();
        for c in iter {
            out.push(c);
        }
        out
    }
}

/// Maps raw text onto the character set as a single-document corpus.
///
/// Characters outside `cs` become spaces, and any run of spaces that contains
/// a replacement collapses to one space. Runs made only of original spaces
/// are left alone. If `cs` has no space, out-of-set characters are dropped.
pub fn normalize(raw: &str, cs: &CharacterSet) -> Corpus {
    let space_allowed = cs.contains(' ');
    let mut out = String::with_capacity(raw.len());
    let mut pending_spaces = 0usize;
    let mut replaced_in_run = false;

    let flush = |out: &mut String, pending: &mut usize, replaced: &mut bool| {
        if *replaced {
            out.push(' ');
        } else {
            out.extend(std::iter::repeat_n(' ', *pending));
        }
        *pending = 0;
        *replaced = false;
    };

    for c in raw.chars() {
        if c == ' ' && space_allowed {
            pending_spaces += 1;
        } else if cs.contains(c) {
            flush(&mut out, &mut pending_spaces, &mut replaced_in_run);
            out.push(c);
        } else if space_allowed {
            replaced_in_run = true;
        }
    }
    flush(&mut out, &mut pending_spaces, &mut replaced_in_run);

    Corpus {
        documents: vec![out],
    }
}
