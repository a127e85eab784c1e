//! Fixed-order character context model.
//!
//! A [`PredModel`] maps every context of exactly `order` characters to the
//! counts of the symbols that followed it in the training text. The final
//! context of each document is followed by the end-of-text marker `$`, which
//! is stored but never offered as a prediction.
//!
//! There is no escape to shorter contexts: an unseen context predicts
//! nothing, and the layout engine falls back to unigram frequency order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::{CharacterSet, CharsetError, END_OF_TEXT};
use crate::corpus::Corpus;

/// Format tag written into every model file.
pub const MODEL_FORMAT: &str = "flextree-ppm/1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("context {found:?} has length {len}, model order is {expected}")]
    BadContextLength {
        expected: usize,
        len: usize,
        found: String,
    },
    #[error("training text contains {0:?}, which is not in the character set")]
    ForeignSymbol(char),
    #[error("unsupported model format {0:?} (expected {MODEL_FORMAT})")]
    FormatVersionMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
}

type SymbolCounts = BTreeMap<char, u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredModel {
    order: usize,
    charset: CharacterSet,
    contexts: BTreeMap<String, SymbolCounts>,
    /// Indexed by canonical rank.
    unigrams: Vec<u64>,
    frequency_ranking: Vec<char>,
}

impl PredModel {
    /// Counts every `order`-character context and its successor in `corpus`.
    pub fn train(corpus: &Corpus, order: usize, charset: CharacterSet) -> Result<Self, ModelError> {
        let mut unigrams = vec![0u64; charset.len()];
        let mut counts: HashMap<String, HashMap<char, u64>> = HashMap::new();
        let mut key = String::new();

        let mut bump = |ctx: &[char], next: char| {
            key.clear();
            key.extend(ctx);
            match counts.get_mut(key.as_str()) {
                Some(inner) => *inner.entry(next).or_insert(0) += 1,
                None => {
                    counts.insert(key.clone(), HashMap::from([(next, 1)]));
                }
            }
        };

        for doc in corpus.documents() {
            let chars: Vec<char> = doc.chars().collect();
            for &c in &chars {
                let r = charset.rank(c).ok_or(ModelError::ForeignSymbol(c))?;
                unigrams[r] += 1;
            }
            if order == 0 || chars.len() < order {
                continue;
            }
            for i in order..chars.len() {
                bump(&chars[i - order..i], chars[i]);
            }
            bump(&chars[chars.len() - order..], END_OF_TEXT);
        }

        let contexts = counts
            .into_iter()
            .map(|(k, inner)| (k, inner.into_iter().collect()))
            .collect();
        Ok(Self::assemble(order, charset, contexts, unigrams))
    }

    fn assemble(
        order: usize,
        charset: CharacterSet,
        contexts: BTreeMap<String, SymbolCounts>,
        unigrams: Vec<u64>,
    ) -> Self {
        let mut frequency_ranking = charset.symbols().to_vec();
        // Stable sort keeps canonical order among equal counts.
        frequency_ranking.sort_by_key(|&c| std::cmp::Reverse(unigrams[charset.rank(c).unwrap()]));
        Self {
            order,
            charset,
            contexts,
            unigrams,
            frequency_ranking,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn charset(&self) -> &CharacterSet {
        &self.charset
    }

    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    /// Raw successor counts for a context, `$` included.
    pub fn successors(&self, context: &str) -> Option<&BTreeMap<char, u64>> {
        self.contexts.get(context)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&str, &BTreeMap<char, u64>)> {
        self.contexts.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn unigram(&self, c: char) -> u64 {
        self.charset.rank(c).map_or(0, |r| self.unigrams[r])
    }

    pub fn unigram_total(&self) -> u64 {
        self.unigrams.iter().sum()
    }

    /// Typeable successors of `context`, most frequent first, ties by rank.
    pub fn predict(&self, context: &str) -> Result<Vec<(char, u64)>, ModelError> {
        let len = context.chars().count();
        if len != self.order {
            return Err(ModelError::BadContextLength {
                expected: self.order,
                len,
                found: context.to_string(),
            });
        }
        let Some(inner) = self.contexts.get(context) else {
            return Ok(Vec::new());
        };
        let mut ranked: Vec<(char, u64)> = inner
            .iter()
            .filter(|(&c, _)| c != END_OF_TEXT)
            .map(|(&c, &n)| (c, n))
            .collect();
        ranked.sort_by_key(|&(c, n)| (std::cmp::Reverse(n), self.charset.rank(c)));
        Ok(ranked)
    }

    /// Predicts from the last `order` characters of `text`. Returns an empty
    /// list when `text` is shorter than the order.
    pub fn predict_after(&self, text: &str) -> Vec<(char, u64)> {
        let n = text.chars().count();
        if n < self.order {
            return Vec::new();
        }
        let start = text
            .char_indices()
            .nth(n - self.order)
            .map_or(text.len(), |(i, _)| i);
        self.predict(&text[start..]).unwrap_or_default()
    }

    /// All charset members by unigram count descending, ties by rank.
    pub fn frequency_ranking(&self) -> &[char] {
        &self.frequency_ranking
    }

    /// Serializes to the canonical model file text. Object keys are emitted in
    /// byte order, so equal models always produce identical bytes.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            charset: self.charset.symbols().iter().map(|c| c.to_string()).collect(),
            contexts: self
                .contexts
                .iter()
                .map(|(k, inner)| {
                    (
                        k.clone(),
                        inner.iter().map(|(c, &n)| (c.to_string(), n)).collect(),
                    )
                })
                .collect(),
            format: MODEL_FORMAT.to_string(),
            order: self.order as u64,
            unigrams: self
                .charset
                .symbols()
                .iter()
                .zip(&self.unigrams)
                .map(|(c, &n)| (c.to_string(), n))
                .collect(),
        };
        let mut out = serde_json::to_string(&file).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json(raw: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            Some(other) => return Err(ModelError::FormatVersionMismatch(other.to_string())),
            None => return Err(ModelError::CorruptModel("missing \"format\"".into())),
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        file.validate()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout. Field order is alphabetical so the emitted keys are too.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    charset: Vec<String>,
    contexts: BTreeMap<String, BTreeMap<String, u64>>,
    format: String,
    order: u64,
    unigrams: BTreeMap<String, u64>,
}

fn single_char(s: &str) -> Option<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptModel(msg.into())
}

impl ModelFile {
    fn validate(self) -> Result<PredModel, ModelError> {
        let order = usize::try_from(self.order).map_err(|_| corrupt("order out of range"))?;
        let symbols = self
            .charset
            .iter()
            .map(|s| single_char(s).ok_or_else(|| corrupt(format!("charset entry {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let charset = CharacterSet::new(symbols).map_err(|e: CharsetError| corrupt(e.to_string()))?;

        let mut unigrams = vec![0u64; charset.len()];
        for (k, n) in &self.unigrams {
            let r = single_char(k)
                .and_then(|c| charset.rank(c))
                .ok_or_else(|| corrupt(format!("unigram key {k:?} is not a charset member")))?;
            unigrams[r] = *n;
        }

        if order == 0 && !self.contexts.is_empty() {
            return Err(corrupt("order-0 model must not carry contexts"));
        }
        let mut contexts = BTreeMap::new();
        for (ctx, inner) in self.contexts {
            if ctx.chars().count() != order || !charset.covers(&ctx) {
                return Err(corrupt(format!("context key {ctx:?} for order {order}")));
            }
            let mut counts = SymbolCounts::new();
            for (sym, n) in inner {
                let c = single_char(&sym)
                    .filter(|&c| c == END_OF_TEXT || charset.contains(c))
                    .ok_or_else(|| corrupt(format!("successor {sym:?} in context {ctx:?}")))?;
                if n == 0 {
                    return Err(corrupt(format!("zero count in context {ctx:?}")));
                }
                counts.insert(c, n);
            }
            contexts.insert(ctx, counts);
        }
        Ok(PredModel::assemble(order, charset, contexts, unigrams))
    }
}
