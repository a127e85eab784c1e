//! Error-free user simulation and benchmark harness.
//!
//! The simulated user always picks the button holding the next target
//! character, so every letter costs exactly two commands regardless of the
//! model order. What the model changes is *where* the character sits: the
//! 1-based reading position of its group at level 1 and of the character at
//! level 2. Those scan ranks are the machine-side stand-in for visual search
//! time.

use std::sync::Arc;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::CharacterSet;
use crate::corpus::Corpus;
use crate::layout::{CommandId, GROUP_SIZE};
use crate::ppm::{ModelError, PredModel};
use crate::session::{EventKind, SessionError, TypingSession};

/// Virtual time between simulated commands (one dwell).
pub const DEFAULT_COMMAND_INTERVAL_MS: u64 = 1500;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("character {0:?} is not in the character set")]
    CharacterNotInCharset(char),
    #[error("cannot delete {requested} characters, only {available} typed")]
    NotEnoughText { requested: usize, available: usize },
    #[error("corpus too small: need spans of {needed} characters, longest region has {available}")]
    CorpusTooSmall { needed: usize, available: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub order: usize,
    pub sentence: String,
    pub commands_used: usize,
    pub letters_typed: usize,
    pub mean_level1_rank: f64,
    pub mean_level2_rank: f64,
    pub hit_at_group1: f64,
}

/// Display name of a model order.
pub fn config_name(order: usize) -> String {
    if order == 0 {
        "NoPPM".to_string()
    } else {
        format!("PPM{order}")
    }
}

/// Types `target` through a real session with the optimal command at every
/// step, one command every `interval_ms`. Returns the report and the session.
pub fn simulate_session(
    target: &str,
    model: Arc<PredModel>,
    interval_ms: u64,
) -> Result<(SimReport, TypingSession), SimError> {
    if let Some(c) = target.chars().find(|&c| !model.charset().contains(c)) {
        return Err(SimError::CharacterNotInCharset(c));
    }
    let order = model.order();
    let mut session = TypingSession::new(model, Some(target.to_string()), 0)?;
    let mut t = 0u64;
    let (mut l1_sum, mut l2_sum, mut hits, mut letters) = (0usize, 0usize, 0usize, 0usize);

    for c in target.chars() {
        let (l1, group_cmd) = session
            .layout()
            .find_group(c)
            .ok_or(SimError::CharacterNotInCharset(c))?;
        t += interval_ms;
        session.apply_command(group_cmd, t)?;
        let (l2, char_cmd) = session
            .layout()
            .find_char(c)
            .ok_or(SimError::CharacterNotInCharset(c))?;
        t += interval_ms;
        session.apply_command(char_cmd, t)?;

        l1_sum += l1;
        l2_sum += l2;
        hits += usize::from(l1 == 1);
        letters += 1;
    }
    debug_assert_eq!(session.text_entered(), target);

    let mean = |sum: usize| if letters == 0 { 0.0 } else { sum as f64 / letters as f64 };
    let report = SimReport {
        order,
        sentence: target.to_string(),
        commands_used: session.events().len(),
        letters_typed: letters,
        mean_level1_rank: mean(l1_sum),
        mean_level2_rank: mean(l2_sum),
        hit_at_group1: mean(hits),
    };
    Ok((report, session))
}

/// [`simulate_session`] with the default dwell interval.
pub fn simulate_optimal(target: &str, model: Arc<PredModel>) -> Result<SimReport, SimError> {
    simulate_session(target, model, DEFAULT_COMMAND_INTERVAL_MS).map(|(r, _)| r)
}

/// Outcome of erasing characters with DELETE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeletionReport {
    pub letters_deleted: usize,
    pub commands: usize,
}

impl DeletionReport {
    /// Commands spent per erased letter; `None` when nothing was erased.
    pub fn commands_per_letter(&self) -> Option<f64> {
        (self.letters_deleted > 0).then(|| self.commands as f64 / self.letters_deleted as f64)
    }
}

/// Erases the last `n_chars` characters of `session` from whatever level it
/// is at, one DELETE per step, counting the commands used.
pub fn simulate_deletion(
    session: &mut TypingSession,
    n_chars: usize,
    interval_ms: u64,
) -> Result<DeletionReport, SimError> {
    let available = session.text_entered().chars().count();
    if n_chars > available {
        return Err(SimError::NotEnoughText {
            requested: n_chars,
            available,
        });
    }
    let mut t = session.last_event_ms();
    let mut commands = 0;
    let mut letters_deleted = 0;
    while letters_deleted < n_chars {
        t += interval_ms;
        let e = session.apply_command(CommandId::DELETE, t)?;
        commands += 1;
        if let EventKind::Deleted(_) = e.kind {
            letters_deleted += 1;
        }
    }
    Ok(DeletionReport {
        letters_deleted,
        commands,
    })
}

/// Where benchmark sentences come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMode {
    /// The tail `fraction` of every document is held out of training and
    /// sentences are drawn from those tails.
    HeldOut { fraction: f64 },
    /// Train on everything and sample sentences from the training text.
    InCorpus,
}

impl Default for SampleMode {
    fn default() -> Self {
        SampleMode::HeldOut { fraction: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub orders: Vec<usize>,
    pub n_sentences: usize,
    pub sentence_len: usize,
    pub seed: u64,
    pub mode: SampleMode,
}

/// One aggregate row of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config: String,
    pub sentence_count: usize,
    pub mean_l1_rank: f64,
    pub std_l1_rank: f64,
    pub mean_l2_rank: f64,
    pub hit_at_group1: f64,
    pub commands_per_letter: f64,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub orders: Vec<usize>,
    pub rows: Vec<BenchRow>,
    pub sentences: Vec<String>,
    /// Per-order, per-sentence reports, aligned with `orders` and `sentences`.
    pub reports: Vec<Vec<SimReport>>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Splits the corpus into training text and sampling regions.
fn split_corpus(corpus: &Corpus, mode: SampleMode, cs: &CharacterSet) -> (Corpus, Vec<Vec<char>>) {
    match mode {
        SampleMode::InCorpus => {
            let regions = corpus.documents().iter().map(|d| d.chars().collect()).collect();
            (corpus.clone(), regions)
        }
        SampleMode::HeldOut { fraction } => {
            let mut train = Vec::new();
            let mut regions = Vec::new();
            for doc in corpus.documents() {
                let chars: Vec<char> = doc.chars().collect();
                let held = ((chars.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
                let cut = chars.len() - held;
                train.push(chars[..cut].iter().collect::<String>());
                regions.push(chars[cut..].to_vec());
            }
            let train = Corpus::from_normalized(train, cs).expect("slices of a normalized corpus");
            (train, regions)
        }
    }
}

/// Draws `n` spans of `len` characters, uniformly over all valid start
/// positions across regions.
fn sample_spans(regions: &[Vec<char>], n: usize, len: usize, seed: u64) -> Result<Vec<String>, SimError> {
    let starts_per_region: Vec<usize> = regions
        .iter()
        .map(|r| (r.len() + 1).saturating_sub(len.max(1)))
        .collect();
    let total: usize = starts_per_region.iter().sum();
    if n > 0 && total == 0 {
        return Err(SimError::CorpusTooSmall {
            needed: len,
            available: regions.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.random_range(0..total);
        for (region, &starts) in regions.iter().zip(&starts_per_region) {
            if pick < starts {
                out.push(region[pick..pick + len].iter().collect());
                break;
            }
            pick -= starts;
        }
    }
    Ok(out)
}

/// Trains one model per order and simulates every sampled sentence under
/// each of them. Sampling is deterministic in `config.seed`.
pub fn run_benchmark(
    corpus: &Corpus,
    charset: &CharacterSet,
    config: &BenchConfig,
) -> Result<BenchResult, SimError> {
    let (train, regions) = split_corpus(corpus, config.mode, charset);
    let sentences = sample_spans(&regions, config.n_sentences, config.sentence_len, config.seed)?;

    let models: Vec<Arc<PredModel>> = thread::scope(|scope| {
        let handles: Vec<_> = config
            .orders
            .iter()
            .map(|&k| {
                let train = &train;
                scope.spawn(move || PredModel::train(train, k, charset.clone()))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread").map(Arc::new))
            .collect::<Result<_, _>>()
    })?;

    let mut rows = Vec::with_capacity(models.len());
    let mut reports = Vec::with_capacity(models.len());
    for model in &models {
        let per_sentence = sentences
            .iter()
            .map(|s| simulate_optimal(s, model.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(aggregate(model.order(), &per_sentence));
        reports.push(per_sentence);
    }
    Ok(BenchResult {
        orders: config.orders.clone(),
        rows,
        sentences,
        reports,
    })
}

pub fn aggregate(order: usize, reports: &[SimReport]) -> BenchRow {
    let col = |f: fn(&SimReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let (mean_l1, std_l1) = mean_std(&col(|r| r.mean_level1_rank));
    let (mean_l2, _) = mean_std(&col(|r| r.mean_level2_rank));
    let (hit, _) = mean_std(&col(|r| r.hit_at_group1));
    let letters: usize = reports.iter().map(|r| r.letters_typed).sum();
    let commands: usize = reports.iter().map(|r| r.commands_used).sum();
    BenchRow {
        config: config_name(order),
        sentence_count: reports.len(),
        mean_l1_rank: mean_l1,
        std_l1_rank: std_l1,
        mean_l2_rank: mean_l2,
        hit_at_group1: hit,
        commands_per_letter: if letters == 0 { 0.0 } else { commands as f64 / letters as f64 },
    }
}

/// Writes rows as CSV with the standard header.
pub fn write_bench_csv<W: std::io::Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<BenchRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Aligned plain-text table of benchmark rows.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "config", "sentences", "l1_rank", "l1_std", "l2_rank", "hit@1", "cmd/let"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<7} {:>9} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}\n",
            r.config,
            r.sentence_count,
            r.mean_l1_rank,
            r.std_l1_rank,
            r.mean_l2_rank,
            r.hit_at_group1,
            r.commands_per_letter
        ));
    }
    out
}

/// Chance rate of finding a character in the first group: 8 of 72.
pub fn chance_hit_rate(charset: &CharacterSet) -> f64 {
    GROUP_SIZE as f64 / charset.len() as f64
}
