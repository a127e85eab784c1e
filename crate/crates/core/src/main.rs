use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};

use flextree::charset::CharacterSet;
use flextree::corpus::Corpus;
use flextree::gateway::{self, Gateway, GatewayConfig};
use flextree::metrics::{MetricsReport, M_COMMANDS, M_LETTERS};
use flextree::ppm::PredModel;
use flextree::simulator::{
    self, chance_hit_rate, config_name, format_bench_table, write_bench_csv, BenchConfig, SampleMode,
    SimReport,
};

/// Largest model order the CLI will build.
const MAX_ORDER: usize = 8;

#[derive(Parser)]
#[command(name = "flextree", version, about = "Predictive tree keyboard engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a context model from corpus files.
    Train(TrainArgs),
    /// Simulate an error-free user typing sentences.
    Simulate(SimulateArgs),
    /// Compare model orders on sentences sampled from a corpus.
    Bench(BenchArgs),
    /// Typing speed and information transfer rate from counts.
    Itr(ItrArgs),
    /// Run the HTTP session gateway.
    Serve(ServeArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file; repeat for several documents.
    #[arg(long = "corpus", required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Character set file (72 lines, one character each).
    #[arg(long)]
    charset: Option<PathBuf>,
    /// Corpus files are already restricted to the character set.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=MAX_ORDER as i64))]
    order: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("input").required(true).args(["text", "sentences"])))]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// A single target sentence.
    #[arg(long)]
    text: Option<String>,
    /// File with one target sentence per line.
    #[arg(long)]
    sentences: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3",
          value_parser = clap::value_parser!(u8).range(0..=MAX_ORDER as i64))]
    orders: Vec<u8>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 30)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample sentences from the training text instead of held-out tails.
    #[arg(long)]
    in_corpus: bool,
    /// Fraction of each document held out for sampling.
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ItrArgs {
    #[arg(long)]
    letters: f64,
    /// Defaults to two per letter.
    #[arg(long)]
    commands: Option<f64>,
    #[arg(long)]
    seconds: f64,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["models", "corpus"])))]
struct ServeArgs {
    /// Directory of model files; every `*.json` in it is loaded.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Train orders 0-3 from these corpus files at startup instead.
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    charset: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = gateway::DEFAULT_DWELL_MS)]
    dwell_ms: u64,
    /// Static files (the keyboard client) served at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    /// Directory for ended-session transcripts.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Itr(a) => itr(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_charset(path: Option<&Path>) -> anyhow::Result<CharacterSet> {
    match path {
        Some(p) => CharacterSet::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(CharacterSet::default()),
    }
}

fn read_corpus(files: &[PathBuf], cs: &CharacterSet, normalize: bool) -> anyhow::Result<Corpus> {
    let mut corpus = Corpus::default();
    for f in files {
        let doc = Corpus::read_file(f, cs, normalize)
            .with_context(|| format!("reading {}", f.display()))?
            .ok_or_else(|| anyhow!("{} has characters outside the character set", f.display()))?;
        corpus.push(doc);
    }
    if corpus.is_empty() {
        bail!("corpus is empty");
    }
    Ok(corpus)
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let cs = load_charset(args.corpus.charset.as_deref())?;
    let corpus = read_corpus(&args.corpus.corpus, &cs, !args.corpus.no_normalize)?;
    let model = PredModel::train(&corpus, usize::from(args.order), cs)?;
    model
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("order: {}", model.order());
    println!("contexts: {}", model.context_count());
    println!("unigram total: {}", model.unigram_total());
    println!("wrote {}", args.out.display());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let model = Arc::new(
        PredModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?,
    );
    let sentences: Vec<String> = match (&args.text, &args.sentences) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::to_string)
            .collect(),
        (None, None) => unreachable!("clap requires one input"),
    };
    let reports = sentences
        .iter()
        .map(|s| simulator::simulate_optimal(s, model.clone()))
        .collect::<Result<Vec<_>, _>>()?;

    println!(
        "{:<7} {:>8} {:>8} {:>8} {:>8} {:>6}  sentence",
        "config", "commands", "letters", "l1_rank", "l2_rank", "hit@1"
    );
    for r in &reports {
        println!(
            "{:<7} {:>8} {:>8} {:>8.3} {:>8.3} {:>6.3}  {}",
            config_name(r.order),
            r.commands_used,
            r.letters_typed,
            r.mean_level1_rank,
            r.mean_level2_rank,
            r.hit_at_group1,
            r.sentence
        );
    }
    if let Some(path) = &args.csv {
        write_sim_csv(path, &reports).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_sim_csv(path: &Path, reports: &[SimReport]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config",
        "sentence",
        "commands_used",
        "letters_typed",
        "mean_l1_rank",
        "mean_l2_rank",
        "hit_at_group1",
    ])?;
    for r in reports {
        w.write_record([
            config_name(r.order),
            r.sentence.clone(),
            r.commands_used.to_string(),
            r.letters_typed.to_string(),
            r.mean_level1_rank.to_string(),
            r.mean_level2_rank.to_string(),
            r.hit_at_group1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    if !args.in_corpus && !(args.holdout > 0.0 && args.holdout < 1.0) {
        return Err(Failure::Usage("--holdout must be in (0, 1)".into()));
    }
    let cs = load_charset(args.corpus.charset.as_deref())?;
    let corpus = read_corpus(&args.corpus.corpus, &cs, !args.corpus.no_normalize)?;
    let config = BenchConfig {
        orders: args.orders.iter().map(|&k| usize::from(k)).collect(),
        n_sentences: args.samples,
        sentence_len: args.len,
        seed: args.seed,
        mode: if args.in_corpus {
            SampleMode::InCorpus
        } else {
            SampleMode::HeldOut {
                fraction: args.holdout,
            }
        },
    };
    let result = simulator::run_benchmark(&corpus, &cs, &config)?;
    print!("{}", format_bench_table(&result.rows));

    let chance = chance_hit_rate(&cs);
    for (order, row) in result.orders.iter().zip(&result.rows) {
        if *order == 0 {
            continue;
        }
        let verdict = if row.hit_at_group1 > chance { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {}: hit_at_group1 {:.3} vs chance {:.3}",
            row.config, row.hit_at_group1, chance
        );
    }
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_bench_csv(file, &result.rows).context("writing csv")?;
    }
    Ok(())
}

fn itr(args: ItrArgs) -> Result<(), Failure> {
    if args.seconds.is_nan() || args.seconds <= 0.0 {
        return Err(Failure::Usage("--seconds must be positive".into()));
    }
    if args.letters < 0.0 || args.commands.is_some_and(|c| c < 0.0) {
        return Err(Failure::Usage("counts must be nonnegative".into()));
    }
    let commands = args.commands.unwrap_or(2.0 * args.letters);
    let r = MetricsReport::from_counts(args.letters, commands, args.seconds, M_COMMANDS, M_LETTERS)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    println!("speed: {:.2} letters/min", r.speed_lpm);
    println!("ITR_com: {:.2} bits/min", r.itr_com_bpm);
    println!("ITR_letter: {:.2} bits/min", r.itr_letter_bpm);
    Ok(())
}

fn load_models(dir: &Path) -> anyhow::Result<Vec<PredModel>> {
    let mut models: Vec<PredModel> = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let m = PredModel::load(&p).with_context(|| format!("loading {}", p.display()))?;
        if models.iter().any(|x| x.order() == m.order()) {
            bail!("two models of order {} in {}", m.order(), dir.display());
        }
        models.push(m);
    }
    if models.is_empty() {
        bail!("no model files in {}", dir.display());
    }
    Ok(models)
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let cs = load_charset(args.charset.as_deref())?;
    let models = match &args.models {
        Some(dir) => load_models(dir)?,
        None => {
            let corpus = read_corpus(&args.corpus, &cs, true)?;
            (0..=3)
                .map(|k| PredModel::train(&corpus, k, cs.clone()))
                .collect::<Result<_, _>>()
                .context("training models")?
        }
    };
    let charset_id = args
        .charset
        .as_deref()
        .and_then(|p| p.file_stem())
        .map_or("default".to_string(), |s| s.to_string_lossy().into_owned());
    let gw = Arc::new(Gateway::new(
        models,
        GatewayConfig {
            default_dwell_ms: args.dwell_ms,
            charset_id,
            transcript_dir: args.transcripts,
        },
    ));
    eprintln!("models loaded for orders {:?}", gw.orders());
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(gateway::serve(gw, SocketAddr::new(args.host, args.port), args.static_dir))
        .context("gateway")?;
    Ok(())
}
