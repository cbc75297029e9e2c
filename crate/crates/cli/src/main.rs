//! `pst`: train, evaluate, sample from and inspect suffix-tree mixture models.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
//! Every command echoes its effective configuration as `# key=value` lines
//! before any output. Set `PST_LOG` (e.g. `PST_LOG=debug`) for diagnostics.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};

use pst_core::evaluation::{evaluate, evaluate_online, extract_map, rank_candidates, EvalReport};
use pst_core::generation::{generate, WalkConfig};
use pst_core::persist::{load_from_path, save_to_path};
use pst_core::{
    split_corpus, tokenize, Document, Model, ModelConfig, PrunePolicy, SentenceMode, SymbolTable, TokenStream,
    TokenizerRules, WordId,
};

#[derive(Parser, Debug)]
#[command(name = "pst", version, about = "Bayesian mixtures of prediction suffix trees over words")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model with one online pass and save it.
    Train(TrainArgs),
    /// Report perplexity of a text under a model.
    Eval(EvalArgs),
    /// Sample text by random walks over a model.
    Generate(GenerateArgs),
    /// Rank alternative sentences, one per line, by posterior probability.
    Rank(RankArgs),
    /// Remove nodes visited fewer than a threshold number of times.
    Prune(PruneArgs),
    /// Print model statistics.
    Stats(StatsArgs),
    /// Split a text into training and test sentences.
    Split(SplitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Sentences {
    Punctuation,
    Lines,
}

#[derive(Args, Debug, Clone)]
struct TextArgs {
    /// Lowercase words before interning.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    lowercase: Switch,
}

impl TextArgs {
    fn rules(&self) -> TokenizerRules {
        TokenizerRules {
            lowercase: self.lowercase == Switch::On,
            ..TokenizerRules::default()
        }
    }

    fn echo(&self, out: &mut Vec<(&'static str, String)>) {
        out.push(("lowercase", format!("{:?}", self.lowercase).to_lowercase()));
    }
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Maximum context depth.
    #[arg(long, default_value_t = 5)]
    depth: usize,

    /// Prior probability that a node is a leaf.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Prune nodes with fewer visits than this; enables periodic pruning.
    #[arg(long)]
    prune_threshold: Option<u64>,

    /// Observations between pruning passes; enables periodic pruning.
    #[arg(long)]
    prune_interval: Option<u64>,
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        let prune = (self.prune_threshold.is_some() || self.prune_interval.is_some()).then(|| {
            let d = PrunePolicy::default();
            PrunePolicy {
                interval: self.prune_interval.unwrap_or(d.interval),
                threshold: self.prune_threshold.unwrap_or(d.threshold),
            }
        });
        ModelConfig {
            max_depth: self.depth,
            alpha: self.alpha,
            prune,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,

    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,

    #[command(flatten)]
    hyper: ModelArgs,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args, Debug)]
#[group(id = "eval_mode", required = true, multiple = false, args = ["frozen", "adapt"])]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,

    /// Model to evaluate. Required with --frozen; with --adapt a fresh
    /// model is built from --depth and --alpha when omitted.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Score without changing the model.
    #[arg(long, requires = "model")]
    frozen: bool,

    /// Update the model after every token.
    #[arg(long)]
    adapt: bool,

    /// With --adapt, write the updated model here.
    #[arg(long, requires = "adapt")]
    save: Option<PathBuf>,

    /// Score with the MAP tree instead of the mixture (--frozen only).
    #[arg(long, conflicts_with = "adapt")]
    map: bool,

    /// Print a table instead of key=value lines.
    #[arg(long)]
    table: bool,

    #[command(flatten)]
    hyper: ModelArgs,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,

    /// Seed for the ChaCha20 generator.
    #[arg(long)]
    seed: u64,

    #[arg(long, default_value_t = 50)]
    words: usize,

    /// Starting history; padding when omitted.
    #[arg(long)]
    history: Option<String>,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    model: PathBuf,

    /// One candidate sentence per line.
    #[arg(long)]
    candidates: PathBuf,

    /// Score with the MAP tree instead of the mixture.
    #[arg(long)]
    map: bool,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args, Debug)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long, default_value_t = 2)]
    prune_threshold: u64,

    /// Where to write the pruned model; defaults to overwriting --model.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    seed: u64,

    /// Probability that a sentence goes to the training side.
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,

    #[arg(long)]
    train_out: PathBuf,

    #[arg(long)]
    test_out: PathBuf,

    /// Sentence boundaries: end punctuation and newlines, or newlines only.
    #[arg(long, value_enum, default_value_t = Sentences::Punctuation)]
    sentences: Sentences,

    #[command(flatten)]
    text: TextArgs,
}

fn echo(out: &mut impl Write, command: &str, pairs: &[(&str, String)]) -> io::Result<()> {
    writeln!(out, "# command={command}")?;
    for (k, v) in pairs {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    let model = load_from_path(path).with_context(|| format!("cannot load model {}", path.display()))?;
    info!("loaded {} ({} nodes)", path.display(), model.node_count());
    Ok(model)
}

fn save_model(model: &Model, path: &Path) -> Result<()> {
    save_to_path(model, path).with_context(|| format!("cannot write model {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn hyper_pairs(config: &ModelConfig) -> Vec<(&'static str, String)> {
    let mut pairs = vec![("depth", config.max_depth.to_string()), ("alpha", config.alpha.to_string())];
    match config.prune {
        Some(p) => {
            pairs.push(("prune_interval", p.interval.to_string()));
            pairs.push(("prune_threshold", p.threshold.to_string()));
        }
        None => pairs.push(("prune", "off".into())),
    }
    pairs
}

/// Ids for `tokens`, giving words the model never saw fresh ids without
/// touching the model's own table.
fn ids_outside(vocab: &SymbolTable, tokens: &[pst_core::Token]) -> Vec<WordId> {
    let mut table = vocab.clone();
    tokens.iter().map(|t| table.intern(t)).collect()
}

fn report(out: &mut impl Write, r: &EvalReport, table: bool) -> io::Result<()> {
    if table {
        write!(out, "{}", r.to_table())
    } else {
        write!(out, "{}", r.to_key_values())
    }
}

fn train(args: TrainArgs, out: &mut impl Write) -> Result<()> {
    let config = args.hyper.config();
    let mut pairs = hyper_pairs(&config);
    pairs.insert(0, ("input", args.input.display().to_string()));
    pairs.push(("model", args.model.display().to_string()));
    args.text.echo(&mut pairs);
    echo(out, "train", &pairs)?;

    let text = read_text(&args.input)?;
    let mut model = Model::new(config)?;
    let tokens = tokenize(&text, &args.text.rules());
    if tokens.is_empty() {
        bail!("{} holds no words", args.input.display());
    }
    let stream = TokenStream::from_tokens(args.input.display().to_string(), &tokens, model.vocab_mut());
    let r = evaluate_online(&mut model, &stream, false)?;
    save_model(&model, &args.model)?;
    writeln!(
        out,
        "nodes={} tokens={} vocab={}",
        model.node_count(),
        model.tokens_seen(),
        model.vocab().len() - SymbolTable::RESERVED
    )?;
    report(out, &r, false)?;
    Ok(())
}

fn eval(args: EvalArgs, out: &mut impl Write) -> Result<()> {
    let mut model = match &args.model {
        Some(path) => load_model(path)?,
        None => Model::new(args.hyper.config())?,
    };
    let mut pairs = vec![
        ("input", args.input.display().to_string()),
        (
            "model",
            args.model.as_ref().map_or("fresh".into(), |p| p.display().to_string()),
        ),
        ("mode", if args.adapt { "adapt" } else { "frozen" }.into()),
        ("predictor", if args.map { "map" } else { "mixture" }.into()),
    ];
    pairs.extend(hyper_pairs(model.config()));
    args.text.echo(&mut pairs);
    echo(out, "eval", &pairs)?;

    let text = read_text(&args.input)?;
    let tokens = tokenize(&text, &args.text.rules());
    if tokens.is_empty() {
        bail!("{} holds no words", args.input.display());
    }
    let r = if args.adapt {
        let stream = TokenStream::from_tokens(args.input.display().to_string(), &tokens, model.vocab_mut());
        let r = evaluate_online(&mut model, &stream, false)?;
        if let Some(path) = &args.save {
            save_model(&model, path)?;
        }
        r
    } else {
        let stream = TokenStream::new(args.input.display().to_string(), ids_outside(model.vocab(), &tokens));
        model.freeze();
        if args.map {
            evaluate(&extract_map(&model), &stream, false)?
        } else {
            evaluate(&model, &stream, false)?
        }
    };
    report(out, &r, args.table)?;
    Ok(())
}

fn generate_cmd(args: GenerateArgs, out: &mut impl Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let mut pairs = vec![
        ("model", args.model.display().to_string()),
        ("seed", args.seed.to_string()),
        ("words", args.words.to_string()),
        ("history", args.history.clone().unwrap_or_default()),
    ];
    args.text.echo(&mut pairs);
    echo(out, "generate", &pairs)?;

    let history = match &args.history {
        Some(h) => ids_outside(model.vocab(), &tokenize(h, &args.text.rules())),
        None => Vec::new(),
    };
    let config = WalkConfig {
        word_count: args.words,
        seed: args.seed,
        history,
    };
    let words = generate(&model, &config)?;
    writeln!(out, "{}", words.join(" "))?;
    Ok(())
}

fn rank(args: RankArgs, out: &mut impl Write) -> Result<()> {
    let mut model = load_model(&args.model)?;
    let mut pairs = vec![
        ("model", args.model.display().to_string()),
        ("candidates", args.candidates.display().to_string()),
        ("predictor", if args.map { "map" } else { "mixture" }.into()),
    ];
    args.text.echo(&mut pairs);
    echo(out, "rank", &pairs)?;

    let text = read_text(&args.candidates)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut table = model.vocab().clone();
    let candidates: Vec<Vec<WordId>> = lines
        .iter()
        .map(|l| {
            tokenize(l, &args.text.rules()).iter().map(|t| table.intern(t)).collect()
        })
        .collect();
    model.freeze();
    let ranked = if args.map {
        rank_candidates(&extract_map(&model), &candidates)?
    } else {
        rank_candidates(&model, &candidates)?
    };
    writeln!(out, "rank\tneg_log2\tposterior\tsentence")?;
    for (i, r) in ranked.iter().enumerate() {
        writeln!(out, "{}\t{:.3}\t{:.3}\t{}", i + 1, r.neg_log2, r.posterior, lines[r.index].trim())?;
    }
    Ok(())
}

fn prune(args: PruneArgs, out: &mut impl Write) -> Result<()> {
    let output = args.output.clone().unwrap_or_else(|| args.model.clone());
    echo(
        out,
        "prune",
        &[
            ("model", args.model.display().to_string()),
            ("prune_threshold", args.prune_threshold.to_string()),
            ("output", output.display().to_string()),
        ],
    )?;
    let mut model = load_model(&args.model)?;
    let before = model.node_count();
    let removed = model.prune(args.prune_threshold)?;
    save_model(&model, &output)?;
    writeln!(out, "nodes_before={before}\nremoved={removed}\nnodes_after={}", model.node_count())?;
    Ok(())
}

fn stats(args: StatsArgs, out: &mut impl Write) -> Result<()> {
    echo(out, "stats", &[("model", args.model.display().to_string())])?;
    let model = load_model(&args.model)?;
    for (k, v) in hyper_pairs(model.config()) {
        writeln!(out, "{k}={v}")?;
    }
    let trie = model.trie();
    let mut per_depth = vec![0usize; model.max_depth() + 2];
    for id in trie.node_ids() {
        per_depth[trie.node(id).depth as usize] += 1;
    }
    writeln!(out, "tokens={}", model.tokens_seen())?;
    writeln!(out, "vocab={}", model.vocab().len() - SymbolTable::RESERVED)?;
    writeln!(out, "nodes={}", model.node_count())?;
    for (d, n) in per_depth.iter().enumerate() {
        writeln!(out, "nodes_depth_{d}={n}")?;
    }
    writeln!(out, "map_tree_nodes={}", extract_map(&model).tree_size())?;
    writeln!(out, "frozen={}", model.is_frozen())?;
    Ok(())
}

fn split(args: SplitArgs, out: &mut impl Write) -> Result<()> {
    let mut pairs = vec![
        ("input", args.input.display().to_string()),
        ("seed", args.seed.to_string()),
        ("train_fraction", args.train_fraction.to_string()),
        ("train_out", args.train_out.display().to_string()),
        ("test_out", args.test_out.display().to_string()),
    ];
    pairs.push(("sentences", format!("{:?}", args.sentences).to_lowercase()));
    args.text.echo(&mut pairs);
    echo(out, "split", &pairs)?;

    let mode = match args.sentences {
        Sentences::Punctuation => SentenceMode::Punctuation,
        Sentences::Lines => SentenceMode::Lines,
    };
    let text = read_text(&args.input)?;
    let mut table = SymbolTable::new();
    let doc = Document::from_text("input", &text, &args.text.rules(), mode, &mut table);
    let (train, test) = split_corpus(&doc, args.train_fraction, args.seed)?;
    for (side, path) in [(&train, &args.train_out), (&test, &args.test_out)] {
        let mut body = String::new();
        for sentence in side.sentences() {
            let words: Vec<&str> = sentence.iter().map(|&w| table.resolve(w).unwrap_or("")).collect();
            body.push_str(&words.join(" "));
            body.push('\n');
        }
        fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?;
    }
    writeln!(
        out,
        "train_sentences={}\ntrain_tokens={}\ntest_sentences={}\ntest_tokens={}",
        train.sentence_count(),
        train.stream.len(),
        test.sentence_count(),
        test.stream.len()
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    debug!("{cli:?}");
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    match cli.command {
        Command::Train(a) => train(a, &mut out)?,
        Command::Eval(a) => eval(a, &mut out)?,
        Command::Generate(a) => generate_cmd(a, &mut out)?,
        Command::Rank(a) => rank(a, &mut out)?,
        Command::Prune(a) => prune(a, &mut out)?,
        Command::Stats(a) => stats(a, &mut out)?,
        Command::Split(a) => split(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PST_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
