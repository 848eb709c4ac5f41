use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use reqltl::backend::{
    Backend, HttpBackend, MockBackend, MockScript, RecordedTransport, Transport, UreqTransport,
};
use reqltl::consistency::{check_set, NamedFormula};
use reqltl::eval::{load_dataset_file, run_eval};
use reqltl::ltl::parse;
use reqltl::pipeline::{parse_requirements, Pipeline, PipelineConfig, Retriever, Variant};
use reqltl::rafsl::{
    build_index, load_corpus_file, shipped_corpus, BuiltinEmbedder, Embedder, LiftedPair,
    RemoteEmbedder, RetrievalIndex,
};

#[derive(Parser)]
#[command(
    name = "reqltl",
    version,
    about = "Translate natural-language requirements to LTL and check them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a requirements file and check the set for consistency.
    Translate(TranslateArgs),
    /// Check a list of formulas for joint satisfiability.
    Check {
        /// JSON array of {"id", "ltl"} objects.
        #[arg(long)]
        formulas: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Example index maintenance.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Score a variant against a labeled dataset.
    Eval(EvalArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Embed a corpus and write the index cache.
    Build {
        /// Lifted-pair JSONL; the shipped corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Provider::Builtin)]
        provider: Provider,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Builtin,
    Remote,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "v7")]
    variant: Variant,
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    /// Mock script JSON (required with `--backend mock`).
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Replay recorded HTTP responses instead of calling the endpoint.
    #[arg(long)]
    recorded: Option<PathBuf>,
    #[arg(long, default_value_t = reqltl::rafsl::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    max_repairs: usize,
    #[arg(long, default_value_t = 2)]
    consistency_rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 256)]
    max_tokens: usize,
    /// Lifted-pair JSONL; the shipped corpus when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Index cache written by `index build`.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Provider::Builtin)]
    provider: Provider,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    /// One requirement per line; `#` lines are comments.
    #[arg(long)]
    input: PathBuf,
    /// Send all requirements in one prompt.
    #[arg(long)]
    joint: bool,
    /// Record wall-clock time in the report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Translate(args) => translate(args),
        Command::Check { formulas, out } => check(&formulas, out.as_deref()),
        Command::Index {
            command:
                IndexCommand::Build {
                    corpus,
                    provider,
                    out,
                },
        } => {
            let pairs = corpus_pairs(corpus.as_deref())?;
            let embedder = embedder(provider, None)?;
            let index = build_index(pairs, embedder.as_ref())?;
            index.save(&out)?;
            eprintln!(
                "indexed {} pairs with {} into {}",
                index.len(),
                index.provider(),
                out.display()
            );
            Ok(())
        }
        Command::Eval(args) => eval(args),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn corpus_pairs(path: Option<&Path>) -> Result<Vec<LiftedPair>> {
    Ok(match path {
        Some(p) => load_corpus_file(p)?,
        None => shipped_corpus(),
    })
}

fn transport(recorded: Option<&Path>) -> Result<Arc<dyn Transport>> {
    Ok(match recorded {
        Some(p) => Arc::new(RecordedTransport::from_file(p)?),
        None => Arc::new(UreqTransport::new(Duration::from_secs(120))),
    })
}

fn embedder(provider: Provider, recorded: Option<&Path>) -> Result<Box<dyn Embedder>> {
    Ok(match provider {
        Provider::Builtin => Box::new(BuiltinEmbedder::default()),
        Provider::Remote => Box::new(RemoteEmbedder::new(HttpBackend::from_env(transport(
            recorded,
        )?)?)),
    })
}

fn backend(run: &RunArgs) -> Result<Box<dyn Backend>> {
    Ok(match run.backend {
        BackendKind::Mock => {
            let Some(path) = &run.mock else {
                bail!("--backend mock needs --mock <script.json>");
            };
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Box::new(MockBackend::new(MockScript::from_json(&text)?)?)
        }
        BackendKind::Http => Box::new(HttpBackend::from_env(transport(run.recorded.as_deref())?)?),
    })
}

fn config(run: &RunArgs, joint: bool) -> PipelineConfig {
    PipelineConfig {
        k: run.k,
        max_repairs: run.max_repairs,
        consistency_rounds: run.consistency_rounds,
        seed: run.seed,
        max_tokens: run.max_tokens,
        temperature: run.temperature,
        joint,
        ..PipelineConfig::for_variant(run.variant)
    }
}

/// Everything a pipeline borrows.
struct Setup {
    config: PipelineConfig,
    backend: Box<dyn Backend>,
    embedder: Option<Box<dyn Embedder>>,
    index: Option<RetrievalIndex>,
}

impl Setup {
    fn new(run: &RunArgs, joint: bool) -> Result<Self> {
        let config = config(run, joint);
        let backend = backend(run)?;
        let (embedder, index) = if config.components.retrieval {
            let embedder = embedder(run.provider, run.recorded.as_deref())?;
            let pairs = corpus_pairs(run.corpus.as_deref())?;
            let index = match &run.index {
                Some(cache) => RetrievalIndex::load(cache, pairs, &embedder.id())?,
                None => build_index(pairs, embedder.as_ref())?,
            };
            (Some(embedder), Some(index))
        } else {
            (None, None)
        };
        Ok(Setup {
            config,
            backend,
            embedder,
            index,
        })
    }

    fn retriever(&self) -> Option<Retriever<'_>> {
        match (&self.index, &self.embedder) {
            (Some(index), Some(embedder)) => Some(Retriever {
                index,
                embedder: embedder.as_ref(),
            }),
            _ => None,
        }
    }
}

fn translate(args: TranslateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let reqs = parse_requirements(&text);
    let setup = Setup::new(&args.run, args.joint)?;
    let retriever = setup.retriever();
    let pipeline = Pipeline::new(
        setup.config.clone(),
        setup.backend.as_ref(),
        retriever.as_ref().map(|r| r as _),
    )?
    .with_wall_time(args.timing);
    let report = pipeline.translate_set(&reqs)?;
    write_json(&report, args.run.out.as_deref())
}

fn eval(args: EvalArgs) -> Result<()> {
    let dataset = load_dataset_file(&args.dataset)?;
    let setup = Setup::new(&args.run, false)?;
    let retriever = setup.retriever();
    let pipeline = Pipeline::new(
        setup.config.clone(),
        setup.backend.as_ref(),
        retriever.as_ref().map(|r| r as _),
    )?;
    let report = run_eval(&dataset, &pipeline)?;
    write_json(&report, args.run.out.as_deref())
}

#[derive(serde::Deserialize)]
struct FormulaEntry {
    id: String,
    ltl: String,
}

fn check(path: &Path, out: Option<&Path>) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<FormulaEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut reqs = Vec::with_capacity(entries.len());
    for e in entries {
        let f = parse(&e.ltl).with_context(|| format!("formula `{}` ({})", e.ltl, e.id))?;
        reqs.push(NamedFormula::new(e.id, f, ""));
    }
    write_json(&check_set(&reqs)?, out)
}
