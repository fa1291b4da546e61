use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kg2corpus::cycles::{CycleConfig, EdgeRelations};
use kg2corpus::inspect::{self, Filter};
use kg2corpus::lang::{self, Lang};
use kg2corpus::mix::{self, MixManifest};
use kg2corpus::pipeline::{self, Kinds, MaskSection, PipelineConfig, StatsReport};
use kg2corpus::sentence::{GenConfig, Mode, DEFAULT_MASK_TOKEN};
use kg2corpus::store::{self, IngestConfig, MissingPolicy};
use kg2corpus::xlr::XlrConfig;
use log::info;

const OUT_ENV: &str = "KG2CORPUS_OUT_DIR";

/// Turn a multilingual knowledge graph into knowledge-intensive pretraining
/// corpora and a multiple-choice reasoning dataset.
///
/// Logging is controlled by KG2CORPUS_LOG (or RUST_LOG), e.g.
/// KG2CORPUS_LOG=debug. Exit status: 0 success, 1 input error, 2 internal
/// error.
#[derive(Parser)]
#[command(name = "kg2corpus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and index a lexicon and triple file into a binary snapshot.
    Ingest(IngestArgs),
    /// Generate code-switched or parallel triple sentences.
    Gen(GenArgs),
    /// Extract length-3 and diagonal length-4 cycles and render reasoning samples.
    Cycles(CyclesArgs),
    /// Build the multiple-choice reasoning dataset and filter the reasoning corpus.
    Xlr(XlrArgs),
    /// Produce masked training records.
    Mask(MaskArgs),
    /// Shuffle the training streams into one tagged stream.
    Mix(MixArgs),
    /// Run every stage from a pipeline config, reusing up-to-date stages.
    RunAll(RunAllArgs),
    /// Print the corpus statistics of a finished run.
    Stats(StatsArgs),
    /// Pretty-print records of any pipeline output file.
    Inspect(InspectArgs),
}

/// Comma-separated language codes.
#[derive(Clone)]
struct Langs(Vec<Lang>);

fn langs(s: &str) -> Result<Langs, String> {
    lang::parse_list(s).map(Langs).map_err(|e| e.to_string())
}

#[derive(Args)]
struct IngestArgs {
    /// Lexicon JSON Lines file.
    #[arg(long)]
    lexicon: PathBuf,
    /// Tab-separated head/relation/tail file.
    #[arg(long)]
    triples: PathBuf,
    /// Snapshot file to write.
    #[arg(long)]
    out: PathBuf,
    /// What to do with triples whose items have no lexicon entry: drop or error.
    #[arg(long, default_value = "drop")]
    on_missing_entity: MissingPolicy,
    /// Languages to keep (comma separated; must include en).
    #[arg(long, value_parser = langs)]
    langs: Option<Langs>,
    /// Maximum surfaces kept per item and language, label included.
    #[arg(long, default_value_t = 16)]
    alias_cap: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// cs (code-switched) or parallel.
    #[arg(long)]
    mode: Mode,
    /// Languages to generate (default: all snapshot languages).
    #[arg(long, value_parser = langs)]
    langs: Option<Langs>,
    /// Share of records rendered with sampled aliases.
    #[arg(long, default_value_t = 0.5)]
    alias_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    mask_token: String,
    /// Output directory (default: $KG2CORPUS_OUT_DIR).
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Args)]
struct CyclesArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// 3, 4 or both.
    #[arg(long, default_value = "both")]
    kind: Kinds,
    /// Entities with more neighbours than this take no part in cycles.
    #[arg(long, default_value_t = 1000)]
    degree_cap: usize,
    /// Use only the first relation on each edge, or all of them.
    #[arg(long, value_enum, default_value = "first")]
    edge_relations: EdgeRelationsArg,
    /// Languages for reasoning samples (default: all snapshot languages).
    #[arg(long, value_parser = langs)]
    langs: Option<Langs>,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    mask_token: String,
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EdgeRelationsArg {
    First,
    All,
}

#[derive(Args)]
struct XlrArgs {
    /// Output directory of the cycles command.
    #[arg(long)]
    cycles: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value_t = 3000)]
    train: usize,
    #[arg(long, default_value_t = 1000)]
    dev: usize,
    /// Candidate test items set aside for manual review.
    #[arg(long, default_value_t = 1050)]
    test_pool: usize,
    /// Cycles considered for the item pool, smallest keys first.
    #[arg(long, default_value_t = 50_000)]
    pool_limit: usize,
    /// Languages to render the test pool in.
    #[arg(long, value_parser = langs)]
    langs: Option<Langs>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MaskTask {
    Knowledge,
    Reason,
}

#[derive(Args)]
struct MaskArgs {
    /// Directory holding gen output (knowledge) or cycles/xlr output (reason).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    task: MaskTask,
    /// TOML file with mlm_probability, min_masked_tokens,
    /// sentence_mask_fraction, one_entity_fraction.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    mask_token: String,
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    /// TOML manifest listing the streams.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Args)]
struct RunAllArgs {
    /// Pipeline TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's out_dir.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// A report.json or the run's output directory.
    path: PathBuf,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
    /// key=value terms over task, lang and id, e.g. "task=reason-len3,lang=fr".
    #[arg(long, default_value = "")]
    filter: String,
    /// Stop after this many records.
    #[arg(long)]
    limit: Option<usize>,
}

fn snapshot_langs(requested: Option<Langs>, available: &[Lang]) -> Vec<Lang> {
    requested.map_or_else(|| available.to_vec(), |l| l.0)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let config = IngestConfig {
        languages: a.langs.map_or_else(lang::default_languages, |l| l.0),
        on_missing_entity: a.on_missing_entity,
        alias_cap: a.alias_cap,
    };
    let report = pipeline::run_ingest(&a.lexicon, &a.triples, &config, &a.out)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let (graph, _) = store::load_snapshot(&a.snapshot)?;
    let config = GenConfig {
        languages: snapshot_langs(a.langs, graph.languages()),
        mask_token: a.mask_token,
        alias_fraction: a.alias_frac,
        seed: a.seed,
    };
    let stats = pipeline::run_gen(&graph, &config, a.mode, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn cycles(a: CyclesArgs) -> Result<()> {
    let (graph, _) = store::load_snapshot(&a.snapshot)?;
    let config = CycleConfig {
        degree_cap: a.degree_cap,
        edge_relations: match a.edge_relations {
            EdgeRelationsArg::First => EdgeRelations::First,
            EdgeRelationsArg::All => EdgeRelations::All,
        },
    };
    let langs = snapshot_langs(a.langs, graph.languages());
    let stats = pipeline::run_cycles(&graph, &config, a.kind, &langs, &a.mask_token, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn xlr(a: XlrArgs) -> Result<()> {
    let (graph, _) = store::load_snapshot(&a.snapshot)?;
    let config = XlrConfig {
        train: a.train,
        dev: a.dev,
        test_pool: a.test_pool,
        pool_limit: a.pool_limit,
        ..XlrConfig::default()
    };
    let langs = snapshot_langs(a.langs, graph.languages());
    let stats = pipeline::run_xlr(&graph, &a.cycles, &config, &langs, a.seed, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn mask(a: MaskArgs) -> Result<()> {
    let section: MaskSection = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| kg2corpus::Error::Config(format!("{}: {e}", p.display())))?
        }
        None => MaskSection::default(),
    };
    let config = section.mask_config(&a.mask_token, a.seed);
    config.validate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stats = match a.task {
        MaskTask::Knowledge => {
            let inputs: Vec<PathBuf> = [Mode::CodeSwitched, Mode::Parallel]
                .iter()
                .map(|m| a.input.join(m.file_name()))
                .filter(|p| p.is_file())
                .collect();
            if inputs.is_empty() {
                bail!(kg2corpus::Error::MissingStream(a.input.join(Mode::Parallel.file_name())));
            }
            pipeline::run_mask(&inputs, None, &config, &a.out)?
        }
        MaskTask::Reason => {
            let filtered = a.input.join(pipeline::FILTERED_REASONING_FILE);
            let plain = a.input.join(pipeline::REASONING_FILE);
            let input = if filtered.is_file() { filtered } else { plain };
            if !input.is_file() {
                bail!(kg2corpus::Error::MissingStream(input));
            }
            pipeline::run_mask(&[], Some(&input), &config, &a.out)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn mix(a: MixArgs) -> Result<()> {
    let manifest = MixManifest::load(&a.manifest)?;
    let report = mix::mix_streams(&manifest, a.seed, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_all(a: RunAllArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&a.config)?;
    if let Some(out) = a.out {
        config.out_dir = out;
    }
    info!("writing to {}", config.out_dir.display());
    let report = pipeline::run_all(&config)?;
    print_table(&report);
    Ok(())
}

fn print_table(r: &StatsReport) {
    let t = &r.table;
    let rows = [
        ("languages", t.languages),
        ("code switched synthetic sentences", t.code_switched_sentences),
        ("parallel synthetic sentences", t.parallel_sentences),
        ("unique relation combinations in length-3 cycles", t.len3_unique_relation_combinations),
        ("unique relation combinations in length-4 cycles", t.len4_unique_relation_combinations),
        ("reasoning based training samples from length-3 cycles", t.len3_reasoning_samples),
        ("reasoning based training samples from length-4 cycles", t.len4_reasoning_samples),
    ];
    for (name, n) in rows {
        println!("{name:<56}{n:>14}");
    }
    println!("{:<56}{:>14}", "config fingerprint", &r.config_fingerprint[..12]);
}

fn stats(a: StatsArgs) -> Result<()> {
    let path = if a.path.is_dir() {
        a.path.join(pipeline::REPORT_FILE)
    } else {
        a.path
    };
    let report = StatsReport::load(&path)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_table(&report);
    }
    Ok(())
}

fn inspect_cmd(a: InspectArgs) -> Result<()> {
    let filter = Filter::parse(&a.filter)?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let shown = inspect::inspect(&a.file, &filter, a.limit, &mut out)?;
    out.flush()?;
    info!("{shown} records shown");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Gen(a) => gen(a),
        Command::Cycles(a) => cycles(a),
        Command::Xlr(a) => xlr(a),
        Command::Mask(a) => mask(a),
        Command::Mix(a) => mix(a),
        Command::RunAll(a) => run_all(a),
        Command::Stats(a) => stats(a),
        Command::Inspect(a) => inspect_cmd(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<kg2corpus::Error>());
    match core {
        Some(e) if e.is_input_error() => 1,
        Some(_) => 2,
        None if err.chain().any(|e| e.downcast_ref::<io::Error>().is_some()) => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("KG2CORPUS_LOG", std::env::var("RUST_LOG").unwrap_or_else(|_| "info".into())),
    )
    .format_timestamp(None)
    .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
