//! End-to-end orchestration: ingest, gen, cycles, xlr, mask, mix.
//!
//! Every stage writes into its own directory under the output root and
//! records a `.done` marker holding a fingerprint of everything the stage
//! read: its configuration, the fingerprints of upstream stages and the
//! content hashes of external input files. A rerun skips a stage whose
//! marker matches and whose outputs are still present.

use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cycles::{self, CycleConfig, CycleKind, CycleRecord, EdgeRelations, RelationCombinationStats};
use crate::error::{Error, Result};
use crate::jsonl::{self, schema_tag, JsonlWriter};
use crate::lang::{self, Lang};
use crate::mask::{self, MaskConfig, MaskStats};
use crate::mix::{self, MixManifest, MixReport, StreamKind, StreamSpec};
use crate::sentence::{self, GenConfig, GenStats, Mode, DEFAULT_MASK_TOKEN};
use crate::store::{self, IngestConfig, IngestReport, KnowledgeGraph, MissingPolicy};
use crate::seed;
use crate::xlr::{self, ItemBuilder, LeakageFilter, XlrConfig, XlrItem};

pub const SNAPSHOT_FILE: &str = "graph.snap";
pub const CYCLES_FILE: &str = "cycles.jsonl";
pub const REASONING_FILE: &str = "reasoning.jsonl";
pub const FILTERED_REASONING_FILE: &str = "reasoning.filtered.jsonl";
pub const BLOCKED_KEYS_FILE: &str = "blocked_keys.txt";
pub const WORKSHEET_FILE: &str = "annotation.tsv";
pub const KNOWLEDGE_FILE: &str = "knowledge.jsonl";
pub const REPORT_FILE: &str = "report.json";
const DONE_FILE: &str = ".done";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub lexicon: PathBuf,
    pub triples: PathBuf,
    pub on_missing_entity: MissingPolicy,
    pub alias_cap: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            lexicon: PathBuf::from("lexicon.jsonl"),
            triples: PathBuf::from("triples.tsv"),
            on_missing_entity: MissingPolicy::Drop,
            alias_cap: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub mask_token: String,
    pub alias_fraction: f64,
}

impl Default for GenSection {
    fn default() -> Self {
        GenSection {
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            alias_fraction: 0.5,
        }
    }
}

/// Which cycle kinds to extract.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kinds {
    Len3,
    Len4,
    #[default]
    Both,
}

impl Kinds {
    pub fn includes(self, kind: CycleKind) -> bool {
        matches!(
            (self, kind),
            (Kinds::Both, _) | (Kinds::Len3, CycleKind::Len3) | (Kinds::Len4, CycleKind::Len4Diagonal)
        )
    }
}

impl std::str::FromStr for Kinds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3" | "len3" => Ok(Kinds::Len3),
            "4" | "len4" => Ok(Kinds::Len4),
            "both" => Ok(Kinds::Both),
            other => Err(Error::Config(format!("unknown cycle kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CyclesSection {
    pub kinds: Kinds,
    pub degree_cap: Option<usize>,
    pub edge_relations: EdgeRelations,
}

impl CyclesSection {
    pub fn cycle_config(&self) -> CycleConfig {
        let d = CycleConfig::default();
        CycleConfig {
            degree_cap: self.degree_cap.unwrap_or(d.degree_cap),
            edge_relations: self.edge_relations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    /// Plain-text stream files passed through untouched.
    pub plain: Vec<PathBuf>,
    pub alpha: f64,
    pub plain_batch_size: usize,
    pub knowledge_batch_size: usize,
    pub reasoning_batch_size: usize,
    pub max_seq_len: usize,
    pub shard_records: usize,
}

impl Default for MixSection {
    fn default() -> Self {
        let m = MixManifest::default();
        MixSection {
            plain: Vec::new(),
            alpha: m.alpha,
            plain_batch_size: 9600,
            knowledge_batch_size: 9600,
            reasoning_batch_size: 9600,
            max_seq_len: m.max_seq_len,
            shard_records: m.shard_records,
        }
    }
}

/// Mask settings as they appear in the config file; the seed comes from the
/// global seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSection {
    pub mlm_probability: f64,
    pub min_masked_tokens: usize,
    pub sentence_mask_fraction: f64,
    pub one_entity_fraction: f64,
}

impl Default for MaskSection {
    fn default() -> Self {
        let m = MaskConfig::default();
        MaskSection {
            mlm_probability: m.mlm_probability,
            min_masked_tokens: m.min_masked_tokens,
            sentence_mask_fraction: m.sentence_mask_fraction,
            one_entity_fraction: m.one_entity_fraction,
        }
    }
}

impl MaskSection {
    pub fn mask_config(&self, mask_token: &str, seed: u64) -> MaskConfig {
        MaskConfig {
            mlm_probability: self.mlm_probability,
            min_masked_tokens: self.min_masked_tokens,
            sentence_mask_fraction: self.sentence_mask_fraction,
            one_entity_fraction: self.one_entity_fraction,
            mask_token: mask_token.to_string(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub languages: Vec<Lang>,
    pub out_dir: PathBuf,
    pub ingest: IngestSection,
    pub gen: GenSection,
    pub cycles: CyclesSection,
    pub xlr: XlrConfig,
    pub mask: MaskSection,
    pub mix: MixSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            languages: lang::default_languages(),
            out_dir: PathBuf::from("out"),
            ingest: IngestSection::default(),
            gen: GenSection::default(),
            cycles: CyclesSection::default(),
            xlr: XlrConfig::default(),
            mask: MaskSection::default(),
            mix: MixSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut c.out_dir);
        fix(&mut c.ingest.lexicon);
        fix(&mut c.ingest.triples);
        c.mix.plain.iter_mut().for_each(fix);
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() || !self.languages.contains(&Lang::EN) {
            return Err(Error::Config("languages must be non-empty and include en".into()));
        }
        for p in [&self.ingest.lexicon, &self.ingest.triples].into_iter().chain(&self.mix.plain) {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} not found", p.display())));
            }
        }
        self.gen_config().validate()?;
        self.mask_config().validate()?;
        self.xlr.validate()?;
        self.mix_manifest(Path::new("")).validate()
    }

    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            languages: self.languages.clone(),
            on_missing_entity: self.ingest.on_missing_entity,
            alias_cap: self.ingest.alias_cap,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            languages: self.languages.clone(),
            mask_token: self.gen.mask_token.clone(),
            alias_fraction: self.gen.alias_fraction,
            seed: stage_seed(self.seed, "gen"),
        }
    }

    pub fn mask_config(&self) -> MaskConfig {
        self.mask.mask_config(&self.gen.mask_token, stage_seed(self.seed, "mask"))
    }

    fn mix_manifest(&self, out_dir: &Path) -> MixManifest {
        let mask_dir = out_dir.join("mask");
        let mut streams = Vec::new();
        if !self.mix.plain.is_empty() {
            streams.push(StreamSpec {
                kind: StreamKind::Plain,
                paths: self.mix.plain.clone(),
                batch_size: self.mix.plain_batch_size,
            });
        }
        streams.push(StreamSpec {
            kind: StreamKind::Knowledge,
            paths: vec![mask_dir.join(KNOWLEDGE_FILE)],
            batch_size: self.mix.knowledge_batch_size,
        });
        streams.push(StreamSpec {
            kind: StreamKind::Reasoning,
            paths: vec![mask_dir.join(REASONING_FILE)],
            batch_size: self.mix.reasoning_batch_size,
        });
        MixManifest {
            streams,
            alpha: self.mix.alpha,
            max_seq_len: self.mix.max_seq_len,
            shard_records: self.mix.shard_records,
        }
    }
}

/// Seed for one stage, derived from the global seed.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    seed::derive(global, &[seed::tag(stage)])
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn fingerprint<T: Serialize>(stage: &str, inputs: &T) -> Result<String> {
    let json = serde_json::to_vec(inputs)?;
    Ok(sha_hex(&[stage.as_bytes(), &json]))
}

#[derive(Serialize, Deserialize)]
struct Done<S> {
    fingerprint: String,
    stats: S,
}

fn read_done<S: DeserializeOwned>(dir: &Path, fp: &str, outputs: &[&str]) -> Option<S> {
    let text = fs::read_to_string(dir.join(DONE_FILE)).ok()?;
    let done: Done<S> = serde_json::from_str(&text).ok()?;
    (done.fingerprint == fp && outputs.iter().all(|o| dir.join(o).is_file())).then_some(done.stats)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_done<S: Serialize>(dir: &Path, fp: &str, stats: &S) -> Result<()> {
    write_json(
        &dir.join(DONE_FILE),
        &Done {
            fingerprint: fp.to_string(),
            stats,
        },
    )
}

fn prepare(dir: &Path) -> Result<()> {
    let _ = fs::remove_file(dir.join(DONE_FILE));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: name,
            source: Box::new(e),
        },
    })
}

// ---- stage bodies, shared with the CLI verbs ----

pub fn run_ingest(lexicon: &Path, triples: &Path, config: &IngestConfig, snapshot: &Path) -> Result<IngestReport> {
    let (graph, report) = store::ingest(lexicon, triples, config)?;
    store::save_snapshot(snapshot, &graph, &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStageStats {
    pub code_switched: Option<GenStats>,
    pub parallel: Option<GenStats>,
}

pub fn run_gen(graph: &KnowledgeGraph, config: &GenConfig, mode: Mode, out_dir: &Path) -> Result<GenStats> {
    let mut w = JsonlWriter::create(out_dir.join(mode.file_name()))?;
    let stats = sentence::gen_corpus(graph, config, mode, |s| w.write(s))?;
    w.finish()?;
    Ok(stats)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStageStats {
    pub len3: Option<cycles::ExtractReport>,
    pub len4: Option<cycles::ExtractReport>,
    pub relation_combinations: RelationCombinationStats,
    pub reasoning_len3: u64,
    pub reasoning_len4: u64,
    /// (cycle, language) pairs without the labels to render.
    pub unrenderable: u64,
}

/// Extracts cycles, writes them in key order (len3 first), and renders one
/// reasoning sample per cycle and language.
pub fn run_cycles(
    graph: &KnowledgeGraph,
    config: &CycleConfig,
    kinds: Kinds,
    langs: &[Lang],
    mask: &str,
    out_dir: &Path,
) -> Result<CycleStageStats> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut stats = CycleStageStats::default();
    let mut cyc = JsonlWriter::create(out_dir.join(CYCLES_FILE))?;
    let mut rs = JsonlWriter::create(out_dir.join(REASONING_FILE))?;
    let mut combos = Vec::new();
    for kind in [CycleKind::Len3, CycleKind::Len4Diagonal] {
        if !kinds.includes(kind) {
            continue;
        }
        let (found, report) = match kind {
            CycleKind::Len3 => cycles::extract_len3(graph, config),
            CycleKind::Len4Diagonal => cycles::extract_len4(graph, config),
        };
        info!("{} {} cycles, {} hubs skipped", report.cycles, kind.name(), report.hubs_skipped);
        for chunk in found.chunks(4096) {
            let rendered: Vec<(CycleRecord, Vec<Option<cycles::ReasoningSample>>)> = chunk
                .par_iter()
                .map(|c| {
                    let samples = langs.iter().map(|&l| cycles::render_reasoning(graph, c, l, mask)).collect();
                    (CycleRecord::new(graph, c), samples)
                })
                .collect();
            for (rec, samples) in rendered {
                cyc.write(&rec)?;
                for s in samples {
                    match s {
                        Some(s) => {
                            match kind {
                                CycleKind::Len3 => stats.reasoning_len3 += 1,
                                CycleKind::Len4Diagonal => stats.reasoning_len4 += 1,
                            }
                            rs.write(&s)?;
                        }
                        None => stats.unrenderable += 1,
                    }
                }
            }
        }
        combos.extend(found.iter().map(|c| cycles::relation_ids(graph, c)));
        match kind {
            CycleKind::Len3 => stats.len3 = Some(report),
            CycleKind::Len4Diagonal => stats.len4 = Some(report),
        }
    }
    stats.relation_combinations = cycles::relation_combination_stats(combos);
    cyc.finish()?;
    rs.finish()?;
    Ok(stats)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct XlrStageStats {
    pub cycles_considered: u64,
    pub items_built: u64,
    pub train: u64,
    pub dev: u64,
    pub test_pool: u64,
    /// Test-pool renderings per language.
    pub test_rendered: Vec<(Lang, u64)>,
    pub test_languages_skipped: u64,
    pub blocked_keys: u64,
    pub reasoning_kept: u64,
    pub reasoning_removed: u64,
}

/// Cycles with the `limit` smallest keys, in key order.
fn cycle_pool(graph: &KnowledgeGraph, path: &Path, limit: usize) -> Result<(Vec<cycles::Cycle>, u64)> {
    let mut heap: BinaryHeap<cycles::CycleKey> = BinaryHeap::new();
    let mut records = Vec::new();
    let mut seen = 0u64;
    jsonl::for_each_record(path, |_, r: CycleRecord| {
        seen += 1;
        if limit == 0 {
            return Ok(());
        }
        if heap.len() < limit {
            heap.push(r.key);
            records.push(r);
        } else if r.key < *heap.peek().unwrap() {
            heap.pop();
            heap.push(r.key);
            records.push(r);
        }
        if records.len() > 4 * limit.max(1024) {
            let cut = *heap.peek().unwrap();
            records.retain(|x| x.key <= cut);
        }
        Ok(())
    })?;
    if let Some(&cut) = heap.peek() {
        records.retain(|x| x.key <= cut);
    }
    records.sort_by_key(|r| r.key);
    let cycles = records.iter().map(|r| r.resolve(graph)).collect::<Result<_>>()?;
    Ok((cycles, seen))
}

/// Builds the item pool, selects the test pool and train/dev splits, renders
/// the test pool in every language, and filters the reasoning corpus.
pub fn run_xlr(
    graph: &KnowledgeGraph,
    cycles_dir: &Path,
    config: &XlrConfig,
    langs: &[Lang],
    seed: u64,
    out_dir: &Path,
) -> Result<XlrStageStats> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (pool_cycles, _) = cycle_pool(graph, &cycles_dir.join(CYCLES_FILE), config.pool_limit)?;
    let builder = ItemBuilder::new(graph, config);
    let pool: Vec<XlrItem> = pool_cycles
        .par_iter()
        .filter_map(|c| builder.build_item(c, Lang::EN, seed))
        .collect();
    info!("{} items from {} cycles", pool.len(), pool_cycles.len());
    let (test, split) = xlr::select_all(&pool, config, seed)?;
    jsonl::write_all(&out_dir.join("train.jsonl"), &split.train)?;
    jsonl::write_all(&out_dir.join("dev.jsonl"), &split.dev)?;
    let mut stats = XlrStageStats {
        cycles_considered: pool_cycles.len() as u64,
        items_built: pool.len() as u64,
        train: split.train.len() as u64,
        dev: split.dev.len() as u64,
        test_pool: test.len() as u64,
        ..Default::default()
    };
    let mut per_lang: Vec<Vec<XlrItem>> = vec![Vec::new(); langs.len()];
    for item in &test {
        let (rendered, skipped) = builder.render_multilingual(item, langs)?;
        stats.test_languages_skipped += skipped as u64;
        for r in rendered {
            let k = langs.iter().position(|&l| l == r.lang).unwrap();
            per_lang[k].push(r);
        }
    }
    for (l, items) in langs.iter().zip(&per_lang) {
        jsonl::write_all(&out_dir.join(format!("test_pool.{l}.jsonl")), items)?;
        stats.test_rendered.push((*l, items.len() as u64));
    }
    xlr::write_worksheet(&out_dir.join(WORKSHEET_FILE), &test)?;
    let filter = LeakageFilter::from_items(&test);
    let keys = out_dir.join(BLOCKED_KEYS_FILE);
    fs::write(&keys, filter.to_text()).map_err(|e| Error::io(&keys, e))?;
    stats.blocked_keys = filter.blocked.len() as u64;
    let (kept, removed) = filter.apply_file(
        &cycles_dir.join(REASONING_FILE),
        &out_dir.join(FILTERED_REASONING_FILE),
    )?;
    stats.reasoning_kept = kept;
    stats.reasoning_removed = removed;
    Ok(stats)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskStageStats {
    pub knowledge: MaskStats,
    pub reasoning: MaskStats,
}

/// Masks sentence files into `knowledge.jsonl` and a reasoning file into
/// `reasoning.jsonl`.
pub fn run_mask(
    sentence_files: &[PathBuf],
    reasoning_file: Option<&Path>,
    config: &MaskConfig,
    out_dir: &Path,
) -> Result<MaskStageStats> {
    let mut stats = MaskStageStats::default();
    if !sentence_files.is_empty() {
        let mut w = JsonlWriter::create(out_dir.join(KNOWLEDGE_FILE))?;
        for f in sentence_files {
            let s = mask::mask_sentence_file(f, config, &mut w)?;
            merge_mask_stats(&mut stats.knowledge, &s);
        }
        w.finish()?;
    }
    if let Some(f) = reasoning_file {
        let mut w = JsonlWriter::create(out_dir.join(REASONING_FILE))?;
        stats.reasoning = mask::mask_reasoning_file(f, config, &mut w)?;
        w.finish()?;
    }
    Ok(stats)
}

fn merge_mask_stats(a: &mut MaskStats, b: &MaskStats) {
    a.records += b.records;
    a.knowledge += b.knowledge;
    a.reason_len3 += b.reason_len3;
    a.reason_len4_partial += b.reason_len4_partial;
    a.reason_len4_sentence += b.reason_len4_sentence;
    a.content_tokens += b.content_tokens;
    a.masked_tokens += b.masked_tokens;
}

// ---- report ----

schema_tag!(StatsSchema = "stats/v1");

/// The pretraining corpus summary, one field per row of the usual corpus
/// statistics table.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTable {
    pub languages: u64,
    pub code_switched_sentences: u64,
    pub parallel_sentences: u64,
    pub len3_unique_relation_combinations: u64,
    pub len4_unique_relation_combinations: u64,
    pub len3_reasoning_samples: u64,
    pub len4_reasoning_samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema: StatsSchema,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub generated_at: u64,
    pub config_fingerprint: String,
    pub languages: Vec<Lang>,
    pub table: CorpusTable,
    pub ingest: IngestReport,
    pub gen: GenStageStats,
    pub cycles: CycleStageStats,
    pub xlr: XlrStageStats,
    pub mask: MaskStageStats,
    pub mix: MixReport,
    /// Stages served from a previous run.
    pub cached_stages: Vec<String>,
}

impl StatsReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Runs (or resumes) every stage and writes `report.json` under the output
/// directory.
pub fn run_all(config: &PipelineConfig) -> Result<StatsReport> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut cached = Vec::new();
    let mut note = |name: &str, hit: bool| {
        if hit {
            info!("{name}: up to date");
            cached.push(name.to_string());
        } else {
            info!("{name}: running");
        }
    };

    // ingest
    let dir = out.join("ingest");
    let snapshot = dir.join(SNAPSHOT_FILE);
    let ingest_fp = stage(
        "ingest",
        (|| {
            fingerprint(
                "ingest",
                &(
                    file_sha256(&config.ingest.lexicon)?,
                    file_sha256(&config.ingest.triples)?,
                    config.ingest_config(),
                ),
            )
        })(),
    )?;
    let ingest_report = match read_done::<IngestReport>(&dir, &ingest_fp, &[SNAPSHOT_FILE]) {
        Some(r) => {
            note("ingest", true);
            r
        }
        None => {
            note("ingest", false);
            stage("ingest", (|| {
                prepare(&dir)?;
                let r = run_ingest(&config.ingest.lexicon, &config.ingest.triples, &config.ingest_config(), &snapshot)?;
                write_done(&dir, &ingest_fp, &r)?;
                Ok(r)
            })())?
        }
    };
    let mut graph: Option<KnowledgeGraph> = None;
    let load_graph = |graph: &mut Option<KnowledgeGraph>| -> Result<()> {
        if graph.is_none() {
            *graph = Some(store::load_snapshot(&snapshot)?.0);
        }
        Ok(())
    };

    // gen
    let dir = out.join("gen");
    let gen_cfg = config.gen_config();
    let gen_fp = fingerprint("gen", &(&ingest_fp, &gen_cfg))?;
    let gen_outputs = [Mode::CodeSwitched.file_name(), Mode::Parallel.file_name()];
    let gen_stats = match read_done::<GenStageStats>(&dir, &gen_fp, &gen_outputs) {
        Some(s) => {
            note("gen", true);
            s
        }
        None => {
            note("gen", false);
            stage("gen", (|| {
                prepare(&dir)?;
                load_graph(&mut graph)?;
                let g = graph.as_ref().unwrap();
                let s = GenStageStats {
                    code_switched: Some(run_gen(g, &gen_cfg, Mode::CodeSwitched, &dir)?),
                    parallel: Some(run_gen(g, &gen_cfg, Mode::Parallel, &dir)?),
                };
                write_done(&dir, &gen_fp, &s)?;
                Ok(s)
            })())?
        }
    };

    // cycles
    let cycles_dir = out.join("cycles");
    let cyc_cfg = config.cycles.cycle_config();
    let cycles_fp = fingerprint(
        "cycles",
        &(&ingest_fp, &cyc_cfg, config.cycles.kinds, &config.languages, &config.gen.mask_token),
    )?;
    let cycle_stats = match read_done::<CycleStageStats>(&cycles_dir, &cycles_fp, &[CYCLES_FILE, REASONING_FILE]) {
        Some(s) => {
            note("cycles", true);
            s
        }
        None => {
            note("cycles", false);
            stage("cycles", (|| {
                prepare(&cycles_dir)?;
                load_graph(&mut graph)?;
                let g = graph.as_ref().unwrap();
                let s = run_cycles(g, &cyc_cfg, config.cycles.kinds, &config.languages, &config.gen.mask_token, &cycles_dir)?;
                write_done(&cycles_dir, &cycles_fp, &s)?;
                Ok(s)
            })())?
        }
    };

    // xlr
    let xlr_dir = out.join("xlr");
    let xlr_seed = stage_seed(config.seed, "xlr");
    let xlr_fp = fingerprint("xlr", &(&cycles_fp, &config.xlr, &config.languages, xlr_seed))?;
    let xlr_outputs = ["train.jsonl", "dev.jsonl", BLOCKED_KEYS_FILE, FILTERED_REASONING_FILE];
    let xlr_stats = match read_done::<XlrStageStats>(&xlr_dir, &xlr_fp, &xlr_outputs) {
        Some(s) => {
            note("xlr", true);
            s
        }
        None => {
            note("xlr", false);
            stage("xlr", (|| {
                prepare(&xlr_dir)?;
                load_graph(&mut graph)?;
                let g = graph.as_ref().unwrap();
                let s = run_xlr(g, &cycles_dir, &config.xlr, &config.languages, xlr_seed, &xlr_dir)?;
                write_done(&xlr_dir, &xlr_fp, &s)?;
                Ok(s)
            })())?
        }
    };

    // mask
    let mask_dir = out.join("mask");
    let mask_cfg = config.mask_config();
    let mask_fp = fingerprint("mask", &(&gen_fp, &xlr_fp, &mask_cfg))?;
    let mask_stats = match read_done::<MaskStageStats>(&mask_dir, &mask_fp, &[KNOWLEDGE_FILE, REASONING_FILE]) {
        Some(s) => {
            note("mask", true);
            s
        }
        None => {
            note("mask", false);
            stage("mask", (|| {
                prepare(&mask_dir)?;
                let inputs: Vec<PathBuf> = gen_outputs.iter().map(|f| out.join("gen").join(f)).collect();
                let s = run_mask(&inputs, Some(&xlr_dir.join(FILTERED_REASONING_FILE)), &mask_cfg, &mask_dir)?;
                write_done(&mask_dir, &mask_fp, &s)?;
                Ok(s)
            })())?
        }
    };

    // mix
    let mix_dir = out.join("mix");
    let manifest = config.mix_manifest(out);
    let mix_seed = stage_seed(config.seed, "mix");
    let plain_hashes = stage("mix", config.mix.plain.iter().map(|p| file_sha256(p)).collect::<Result<Vec<_>>>())?;
    // plain inputs enter by content hash, not by path
    let mix_settings = MixSection {
        plain: Vec::new(),
        ..config.mix.clone()
    };
    let mix_fp = fingerprint("mix", &(&mask_fp, &plain_hashes, &mix_settings, mix_seed))?;
    let mix_report = match read_done::<MixReport>(&mix_dir, &mix_fp, &[mix::MIXED_FILE, mix::MANIFEST_FILE]) {
        Some(s) => {
            note("mix", true);
            s
        }
        None => {
            note("mix", false);
            stage("mix", (|| {
                prepare(&mix_dir)?;
                let mut r = mix::mix_streams(&manifest, mix_seed, &mix_dir)?;
                relativize(&mut r, &mix_dir);
                write_json(&mix_dir.join(mix::MANIFEST_FILE), &r)?;
                write_done(&mix_dir, &mix_fp, &r)?;
                Ok(r)
            })())?
        }
    };

    let table = CorpusTable {
        languages: config.languages.len() as u64,
        code_switched_sentences: gen_stats.code_switched.as_ref().map_or(0, |s| s.emitted),
        parallel_sentences: gen_stats.parallel.as_ref().map_or(0, |s| s.emitted),
        len3_unique_relation_combinations: cycle_stats.relation_combinations.len3_unique_relation_combinations,
        len4_unique_relation_combinations: cycle_stats.relation_combinations.len4_unique_relation_combinations,
        len3_reasoning_samples: cycle_stats.reasoning_len3,
        len4_reasoning_samples: cycle_stats.reasoning_len4,
    };
    let report = StatsReport {
        schema: StatsSchema,
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config_fingerprint: sha_hex(&[
            ingest_fp.as_bytes(),
            gen_fp.as_bytes(),
            cycles_fp.as_bytes(),
            xlr_fp.as_bytes(),
            mask_fp.as_bytes(),
            mix_fp.as_bytes(),
        ]),
        languages: config.languages.clone(),
        table,
        ingest: ingest_report,
        gen: gen_stats,
        cycles: cycle_stats,
        xlr: xlr_stats,
        mask: mask_stats,
        mix: mix_report,
        cached_stages: cached,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Rewrites stream paths relative to `base`, the manifest's directory, so
/// the manifest does not depend on where the run lives.
fn relativize(report: &mut MixReport, base: &Path) {
    for s in &mut report.streams {
        for p in &mut s.paths {
            if let Some(rel) = pathdiff::diff_paths(&*p, base) {
                *p = rel;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_follow_recipe() {
        let c = PipelineConfig::from_toml("seed = 7").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.languages.len(), 10);
        assert_eq!(c.mask.mlm_probability, 0.15);
        assert_eq!(c.mix.alpha, 0.3);
        assert_eq!(c.mix.knowledge_batch_size, 9600);
        assert_eq!(c.xlr.train, 3000);
        assert_eq!(c.cycles.cycle_config().degree_cap, 1000);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_en() {
        assert!(PipelineConfig::from_toml("[mask]\nmlm_prob = 0.2").is_err());
        let c = PipelineConfig::from_toml(r#"languages = ["fr"]"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let e = stage::<()>("mask", Err(Error::Config("x".into()))).unwrap_err();
        assert!(e.to_string().starts_with("stage mask failed"));
    }
}
