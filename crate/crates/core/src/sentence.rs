//! Code-switched and parallel triple sentences of the form
//! `h [mask] r [mask] t.`, with character-level span annotations.
//!
//! The two `[mask]` link slots stand in for the unknown linking words between
//! the items. Each non-link span records the language and lexicon index it
//! was rendered from, so later stages can check or re-derive every surface.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::schema_tag;
use crate::lang::Lang;
use crate::seed::{self, Rng};
use crate::store::{Item, KnowledgeGraph, Triple, TripleIdx};

pub const DEFAULT_MASK_TOKEN: &str = "[mask]";

schema_tag!(SentenceSchema = "sentence/v1");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Head,
    Relation,
    Tail,
    Link,
}

/// A `[start, end)` range over the characters (Unicode scalar values) of the
/// sentence text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub role: Role,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<Lang>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    CodeSwitched,
    Parallel,
    AliasReplacedCs,
    AliasReplacedParallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[serde(alias = "cs")]
    CodeSwitched,
    Parallel,
}

impl Mode {
    pub fn file_name(self) -> &'static str {
        match self {
            Mode::CodeSwitched => "code_switched.jsonl",
            Mode::Parallel => "parallel.jsonl",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Mode::CodeSwitched => "cs",
            Mode::Parallel => "par",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cs" | "code-switched" | "code_switched" => Ok(Mode::CodeSwitched),
            "parallel" | "par" => Ok(Mode::Parallel),
            other => Err(Error::Config(format!("unknown generation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    /// External ids `[head, relation, tail]`.
    pub triple: [String; 3],
    pub source: Lang,
    pub target: Lang,
    pub variant: Variant,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSentence {
    pub schema: SentenceSchema,
    pub text: String,
    pub spans: Vec<Span>,
    pub provenance: Provenance,
}

impl SyntheticSentence {
    /// Text covered by `span`.
    pub fn span_text(&self, span: &Span) -> &str {
        char_slice(&self.text, span.start, span.end)
    }

    /// Checks the template invariants: spans ordered, non-overlapping, in
    /// role order head/link/relation/link/tail, separated by single spaces,
    /// followed by the terminal period, with both link slots equal to `mask`.
    pub fn validate(&self, mask: &str) -> Result<()> {
        let bad = || Error::MalformedSpans(self.provenance.id.clone());
        const ORDER: [Role; 5] = [Role::Head, Role::Link, Role::Relation, Role::Link, Role::Tail];
        if self.spans.len() != 5 || self.spans.iter().zip(ORDER).any(|(s, r)| s.role != r) {
            return Err(bad());
        }
        let chars = self.text.chars().count();
        let mut cursor = 0;
        for (i, span) in self.spans.iter().enumerate() {
            if span.start != cursor || span.end <= span.start || span.end > chars {
                return Err(bad());
            }
            let surface = self.span_text(span);
            if span.role == Role::Link && surface != mask {
                return Err(bad());
            }
            if surface.starts_with(' ') || surface.ends_with(' ') {
                return Err(bad());
            }
            cursor = span.end;
            let sep = if i == 4 { "." } else { " " };
            if char_slice(&self.text, cursor, (cursor + 1).min(chars)) != sep {
                return Err(bad());
            }
            cursor += 1;
        }
        if cursor != chars {
            return Err(bad());
        }
        Ok(())
    }
}

pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> &str {
    if text.is_ascii() {
        return &text[start.min(text.len())..end.min(text.len())];
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.by_ref().nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}

/// Per-item rendering choice: language and lexicon index.
type Choice = (Lang, usize);

struct TextBuilder {
    text: String,
    chars: usize,
    spans: Vec<Span>,
}

impl TextBuilder {
    fn push(&mut self, role: Role, surface: &str, source: Option<(Lang, &str, usize)>) {
        if !self.spans.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let start = self.chars;
        self.text.push_str(surface);
        self.chars += surface.chars().count();
        let (lang, item, alias) = match source {
            Some((l, id, idx)) => (Some(l), Some(id.to_string()), Some(idx as u32)),
            None => (None, None, None),
        };
        self.spans.push(Span {
            role,
            start,
            end: self.chars,
            lang,
            item,
            alias,
        });
    }
}

/// Renders `triple` with the given per-item choices, or `None` if any
/// (item, language, index) has no surface.
pub(crate) fn render(
    graph: &KnowledgeGraph,
    triple: Triple,
    choices: [Choice; 3],
    mask: &str,
    provenance: Provenance,
) -> Option<SyntheticSentence> {
    let items = [
        Item::Entity(triple.head),
        Item::Relation(triple.relation),
        Item::Entity(triple.tail),
    ];
    let mut surfaces = [""; 3];
    for k in 0..3 {
        surfaces[k] = graph.label(items[k], choices[k].0, choices[k].1)?;
    }
    let mut b = TextBuilder {
        text: String::with_capacity(surfaces.iter().map(|s| s.len()).sum::<usize>() + 2 * mask.len() + 6),
        chars: 0,
        spans: Vec::with_capacity(5),
    };
    for k in 0..3 {
        if k > 0 {
            b.push(Role::Link, mask, None);
        }
        let role = [Role::Head, Role::Relation, Role::Tail][k];
        b.push(role, surfaces[k], Some((choices[k].0, graph.item_id(items[k]), choices[k].1)));
    }
    b.text.push('.');
    Some(SyntheticSentence {
        schema: SentenceSchema,
        text: b.text,
        spans: b.spans,
        provenance,
    })
}

fn items_of(triple: Triple) -> [Item; 3] {
    [
        Item::Entity(triple.head),
        Item::Relation(triple.relation),
        Item::Entity(triple.tail),
    ]
}

fn provenance(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    id: String,
    target: Lang,
    variant: Variant,
    seed: u64,
) -> Provenance {
    let tr = graph.triple(t);
    Provenance {
        id,
        triple: [
            graph.entity_id(tr.head).to_string(),
            graph.relation_id(tr.relation).to_string(),
            graph.entity_id(tr.tail).to_string(),
        ],
        source: Lang::EN,
        target,
        variant,
        seed,
    }
}

/// Forced draws for code-switching, used to replay a specific outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchDraws {
    /// Per item (head, relation, tail): switch to the target language if it
    /// has a default label there.
    pub switch: [bool; 3],
    /// Per item lexicon index in the chosen language; `None` renders default
    /// labels.
    pub alias: Option<[usize; 3]>,
}

/// Chooses each item's language: the target when its draw is true and the
/// item has a target-language default label, English otherwise.
fn switch_languages(graph: &KnowledgeGraph, items: [Item; 3], target: Lang, switch: [bool; 3]) -> [Lang; 3] {
    let mut langs = [Lang::EN; 3];
    for k in 0..3 {
        if switch[k] && graph.default_label(items[k], target).is_some() {
            langs[k] = target;
        }
    }
    langs
}

fn english_complete(graph: &KnowledgeGraph, items: [Item; 3]) -> bool {
    items.iter().all(|&i| graph.default_label(i, Lang::EN).is_some())
}

/// Code-switched sentence with every draw supplied by the caller.
pub fn code_switched_forced(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    target: Lang,
    draws: SwitchDraws,
    mask: &str,
) -> Option<SyntheticSentence> {
    let items = items_of(graph.triple(t));
    if !english_complete(graph, items) {
        return None;
    }
    let langs = switch_languages(graph, items, target, draws.switch);
    let (idx, variant) = match draws.alias {
        Some(a) => (a, Variant::AliasReplacedCs),
        None => ([0; 3], Variant::CodeSwitched),
    };
    let choices = [(langs[0], idx[0]), (langs[1], idx[1]), (langs[2], idx[2])];
    let id = record_id(Mode::CodeSwitched, t, target);
    render(graph, graph.triple(t), choices, mask, provenance(graph, t, id, target, variant, 0))
}

/// Uniform index over the surfaces of `item` in `lang`, default label included.
fn draw_alias(graph: &KnowledgeGraph, item: Item, lang: Lang, rng: &mut Rng) -> usize {
    let n = graph.surfaces(item, lang).map_or(1, <[String]>::len);
    rng.gen_range(0..n)
}

fn code_switched_rng(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    target: Lang,
    use_aliases: bool,
    rng: &mut Rng,
    mask: &str,
    seed: u64,
) -> Option<SyntheticSentence> {
    let items = items_of(graph.triple(t));
    if !english_complete(graph, items) {
        return None;
    }
    let switch = [rng.gen::<bool>(), rng.gen::<bool>(), rng.gen::<bool>()];
    let langs = switch_languages(graph, items, target, switch);
    let mut choices = [(Lang::EN, 0usize); 3];
    for k in 0..3 {
        let idx = if use_aliases { draw_alias(graph, items[k], langs[k], rng) } else { 0 };
        choices[k] = (langs[k], idx);
    }
    let variant = if use_aliases { Variant::AliasReplacedCs } else { Variant::CodeSwitched };
    let id = record_id(Mode::CodeSwitched, t, target);
    render(graph, graph.triple(t), choices, mask, provenance(graph, t, id, target, variant, seed))
}

/// Code-switched sentence for the pair (en, `target`). `None` when any item
/// lacks an English default label.
pub fn gen_code_switched(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    target: Lang,
    use_aliases: bool,
    seed: u64,
    mask: &str,
) -> Option<SyntheticSentence> {
    code_switched_rng(graph, t, target, use_aliases, &mut seed::rng(seed), mask, seed)
}

fn parallel_rng(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    lang: Lang,
    use_aliases: bool,
    rng: &mut Rng,
    mask: &str,
    seed: u64,
) -> Option<SyntheticSentence> {
    let items = items_of(graph.triple(t));
    if items.iter().any(|&i| graph.default_label(i, lang).is_none()) {
        return None;
    }
    let mut choices = [(lang, 0usize); 3];
    if use_aliases {
        for k in 0..3 {
            choices[k].1 = draw_alias(graph, items[k], lang, rng);
        }
    }
    let variant = if use_aliases { Variant::AliasReplacedParallel } else { Variant::Parallel };
    let id = record_id(Mode::Parallel, t, lang);
    render(graph, graph.triple(t), choices, mask, provenance(graph, t, id, lang, variant, seed))
}

/// Monolingual sentence in `lang`; `None` if any item lacks a label there.
pub fn gen_parallel(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    lang: Lang,
    use_aliases: bool,
    seed: u64,
    mask: &str,
) -> Option<SyntheticSentence> {
    parallel_rng(graph, t, lang, use_aliases, &mut seed::rng(seed), mask, seed)
}

/// Parallel sentence with explicit per-item lexicon indices.
pub fn parallel_forced(
    graph: &KnowledgeGraph,
    t: TripleIdx,
    lang: Lang,
    alias: [usize; 3],
    mask: &str,
) -> Option<SyntheticSentence> {
    let variant = if alias == [0; 3] { Variant::Parallel } else { Variant::AliasReplacedParallel };
    let id = record_id(Mode::Parallel, t, lang);
    let choices = [(lang, alias[0]), (lang, alias[1]), (lang, alias[2])];
    render(graph, graph.triple(t), choices, mask, provenance(graph, t, id, lang, variant, 0))
}

pub fn record_id(mode: Mode, t: TripleIdx, lang: Lang) -> String {
    format!("{}:{}:{}", mode.prefix(), t.0, lang)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub languages: Vec<Lang>,
    pub mask_token: String,
    /// Share of records rendered with sampled aliases.
    pub alias_fraction: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            languages: crate::lang::default_languages(),
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            alias_fraction: 0.5,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alias_fraction) {
            return Err(Error::Config(format!(
                "alias fraction {} outside [0, 1]",
                self.alias_fraction
            )));
        }
        validate_mask_token(&self.mask_token)
    }
}

pub fn validate_mask_token(mask: &str) -> Result<()> {
    if mask.is_empty() || mask.chars().any(char::is_whitespace) {
        return Err(Error::Config(format!("mask token {mask:?} must be non-empty without whitespace")));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub emitted: u64,
    pub alias_replaced: u64,
    /// (triple, language) combinations that could not be rendered.
    pub unrenderable: u64,
}

/// Seed for one (mode, triple, language) record.
pub fn record_seed(global: u64, mode: Mode, t: TripleIdx, lang: Lang) -> u64 {
    seed::derive(global, &[seed::tag(mode.prefix()), t.0 as u64, lang.code() as u64])
}

fn corpus_record(
    graph: &KnowledgeGraph,
    config: &GenConfig,
    mode: Mode,
    t: TripleIdx,
    lang: Lang,
) -> Option<SyntheticSentence> {
    let s = record_seed(config.seed, mode, t, lang);
    let mut rng = seed::rng(s);
    let use_aliases = rng.gen_bool(config.alias_fraction);
    match mode {
        Mode::CodeSwitched => code_switched_rng(graph, t, lang, use_aliases, &mut rng, &config.mask_token, s),
        Mode::Parallel => parallel_rng(graph, t, lang, use_aliases, &mut rng, &config.mask_token, s),
    }
}

/// Generates one record per (triple, language), triple-major, and passes
/// each to `sink` in that order. Code-switched mode uses every configured
/// non-English language as the target; parallel mode uses every configured
/// language.
pub fn gen_corpus<F>(graph: &KnowledgeGraph, config: &GenConfig, mode: Mode, mut sink: F) -> Result<GenStats>
where
    F: FnMut(&SyntheticSentence) -> Result<()>,
{
    config.validate()?;
    if let Some(l) = config.languages.iter().find(|l| !graph.languages().contains(l)) {
        return Err(Error::Config(format!("language {l} is not in the snapshot")));
    }
    let langs: Vec<Lang> = match mode {
        Mode::CodeSwitched => config.languages.iter().copied().filter(|&l| l != Lang::EN).collect(),
        Mode::Parallel => config.languages.clone(),
    };
    let mut stats = GenStats::default();
    const CHUNK: usize = 8192;
    let n = graph.triple_count();
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let batch: Vec<Vec<Option<SyntheticSentence>>> = (start..end)
            .into_par_iter()
            .map(|i| {
                langs
                    .iter()
                    .map(|&l| corpus_record(graph, config, mode, TripleIdx(i as u32), l))
                    .collect()
            })
            .collect();
        for rec in batch.into_iter().flatten() {
            match rec {
                Some(s) => {
                    stats.emitted += 1;
                    if matches!(s.provenance.variant, Variant::AliasReplacedCs | Variant::AliasReplacedParallel) {
                        stats.alias_replaced += 1;
                    }
                    sink(&s)?;
                }
                None => stats.unrenderable += 1,
            }
        }
    }
    Ok(stats)
}
