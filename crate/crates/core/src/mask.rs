//! Masked training records for the knowledge task (random token masking of
//! synthetic sentences) and the reasoning task (span masking of cycle
//! samples).
//!
//! Tokenization is whitespace-level over the surface text. Each sentence's
//! terminal period is its own token; it belongs to no span and is never
//! masked. Link slots become structural masks that carry no loss.

use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cycles::{CycleKind, ReasoningSample};
use crate::error::{Error, Result};
use crate::jsonl::{self, schema_tag, JsonlWriter};
use crate::lang::Lang;
use crate::seed::{self, Rng};
use crate::sentence::{self, Role, SyntheticSentence, DEFAULT_MASK_TOKEN};

schema_tag!(MaskedSchema = "masked/v1");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Visible,
    /// Hidden from the model and predicted with loss.
    Masked,
    /// Link slot; shown as the mask literal, no loss.
    Structural,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Knowledge,
    ReasonLen3,
    ReasonLen4Partial,
    ReasonLen4Sentence,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Knowledge,
        Task::ReasonLen3,
        Task::ReasonLen4Partial,
        Task::ReasonLen4Sentence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Knowledge => "knowledge",
            Task::ReasonLen3 => "reason-len3",
            Task::ReasonLen4Partial => "reason-len4-partial",
            Task::ReasonLen4Sentence => "reason-len4-sentence",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub pos: usize,
    pub token: String,
}

/// Token range `[start, end)` of one source span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub role: Role,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskProvenance {
    pub source: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskedSample {
    pub schema: MaskedSchema,
    pub id: String,
    pub task: Task,
    pub lang: Lang,
    /// Model input: masked and structural positions hold the mask literal.
    pub tokens: Vec<String>,
    pub flags: Vec<Flag>,
    pub targets: Vec<Target>,
    pub spans: Vec<TokenSpan>,
    pub provenance: MaskProvenance,
}

impl MaskedSample {
    /// Fills every target back in and joins the tokens, recovering the
    /// source text (sentences separated by single spaces).
    pub fn reconstruct(&self) -> String {
        let mut tokens: Vec<&str> = self.tokens.iter().map(String::as_str).collect();
        for t in &self.targets {
            tokens[t.pos] = &t.token;
        }
        self.join(&tokens)
    }

    /// Joins one string per token position with single spaces, attaching
    /// sentence-final periods to the preceding token.
    pub fn join(&self, tokens: &[&str]) -> String {
        let mut in_span = vec![false; tokens.len()];
        for s in &self.spans {
            in_span[s.start..s.end].iter_mut().for_each(|b| *b = true);
        }
        let mut out = String::new();
        for (i, tok) in tokens.iter().enumerate() {
            let terminal = !in_span[i] && self.tokens[i] == ".";
            if i > 0 && !terminal {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }

    pub fn masked_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f == Flag::Masked).count()
    }

    /// Tokens belonging to non-link spans.
    pub fn content_count(&self) -> usize {
        self.spans
            .iter()
            .filter(|s| s.role != Role::Link)
            .map(|s| s.end - s.start)
            .sum()
    }

    /// Whether every token of `span` is masked for loss.
    pub fn span_masked(&self, span: &TokenSpan) -> bool {
        self.flags[span.start..span.end].iter().all(|&f| f == Flag::Masked)
    }

    pub fn span_untouched(&self, span: &TokenSpan) -> bool {
        self.flags[span.start..span.end].iter().all(|&f| f != Flag::Masked)
    }

    /// Checks flag/target consistency and that link slots are structural.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Error::MalformedSpans(format!("{}: {m}", self.id));
        if self.tokens.len() != self.flags.len() {
            return Err(bad("token and flag counts differ"));
        }
        let mut seen = vec![false; self.tokens.len()];
        for t in &self.targets {
            if t.pos >= self.flags.len() || self.flags[t.pos] != Flag::Masked || seen[t.pos] {
                return Err(bad("target does not match a masked position"));
            }
            seen[t.pos] = true;
        }
        if self.masked_count() != self.targets.len() {
            return Err(bad("masked position without target"));
        }
        for s in &self.spans {
            let structural = self.flags[s.start..s.end].iter().all(|&f| f == Flag::Structural);
            let any_structural = self.flags[s.start..s.end].contains(&Flag::Structural);
            if (s.role == Role::Link) != structural || (s.role != Role::Link && any_structural) {
                return Err(bad("structural flags do not match link slots"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub mlm_probability: f64,
    /// Lower bound on knowledge-task targets; 0 disables the top-up.
    pub min_masked_tokens: usize,
    pub sentence_mask_fraction: f64,
    /// Probability that a partial len4 record masks one entity rather than two.
    pub one_entity_fraction: f64,
    pub mask_token: String,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            mlm_probability: 0.15,
            min_masked_tokens: 1,
            sentence_mask_fraction: 0.20,
            one_entity_fraction: 0.5,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mlm_probability", self.mlm_probability),
            ("sentence_mask_fraction", self.sentence_mask_fraction),
            ("one_entity_fraction", self.one_entity_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        sentence::validate_mask_token(&self.mask_token)
    }
}

struct Layout {
    tokens: Vec<String>,
    flags: Vec<Flag>,
    originals: Vec<String>,
    spans: Vec<TokenSpan>,
    mask: String,
}

impl Layout {
    fn new(sentences: &[SyntheticSentence], mask: &str) -> Result<Self> {
        let mut l = Layout {
            tokens: Vec::new(),
            flags: Vec::new(),
            originals: Vec::new(),
            spans: Vec::new(),
            mask: mask.to_string(),
        };
        for (si, s) in sentences.iter().enumerate() {
            s.validate(mask)?;
            for span in &s.spans {
                let start = l.tokens.len();
                for tok in s.span_text(span).split(' ') {
                    let flag = if span.role == Role::Link { Flag::Structural } else { Flag::Visible };
                    l.tokens.push(tok.to_string());
                    l.originals.push(tok.to_string());
                    l.flags.push(flag);
                }
                l.spans.push(TokenSpan {
                    role: span.role,
                    sentence: si,
                    start,
                    end: l.tokens.len(),
                });
            }
            l.tokens.push(".".into());
            l.originals.push(".".into());
            l.flags.push(Flag::Visible);
        }
        Ok(l)
    }

    fn content_positions(&self) -> Vec<usize> {
        self.spans
            .iter()
            .filter(|s| s.role != Role::Link)
            .flat_map(|s| s.start..s.end)
            .collect()
    }

    /// Indices into `spans` of the given role, in order.
    fn spans_with(&self, role: Role) -> Vec<usize> {
        (0..self.spans.len()).filter(|&i| self.spans[i].role == role).collect()
    }

    fn entity_spans(&self) -> Vec<usize> {
        (0..self.spans.len())
            .filter(|&i| matches!(self.spans[i].role, Role::Head | Role::Tail))
            .collect()
    }

    fn mask_pos(&mut self, pos: usize) {
        debug_assert_ne!(self.flags[pos], Flag::Structural);
        self.flags[pos] = Flag::Masked;
        self.tokens[pos] = self.mask.clone();
    }

    fn mask_span(&mut self, span: usize) {
        let s = &self.spans[span];
        for pos in s.start..s.end {
            self.mask_pos(pos);
        }
    }

    fn finish(mut self, task: Task, lang: Lang, source: &str, seed: u64) -> MaskedSample {
        for (pos, f) in self.flags.iter().enumerate() {
            if *f == Flag::Structural {
                self.tokens[pos] = self.mask.clone();
            }
        }
        let targets = self
            .flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == Flag::Masked)
            .map(|(pos, _)| Target {
                pos,
                token: std::mem::take(&mut self.originals[pos]),
            })
            .collect();
        MaskedSample {
            schema: MaskedSchema,
            id: format!("m:{source}"),
            task,
            lang,
            tokens: self.tokens,
            flags: self.flags,
            targets,
            spans: self.spans,
            provenance: MaskProvenance {
                source: source.to_string(),
                seed,
            },
        }
    }
}

/// Knowledge-task masking with explicit loss positions, given as indices
/// into the sentence's content tokens (head, relation and tail tokens in
/// order).
pub fn mask_knowledge_forced(
    sentence: &SyntheticSentence,
    mask: &str,
    content: &[usize],
    seed: u64,
) -> Result<MaskedSample> {
    let mut l = Layout::new(std::slice::from_ref(sentence), mask)?;
    let positions = l.content_positions();
    for &c in content {
        let pos = *positions
            .get(c)
            .ok_or_else(|| Error::MalformedSpans(format!("content token {c} out of range")))?;
        l.mask_pos(pos);
    }
    let (id, lang) = (&sentence.provenance.id, sentence.provenance.target);
    Ok(l.finish(Task::Knowledge, lang, id, seed))
}

pub fn mask_knowledge(sentence: &SyntheticSentence, config: &MaskConfig, seed: u64) -> Result<MaskedSample> {
    let mut rng = seed::rng(seed);
    let positions = Layout::new(std::slice::from_ref(sentence), &config.mask_token)?.content_positions();
    let mut chosen: Vec<usize> = (0..positions.len())
        .filter(|_| rng.gen_bool(config.mlm_probability))
        .collect();
    let floor = config.min_masked_tokens.min(positions.len());
    if chosen.len() < floor {
        let rest: Vec<usize> = (0..positions.len()).filter(|i| !chosen.contains(i)).collect();
        for k in index::sample(&mut rng, rest.len(), floor - chosen.len()) {
            chosen.push(rest[k]);
        }
    }
    mask_knowledge_forced(sentence, &config.mask_token, &chosen, seed)
}

fn check_kind(sample: &ReasoningSample, kind: CycleKind) -> Result<()> {
    if sample.kind != kind || sample.sentences.len() != kind.triple_count() {
        return Err(Error::WrongKind {
            expected: kind.name(),
            got: sample.kind.name(),
        });
    }
    Ok(())
}

/// Masks the relation of sentence `relation` in full.
pub fn mask_reason_len3_forced(sample: &ReasoningSample, mask: &str, relation: usize, seed: u64) -> Result<MaskedSample> {
    check_kind(sample, CycleKind::Len3)?;
    let mut l = Layout::new(&sample.sentences, mask)?;
    let rels = l.spans_with(Role::Relation);
    l.mask_span(rels[relation % rels.len()]);
    Ok(l.finish(Task::ReasonLen3, sample.lang, &sample.id, seed))
}

pub fn mask_reason_len3(sample: &ReasoningSample, mask: &str, seed: u64) -> Result<MaskedSample> {
    let relation = seed::rng(seed).gen_range(0..3);
    mask_reason_len3_forced(sample, mask, relation, seed)
}

/// Outcome of the len4 draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Len4Choice {
    /// Relation of sentence `relation`, plus entity occurrences indexed over
    /// the sample's head/tail spans in order (sentence `i` head is `2i`,
    /// tail `2i + 1`).
    Partial { relation: usize, entities: Vec<usize> },
    /// Both entities of one sentence; its relation stays visible.
    Sentence(usize),
}

pub fn draw_len4(config: &MaskConfig, rng: &mut Rng) -> Len4Choice {
    if rng.gen_bool(config.sentence_mask_fraction) {
        return Len4Choice::Sentence(rng.gen_range(0..5));
    }
    let relation = rng.gen_range(0..5);
    let k = if rng.gen_bool(config.one_entity_fraction) { 1 } else { 2 };
    let entities = index::sample(rng, 10, k).into_vec();
    Len4Choice::Partial { relation, entities }
}

pub fn mask_reason_len4_forced(
    sample: &ReasoningSample,
    mask: &str,
    choice: &Len4Choice,
    seed: u64,
) -> Result<MaskedSample> {
    check_kind(sample, CycleKind::Len4Diagonal)?;
    let mut l = Layout::new(&sample.sentences, mask)?;
    let rels = l.spans_with(Role::Relation);
    let ents = l.entity_spans();
    let task = match choice {
        Len4Choice::Partial { relation, entities } => {
            l.mask_span(rels[*relation]);
            for &e in entities {
                l.mask_span(ents[e]);
            }
            Task::ReasonLen4Partial
        }
        Len4Choice::Sentence(s) => {
            l.mask_span(ents[2 * s]);
            l.mask_span(ents[2 * s + 1]);
            Task::ReasonLen4Sentence
        }
    };
    Ok(l.finish(task, sample.lang, &sample.id, seed))
}

pub fn mask_reason_len4(sample: &ReasoningSample, config: &MaskConfig, seed: u64) -> Result<MaskedSample> {
    let choice = draw_len4(config, &mut seed::rng(seed));
    mask_reason_len4_forced(sample, &config.mask_token, &choice, seed)
}

/// Per-record seed derived from the configured seed and the source id.
pub fn record_seed(config_seed: u64, source: &str) -> u64 {
    seed::derive(config_seed, &[seed::tag("mask"), seed::tag(source)])
}

pub fn mask_reasoning(sample: &ReasoningSample, config: &MaskConfig) -> Result<MaskedSample> {
    let s = record_seed(config.seed, &sample.id);
    match sample.kind {
        CycleKind::Len3 => mask_reason_len3(sample, &config.mask_token, s),
        CycleKind::Len4Diagonal => mask_reason_len4(sample, config, s),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskStats {
    pub records: u64,
    pub knowledge: u64,
    pub reason_len3: u64,
    pub reason_len4_partial: u64,
    pub reason_len4_sentence: u64,
    pub content_tokens: u64,
    pub masked_tokens: u64,
}

impl MaskStats {
    pub fn add(&mut self, m: &MaskedSample) {
        self.records += 1;
        match m.task {
            Task::Knowledge => self.knowledge += 1,
            Task::ReasonLen3 => self.reason_len3 += 1,
            Task::ReasonLen4Partial => self.reason_len4_partial += 1,
            Task::ReasonLen4Sentence => self.reason_len4_sentence += 1,
        }
        self.content_tokens += m.content_count() as u64;
        self.masked_tokens += m.masked_count() as u64;
    }
}

/// Masks every sentence of a sentence file into `out`.
pub fn mask_sentence_file(input: &Path, config: &MaskConfig, out: &mut JsonlWriter) -> Result<MaskStats> {
    config.validate()?;
    let mut stats = MaskStats::default();
    jsonl::par_map_records(
        input,
        |s: SyntheticSentence| {
            let seed = record_seed(config.seed, &s.provenance.id);
            mask_knowledge(&s, config, seed).map(Some)
        },
        |m| {
            stats.add(&m);
            out.write(&m)
        },
    )?;
    Ok(stats)
}

/// Masks every reasoning sample of a file into `out`.
pub fn mask_reasoning_file(input: &Path, config: &MaskConfig, out: &mut JsonlWriter) -> Result<MaskStats> {
    config.validate()?;
    let mut stats = MaskStats::default();
    jsonl::par_map_records(
        input,
        |s: ReasoningSample| mask_reasoning(&s, config).map(Some),
        |m| {
            stats.add(&m);
            out.write(&m)
        },
    )?;
    Ok(stats)
}
