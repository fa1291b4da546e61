//! Cross-lingual multiple-choice reasoning items built from cycles.
//!
//! Each item asks for the relation of one covering triple, shows the other
//! covering triples as context, and offers six relation surfaces: every
//! relation of the cycle plus distractors. The question triple and the
//! distractors depend only on the cycle key, so a cycle always yields the
//! same choice set; the caller's seed only shuffles the choice order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cycles::{Cycle, CycleKey, ReasoningSample};
use crate::error::{Error, Result};
use crate::jsonl::{self, schema_tag, JsonlWriter};
use crate::lang::Lang;
use crate::seed::{self, Rng};
use crate::store::{EntityIdx, Item, KnowledgeGraph, RelationIdx, TripleIdx};

schema_tag!(XlrSchema = "xlr/v1");

pub const CHOICES: usize = 6;
pub const DEFAULT_TEMPLATE: &str = "What is the relation between {A} and {B}?";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XlrItem {
    pub schema: XlrSchema,
    pub id: String,
    pub lang: Lang,
    /// Context triples as `(h, r, t)` strings.
    pub context: Vec<String>,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: usize,
    pub source_cycle_key: CycleKey,
    /// External ids behind the rendered strings.
    pub question_triple: [String; 3],
    pub context_triples: Vec<[String; 3]>,
    pub choice_ids: Vec<String>,
}

impl XlrItem {
    /// Checks the structural guarantees of an item.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Error::Config(format!("{}: {m}", self.id));
        if self.choices.len() != CHOICES || self.choice_ids.len() != CHOICES {
            return Err(bad("needs exactly 6 choices"));
        }
        if self.choices.iter().collect::<HashSet<_>>().len() != CHOICES {
            return Err(bad("duplicate choice surface"));
        }
        if self.answer >= CHOICES || self.choice_ids[self.answer] != self.question_triple[1] {
            return Err(bad("answer does not point at the question relation"));
        }
        let ids: HashSet<&String> = self.choice_ids.iter().collect();
        if self.context_triples.iter().any(|t| !ids.contains(&t[1])) {
            return Err(bad("cycle relation missing from choices"));
        }
        if self.context_triples.contains(&self.question_triple) {
            return Err(bad("question triple in context"));
        }
        Ok(())
    }

    /// The answer relation id.
    pub fn answer_id(&self) -> &str {
        &self.choice_ids[self.answer]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XlrConfig {
    pub train: usize,
    pub dev: usize,
    /// Candidate items set aside for manual review as the test set.
    pub test_pool: usize,
    /// At most this many cycles, in key order, are turned into items.
    pub pool_limit: usize,
    /// Upper bound on any one answer relation's share of a split.
    pub max_relation_share: f64,
    /// Upper bound on any one question entity's share of a split.
    pub max_entity_share: f64,
    /// Question templates with `{A}` and `{B}` placeholders; languages not
    /// listed use the default.
    pub templates: BTreeMap<Lang, String>,
}

impl Default for XlrConfig {
    fn default() -> Self {
        XlrConfig {
            train: 3000,
            dev: 1000,
            test_pool: 1050,
            pool_limit: 50_000,
            max_relation_share: 0.10,
            max_entity_share: 0.02,
            templates: BTreeMap::new(),
        }
    }
}

impl XlrConfig {
    pub fn template(&self, lang: Lang) -> &str {
        self.templates.get(&lang).map_or(DEFAULT_TEMPLATE, String::as_str)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("max_relation_share", self.max_relation_share),
            ("max_entity_share", self.max_entity_share),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 1]")));
            }
        }
        for (l, t) in &self.templates {
            if !t.contains("{A}") || !t.contains("{B}") {
                return Err(Error::Config(format!("template for {l} lacks {{A}} or {{B}}")));
            }
        }
        Ok(())
    }
}

/// Precomputed relation frequencies used for distractor sampling.
pub struct ItemBuilder<'g> {
    graph: &'g KnowledgeGraph,
    config: &'g XlrConfig,
    freq: Vec<u64>,
}

fn triple_ids(graph: &KnowledgeGraph, t: TripleIdx) -> [String; 3] {
    let tr = graph.triple(t);
    [
        graph.entity_id(tr.head).to_string(),
        graph.relation_id(tr.relation).to_string(),
        graph.entity_id(tr.tail).to_string(),
    ]
}

fn content_rng(key: CycleKey) -> Rng {
    seed::rng(seed::derive(seed::tag("xlr"), &[(key.0 >> 64) as u64, key.0 as u64]))
}

/// Relations in weighted random order (heavier first in expectation).
fn weighted_order(rels: &[(RelationIdx, u64)], rng: &mut Rng) -> Vec<RelationIdx> {
    if rels.is_empty() {
        return Vec::new();
    }
    match index::sample_weighted(rng, rels.len(), |i| rels[i].1 as f64, rels.len()) {
        Ok(order) => order.into_iter().map(|i| rels[i].0).collect(),
        Err(_) => rels.iter().map(|r| r.0).collect(),
    }
}

impl<'g> ItemBuilder<'g> {
    pub fn new(graph: &'g KnowledgeGraph, config: &'g XlrConfig) -> Self {
        let mut freq = vec![0u64; graph.relation_count()];
        for t in graph.triples() {
            freq[t.relation.index()] += 1;
        }
        ItemBuilder { graph, config, freq }
    }

    fn incident(&self, entities: [EntityIdx; 2]) -> Vec<(RelationIdx, u64)> {
        let mut counts: BTreeMap<RelationIdx, u64> = BTreeMap::new();
        for e in entities {
            for t in self.graph.incident_triples(e) {
                *counts.entry(self.graph.triple(t).relation).or_default() += 1;
            }
        }
        counts.into_iter().collect()
    }

    /// Appends candidates with a fresh surface in `lang` until six are chosen.
    fn fill(
        &self,
        chosen: &mut Vec<RelationIdx>,
        surfaces: &mut HashSet<&'g str>,
        candidates: Vec<RelationIdx>,
        lang: Lang,
    ) {
        for r in candidates {
            if chosen.len() == CHOICES {
                return;
            }
            if chosen.contains(&r) {
                continue;
            }
            if let Some(s) = self.graph.default_label(Item::Relation(r), lang) {
                if surfaces.insert(s) {
                    chosen.push(r);
                }
            }
        }
    }

    /// Question triple and the six choice relations, answer first. Depends
    /// only on the cycle.
    fn content(&self, cycle: &Cycle, lang: Lang) -> Option<(TripleIdx, Vec<RelationIdx>)> {
        let mut rng = content_rng(cycle.key);
        let covering = cycle.covering();
        let q = covering[rng.gen_range(0..covering.len())];
        let choices = self.choices(cycle, q, lang, &mut rng)?;
        Some((q, choices))
    }

    fn choices(&self, cycle: &Cycle, q: TripleIdx, lang: Lang, rng: &mut Rng) -> Option<Vec<RelationIdx>> {
        let g = self.graph;
        let qt = g.triple(q);
        let mut chosen: Vec<RelationIdx> = vec![qt.relation];
        for &t in cycle.covering() {
            let r = g.triple(t).relation;
            if !chosen.contains(&r) {
                chosen.push(r);
            }
        }
        let mut surfaces = HashSet::new();
        for &r in &chosen {
            if !surfaces.insert(g.default_label(Item::Relation(r), lang)?) {
                return None;
            }
        }
        let local = weighted_order(&self.incident([qt.head, qt.tail]), rng);
        self.fill(&mut chosen, &mut surfaces, local, lang);
        if chosen.len() < CHOICES {
            let all: Vec<(RelationIdx, u64)> = (0..self.freq.len())
                .filter(|&i| self.freq[i] > 0)
                .map(|i| (RelationIdx(i as u32), self.freq[i]))
                .collect();
            let global = weighted_order(&all, rng);
            self.fill(&mut chosen, &mut surfaces, global, lang);
        }
        (chosen.len() == CHOICES).then_some(chosen)
    }

    /// Renders an item from a question triple and choice relations in final
    /// order. `None` if any surface is missing in `lang` or two choices
    /// share a surface.
    pub fn render(&self, cycle: &Cycle, q: TripleIdx, choices: &[RelationIdx], lang: Lang) -> Option<XlrItem> {
        let g = self.graph;
        let label = |item: Item| g.default_label(item, lang);
        let qt = g.triple(q);
        let question = self
            .config
            .template(lang)
            .replace("{A}", label(Item::Entity(qt.head))?)
            .replace("{B}", label(Item::Entity(qt.tail))?);
        let mut context = Vec::new();
        let mut context_triples = Vec::new();
        for &t in cycle.covering().iter().filter(|&&t| t != q) {
            let tr = g.triple(t);
            context.push(format!(
                "({}, {}, {})",
                label(Item::Entity(tr.head))?,
                label(Item::Relation(tr.relation))?,
                label(Item::Entity(tr.tail))?
            ));
            context_triples.push(triple_ids(g, t));
        }
        let surfaces: Vec<String> = choices
            .iter()
            .map(|&r| label(Item::Relation(r)).map(str::to_string))
            .collect::<Option<_>>()?;
        if surfaces.iter().collect::<HashSet<_>>().len() != surfaces.len() {
            return None;
        }
        Some(XlrItem {
            schema: XlrSchema,
            id: format!("xlr:{}", cycle.key),
            lang,
            context,
            question,
            answer: choices.iter().position(|&r| r == qt.relation)?,
            choices: surfaces,
            source_cycle_key: cycle.key,
            question_triple: triple_ids(g, q),
            context_triples,
            choice_ids: choices.iter().map(|&r| g.relation_id(r).to_string()).collect(),
        })
    }

    pub fn build_item(&self, cycle: &Cycle, lang: Lang, seed: u64) -> Option<XlrItem> {
        let (q, choices) = self.content(cycle, lang)?;
        self.finish_item(cycle, q, choices, lang, seed)
    }

    /// Like `build_item` with the question triple given instead of drawn.
    pub fn build_item_forced(&self, cycle: &Cycle, q: TripleIdx, lang: Lang, seed: u64) -> Option<XlrItem> {
        if !cycle.covering().contains(&q) {
            return None;
        }
        let choices = self.choices(cycle, q, lang, &mut content_rng(cycle.key))?;
        self.finish_item(cycle, q, choices, lang, seed)
    }

    fn finish_item(&self, cycle: &Cycle, q: TripleIdx, mut choices: Vec<RelationIdx>, lang: Lang, seed: u64) -> Option<XlrItem> {
        let mut rng = seed::rng(seed::derive(
            seed,
            &[seed::tag("xlr-order"), (cycle.key.0 >> 64) as u64, cycle.key.0 as u64],
        ));
        choices.shuffle(&mut rng);
        self.render(cycle, q, &choices, lang)
    }

    /// Re-renders an item in other languages with the same question, choice
    /// order and answer. Returns the renderings and the number of languages
    /// skipped for missing or colliding labels.
    pub fn render_multilingual(&self, item: &XlrItem, langs: &[Lang]) -> Result<(Vec<XlrItem>, usize)> {
        let g = self.graph;
        let unknown = |id: &str| Error::Config(format!("{}: unknown relation {id}", item.id));
        let rels = item
            .choice_ids
            .iter()
            .map(|id| g.relation(id).ok_or_else(|| unknown(id)))
            .collect::<Result<Vec<_>>>()?;
        let cycle = self.resolve_cycle(item)?;
        let q = *cycle
            .covering()
            .iter()
            .find(|&&t| triple_ids(g, t) == item.question_triple)
            .ok_or_else(|| Error::Config(format!("{}: question triple not in cycle", item.id)))?;
        let mut out = Vec::new();
        let mut skipped = 0;
        for &l in langs {
            match self.render(&cycle, q, &rels, l) {
                Some(it) => out.push(it),
                None => skipped += 1,
            }
        }
        Ok((out, skipped))
    }

    fn resolve_cycle(&self, item: &XlrItem) -> Result<Cycle> {
        let g = self.graph;
        let mut triples = item.context_triples.clone();
        triples.push(item.question_triple.clone());
        let find = |[h, r, t]: &[String; 3]| -> Result<TripleIdx> {
            let (h, t) = (
                g.entity(h).ok_or_else(|| Error::UnknownEntity(h.clone()))?,
                g.entity(t).ok_or_else(|| Error::UnknownEntity(t.clone()))?,
            );
            g.edge_triples(h, t)
                .iter()
                .copied()
                .find(|&x| g.relation_id(g.triple(x).relation) == r && g.triple(x).head == h)
                .ok_or_else(|| Error::Config(format!("{}: triple not in graph", item.id)))
        };
        let idx = triples.iter().map(find).collect::<Result<Vec<_>>>()?;
        cycle_from_triples(g, &idx, item.source_cycle_key)
            .ok_or_else(|| Error::Config(format!("{}: triples do not form the source cycle", item.id)))
    }
}

/// Rebuilds a cycle from its covering triples in any order, checking that
/// the result has the expected key.
fn cycle_from_triples(g: &KnowledgeGraph, triples: &[TripleIdx], key: CycleKey) -> Option<Cycle> {
    let joining = |pool: &[TripleIdx], a: EntityIdx, b: EntityIdx| {
        pool.iter().copied().find(|&t| g.triple(t).connects(a, b))
    };
    let mut ents: Vec<EntityIdx> = triples
        .iter()
        .flat_map(|&t| [g.triple(t).head, g.triple(t).tail])
        .collect();
    ents.sort_unstable();
    ents.dedup();
    let cycle = match (triples.len(), ents.len()) {
        (3, 3) => {
            let (a, b, c) = (ents[0], ents[1], ents[2]);
            let edges = [joining(triples, a, b)?, joining(triples, b, c)?, joining(triples, c, a)?];
            Some(Cycle::triangle(g, [a, b, c], edges))
        }
        (5, 4) => (0..5).find_map(|d| {
            let diag = g.triple(triples[d]);
            let rest: Vec<TripleIdx> = (0..5).filter(|&i| i != d).map(|i| triples[i]).collect();
            let (x, y) = (diag.head, diag.tail);
            let mut others = ents.iter().copied().filter(|&e| e != x && e != y);
            let (u, v) = (others.next()?, others.next()?);
            let edges = [
                joining(&rest, x, u)?,
                joining(&rest, u, y)?,
                joining(&rest, y, v)?,
                joining(&rest, v, x)?,
            ];
            let c = Cycle::diamond(g, [x, u, y, v], edges, triples[d]);
            (c.key == key).then_some(c)
        }),
        _ => None,
    }?;
    (cycle.key == key).then_some(cycle)
}

/// Splits of a balanced selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<XlrItem>,
    pub dev: Vec<XlrItem>,
}

struct Caps {
    slot: usize,
    relation: usize,
    entity: usize,
}

impl Caps {
    fn new(n: usize, config: &XlrConfig) -> Self {
        let share = |s: f64| ((s * n as f64).floor() as usize).max(1);
        Caps {
            slot: n.div_ceil(CHOICES),
            relation: share(config.max_relation_share),
            entity: share(config.max_entity_share),
        }
    }
}

/// Greedily fills each requested size in turn from `order`, accepting an
/// item only while its answer slot, answer relation and question entities
/// stay under their caps. Returns indices per split.
fn select_balanced(pool: &[XlrItem], order: &[usize], sizes: &[usize], config: &XlrConfig) -> Vec<Vec<usize>> {
    let mut used = vec![false; pool.len()];
    let mut out = Vec::new();
    for &n in sizes {
        let caps = Caps::new(n, config);
        let mut slots = [0usize; CHOICES];
        let mut rels: HashMap<&str, usize> = HashMap::new();
        let mut ents: HashMap<&str, usize> = HashMap::new();
        let mut picked = Vec::with_capacity(n);
        for &i in order {
            if picked.len() == n {
                break;
            }
            if used[i] {
                continue;
            }
            let it = &pool[i];
            let (h, t) = (it.question_triple[0].as_str(), it.question_triple[2].as_str());
            if slots[it.answer] >= caps.slot
                || rels.get(it.answer_id()).copied().unwrap_or(0) >= caps.relation
                || [h, t].iter().any(|e| ents.get(e).copied().unwrap_or(0) >= caps.entity)
            {
                continue;
            }
            slots[it.answer] += 1;
            *rels.entry(it.answer_id()).or_default() += 1;
            *ents.entry(h).or_default() += 1;
            if t != h {
                *ents.entry(t).or_default() += 1;
            }
            used[i] = true;
            picked.push(i);
        }
        out.push(picked);
    }
    out
}

fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, &[seed::tag("xlr-balance")])));
    order
}

/// Balanced train/dev selection from a pool of items.
pub fn balance_split(pool: &[XlrItem], train: usize, dev: usize, config: &XlrConfig, seed: u64) -> Result<Split> {
    let order = shuffled_order(pool.len(), seed);
    let picked = select_balanced(pool, &order, &[train, dev], config);
    if picked[0].len() < train || picked[1].len() < dev || pool.is_empty() {
        return Err(Error::PoolTooSmall {
            requested_train: train,
            requested_dev: dev,
            achieved_train: picked[0].len(),
            achieved_dev: picked[1].len(),
        });
    }
    let take = |ix: &[usize]| ix.iter().map(|&i| pool[i].clone()).collect();
    Ok(Split {
        train: take(&picked[0]),
        dev: take(&picked[1]),
    })
}

/// Candidate test pool, then train/dev from what remains. All three are
/// disjoint by cycle.
pub fn select_all(pool: &[XlrItem], config: &XlrConfig, seed: u64) -> Result<(Vec<XlrItem>, Split)> {
    let order = shuffled_order(pool.len(), seed);
    let picked = select_balanced(pool, &order, &[config.test_pool, config.train, config.dev], config);
    if picked[0].len() < config.test_pool
        || picked[1].len() < config.train
        || picked[2].len() < config.dev
        || pool.is_empty()
    {
        return Err(Error::PoolTooSmall {
            requested_train: config.train,
            requested_dev: config.dev,
            achieved_train: picked[1].len(),
            achieved_dev: picked[2].len(),
        });
    }
    let take = |ix: &[usize]| ix.iter().map(|&i| pool[i].clone()).collect::<Vec<_>>();
    Ok((
        take(&picked[0]),
        Split {
            train: take(&picked[1]),
            dev: take(&picked[2]),
        },
    ))
}

/// Answer-slot counts of a split.
pub fn slot_counts(items: &[XlrItem]) -> [usize; CHOICES] {
    let mut c = [0; CHOICES];
    for it in items {
        c[it.answer] += 1;
    }
    c
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeakageFilter {
    pub blocked: HashSet<CycleKey>,
}

impl LeakageFilter {
    pub fn from_items<'a>(items: impl IntoIterator<Item = &'a XlrItem>) -> Self {
        LeakageFilter {
            blocked: items.into_iter().map(|i| i.source_cycle_key).collect(),
        }
    }

    pub fn allows(&self, key: CycleKey) -> bool {
        !self.blocked.contains(&key)
    }

    /// Blocked keys, sorted, one hex key per line.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<CycleKey> = self.blocked.iter().copied().collect();
        keys.sort_unstable();
        keys.iter().fold(String::new(), |mut s, k| {
            let _ = writeln!(s, "{k}");
            s
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let blocked = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        Ok(LeakageFilter { blocked })
    }

    /// Keeps the samples whose cycle is not blocked; returns them and the
    /// number removed.
    pub fn apply<I>(&self, samples: I) -> (Vec<ReasoningSample>, u64)
    where
        I: IntoIterator<Item = ReasoningSample>,
    {
        let mut removed = 0;
        let kept = samples
            .into_iter()
            .filter(|s| {
                let ok = self.allows(s.cycle_key);
                removed += u64::from(!ok);
                ok
            })
            .collect();
        (kept, removed)
    }

    /// Streams a reasoning corpus file through the filter.
    pub fn apply_file(&self, input: &Path, output: &Path) -> Result<(u64, u64)> {
        let mut w = JsonlWriter::create(output)?;
        let mut removed = 0;
        jsonl::for_each_record(input, |_, s: ReasoningSample| {
            if self.allows(s.cycle_key) {
                w.write(&s)
            } else {
                removed += 1;
                Ok(())
            }
        })?;
        Ok((w.finish()?, removed))
    }
}

/// Tab-separated review sheet: one row per item with an empty accept column.
pub fn annotation_worksheet(items: &[XlrItem]) -> String {
    let clean = |s: &str| s.replace(['\t', '\n'], " ");
    let mut out = String::from("id\tcontext\tquestion\tchoices\tanswer\taccept\n");
    for it in items {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t",
            it.id,
            clean(&it.context.join(" ")),
            clean(&it.question),
            clean(&it.choices.join(" | ")),
            clean(&it.choices[it.answer]),
        );
    }
    out
}

pub fn write_worksheet(path: &Path, items: &[XlrItem]) -> Result<()> {
    fs::write(path, annotation_worksheet(items)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{extract_len3, CycleConfig};
    use crate::store::{GraphBuilder, Lexicon};

    /// A triangle whose entities touch `extra` further relations.
    fn graph(extra: usize) -> KnowledgeGraph {
        let mut lex = Lexicon::new();
        for id in ["A", "B", "C", "X", "Y"] {
            lex.insert(id, [(Lang::EN, Some(format!("e{id}")), vec![])], 16);
        }
        for r in 0..10 {
            lex.insert(&format!("P{r}"), [(Lang::EN, Some(format!("rel {r}")), vec![])], 16);
        }
        let mut b = GraphBuilder::new(vec![Lang::EN], lex);
        b.add("A", "P0", "B");
        b.add("B", "P1", "C");
        b.add("C", "P2", "A");
        for r in 0..extra {
            b.add("A", &format!("P{}", 3 + r), "X");
        }
        for r in 7..10 {
            b.add("X", &format!("P{r}"), "Y");
        }
        b.build()
    }

    #[test]
    fn tops_up_from_global_pool() {
        let g = graph(1);
        let cfg = XlrConfig::default();
        let b = ItemBuilder::new(&g, &cfg);
        let (c3, _) = extract_len3(&g, &CycleConfig::default());
        let it = b.build_item(&c3[0], Lang::EN, 0).unwrap();
        it.check().unwrap();
        assert_eq!(it.context.len(), 2);
        // 3 cycle relations + P3 leave two slots for the global pool
        let global = it.choice_ids.iter().filter(|r| ["P7", "P8", "P9"].contains(&r.as_str())).count();
        assert_eq!(global, 2);
        assert!(it.choice_ids.contains(&"P3".to_string()));
    }

    #[test]
    fn seed_changes_order_not_set() {
        let g = graph(3);
        let cfg = XlrConfig::default();
        let b = ItemBuilder::new(&g, &cfg);
        let c = extract_len3(&g, &CycleConfig::default()).0[0];
        let items: Vec<XlrItem> = (0..8).map(|s| b.build_item(&c, Lang::EN, s).unwrap()).collect();
        let set = |i: &XlrItem| i.choices.iter().cloned().collect::<std::collections::BTreeSet<_>>();
        assert!(items.iter().all(|i| set(i) == set(&items[0])));
        assert!(items.iter().any(|i| i.choices != items[0].choices));
    }

    #[test]
    fn too_few_relations_is_absent() {
        let mut b = GraphBuilder::unlabeled();
        b.add("A", "P0", "B");
        b.add("B", "P1", "C");
        b.add("C", "P2", "A");
        let g = b.build();
        let cfg = XlrConfig::default();
        let c = extract_len3(&g, &CycleConfig::default()).0[0];
        assert!(ItemBuilder::new(&g, &cfg).build_item(&c, Lang::EN, 0).is_none());
    }

    #[test]
    fn resolves_cycle_back_from_item() {
        let g = graph(3);
        let cfg = XlrConfig::default();
        let b = ItemBuilder::new(&g, &cfg);
        let c = extract_len3(&g, &CycleConfig::default()).0[0];
        let it = b.build_item(&c, Lang::EN, 4).unwrap();
        let (same, skipped) = b.render_multilingual(&it, &[Lang::EN, "fr".parse().unwrap()]).unwrap();
        assert_eq!(same, vec![it]);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn leakage_filter_text_round_trip() {
        let f = LeakageFilter {
            blocked: [CycleKey(1), CycleKey(u128::MAX)].into_iter().collect(),
        };
        assert_eq!(LeakageFilter::parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn empty_pool_errors() {
        let err = balance_split(&[], 1, 1, &XlrConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::PoolTooSmall { achieved_train: 0, .. }));
    }
}
