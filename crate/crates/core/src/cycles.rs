//! Length-3 cycles (triangles) and length-4 cycles carrying one diagonal
//! edge, enumerated over the undirected view of the graph.
//!
//! A length-4 cycle with a diagonal is two triangles sharing the diagonal
//! edge. Enumeration therefore walks every edge `{x, y}` as a candidate
//! diagonal and pairs up the common neighbours of `x` and `y`; for a triangle
//! `(A, B, C)` this is the same as scanning the neighbours of `B` for entities
//! that also connect to `C`. When both diagonals of a perimeter exist, the
//! perimeter is emitted once per diagonal.
//!
//! Cycles are identified by a [`CycleKey`], a 128-bit hash of the canonical
//! form: the entity ring rotated/reflected so the smallest interned index
//! comes first followed by its smaller ring neighbour, then the covering
//! triples in ring order with the diagonal last. Triple orientation is
//! hashed as stored and never flipped.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl::schema_tag;
use crate::lang::Lang;
use crate::sentence::{self, SyntheticSentence};
use crate::store::{EntityIdx, KnowledgeGraph, RelationIdx, TripleIdx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleKind {
    Len3,
    Len4Diagonal,
}

impl CycleKind {
    pub fn entity_count(self) -> usize {
        match self {
            CycleKind::Len3 => 3,
            CycleKind::Len4Diagonal => 4,
        }
    }

    pub fn triple_count(self) -> usize {
        match self {
            CycleKind::Len3 => 3,
            CycleKind::Len4Diagonal => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CycleKind::Len3 => "len3",
            CycleKind::Len4Diagonal => "len4-diagonal",
        }
    }
}

/// Canonical cycle identity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleKey(pub u128);

impl fmt::Display for CycleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for CycleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycleKey({self})")
    }
}

impl FromStr for CycleKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 32 {
            return Err(Error::Config(format!("cycle key {s:?} is not 32 hex digits")));
        }
        u128::from_str_radix(s, 16)
            .map(CycleKey)
            .map_err(|_| Error::Config(format!("cycle key {s:?} is not hex")))
    }
}

impl Serialize for CycleKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CycleKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub kind: CycleKind,
    entities: [EntityIdx; 4],
    covering: [TripleIdx; 5],
    pub key: CycleKey,
}

impl Cycle {
    /// Entities in canonical ring order.
    pub fn entities(&self) -> &[EntityIdx] {
        &self.entities[..self.kind.entity_count()]
    }

    /// Ring-order triples, then the diagonal for length-4 cycles.
    pub fn covering(&self) -> &[TripleIdx] {
        &self.covering[..self.kind.triple_count()]
    }

    pub fn perimeter(&self) -> &[TripleIdx] {
        &self.covering[..self.kind.entity_count()]
    }

    pub fn diagonal(&self) -> Option<TripleIdx> {
        (self.kind == CycleKind::Len4Diagonal).then_some(self.covering[4])
    }

    /// Triangle from a ring `entities` where `edges[i]` connects
    /// `entities[i]` and `entities[(i + 1) % 3]`.
    pub fn triangle(graph: &KnowledgeGraph, entities: [EntityIdx; 3], edges: [TripleIdx; 3]) -> Cycle {
        let (ring, perim) = canonical_ring(&entities, &edges);
        let mut e = [EntityIdx(0); 4];
        let mut c = [TripleIdx(0); 5];
        e[..3].copy_from_slice(&ring[..3]);
        c[..3].copy_from_slice(&perim[..3]);
        let key = cycle_key(graph, CycleKind::Len3, &e[..3], &c[..3]);
        Cycle {
            kind: CycleKind::Len3,
            entities: e,
            covering: c,
            key,
        }
    }

    /// Length-4 cycle from a ring `perimeter` (`edges[i]` connects
    /// `perimeter[i]` and `perimeter[(i + 1) % 4]`) plus a `diagonal` triple
    /// joining two opposite ring entities.
    pub fn diamond(
        graph: &KnowledgeGraph,
        perimeter: [EntityIdx; 4],
        edges: [TripleIdx; 4],
        diagonal: TripleIdx,
    ) -> Cycle {
        let (ring, perim) = canonical_ring(&perimeter, &edges);
        let mut c = [TripleIdx(0); 5];
        c[..4].copy_from_slice(&perim[..4]);
        c[4] = diagonal;
        let key = cycle_key(graph, CycleKind::Len4Diagonal, &ring, &c);
        Cycle {
            kind: CycleKind::Len4Diagonal,
            entities: ring,
            covering: c,
            key,
        }
    }

    /// Distinct relations over the covering triples, sorted.
    pub fn relation_multiset(&self, graph: &KnowledgeGraph) -> Vec<RelationIdx> {
        let mut rels: Vec<RelationIdx> = self.covering().iter().map(|&t| graph.triple(t).relation).collect();
        rels.sort_unstable();
        rels
    }
}

/// Rotates/reflects a ring so the smallest entity is first and its smaller
/// ring neighbour second. Returns entities and ring edges in that order.
fn canonical_ring(entities: &[EntityIdx], edges: &[TripleIdx]) -> ([EntityIdx; 4], [TripleIdx; 4]) {
    let n = entities.len();
    let p = (0..n).min_by_key(|&i| entities[i]).unwrap();
    let next = entities[(p + 1) % n];
    let prev = entities[(p + n - 1) % n];
    let mut ring = [EntityIdx(0); 4];
    let mut perim = [TripleIdx(0); 4];
    for k in 0..n {
        if next <= prev {
            ring[k] = entities[(p + k) % n];
            perim[k] = edges[(p + k) % n];
        } else {
            ring[k] = entities[(p + n - k) % n];
            perim[k] = edges[(p + 2 * n - k - 1) % n];
        }
    }
    (ring, perim)
}

fn cycle_key(graph: &KnowledgeGraph, kind: CycleKind, ring: &[EntityIdx], covering: &[TripleIdx]) -> CycleKey {
    let mut h = Sha256::new();
    let mut field = |s: &str| {
        h.update((s.len() as u32).to_le_bytes());
        h.update(s.as_bytes());
    };
    field(kind.name());
    for &e in ring {
        field(graph.entity_id(e));
    }
    for &t in covering {
        let tr = graph.triple(t);
        field(graph.entity_id(tr.head));
        field(graph.relation_id(tr.relation));
        field(graph.entity_id(tr.tail));
    }
    let digest = h.finalize();
    CycleKey(u128::from_be_bytes(digest[..16].try_into().unwrap()))
}

/// How many of an edge's parallel triples take part in cycle enumeration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRelations {
    /// Only the first stored triple on each edge.
    #[default]
    First,
    /// Every triple; cycles multiply over relation combinations.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Entities with more distinct neighbours than this take no part in any
    /// cycle.
    pub degree_cap: usize,
    pub edge_relations: EdgeRelations,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            degree_cap: 1000,
            edge_relations: EdgeRelations::First,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub cycles: u64,
    pub hubs_skipped: u64,
    pub duplicates_removed: u64,
}

struct View<'g> {
    graph: &'g KnowledgeGraph,
    hub: Vec<bool>,
    edge_relations: EdgeRelations,
}

impl<'g> View<'g> {
    fn new(graph: &'g KnowledgeGraph, config: &CycleConfig) -> Self {
        let hub = (0..graph.entity_count())
            .map(|i| graph.degree(EntityIdx(i as u32)) > config.degree_cap)
            .collect();
        View {
            graph,
            hub,
            edge_relations: config.edge_relations,
        }
    }

    fn hubs(&self) -> u64 {
        self.hub.iter().filter(|&&h| h).count() as u64
    }

    /// Non-hub neighbours of `e` greater than `e`.
    fn forward(&self, e: EntityIdx) -> impl Iterator<Item = EntityIdx> + '_ {
        let ns = self.graph.neighbors_of(e);
        let start = ns.partition_point(|&n| n <= e);
        ns[start..].iter().copied().filter(|n| !self.hub[n.index()])
    }

    fn edge(&self, a: EntityIdx, b: EntityIdx) -> &'g [TripleIdx] {
        let all = self.graph.edge_triples(a, b);
        match self.edge_relations {
            EdgeRelations::First => &all[..all.len().min(1)],
            EdgeRelations::All => all,
        }
    }

    /// Sorted non-hub common neighbours of `a` and `b`.
    fn common(&self, a: EntityIdx, b: EntityIdx, out: &mut Vec<EntityIdx>) {
        out.clear();
        let (x, y) = (self.graph.neighbors_of(a), self.graph.neighbors_of(b));
        let (mut i, mut j) = (0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if !self.hub[x[i].index()] {
                        out.push(x[i]);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

/// Calls `f` with every combination taking one element from each slice.
fn for_each_combination<const N: usize>(lists: [&[TripleIdx]; N], mut f: impl FnMut([TripleIdx; N])) {
    if lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut idx = [0usize; N];
    loop {
        let mut pick = [TripleIdx(0); N];
        for k in 0..N {
            pick[k] = lists[k][idx[k]];
        }
        f(pick);
        let mut k = N;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn finish(mut cycles: Vec<Cycle>, hubs: u64) -> (Vec<Cycle>, ExtractReport) {
    cycles.par_sort_unstable_by_key(|c| c.key);
    let before = cycles.len();
    cycles.dedup_by_key(|c| c.key);
    let report = ExtractReport {
        cycles: cycles.len() as u64,
        hubs_skipped: hubs,
        duplicates_removed: (before - cycles.len()) as u64,
    };
    (cycles, report)
}

/// All triangles, deduplicated and sorted by key.
pub fn extract_len3(graph: &KnowledgeGraph, config: &CycleConfig) -> (Vec<Cycle>, ExtractReport) {
    let view = View::new(graph, config);
    let cycles: Vec<Cycle> = (0..graph.entity_count() as u32)
        .into_par_iter()
        .map(EntityIdx)
        .filter(|&a| !view.hub[a.index()])
        .flat_map_iter(|a| {
            let mut local = Vec::new();
            let mut common = Vec::new();
            for b in view.forward(a) {
                view.common(a, b, &mut common);
                for &c in common.iter().filter(|&&c| c > b) {
                    let lists = [view.edge(a, b), view.edge(b, c), view.edge(c, a)];
                    for_each_combination(lists, |t| local.push(Cycle::triangle(graph, [a, b, c], t)));
                }
            }
            local
        })
        .collect();
    finish(cycles, view.hubs())
}

/// All length-4 cycles with a diagonal, one per (perimeter, diagonal,
/// relation combination), deduplicated and sorted by key.
pub fn extract_len4(graph: &KnowledgeGraph, config: &CycleConfig) -> (Vec<Cycle>, ExtractReport) {
    let view = View::new(graph, config);
    let cycles: Vec<Cycle> = (0..graph.entity_count() as u32)
        .into_par_iter()
        .map(EntityIdx)
        .filter(|&x| !view.hub[x.index()])
        .flat_map_iter(|x| {
            let mut local = Vec::new();
            let mut common = Vec::new();
            for y in view.forward(x) {
                view.common(x, y, &mut common);
                for (i, &u) in common.iter().enumerate() {
                    for &v in &common[i + 1..] {
                        let lists = [
                            view.edge(x, u),
                            view.edge(u, y),
                            view.edge(y, v),
                            view.edge(v, x),
                            view.edge(x, y),
                        ];
                        for_each_combination(lists, |t| {
                            local.push(Cycle::diamond(graph, [x, u, y, v], [t[0], t[1], t[2], t[3]], t[4]))
                        });
                    }
                }
            }
            local
        })
        .collect();
    finish(cycles, view.hubs())
}

schema_tag!(CycleSchema = "cycle/v1");
schema_tag!(ReasoningSchema = "reasoning/v1");

/// JSON form of a cycle. `covering` holds external `[head, relation, tail]`
/// ids in canonical order, diagonal last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub schema: CycleSchema,
    pub key: CycleKey,
    pub kind: CycleKind,
    pub entities: Vec<String>,
    pub covering: Vec<[String; 3]>,
}

impl CycleRecord {
    pub fn new(graph: &KnowledgeGraph, cycle: &Cycle) -> Self {
        CycleRecord {
            schema: CycleSchema,
            key: cycle.key,
            kind: cycle.kind,
            entities: cycle.entities().iter().map(|&e| graph.entity_id(e).to_string()).collect(),
            covering: cycle
                .covering()
                .iter()
                .map(|&t| {
                    let tr = graph.triple(t);
                    [
                        graph.entity_id(tr.head).to_string(),
                        graph.relation_id(tr.relation).to_string(),
                        graph.entity_id(tr.tail).to_string(),
                    ]
                })
                .collect(),
        }
    }

    /// Resolves the record against `graph`, re-deriving and checking its key.
    pub fn resolve(&self, graph: &KnowledgeGraph) -> Result<Cycle> {
        let bad = |m: &str| Error::Config(format!("cycle {}: {m}", self.key));
        if self.entities.len() != self.kind.entity_count() || self.covering.len() != self.kind.triple_count() {
            return Err(bad("wrong arity"));
        }
        let mut ents = [EntityIdx(0); 4];
        for (k, id) in self.entities.iter().enumerate() {
            ents[k] = graph.entity(id).ok_or_else(|| Error::UnknownEntity(id.clone()))?;
        }
        let mut tris = [TripleIdx(0); 5];
        for (k, [h, r, t]) in self.covering.iter().enumerate() {
            let (h, t) = (
                graph.entity(h).ok_or_else(|| Error::UnknownEntity(h.clone()))?,
                graph.entity(t).ok_or_else(|| Error::UnknownEntity(t.clone()))?,
            );
            let r = graph.relation(r).ok_or_else(|| bad("unknown relation"))?;
            tris[k] = *graph
                .edge_triples(h, t)
                .iter()
                .find(|&&x| {
                    let tr = graph.triple(x);
                    tr.head == h && tr.tail == t && tr.relation == r
                })
                .ok_or_else(|| bad("covering triple not in graph"))?;
        }
        let cycle = match self.kind {
            CycleKind::Len3 => Cycle::triangle(graph, [ents[0], ents[1], ents[2]], [tris[0], tris[1], tris[2]]),
            CycleKind::Len4Diagonal => Cycle::diamond(
                graph,
                [ents[0], ents[1], ents[2], ents[3]],
                [tris[0], tris[1], tris[2], tris[3]],
                tris[4],
            ),
        };
        if cycle.key != self.key {
            return Err(bad("key does not match content"));
        }
        Ok(cycle)
    }
}

/// A cycle rendered as one monolingual sentence per covering triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningSample {
    pub schema: ReasoningSchema,
    pub id: String,
    pub lang: Lang,
    pub kind: CycleKind,
    pub cycle_key: CycleKey,
    pub entities: Vec<String>,
    pub sentences: Vec<SyntheticSentence>,
}

impl ReasoningSample {
    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

pub fn reasoning_id(key: CycleKey, lang: Lang) -> String {
    format!("rs:{key}:{lang}")
}

/// Renders every covering triple with default labels in `lang`, perimeter
/// first and diagonal last. `None` if any triple cannot be rendered.
pub fn render_reasoning(graph: &KnowledgeGraph, cycle: &Cycle, lang: Lang, mask: &str) -> Option<ReasoningSample> {
    let id = reasoning_id(cycle.key, lang);
    let sentences = cycle
        .covering()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut s = sentence::parallel_forced(graph, t, lang, [0; 3], mask)?;
            s.provenance.id = format!("{id}#{i}");
            Some(s)
        })
        .collect::<Option<Vec<_>>>()?;
    Some(ReasoningSample {
        schema: ReasoningSchema,
        id,
        lang,
        kind: cycle.kind,
        cycle_key: cycle.key,
        entities: cycle.entities().iter().map(|&e| graph.entity_id(e).to_string()).collect(),
        sentences,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCombinationStats {
    pub len3_cycles: u64,
    pub len4_cycles: u64,
    pub len3_unique_relation_combinations: u64,
    pub len4_unique_relation_combinations: u64,
}

/// Counts distinct relation multisets per cycle kind.
pub fn relation_combination_stats<I>(cycles: I) -> RelationCombinationStats
where
    I: IntoIterator<Item = (CycleKind, Vec<String>)>,
{
    let mut seen3: HashSet<Vec<String>> = HashSet::new();
    let mut seen4: HashSet<Vec<String>> = HashSet::new();
    let mut stats = RelationCombinationStats::default();
    for (kind, mut rels) in cycles {
        rels.sort_unstable();
        match kind {
            CycleKind::Len3 => {
                stats.len3_cycles += 1;
                seen3.insert(rels);
            }
            CycleKind::Len4Diagonal => {
                stats.len4_cycles += 1;
                seen4.insert(rels);
            }
        }
    }
    stats.len3_unique_relation_combinations = seen3.len() as u64;
    stats.len4_unique_relation_combinations = seen4.len() as u64;
    stats
}

/// Relation ids of a cycle, for [`relation_combination_stats`].
pub fn relation_ids(graph: &KnowledgeGraph, cycle: &Cycle) -> (CycleKind, Vec<String>) {
    let rels = cycle
        .relation_multiset(graph)
        .into_iter()
        .map(|r| graph.relation_id(r).to_string())
        .collect();
    (cycle.kind, rels)
}
