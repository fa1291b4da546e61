//! Interned multilingual triple store with an undirected adjacency index.

mod ingest;
mod lexicon;
mod snapshot;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::Lang;

pub use ingest::{ingest, IngestConfig, IngestReport, MissingPolicy};
pub use lexicon::{normalize_surface, LangSurfaces, Lexicon};
pub use snapshot::{load_snapshot, save_snapshot, snapshot_bytes, SNAPSHOT_VERSION};

macro_rules! index_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_type!(
    /// Dense interned entity index.
    EntityIdx
);
index_type!(
    /// Dense interned relation index, a namespace separate from entities.
    RelationIdx
);
index_type!(
    /// Position of a stored triple.
    TripleIdx
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityIdx,
    pub relation: RelationIdx,
    pub tail: EntityIdx,
}

impl Triple {
    /// The endpoint opposite `e`.
    pub fn other(&self, e: EntityIdx) -> EntityIdx {
        if self.head == e {
            self.tail
        } else {
            self.head
        }
    }

    pub fn connects(&self, a: EntityIdx, b: EntityIdx) -> bool {
        (self.head == a && self.tail == b) || (self.head == b && self.tail == a)
    }
}

/// Orientation of a stored triple relative to a queried pair `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Stored as `a -> b`.
    Forward,
    /// Stored as `b -> a`.
    Backward,
}

/// The item kinds sharing the lexicon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Item {
    Entity(EntityIdx),
    Relation(RelationIdx),
}

/// Immutable knowledge graph. Safe for concurrent reads.
#[derive(Debug)]
pub struct KnowledgeGraph {
    languages: Vec<Lang>,
    lexicon: Lexicon,
    entities: Vec<String>,
    entity_index: HashMap<String, EntityIdx>,
    entity_lex: Vec<Option<u32>>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationIdx>,
    relation_lex: Vec<Option<u32>>,
    triples: Vec<Triple>,
    // undirected view, CSR: neighbors of e are adj[adj_offsets[e]..adj_offsets[e + 1]]
    adj_offsets: Vec<usize>,
    adj: Vec<EntityIdx>,
    adj_edge: Vec<u32>,
    // triples on each unordered pair, in stored order
    edge_offsets: Vec<usize>,
    edge_triples: Vec<TripleIdx>,
}

impl KnowledgeGraph {
    fn from_parts(
        languages: Vec<Lang>,
        lexicon: Lexicon,
        entities: Vec<String>,
        relations: Vec<String>,
        triples: Vec<Triple>,
    ) -> Self {
        let entity_index = entities
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), EntityIdx(i as u32)))
            .collect();
        let relation_index = relations
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), RelationIdx(i as u32)))
            .collect();
        let entity_lex = entities.iter().map(|id| lexicon.row(id)).collect();
        let relation_lex = relations.iter().map(|id| lexicon.row(id)).collect();

        let mut pairs: Vec<(u32, u32, u32)> = triples
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let (lo, hi) = ordered(t.head.0, t.tail.0);
                (lo, hi, i as u32)
            })
            .collect();
        pairs.sort_unstable();

        let mut edge_offsets = vec![0usize];
        let mut edge_triples = Vec::with_capacity(pairs.len());
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for (i, &(lo, hi, t)) in pairs.iter().enumerate() {
            if i > 0 && (pairs[i - 1].0, pairs[i - 1].1) != (lo, hi) {
                edge_offsets.push(edge_triples.len());
            }
            if edges.last() != Some(&(lo, hi)) {
                edges.push((lo, hi));
            }
            edge_triples.push(TripleIdx(t));
        }
        edge_offsets.push(edge_triples.len());
        if edges.is_empty() {
            edge_offsets.truncate(1);
        }
        drop(pairs);

        let n = entities.len();
        let mut degree = vec![0usize; n];
        for &(lo, hi) in &edges {
            degree[lo as usize] += 1;
            degree[hi as usize] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets[..n].to_vec();
        let mut adj = vec![EntityIdx(0); edges.len() * 2];
        let mut adj_edge = vec![0u32; edges.len() * 2];
        // Edges are sorted by (lo, hi). Filling every list with its smaller
        // neighbors first, then its larger ones, leaves each list sorted.
        for (e, &(lo, hi)) in edges.iter().enumerate() {
            let p = fill[hi as usize];
            adj[p] = EntityIdx(lo);
            adj_edge[p] = e as u32;
            fill[hi as usize] += 1;
        }
        for (e, &(lo, hi)) in edges.iter().enumerate() {
            let p = fill[lo as usize];
            adj[p] = EntityIdx(hi);
            adj_edge[p] = e as u32;
            fill[lo as usize] += 1;
        }

        KnowledgeGraph {
            languages,
            lexicon,
            entities,
            entity_index,
            entity_lex,
            relations,
            relation_index,
            relation_lex,
            triples,
            adj_offsets,
            adj,
            adj_edge,
            edge_offsets,
            edge_triples,
        }
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, t: TripleIdx) -> Triple {
        self.triples[t.index()]
    }

    pub fn entity(&self, id: &str) -> Option<EntityIdx> {
        self.entity_index.get(id).copied()
    }

    pub fn relation(&self, id: &str) -> Option<RelationIdx> {
        self.relation_index.get(id).copied()
    }

    pub fn entity_id(&self, e: EntityIdx) -> &str {
        &self.entities[e.index()]
    }

    pub fn relation_id(&self, r: RelationIdx) -> &str {
        &self.relations[r.index()]
    }

    pub fn item_id(&self, item: Item) -> &str {
        match item {
            Item::Entity(e) => self.entity_id(e),
            Item::Relation(r) => self.relation_id(r),
        }
    }

    /// All surfaces of an item in `lang` (`[label, aliases...]`).
    pub fn surfaces(&self, item: Item, lang: Lang) -> Option<&[String]> {
        let row = match item {
            Item::Entity(e) => self.entity_lex[e.index()],
            Item::Relation(r) => self.relation_lex[r.index()],
        }?;
        self.lexicon.row_surfaces(row, lang)
    }

    pub fn label(&self, item: Item, lang: Lang, index: usize) -> Option<&str> {
        self.surfaces(item, lang)
            .and_then(|s| s.get(index))
            .map(String::as_str)
    }

    pub fn default_label(&self, item: Item, lang: Lang) -> Option<&str> {
        self.label(item, lang, 0)
    }

    /// Undirected neighbors of `e`, sorted by interned index.
    #[inline]
    pub fn neighbors_of(&self, e: EntityIdx) -> &[EntityIdx] {
        &self.adj[self.adj_offsets[e.index()]..self.adj_offsets[e.index() + 1]]
    }

    #[inline]
    pub fn degree(&self, e: EntityIdx) -> usize {
        self.adj_offsets[e.index() + 1] - self.adj_offsets[e.index()]
    }

    /// Neighbors by external id.
    pub fn neighbors(&self, id: &str) -> Result<Vec<&str>> {
        let e = self.entity(id).ok_or_else(|| Error::UnknownEntity(id.to_string()))?;
        Ok(self.neighbors_of(e).iter().map(|&n| self.entity_id(n)).collect())
    }

    /// Stored triples on the unordered pair `{a, b}`, in stored order.
    #[inline]
    pub fn edge_triples(&self, a: EntityIdx, b: EntityIdx) -> &[TripleIdx] {
        let base = self.adj_offsets[a.index()];
        match self.neighbors_of(a).binary_search(&b) {
            Ok(pos) => {
                let edge = self.adj_edge[base + pos] as usize;
                &self.edge_triples[self.edge_offsets[edge]..self.edge_offsets[edge + 1]]
            }
            Err(_) => &[],
        }
    }

    #[inline]
    pub fn connected(&self, a: EntityIdx, b: EntityIdx) -> bool {
        self.neighbors_of(a).binary_search(&b).is_ok()
    }

    /// Every relation on `{a, b}` tagged with its stored direction relative
    /// to `a -> b`.
    pub fn relations_between_idx(&self, a: EntityIdx, b: EntityIdx) -> Vec<(RelationIdx, Direction)> {
        self.edge_triples(a, b)
            .iter()
            .map(|&t| {
                let tr = self.triple(t);
                let dir = if tr.head == a {
                    Direction::Forward
                } else {
                    Direction::Backward
                };
                (tr.relation, dir)
            })
            .collect()
    }

    pub fn relations_between(&self, a: &str, b: &str) -> Result<Vec<(&str, Direction)>> {
        let ea = self.entity(a).ok_or_else(|| Error::UnknownEntity(a.to_string()))?;
        let eb = self.entity(b).ok_or_else(|| Error::UnknownEntity(b.to_string()))?;
        Ok(self
            .relations_between_idx(ea, eb)
            .into_iter()
            .map(|(r, d)| (self.relation_id(r), d))
            .collect())
    }

    /// Triples incident to `e` in either direction, ascending.
    pub fn incident_triples(&self, e: EntityIdx) -> Vec<TripleIdx> {
        let mut out: Vec<TripleIdx> = self
            .neighbors_of(e)
            .iter()
            .flat_map(|&n| self.edge_triples(e, n).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Outcome of offering one triple to a [`GraphBuilder`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AddOutcome {
    Stored,
    Duplicate,
    SelfLoop,
    Missing { kind: &'static str, id: String },
}

/// Incremental graph construction. Ids are interned in order of first
/// appearance in stored triples.
pub struct GraphBuilder {
    languages: Vec<Lang>,
    lexicon: Lexicon,
    require_lexicon: bool,
    entities: Vec<String>,
    entity_index: HashMap<String, EntityIdx>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationIdx>,
    seen: HashSet<Triple>,
    triples: Vec<Triple>,
}

impl GraphBuilder {
    /// A builder that requires every endpoint and relation to be in `lexicon`.
    pub fn new(languages: Vec<Lang>, lexicon: Lexicon) -> Self {
        GraphBuilder {
            languages,
            lexicon,
            require_lexicon: true,
            entities: Vec::new(),
            entity_index: HashMap::new(),
            relations: Vec::new(),
            relation_index: HashMap::new(),
            seen: HashSet::new(),
            triples: Vec::new(),
        }
    }

    /// A builder that accepts ids without lexicon entries (structural graphs).
    pub fn unlabeled() -> Self {
        let mut b = Self::new(vec![Lang::EN], Lexicon::new());
        b.require_lexicon = false;
        b
    }

    pub fn with_capacity(mut self, entities: usize, triples: usize) -> Self {
        self.entities.reserve(entities);
        self.entity_index.reserve(entities);
        self.triples.reserve(triples);
        self.seen.reserve(triples);
        self
    }

    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> AddOutcome {
        if self.require_lexicon {
            for (kind, id) in [("entity", head), ("relation", relation), ("entity", tail)] {
                if !self.lexicon.contains(id) {
                    return AddOutcome::Missing {
                        kind,
                        id: id.to_string(),
                    };
                }
            }
        }
        if head == tail {
            return AddOutcome::SelfLoop;
        }
        let h = intern(&mut self.entities, &mut self.entity_index, head, EntityIdx);
        let r = intern(&mut self.relations, &mut self.relation_index, relation, RelationIdx);
        let t = intern(&mut self.entities, &mut self.entity_index, tail, EntityIdx);
        let triple = Triple {
            head: h,
            relation: r,
            tail: t,
        };
        if self.seen.insert(triple) {
            self.triples.push(triple);
            AddOutcome::Stored
        } else {
            AddOutcome::Duplicate
        }
    }

    pub fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(
            self.languages,
            self.lexicon,
            self.entities,
            self.relations,
            self.triples,
        )
    }
}

fn intern<I: Copy>(
    ids: &mut Vec<String>,
    index: &mut HashMap<String, I>,
    id: &str,
    make: fn(u32) -> I,
) -> I {
    if let Some(&i) = index.get(id) {
        return i;
    }
    let i = make(ids.len() as u32);
    ids.push(id.to_string());
    index.insert(id.to_string(), i);
    i
}
