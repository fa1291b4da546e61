//! Fixture graphs shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kg2corpus::store::{GraphBuilder, Lexicon};
use kg2corpus::{KnowledgeGraph, Lang};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const M: &str = "[mask]";

pub fn l(s: &str) -> Lang {
    s.parse().unwrap()
}

/// One lexicon row: `(lang, label, aliases)` per language.
pub type Entry = (Lang, String, Vec<String>);

#[derive(Clone, Debug, Default)]
pub struct Fixture {
    pub langs: Vec<Lang>,
    pub items: Vec<(String, Vec<Entry>)>,
    pub triples: Vec<[String; 3]>,
}

impl Fixture {
    pub fn new(langs: &[&str]) -> Self {
        Fixture {
            langs: langs.iter().map(|s| l(s)).collect(),
            ..Default::default()
        }
    }

    /// Adds an item; `rows` are `(lang, label, aliases)`.
    pub fn item(&mut self, id: &str, rows: &[(&str, &str, &[&str])]) -> &mut Self {
        let entries = rows
            .iter()
            .map(|(lang, label, aliases)| (l(lang), label.to_string(), aliases.iter().map(|a| a.to_string()).collect()))
            .collect();
        self.items.push((id.to_string(), entries));
        self
    }

    /// English-only item.
    pub fn en(&mut self, id: &str, label: &str) -> &mut Self {
        self.item(id, &[("en", label, &[])])
    }

    pub fn triple(&mut self, h: &str, r: &str, t: &str) -> &mut Self {
        self.triples.push([h.into(), r.into(), t.into()]);
        self
    }

    pub fn graph(&self) -> KnowledgeGraph {
        let mut lex = Lexicon::new();
        for (id, entries) in &self.items {
            lex.insert(id, entries.iter().map(|(l, s, a)| (*l, Some(s.clone()), a.clone())), 16);
        }
        let mut b = GraphBuilder::new(self.langs.clone(), lex);
        for [h, r, t] in &self.triples {
            b.add(h, r, t);
        }
        b.build()
    }

    pub fn lexicon_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, entries) in &self.items {
            let labels: serde_json::Map<String, serde_json::Value> = entries
                .iter()
                .map(|(l, s, a)| (l.to_string(), serde_json::json!({"label": s, "aliases": a})))
                .collect();
            writeln!(out, "{}", serde_json::json!({"id": id, "labels": labels})).unwrap();
        }
        out
    }

    pub fn triples_tsv(&self) -> String {
        let mut out = String::from("# head\trelation\ttail\n");
        for [h, r, t] in &self.triples {
            writeln!(out, "{h}\t{r}\t{t}").unwrap();
        }
        out
    }

    /// Writes `lexicon.jsonl` and `triples.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> (PathBuf, PathBuf) {
        fs::create_dir_all(dir).unwrap();
        let lex = dir.join("lexicon.jsonl");
        let tri = dir.join("triples.tsv");
        fs::write(&lex, self.lexicon_jsonl()).unwrap();
        fs::write(&tri, self.triples_tsv()).unwrap();
        (lex, tri)
    }
}

pub fn motor_car() -> Fixture {
    let mut f = Fixture::new(&["en", "fr", "de"]);
    f.item(
        "Q1420",
        &[("en", "motor car", &["auto", "autocar", "automobile"]), ("fr", "automobile", &["voiture"])],
    )
    .item(
        "P1",
        &[("en", "designed to carry", &["intended to carry"]), ("fr", "conçu pour transporter", &["destiné au transport"])],
    )
    .item("Q2", &[("en", "passenger", &[]), ("fr", "passager", &[])])
    .triple("Q1420", "P1", "Q2");
    f
}

/// The president / residence triangle.
pub fn obama() -> Fixture {
    let mut f = Fixture::new(&["en"]);
    f.en("Q11696", "President of the United States")
        .en("Q35525", "White House")
        .en("Q76", "Barack Obama")
        .en("P263", "official residence")
        .en("P551", "residence")
        .en("P39", "position held")
        .triple("Q11696", "P263", "Q35525")
        .triple("Q76", "P551", "Q35525")
        .triple("Q76", "P39", "Q11696");
    f
}

/// Family square with the mother edge as diagonal.
pub fn kapoor() -> Fixture {
    let mut f = Fixture::new(&["en"]);
    f.en("Q1", "Ritu Nanda")
        .en("Q2", "Raj Kapoor")
        .en("Q3", "Krishna Kapoor")
        .en("Q4", "Rajiv Kapoor")
        .en("P22", "father")
        .en("P25", "mother")
        .en("P3373", "sibling")
        .en("P26", "spouse")
        .triple("Q1", "P22", "Q2")
        .triple("Q1", "P25", "Q3")
        .triple("Q4", "P25", "Q3")
        .triple("Q4", "P3373", "Q1")
        .triple("Q2", "P26", "Q3");
    f
}

/// Sentences of the family square in the order they are usually printed.
pub const KAPOOR_ORDER: [&str; 5] = [
    "Ritu Nanda [mask] father [mask] Raj Kapoor.",
    "Ritu Nanda [mask] mother [mask] Krishna Kapoor.",
    "Rajiv Kapoor [mask] mother [mask] Krishna Kapoor.",
    "Rajiv Kapoor [mask] sibling [mask] Ritu Nanda.",
    "Raj Kapoor [mask] spouse [mask] Krishna Kapoor.",
];

/// Time-zone triangle. The two zone entities touch exactly four relations
/// besides the cycle's own, while the rest of the graph holds others.
pub fn poland() -> Fixture {
    let mut f = Fixture::new(&["en", "fr"]);
    f.item("Q36", &[("en", "Poland", &[]), ("fr", "Pologne", &[])])
        .item("Q6723", &[("en", "UTC+01:00", &[]), ("fr", "UTC+01:00", &[])])
        .item("Q25989", &[("en", "Central European Time", &[]), ("fr", "heure normale d'Europe centrale", &[])])
        .item("P421", &[("en", "located in time zone", &[]), ("fr", "fuseau horaire", &[])])
        .item("P460", &[("en", "said to be the same as", &[]), ("fr", "réputé identique à", &[])])
        .item("P361", &[("en", "part of", &[]), ("fr", "partie de", &[])])
        .item("P31", &[("en", "instance of", &[]), ("fr", "nature de l'élément", &[])])
        .item("P527", &[("en", "has part", &[]), ("fr", "comprend", &[])])
        .item("P156", &[("en", "followed by", &[]), ("fr", "suivi par", &[])])
        .item("P17", &[("en", "country", &[]), ("fr", "pays", &[])])
        .item("P30", &[("en", "continent", &[]), ("fr", "continent", &[])])
        .en("Q1", "time zones of Europe")
        .en("Q2", "time zone")
        .en("Q3", "Central European Summer Time")
        .en("Q4", "UTC+02:00")
        .en("Q5", "Warsaw")
        .en("Q6", "Europe")
        .triple("Q36", "P421", "Q6723")
        .triple("Q36", "P421", "Q25989")
        .triple("Q6723", "P460", "Q25989")
        .triple("Q25989", "P361", "Q1")
        .triple("Q6723", "P31", "Q2")
        .triple("Q25989", "P527", "Q3")
        .triple("Q6723", "P156", "Q4")
        .triple("Q5", "P17", "Q36")
        .triple("Q5", "P17", "Q6")
        .triple("Q5", "P30", "Q6");
    f
}

/// Knobs for [`clustered`].
#[derive(Clone, Copy, Debug)]
pub struct Synth {
    pub seed: u64,
    pub clusters: usize,
    pub cluster_size: usize,
    /// Edge probability inside a cluster.
    pub p: f64,
    /// Random edges between clusters, per entity.
    pub cross: f64,
    pub relations: usize,
    /// Probability that an edge gets a second, parallel triple.
    pub parallel: f64,
}

impl Default for Synth {
    fn default() -> Self {
        Synth {
            seed: 1,
            clusters: 50,
            cluster_size: 8,
            p: 0.5,
            cross: 0.5,
            relations: 40,
            parallel: 0.05,
        }
    }
}

/// Labelled random graph made of dense clusters joined by sparse random
/// edges. Entities carry en/fr/de/zh labels with a few gaps; relations are
/// labelled in every language.
pub fn clustered(s: Synth) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut f = Fixture::new(&["en", "fr", "de", "zh"]);
    let n = s.clusters * s.cluster_size;
    for i in 0..n {
        let (en, fr, de, zh) = (
            format!("entity {i}"),
            format!("entité {i}"),
            format!("Objekt {i}"),
            format!("实体{i}"),
        );
        let alias = format!("e{i}");
        let alias_ref: [&str; 1] = [&alias];
        let mut rows: Vec<(&str, &str, &[&str])> = vec![("en", &en, &alias_ref)];
        if i % 17 != 3 {
            rows.push(("fr", &fr, &[]));
        }
        if i % 11 != 5 {
            rows.push(("de", &de, &[]));
        }
        rows.push(("zh", &zh, &[]));
        f.item(&format!("Q{i}"), &rows);
    }
    for r in 0..s.relations {
        let (en, fr, de, zh) = (
            format!("relation {r}"),
            format!("relation n°{r}"),
            format!("Beziehung {r}"),
            format!("关系{r}"),
        );
        let alias = format!("rel {r}");
        let alias_ref: [&str; 1] = [&alias];
        f.item(&format!("P{r}"), &[("en", &en, &alias_ref), ("fr", &fr, &[]), ("de", &de, &[]), ("zh", &zh, &[])]);
    }
    let edge = |f: &mut Fixture, rng: &mut ChaCha8Rng, a: usize, b: usize| {
        let (h, t) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let r = rng.gen_range(0..s.relations);
        f.triple(&format!("Q{h}"), &format!("P{r}"), &format!("Q{t}"));
        if rng.gen_bool(s.parallel) {
            let r2 = (r + 1 + rng.gen_range(0..s.relations - 1)) % s.relations;
            f.triple(&format!("Q{t}"), &format!("P{r2}"), &format!("Q{h}"));
        }
    };
    for c in 0..s.clusters {
        let base = c * s.cluster_size;
        for i in 0..s.cluster_size {
            for j in i + 1..s.cluster_size {
                if rng.gen_bool(s.p) {
                    edge(&mut f, &mut rng, base + i, base + j);
                }
            }
        }
    }
    let cross = (s.cross * n as f64) as usize;
    for _ in 0..cross {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edge(&mut f, &mut rng, a, b);
        }
    }
    f.triples.shuffle(&mut rng);
    f
}

/// Unlabelled Erdős–Rényi style graph over `n` entities. Every edge gets a
/// relation from `relations` and a random direction.
pub fn random_graph(seed: u64, n: usize, p: f64, relations: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Fixture::new(&["en"]);
    for i in 0..n {
        f.en(&format!("Q{i}"), &format!("e{i}"));
    }
    for r in 0..relations {
        f.en(&format!("P{r}"), &format!("r{r}"));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                let (h, t) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                f.triple(&format!("Q{h}"), &format!("P{}", rng.gen_range(0..relations)), &format!("Q{t}"));
            }
        }
    }
    f
}
