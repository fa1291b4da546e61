use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AddOutcome, GraphBuilder, KnowledgeGraph, Lexicon};
use crate::error::{Error, Result};
use crate::lang::{self, Lang};

/// What to do with a triple whose entity or relation has no lexicon entry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Drop,
    Error,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(MissingPolicy::Drop),
            "error" => Ok(MissingPolicy::Error),
            other => Err(Error::Config(format!("unknown missing-entity policy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub languages: Vec<Lang>,
    pub on_missing_entity: MissingPolicy,
    /// Maximum surfaces kept per (item, language), label included.
    pub alias_cap: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            languages: lang::default_languages(),
            on_missing_entity: MissingPolicy::Drop,
            alias_cap: 16,
        }
    }
}

/// Validation report. `input_lines` counts triple data lines (comments and
/// blank lines excluded) and always equals
/// `triples + duplicates + self_loops + missing_lexicon`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lexicon_items: usize,
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub input_lines: usize,
    pub duplicates: usize,
    pub self_loops: usize,
    pub missing_lexicon: usize,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct LexiconLine {
    id: String,
    #[serde(default)]
    labels: BTreeMap<String, LexiconLang>,
}

#[derive(Deserialize)]
struct LexiconLang {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    aliases: Vec<String>,
}

const CHUNK: usize = 1 << 16;

/// Reads `path` in chunks of lines, parsing each chunk in parallel and
/// handing the parsed values to `sink` in file order.
fn for_each_parsed<T, P, S>(path: &Path, parse: P, mut sink: S) -> Result<()>
where
    T: Send,
    P: Fn(usize, &str) -> Result<Option<T>> + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        for (i, line) in lines.by_ref().take(CHUNK) {
            chunk.push((i + 1, line.map_err(|e| Error::io(path, e))?));
        }
        if chunk.is_empty() {
            return Ok(());
        }
        let parsed: Vec<(usize, Option<T>)> = chunk
            .par_iter()
            .map(|(n, line)| parse(*n, line).map(|v| (*n, v)))
            .collect::<Result<_>>()?;
        for (n, v) in parsed {
            if let Some(v) = v {
                sink(n, v)?;
            }
        }
    }
}

pub(crate) fn read_lexicon(path: &Path, config: &IngestConfig) -> Result<Lexicon> {
    let allowed: BTreeSet<Lang> = config.languages.iter().copied().collect();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    let mut lexicon = Lexicon::new();

    for_each_parsed(
        path,
        |n, line| {
            if line.trim().is_empty() {
                return Ok(None);
            }
            let item: LexiconLine = serde_json::from_str(line)
                .map_err(|e| Error::malformed(path, n, format!("invalid lexicon record: {e}")))?;
            if item.id.trim().is_empty() {
                return Err(Error::malformed(path, n, "empty item id"));
            }
            Ok(Some(item))
        },
        |n, item| {
            let mut entries = Vec::with_capacity(item.labels.len());
            for (code, entry) in item.labels {
                match code.parse::<Lang>() {
                    Ok(l) if allowed.contains(&l) => entries.push((l, entry.label, entry.aliases)),
                    _ => {
                        unknown.insert(code);
                    }
                }
            }
            if !lexicon.insert(&item.id, entries, config.alias_cap) {
                return Err(Error::malformed(path, n, format!("duplicate item id {}", item.id)));
            }
            Ok(())
        },
    )?;

    if !unknown.is_empty() {
        return Err(Error::UnknownLanguage(unknown.into_iter().collect()));
    }
    Ok(lexicon)
}

/// Loads the lexicon and triples files into a validated graph.
pub fn ingest(
    lexicon_path: &Path,
    triples_path: &Path,
    config: &IngestConfig,
) -> Result<(KnowledgeGraph, IngestReport)> {
    if config.alias_cap == 0 {
        return Err(Error::Config("alias cap must be at least 1".into()));
    }
    if !config.languages.contains(&Lang::EN) {
        return Err(Error::Config("language set must contain en".into()));
    }
    let lexicon = read_lexicon(lexicon_path, config)?;
    let mut report = IngestReport {
        lexicon_items: lexicon.len(),
        ..Default::default()
    };
    let mut builder = GraphBuilder::new(config.languages.clone(), lexicon);

    for_each_parsed(
        triples_path,
        |n, line| {
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                return Ok(None);
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::malformed(
                    triples_path,
                    n,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            if cols.iter().any(|c| c.is_empty()) {
                return Err(Error::malformed(triples_path, n, "empty identifier"));
            }
            Ok(Some([cols[0].to_string(), cols[1].to_string(), cols[2].to_string()]))
        },
        |n, [h, r, t]| {
            report.input_lines += 1;
            match builder.add(&h, &r, &t) {
                AddOutcome::Stored => {}
                AddOutcome::Duplicate => report.duplicates += 1,
                AddOutcome::SelfLoop => report.self_loops += 1,
                AddOutcome::Missing { kind, id } => match config.on_missing_entity {
                    MissingPolicy::Drop => report.missing_lexicon += 1,
                    MissingPolicy::Error => {
                        return Err(Error::MissingLexiconEntry {
                            path: triples_path.to_path_buf(),
                            line: n,
                            kind,
                            id,
                        })
                    }
                },
            }
            Ok(())
        },
    )?;

    let graph = builder.build();
    report.entities = graph.entity_count();
    report.relations = graph.relation_count();
    report.triples = graph.triple_count();
    if report.triples == 0 {
        report.warnings.push("no triples stored".to_string());
    }
    if report.missing_lexicon > 0 {
        report
            .warnings
            .push(format!("{} triples dropped for missing lexicon entries", report.missing_lexicon));
    }
    for w in &report.warnings {
        log::warn!("ingest: {w}");
    }
    log::info!(
        "ingest: {} entities, {} relations, {} triples ({} duplicates, {} self-loops, {} missing)",
        report.entities,
        report.relations,
        report.triples,
        report.duplicates,
        report.self_loops,
        report.missing_lexicon
    );
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const LEX: &str = r#"{"id":"Q1420","labels":{"en":{"label":"motor car","aliases":["auto","autocar"]},"es":{"label":"automóvil","aliases":["coche","carro"]}}}
{"id":"P2283","labels":{"en":{"label":"uses"}}}
{"id":"Q5","labels":{"en":{"label":"human"}}}
"#;

    #[test]
    fn single_triple_two_entities() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(dir.path(), "t.tsv", "# comment\nQ1420\tP2283\tQ5\n");
        let (g, r) = ingest(&lex, &tri, &IngestConfig::default()).unwrap();
        assert_eq!(g.triple_count(), 1);
        assert_eq!(g.entity_count(), 2);
        assert_eq!(r.input_lines, 1);
        assert_eq!(g.lexicon().label("Q1420", "es".parse().unwrap(), 1), Some("coche"));
    }

    #[test]
    fn empty_triples_warns() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(dir.path(), "t.tsv", "");
        let (g, r) = ingest(&lex, &tri, &IngestConfig::default()).unwrap();
        assert_eq!(g.triple_count(), 0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn duplicate_counted() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(dir.path(), "t.tsv", "Q1420\tP2283\tQ5\nQ1420\tP2283\tQ5\n");
        let (g, r) = ingest(&lex, &tri, &IngestConfig::default()).unwrap();
        assert_eq!(g.triple_count(), 1);
        assert_eq!(r.duplicates, 1);
    }

    #[test]
    fn conservation_of_lines() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(
            dir.path(),
            "t.tsv",
            "Q1420\tP2283\tQ5\nQ5\tP2283\tQ5\nQ5\tP2283\tQ404\n\n#x\nQ1420\tP2283\tQ5\nQ5\tP2283\tQ1420\n",
        );
        let (_, r) = ingest(&lex, &tri, &IngestConfig::default()).unwrap();
        assert_eq!(r.input_lines, 5);
        assert_eq!((r.triples, r.self_loops, r.missing_lexicon, r.duplicates), (2, 1, 1, 1));
        assert_eq!(r.triples + r.duplicates + r.self_loops + r.missing_lexicon, r.input_lines);
    }

    #[test]
    fn malformed_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(dir.path(), "t.tsv", "Q1420\tP2283\tQ5\nQ1420 P2283 Q5\n");
        let err = ingest(&lex, &tri, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");

        let bad_lex = write(dir.path(), "bad.jsonl", "{\"id\":\"Q1\"}\nnot json\n");
        let err = ingest(&bad_lex, &tri, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_language_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(
            dir.path(),
            "lex.jsonl",
            "{\"id\":\"Q1\",\"labels\":{\"hu\":{\"label\":\"autó\"},\"xx\":{\"label\":\"?\"}}}\n",
        );
        let tri = write(dir.path(), "t.tsv", "");
        match ingest(&lex, &tri, &IngestConfig::default()).unwrap_err() {
            Error::UnknownLanguage(codes) => assert_eq!(codes, ["hu", "xx"]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_entity_policy_error() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write(dir.path(), "lex.jsonl", LEX);
        let tri = write(dir.path(), "t.tsv", "Q1420\tP2283\tQ5\nQ1420\tP2283\tQ9\n");
        let cfg = IngestConfig {
            on_missing_entity: MissingPolicy::Error,
            ..Default::default()
        };
        let err = ingest(&lex, &tri, &cfg).unwrap_err();
        assert!(matches!(err, Error::MissingLexiconEntry { line: 2, .. }), "{err}");
    }
}
