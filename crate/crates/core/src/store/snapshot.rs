//! Versioned binary snapshot of an ingested graph. The adjacency index is not
//! stored; it is rebuilt deterministically on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestReport, KnowledgeGraph, Lexicon, Triple};
use crate::error::{Error, Result};
use crate::lang::Lang;

const MAGIC: &[u8; 8] = b"KG2CSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotBody {
    languages: Vec<Lang>,
    lexicon: Lexicon,
    entities: Vec<String>,
    relations: Vec<String>,
    triples: Vec<Triple>,
    report: IngestReport,
}

pub fn snapshot_bytes(graph: &KnowledgeGraph, report: &IngestReport) -> Vec<u8> {
    let body = SnapshotBody {
        languages: graph.languages.clone(),
        lexicon: graph.lexicon.clone(),
        entities: graph.entities.clone(),
        relations: graph.relations.clone(),
        triples: graph.triples.clone(),
        report: report.clone(),
    };
    let mut out = Vec::with_capacity(64 + graph.triples.len() * 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    bincode::serialize_into(&mut out, &body).expect("in-memory serialization");
    out
}

pub fn save_snapshot(path: &Path, graph: &KnowledgeGraph, report: &IngestReport) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, snapshot_bytes(graph, report)).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<(KnowledgeGraph, IngestReport)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::Snapshot {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(fail("not a kg2corpus snapshot".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(fail(format!(
            "snapshot version {version}, this build reads {SNAPSHOT_VERSION}"
        )));
    }
    let mut body: SnapshotBody =
        bincode::deserialize(&bytes[12..]).map_err(|e| fail(e.to_string()))?;
    body.lexicon.rebuild_index();
    let graph = KnowledgeGraph::from_parts(
        body.languages,
        body.lexicon,
        body.entities,
        body.relations,
        body.triples,
    );
    Ok((graph, body.report))
}
