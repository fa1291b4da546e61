//! Interleaves the plain-text, knowledge and reasoning streams into one
//! shuffled record stream tagged with stream and task, plus a manifest that
//! carries batch sizes and the loss weight for the trainer.
//!
//! The shuffle is a two-pass scatter: every input record goes to a uniformly
//! drawn bucket file, then each bucket is loaded and permuted on its own.
//! The result is a uniform permutation using memory proportional to one
//! bucket per worker.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::{self, schema_tag, JsonlWriter};
use crate::mask::Task;
use crate::seed;

schema_tag!(MixedSchema = "mixed/v1");
schema_tag!(MixManifestSchema = "mix-manifest/v1");

pub const MIXED_FILE: &str = "mixed.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Opaque plain-text stream for the ordinary MLM loss.
    Plain,
    Knowledge,
    Reasoning,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Plain => "plain",
            StreamKind::Knowledge => "knowledge",
            StreamKind::Reasoning => "reasoning",
        }
    }
}

fn default_batch() -> usize {
    9600
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub paths: Vec<PathBuf>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixManifest {
    pub streams: Vec<StreamSpec>,
    /// Weight of the knowledge and reasoning losses next to plain MLM.
    pub alpha: f64,
    /// Carried for the trainer; records are not chunked here.
    pub max_seq_len: usize,
    /// Target records per shuffle bucket.
    pub shard_records: usize,
}

impl Default for MixManifest {
    fn default() -> Self {
        MixManifest {
            streams: Vec::new(),
            alpha: 0.3,
            max_seq_len: 128,
            shard_records: 1 << 18,
        }
    }
}

impl MixManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: MixManifest = toml::from_str(text).map_err(|e| Error::Config(format!("mix manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_toml(&text)?;
        // relative stream paths are relative to the manifest
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut m.streams {
            for p in &mut s.paths {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.shard_records == 0 || self.max_seq_len == 0 {
            return Err(Error::Config("shard_records and max_seq_len must be positive".into()));
        }
        if let Some(s) = self.streams.iter().find(|s| s.batch_size == 0) {
            return Err(Error::Config(format!("{} stream has batch size 0", s.kind.name())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub kind: StreamKind,
    pub paths: Vec<PathBuf>,
    pub records: u64,
    pub batch_size: usize,
}

/// The manifest written next to the mixed stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub schema: MixManifestSchema,
    pub seed: u64,
    pub alpha: f64,
    pub loss: String,
    pub max_seq_len: usize,
    pub streams: Vec<StreamSummary>,
    pub records: u64,
    pub shards: usize,
}

#[derive(Deserialize)]
struct TaskOnly {
    task: Task,
}

/// Stream tag and task of one input line, and the JSON value to embed.
fn tag_line(kind: StreamKind, line: &str, path: &Path, n: usize) -> Result<String> {
    let (task, record) = match kind {
        StreamKind::Plain => {
            let record = match serde_json::from_str::<serde_json::Value>(line) {
                Ok(_) => line.to_string(),
                Err(_) => serde_json::to_string(line)?,
            };
            ("mlm", record)
        }
        StreamKind::Knowledge | StreamKind::Reasoning => {
            let t: TaskOnly = serde_json::from_str(line).map_err(|e| Error::malformed(path, n, e.to_string()))?;
            (t.task.name(), line.to_string())
        }
    };
    Ok(format!(
        r#"{{"schema":"{}","stream":"{}","task":"{}","record":{}}}"#,
        MixedSchema::TAG,
        kind.name(),
        task,
        record
    ))
}

pub fn mix_streams(manifest: &MixManifest, seed: u64, out_dir: &Path) -> Result<MixReport> {
    manifest.validate()?;
    for s in &manifest.streams {
        for p in &s.paths {
            if !p.is_file() {
                return Err(Error::MissingStream(p.clone()));
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summaries = Vec::new();
    let mut total = 0u64;
    for s in &manifest.streams {
        let mut records = 0;
        for p in &s.paths {
            records += jsonl::count_records(p)?;
        }
        total += records;
        summaries.push(StreamSummary {
            kind: s.kind,
            paths: s.paths.clone(),
            records,
            batch_size: s.batch_size,
        });
    }
    let shards = (total.div_ceil(manifest.shard_records as u64) as usize).max(1);

    let shard_dir = out_dir.join(".shards");
    fs::create_dir_all(&shard_dir).map_err(|e| Error::io(&shard_dir, e))?;
    let shard_path = |i: usize| shard_dir.join(format!("{i:05}.jsonl"));
    let mut writers = (0..shards)
        .map(|i| {
            let p = shard_path(i);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(&p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scatter = seed::rng(seed::derive(seed, &[seed::tag("mix-scatter")]));
    for s in &manifest.streams {
        for p in &s.paths {
            jsonl::for_each_line(p, |n, line| {
                let tagged = tag_line(s.kind, line, p, n)?;
                let b = scatter.gen_range(0..shards);
                writeln!(writers[b], "{tagged}").map_err(|e| Error::io(shard_path(b), e))
            })?;
        }
    }
    for (i, mut w) in writers.into_iter().enumerate() {
        w.flush().map_err(|e| Error::io(shard_path(i), e))?;
    }

    let mut out = JsonlWriter::create(out_dir.join(MIXED_FILE))?;
    let group = rayon::current_num_threads().max(1);
    for start in (0..shards).step_by(group) {
        let end = (start + group).min(shards);
        let shuffled: Vec<Vec<String>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let p = shard_path(i);
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
                lines.shuffle(&mut seed::rng(seed::derive(seed, &[seed::tag("mix-shard"), i as u64])));
                Ok(lines)
            })
            .collect::<Result<_>>()?;
        for line in shuffled.iter().flatten() {
            out.write_line(line)?;
        }
    }
    out.finish()?;
    fs::remove_dir_all(&shard_dir).map_err(|e| Error::io(&shard_dir, e))?;

    let report = MixReport {
        schema: MixManifestSchema,
        seed,
        alpha: manifest.alpha,
        loss: "mlm + alpha * (knowledge + reasoning)".into(),
        max_seq_len: manifest.max_seq_len,
        streams: summaries,
        records: total,
        shards,
    };
    let mp = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&mp, json + "\n").map_err(|e| Error::io(&mp, e))?;
    Ok(report)
}

/// One line of the mixed stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedRecord {
    pub schema: MixedSchema,
    pub stream: StreamKind,
    pub task: String,
    pub record: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_manifest_with_defaults() {
        let m = MixManifest::from_toml(
            r#"
            alpha = 0.3
            [[streams]]
            kind = "knowledge"
            paths = ["k.jsonl"]
            [[streams]]
            kind = "plain"
            paths = ["p.txt"]
            batch_size = 128
            "#,
        )
        .unwrap();
        assert_eq!(m.streams[0].batch_size, 9600);
        assert_eq!(m.streams[1].batch_size, 128);
        assert_eq!(m.max_seq_len, 128);
        assert!(MixManifest::from_toml("alpha = 2.0").is_err());
    }

    #[test]
    fn plain_lines_become_strings() {
        let l = tag_line(StreamKind::Plain, "hello \"world\"", Path::new("p"), 1).unwrap();
        let r: MixedRecord = serde_json::from_str(&l).unwrap();
        assert_eq!(r.record, serde_json::json!("hello \"world\""));
        assert_eq!(r.task, "mlm");
    }

    #[test]
    fn missing_stream() {
        let dir = tempfile::tempdir().unwrap();
        let m = MixManifest {
            streams: vec![StreamSpec {
                kind: StreamKind::Plain,
                paths: vec![dir.path().join("nope")],
                batch_size: 9600,
            }],
            ..Default::default()
        };
        assert!(matches!(mix_streams(&m, 0, dir.path()), Err(Error::MissingStream(_))));
    }
}
