//! Human-readable rendering of pipeline record files.
//!
//! Loss-bearing masked tokens are shown as `[[original]]`; link slots keep
//! the plain mask literal.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::cycles::{CycleRecord, CycleSchema, ReasoningSample, ReasoningSchema};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::mask::{MaskedSample, MaskedSchema};
use crate::mix::{MixedRecord, MixedSchema};
use crate::sentence::{SentenceSchema, SyntheticSentence};
use crate::xlr::{XlrItem, XlrSchema};

/// Conjunction of `key=value` terms over `task`, `lang` and `id`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Filter {
    pub task: Option<String>,
    pub lang: Option<String>,
    pub id: Option<String>,
}

impl Filter {
    /// Parses `key=value` terms separated by commas or whitespace.
    pub fn parse(expr: &str) -> Result<Self> {
        let mut f = Filter::default();
        for term in expr.split([',', ' ']).filter(|t| !t.is_empty()) {
            let (k, v) = term
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("filter term {term:?} is not key=value")))?;
            let slot = match k.trim() {
                "task" => &mut f.task,
                "lang" => &mut f.lang,
                "id" => &mut f.id,
                other => return Err(Error::Config(format!("unknown filter key {other:?}"))),
            };
            *slot = Some(v.trim().to_string());
        }
        Ok(f)
    }

    fn accepts(&self, task: Option<&str>, lang: Option<&str>, ids: &[&str]) -> bool {
        let ok = |want: &Option<String>, got: Option<&str>| want.as_deref().is_none_or(|w| got == Some(w));
        ok(&self.task, task) && ok(&self.lang, lang) && self.id.as_deref().is_none_or(|w| ids.contains(&w))
    }
}

enum Record {
    Sentence(SyntheticSentence),
    Cycle(CycleRecord),
    Reasoning(ReasoningSample),
    Masked(MaskedSample),
    Xlr(XlrItem),
    Mixed(MixedRecord),
}

fn parse_value(value: Value, path: &Path, line: usize) -> Result<Record> {
    let schema = value.get("schema").and_then(Value::as_str).unwrap_or("").to_string();
    let bad = |e: serde_json::Error| Error::malformed(path, line, e.to_string());
    Ok(match schema.as_str() {
        SentenceSchema::TAG => Record::Sentence(serde_json::from_value(value).map_err(bad)?),
        CycleSchema::TAG => Record::Cycle(serde_json::from_value(value).map_err(bad)?),
        ReasoningSchema::TAG => Record::Reasoning(serde_json::from_value(value).map_err(bad)?),
        MaskedSchema::TAG => Record::Masked(serde_json::from_value(value).map_err(bad)?),
        XlrSchema::TAG => Record::Xlr(serde_json::from_value(value).map_err(bad)?),
        MixedSchema::TAG => Record::Mixed(serde_json::from_value(value).map_err(bad)?),
        _ => {
            return Err(Error::UnknownSchema {
                path: path.to_path_buf(),
                line,
                schema,
            })
        }
    })
}

fn masked_text(m: &MaskedSample) -> String {
    let mut shown: Vec<String> = m.tokens.clone();
    for t in &m.targets {
        shown[t.pos] = format!("[[{}]]", t.token);
    }
    m.join(&shown.iter().map(String::as_str).collect::<Vec<_>>())
}

impl Record {
    fn keys(&self) -> (Option<String>, Option<String>, Vec<&str>) {
        match self {
            Record::Sentence(s) => (
                Some("sentence".into()),
                Some(s.provenance.target.to_string()),
                vec![s.provenance.id.as_str()],
            ),
            Record::Cycle(c) => (Some(c.kind.name().into()), None, vec![]),
            Record::Reasoning(r) => (Some(r.kind.name().into()), Some(r.lang.to_string()), vec![r.id.as_str()]),
            Record::Masked(m) => (
                Some(m.task.name().into()),
                Some(m.lang.to_string()),
                vec![m.id.as_str(), m.provenance.source.as_str()],
            ),
            Record::Xlr(x) => (Some("xlr".into()), Some(x.lang.to_string()), vec![x.id.as_str()]),
            Record::Mixed(m) => {
                let lang = m.record.get("lang").and_then(Value::as_str).map(str::to_string);
                let mut ids = vec![];
                if let Some(id) = m.record.get("id").and_then(Value::as_str) {
                    ids.push(id);
                }
                if let Some(src) = m.record.pointer("/provenance/source").and_then(Value::as_str) {
                    ids.push(src);
                }
                (Some(m.task.clone()), lang, ids)
            }
        }
    }

    fn render(&self, out: &mut String) {
        use std::fmt::Write as _;
        match self {
            Record::Sentence(s) => {
                let _ = writeln!(out, "{} [{:?} {}->{}]", s.provenance.id, s.provenance.variant, s.provenance.source, s.provenance.target);
                let _ = writeln!(out, "  {}", s.text);
                for sp in &s.spans {
                    let _ = writeln!(
                        out,
                        "    {:<8} {:>3}..{:<3} {}{}",
                        format!("{:?}", sp.role).to_lowercase(),
                        sp.start,
                        sp.end,
                        s.span_text(sp),
                        sp.lang.map(|l| format!("  ({l})")).unwrap_or_default()
                    );
                }
            }
            Record::Cycle(c) => {
                let _ = writeln!(out, "{} {} [{}]", c.key, c.kind.name(), c.entities.join(" - "));
                for [h, r, t] in &c.covering {
                    let _ = writeln!(out, "  ({h}, {r}, {t})");
                }
            }
            Record::Reasoning(r) => {
                let _ = writeln!(out, "{} [{} {}]", r.id, r.kind.name(), r.lang);
                for s in &r.sentences {
                    let _ = writeln!(out, "  {}", s.text);
                }
            }
            Record::Masked(m) => {
                let _ = writeln!(out, "{} [{} {}]", m.id, m.task.name(), m.lang);
                let _ = writeln!(out, "  {}", masked_text(m));
                let targets: Vec<&str> = m.targets.iter().map(|t| t.token.as_str()).collect();
                let _ = writeln!(out, "  targets: {}", targets.join(", "));
            }
            Record::Xlr(x) => {
                let _ = writeln!(out, "{} [{}]", x.id, x.lang);
                for c in &x.context {
                    let _ = writeln!(out, "  {c}");
                }
                let _ = writeln!(out, "  Q: {}", x.question);
                for (i, c) in x.choices.iter().enumerate() {
                    let mark = if i == x.answer { '*' } else { ' ' };
                    let _ = writeln!(out, "   {mark}{}. {c}", i + 1);
                }
            }
            Record::Mixed(m) => {
                let _ = writeln!(out, "<{}/{}>", m.stream.name(), m.task);
                match Record::from_inner(&m.record) {
                    Some(inner) => inner.render(out),
                    None => {
                        let _ = writeln!(out, "  {}", m.record);
                    }
                }
            }
        }
    }

    fn from_inner(v: &Value) -> Option<Record> {
        v.get("schema")?;
        parse_value(v.clone(), Path::new(""), 0).ok()
    }
}

/// Renders the records of `path` that pass `filter`, at most `limit` of
/// them. Returns the number rendered.
pub fn inspect(path: &Path, filter: &Filter, limit: Option<usize>, out: &mut dyn Write) -> Result<u64> {
    let mut shown = 0u64;
    let mut text = String::new();
    let limit = limit.unwrap_or(usize::MAX) as u64;
    let io = |e| Error::io(path, e);
    jsonl::for_each_line(path, |n, line| {
        if shown >= limit {
            return Ok(());
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::malformed(path, n, e.to_string()))?;
        let record = parse_value(value, path, n)?;
        let (task, lang, ids) = record.keys();
        if !filter.accepts(task.as_deref(), lang.as_deref(), &ids) {
            return Ok(());
        }
        text.clear();
        record.render(&mut text);
        out.write_all(text.as_bytes()).map_err(io)?;
        shown += 1;
        Ok(())
    })?;
    Ok(shown)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_parsing() {
        let f = Filter::parse("task=reason-len3, lang=fr").unwrap();
        assert_eq!(f.task.as_deref(), Some("reason-len3"));
        assert_eq!(f.lang.as_deref(), Some("fr"));
        assert!(Filter::parse("colour=red").is_err());
        assert!(Filter::parse("task").is_err());
        assert_eq!(Filter::parse("").unwrap(), Filter::default());
    }

    #[test]
    fn unknown_schema_and_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        std::fs::write(&p, "{\"schema\":\"masked/v9\"}\n").unwrap();
        let err = inspect(&p, &Filter::default(), None, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, Error::UnknownSchema { line: 1, .. }), "{err}");
        std::fs::write(&p, "\n{oops\n").unwrap();
        let err = inspect(&p, &Filter::default(), None, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
    }
}
