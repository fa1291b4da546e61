//! JSON Lines reading and writing, plus the schema tags every record carries.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Declares a zero-sized `schema` field type that serializes to a fixed tag
/// and refuses to deserialize anything else.
macro_rules! schema_tag {
    ($(#[$m:meta])* $name:ident = $tag:literal) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
        pub struct $name;

        impl $name {
            #[allow(dead_code)]
            pub const TAG: &'static str = $tag;
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str($tag)
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                if s == $tag {
                    Ok($name)
                } else {
                    Err(serde::de::Error::custom(format!(
                        "unsupported schema {:?}, expected {:?}",
                        s, $tag
                    )))
                }
            }
        }
    };
}
pub(crate) use schema_tag;

pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
    count: u64,
}

impl JsonlWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(JsonlWriter {
            out: BufWriter::with_capacity(1 << 20, file),
            path,
            count: 0,
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.write_raw_newline()
    }

    /// Writes a line that is already serialized JSON.
    pub fn write_line(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        self.write_raw_newline()
    }

    fn write_raw_newline(&mut self) -> Result<()> {
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<u64> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

/// Streams raw non-blank lines with 1-based line numbers.
pub fn for_each_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, &str) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            return Ok(());
        }
        n += 1;
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.trim().is_empty() {
            continue;
        }
        f(n, trimmed)?;
    }
}

/// Streams typed records; a line that does not parse is an error carrying
/// its line number.
pub fn for_each_record<T, F>(path: &Path, mut f: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    for_each_line(path, |n, line| {
        let record = serde_json::from_str(line)
            .map_err(|e| Error::malformed(path, n, e.to_string()))?;
        f(n, record)
    })
}

pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for_each_record(path, |_, r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_all<'a, T, I>(path: &Path, records: I) -> Result<u64>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = JsonlWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Maps records of `path` through `f` in parallel chunks, handing results to
/// `sink` in file order. `None` results are dropped.
pub fn par_map_records<T, U, F, S>(path: &Path, f: F, mut sink: S) -> Result<()>
where
    T: DeserializeOwned + Send,
    U: Send,
    F: Fn(T) -> Result<Option<U>> + Sync,
    S: FnMut(U) -> Result<()>,
{
    const CHUNK: usize = 8192;
    let mut batch: Vec<T> = Vec::with_capacity(CHUNK);
    let mut flush = |batch: &mut Vec<T>| -> Result<()> {
        let out: Vec<Result<Option<U>>> = std::mem::take(batch).into_par_iter().map(&f).collect();
        for r in out {
            if let Some(u) = r? {
                sink(u)?;
            }
        }
        Ok(())
    };
    for_each_record(path, |_, r: T| {
        batch.push(r);
        if batch.len() == CHUNK {
            flush(&mut batch)?;
        }
        Ok(())
    })?;
    flush(&mut batch)
}

pub fn count_records(path: &Path) -> Result<u64> {
    let mut n = 0;
    for_each_line(path, |_, _| {
        n += 1;
        Ok(())
    })?;
    Ok(n)
}
