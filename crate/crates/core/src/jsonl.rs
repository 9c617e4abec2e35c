//! Line-delimited JSON helpers shared by every record format in the crate.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub fn write_records<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_string<T: Serialize>(records: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Parses one record per non-blank line; errors carry the 1-based line number.
pub fn read_records<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    write_records(BufWriter::new(File::create(path)?), records)
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    read_records(File::open(path)?)
}
