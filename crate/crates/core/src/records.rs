//! Line-delimited record files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EnrichedRecord, NewsItem};

/// Reads every non-blank line of `path` as one `T`, with line-positioned errors.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let rows = read_lines(path, |line| serde_json::from_str(line).map_err(|e| e.to_string()))?;
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

fn read_lines<T>(
    path: &Path,
    mut parse: impl FnMut(&str) -> Result<T, String>,
) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = parse(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

fn parse_item(line: &str) -> Result<NewsItem, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if let Some(label) = value.get("label") {
        let ok = label.as_str().and_then(crate::model::Label::parse).is_some();
        if !ok {
            return Err(format!(
                "label {label} is not \"fake\" or \"true\"; map the corpus labels to the binary \
                 scheme before ingestion (e.g. 0/\"falso\" -> \"fake\", 1/\"verdadeiro\" -> \"true\")"
            ));
        }
    }
    let item: NewsItem = serde_json::from_value(value).map_err(|e| e.to_string())?;
    item.check()?;
    Ok(item)
}

/// Reads a corpus file. Duplicate ids are rejected.
pub fn read_records(path: &Path) -> Result<Vec<NewsItem>> {
    let rows = read_lines(path, parse_item)?;
    check_unique(path, rows.iter().map(|(n, i)| (*n, i.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

/// Reads an enrichment output file. Duplicate ids are rejected.
pub fn read_enriched(path: &Path) -> Result<Vec<EnrichedRecord>> {
    let rows: Vec<(usize, EnrichedRecord)> =
        read_lines(path, |line| serde_json::from_str(line).map_err(|e| e.to_string()))?;
    check_unique(path, rows.iter().map(|(n, r)| (*n, r.item.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

fn check_unique<'a>(path: &Path, ids: impl Iterator<Item = (usize, &'a str)>) -> Result<()> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (line, id) in ids {
        if let Some(&first) = seen.get(id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: id.to_string(),
                first_line: first,
                second_line: line,
            });
        }
        seen.insert(id, line);
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let ctx = || format!("write {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(ctx(), e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(ctx(), e))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

pub fn write_records(path: &Path, records: &[EnrichedRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn write_items(path: &Path, items: &[NewsItem]) -> Result<()> {
    write_jsonl(path, items)
}
