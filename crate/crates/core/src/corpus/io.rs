//! Canonical corpus files (JSON Lines) and their stats sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{CorpusError, CorpusStats, Record};
use crate::lang::Language;

pub fn corpus_path(dir: &Path, lang: &Language) -> PathBuf {
    dir.join(format!("{}.jsonl", lang.code()))
}

pub fn stats_path(dir: &Path, lang: &Language) -> PathBuf {
    dir.join(format!("{}.stats.json", lang.code()))
}

/// Serializes records as LF-terminated JSON Lines.
pub fn to_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, CorpusError> {
    let body = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_records(&body, path)
}

pub fn parse_records(body: &str, path: &Path) -> Result<Vec<Record>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|message| CorpusError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_stats(path: &Path) -> Result<CorpusStats, CorpusError> {
    let body = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| CorpusError::Parse {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn stats_json(stats: &CorpusStats) -> String {
    let mut s = serde_json::to_string_pretty(stats).expect("stats always serialize");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
