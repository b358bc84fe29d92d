//! Source dataset manifests and raw file readers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fetch::{fetch_texts, FixtureLookup, RetryPolicy};
use super::rules::LabelMappingRule;
use super::{CorpusError, RawRecord, SourceBatch};
use crate::lang::{Language, LanguageRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Tsv,
    Jsonl,
}

/// One entry of the `[[sources]]` list in the framework configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub source_id: String,
    pub language: String,
    pub path: PathBuf,
    pub format: SourceFormat,
    pub text_column: String,
    /// Column holding post ids for sources distributed without text.
    #[serde(default)]
    pub id_column: Option<String>,
    /// JSON Lines `{"id","text"}` dump used to resolve `id_column`.
    #[serde(default)]
    pub hydration: Option<PathBuf>,
    /// Label rule; its `source_id` is taken from the enclosing entry.
    pub rule: LabelMappingRule,
}

impl SourceSpec {
    pub fn label_rule(&self) -> Result<LabelMappingRule, CorpusError> {
        let mut rule = self.rule.clone();
        rule.source_id = self.source_id.clone();
        rule.validated()
    }

    pub fn resolved_path(&self, base: &Path) -> PathBuf {
        base.join(&self.path)
    }

    /// Reads the raw file, hydrating ids when configured, into a batch
    /// ready for corpus building. Returns the batch and the number of ids
    /// that could not be resolved.
    pub fn load(
        &self,
        base: &Path,
        registry: &LanguageRegistry,
    ) -> Result<(SourceBatch, usize), CorpusError> {
        let language = registry.resolve(&self.language)?;
        let rule = self.label_rule()?;
        let path = self.resolved_path(base);
        let rows = read_rows(&path, self.format)?;
        let mut records = rows
            .into_iter()
            .map(|payload| RawRecord::new(self.source_id.clone(), payload, language.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let missing = match (&self.id_column, &self.hydration) {
            (Some(id_col), Some(dump)) => self.hydrate(&mut records, id_col, &base.join(dump))?,
            _ => 0,
        };
        Ok((SourceBatch { rule, text_column: self.text_column.clone(), records }, missing))
    }

    fn hydrate(
        &self,
        records: &mut [RawRecord],
        id_col: &str,
        dump: &Path,
    ) -> Result<usize, CorpusError> {
        let lookup = FixtureLookup::from_jsonl(dump)?;
        let needs_text = |r: &RawRecord| r.payload.get(&self.text_column).map_or(true, |t| t.trim().is_empty());
        let mut ids = Vec::new();
        for r in records.iter().filter(|r| needs_text(r)) {
            ids.push(r.column(id_col)?.to_owned());
        }
        let fetched = fetch_texts(&ids, &lookup, &RetryPolicy::default());
        for r in records.iter_mut().filter(|r| needs_text(r)) {
            let id = r.column(id_col)?.to_owned();
            let text = fetched.texts.get(&id).cloned().flatten().unwrap_or_default();
            r.payload.insert(self.text_column.clone(), text);
        }
        Ok(fetched.missing_count)
    }

    pub fn language(&self, registry: &LanguageRegistry) -> Result<Language, CorpusError> {
        Ok(registry.resolve(&self.language)?)
    }
}

fn read_rows(path: &Path, format: SourceFormat) -> Result<Vec<BTreeMap<String, String>>, CorpusError> {
    match format {
        SourceFormat::Csv | SourceFormat::Tsv => {
            let delim = if format == SourceFormat::Csv { b',' } else { b'\t' };
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(delim)
                .flexible(false)
                .from_path(path)
                .map_err(|e| csv_error(path, e))?;
            let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| csv_error(path, e))?;
                rows.push(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_owned(), v.to_owned())).collect());
            }
            Ok(rows)
        }
        SourceFormat::Jsonl => {
            let body = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
            let mut rows = Vec::new();
            for (i, line) in body.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parse_err = |message: String| CorpusError::Parse { path: path.to_owned(), line: i + 1, message };
                let obj: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
                rows.push(
                    obj.into_iter()
                        .map(|(k, v)| {
                            let s = match v {
                                serde_json::Value::String(s) => s,
                                serde_json::Value::Null => String::new(),
                                other => other.to_string(),
                            };
                            (k, s)
                        })
                        .collect(),
                );
            }
            Ok(rows)
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CorpusError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::io(path, io),
        other => CorpusError::Parse { path: path.to_owned(), line, message: format!("{other:?}") },
    }
}
