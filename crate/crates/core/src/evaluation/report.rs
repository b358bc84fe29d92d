//! Language × (model | scenario) tables of weighted F1.
//!
//! Scores print with 3 decimals. In each row every cell whose rounded
//! score equals the row maximum is marked: `*` in plain text, bold in
//! Markdown. Columns and rows without any score are omitted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::lang::Language;
use crate::models::ModelFamily;
use crate::scenarios::{RunManifest, RunStatus, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// One column per model family, one table per scenario kind.
    Model,
    /// One column per scenario kind, one table per model family.
    Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub marked: bool,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub language: Language,
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub axis: Axis,
    pub tables: Vec<Table>,
}

fn rounded(v: f64) -> String {
    format!("{v:.3}")
}

/// Checks that every language resolves to one corpus snapshot.
fn check_provenance(manifests: &[&RunManifest]) -> Result<(), EvalError> {
    let mut seen: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for m in manifests {
        for (lang, hash) in &m.corpus_hashes {
            match seen.get(lang.as_str()) {
                Some((h, run)) if *h != hash => {
                    return Err(EvalError::ProvenanceMismatch {
                        language: lang.clone(),
                        runs: vec![run.to_string(), m.run_id.clone()],
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(lang, (hash, &m.run_id));
                }
            }
        }
    }
    Ok(())
}

pub fn render_report(manifests: &[RunManifest], axis: Axis) -> Result<Report, EvalError> {
    let done: Vec<&RunManifest> = manifests.iter().filter(|m| m.status == RunStatus::Completed).collect();
    if done.is_empty() {
        return Err(EvalError::NoRuns);
    }
    check_provenance(&done)?;

    // (table key, column key, language) -> (score, manifest)
    let mut cells: BTreeMap<(usize, usize, Language), (f64, &RunManifest)> = BTreeMap::new();
    for m in &done {
        let kind = m.scenario.kind;
        let family = m.scenario.model_family;
        let (table, column) = match axis {
            Axis::Scenario => (family as usize, kind as usize),
            Axis::Model => (kind as usize, family as usize),
        };
        for r in &m.results {
            let key = (table, column, r.language.clone());
            if let Some((_, other)) = cells.get(&key) {
                return Err(EvalError::AmbiguousCell {
                    row: r.language.to_string(),
                    column: column_name(axis, column).to_owned(),
                    runs: vec![other.run_id.clone(), m.run_id.clone()],
                });
            }
            cells.insert(key, (r.metrics.weighted_f1, m));
        }
    }

    let mut tables = Vec::new();
    let table_keys: Vec<usize> = {
        let mut v: Vec<usize> = cells.keys().map(|k| k.0).collect();
        v.dedup();
        v
    };
    for t in table_keys {
        let mut cols: Vec<usize> = cells.keys().filter(|k| k.0 == t).map(|k| k.1).collect();
        cols.sort_unstable();
        cols.dedup();
        let mut langs: Vec<Language> = cells.keys().filter(|k| k.0 == t).map(|k| k.2.clone()).collect();
        langs.sort_by(|a, b| a.report_rank().cmp(&b.report_rank()));
        langs.dedup();
        let rows = langs
            .into_iter()
            .map(|lang| {
                let mut row: Vec<Option<Cell>> = cols
                    .iter()
                    .map(|&c| {
                        cells.get(&(t, c, lang.clone())).map(|(v, m)| Cell {
                            value: *v,
                            marked: false,
                            manifest: m.relative_path(),
                        })
                    })
                    .collect();
                let best = row
                    .iter()
                    .flatten()
                    .map(|c| rounded(c.value).parse::<f64>().expect("formatted float parses"))
                    .fold(f64::NEG_INFINITY, f64::max);
                for c in row.iter_mut().flatten() {
                    c.marked = rounded(c.value).parse::<f64>().expect("formatted float parses") == best;
                }
                Row { language: lang, cells: row }
            })
            .collect();
        let title = match axis {
            Axis::Scenario => format!("Weighted F1 by scenario, model {}", ModelFamily::ALL[t]),
            Axis::Model => format!("Weighted F1 by model, {} scenario", ScenarioKind::ALL[t].display_name()),
        };
        tables.push(Table {
            title,
            columns: cols.iter().map(|&c| column_name(axis, c).to_owned()).collect(),
            rows,
        });
    }
    Ok(Report { axis, tables })
}

fn column_name(axis: Axis, index: usize) -> &'static str {
    match axis {
        Axis::Scenario => ScenarioKind::ALL[index].display_name(),
        Axis::Model => ModelFamily::ALL[index].display_name(),
    }
}

fn language_label(l: &Language) -> String {
    if l.is_builtin() {
        format!("{} ({})", l.display_name(), l.code())
    } else {
        l.code().to_owned()
    }
}

impl Table {
    fn sources(&self) -> Vec<(String, String, PathBuf)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (col, cell) in self.columns.iter().zip(&row.cells) {
                if let Some(c) = cell {
                    out.push((language_label(&row.language), col.clone(), c.manifest.clone()));
                }
            }
        }
        out
    }
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", t.title);
            out.push('\n');
            let mut grid: Vec<Vec<String>> = vec![std::iter::once("Language".to_owned()).chain(t.columns.iter().cloned()).collect()];
            for r in &t.rows {
                let mut line = vec![language_label(&r.language)];
                for c in &r.cells {
                    line.push(match c {
                        Some(c) => format!("{}{}", rounded(c.value), if c.marked { "*" } else { " " }),
                        None => "- ".to_owned(),
                    });
                }
                grid.push(line);
            }
            let widths: Vec<usize> =
                (0..grid[0].len()).map(|j| grid.iter().map(|l| l[j].len()).max().unwrap_or(0)).collect();
            for (k, line) in grid.iter().enumerate() {
                let cells: Vec<String> = line
                    .iter()
                    .enumerate()
                    .map(|(j, s)| if j == 0 { format!("{s:<w$}", w = widths[0]) } else { format!("{s:>w$}", w = widths[j]) })
                    .collect();
                let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
                if k == 0 {
                    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                    let _ = writeln!(out, "{}", rule.join("-+-"));
                }
            }
            out.push('\n');
            let _ = writeln!(out, "* best score in the row (3-decimal rounding)");
            let _ = writeln!(out, "Sources (relative to the runs directory):");
            for (lang, col, path) in t.sources() {
                let _ = writeln!(out, "  {lang} / {col}: {}", path.display());
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "### {}\n", t.title);
            let _ = writeln!(out, "| Language | {} |", t.columns.join(" | "));
            let _ = writeln!(out, "|---|{}", "---:|".repeat(t.columns.len()));
            for r in &t.rows {
                let cells: Vec<String> = r
                    .cells
                    .iter()
                    .map(|c| match c {
                        Some(c) if c.marked => format!("**{}**", rounded(c.value)),
                        Some(c) => rounded(c.value),
                        None => "-".to_owned(),
                    })
                    .collect();
                let _ = writeln!(out, "| {} | {} |", language_label(&r.language), cells.join(" | "));
            }
            out.push('\n');
            let _ = writeln!(out, "Bold marks the best score in each row. Sources (relative to the runs directory):\n");
            for (lang, col, path) in t.sources() {
                let _ = writeln!(out, "- {lang} / {col}: `{}`", path.display());
            }
        }
        out
    }
}
