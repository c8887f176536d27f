//! Benchmark tables: one row per model run, one column per dataset, plus the
//! unweighted macro average across datasets.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::DatasetProfile;
use crate::formats::FormatError;

use super::MetricsError;

/// Unweighted mean of per-dataset headline scores.
pub fn macro_average(scores: &BTreeMap<String, f64>) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(scores.values().sum::<f64>() / scores.len() as f64)
}

/// Headline scores of one trained model, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    #[serde(default)]
    pub training: String,
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub training: String,
    pub cells: Vec<Option<f64>>,
    pub macro_average: Option<f64>,
    /// Columns excluded from this row's macro average.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub footnotes: Vec<String>,
}

/// Short header used for the benchmark datasets.
pub fn column_label(dataset: &str) -> &str {
    match dataset {
        "ontonotes" => "ON",
        "litbank" => "LB",
        "preco" => "PC",
        "character_identification" => "CI",
        "wikicoref" => "WC",
        "quizbowl" => "QBC",
        "gap" => "GAP",
        "wsc" => "WSC",
        other => other,
    }
}

/// Orders dataset names: the benchmark datasets first, in their usual order, then the rest.
pub fn order_columns<'a>(names: impl IntoIterator<Item = &'a String>) -> Vec<String> {
    let mut names: Vec<String> = names.into_iter().cloned().collect();
    names.sort();
    names.dedup();
    let rank = |n: &str| {
        DatasetProfile::BUILTIN_NAMES
            .iter()
            .position(|b| *b == n)
            .unwrap_or(usize::MAX)
    };
    names.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    names
}

pub fn build_table(runs: &[RunRecord], columns: Option<Vec<String>>) -> BenchmarkTable {
    let columns = columns.unwrap_or_else(|| order_columns(runs.iter().flat_map(|r| r.scores.keys())));
    let mut footnotes = Vec::new();
    let rows = runs
        .iter()
        .map(|run| {
            let cells: Vec<Option<f64>> = columns.iter().map(|c| run.scores.get(c).copied()).collect();
            let present: BTreeMap<String, f64> = columns
                .iter()
                .zip(&cells)
                .filter_map(|(c, v)| v.map(|v| (c.clone(), v)))
                .collect();
            let missing: Vec<String> = columns
                .iter()
                .zip(&cells)
                .filter(|(_, v)| v.is_none())
                .map(|(c, _)| c.clone())
                .collect();
            if !missing.is_empty() {
                footnotes.push(format!(
                    "{} ({}): macro average excludes missing {}",
                    run.model,
                    run.training,
                    missing.iter().map(|m| column_label(m)).collect::<Vec<_>>().join(", ")
                ));
            }
            ReportRow {
                model: run.model.clone(),
                training: run.training.clone(),
                cells,
                macro_average: macro_average(&present).ok(),
                missing,
            }
        })
        .collect();
    BenchmarkTable {
        columns,
        rows,
        footnotes,
    }
}

/// Loads every `*.json` run record in `dir`, sorted by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<RunRecord>, FormatError> {
    let io_err = |source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|source| FormatError::Io {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| FormatError::Json { line: 1, source })
        })
        .collect()
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.1}"),
        None => "—".to_string(),
    }
}

impl BenchmarkTable {
    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut header = vec!["Model".to_string(), "Training".to_string()];
        header.extend(self.columns.iter().map(|c| column_label(c).to_string()));
        header.push("Macro Avg.".to_string());
        let mut lines: Vec<Vec<String>> = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.model.clone(), row.training.clone()];
            cells.extend(row.cells.iter().map(|v| fmt_cell(*v)));
            let mark = if row.missing.is_empty() { "" } else { "*" };
            cells.push(format!("{}{mark}", fmt_cell(row.macro_average)));
            lines.push(cells);
        }
        let ncol = lines[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (li, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let pad = widths[i] - c.chars().count();
                    if i < 2 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if li == 0 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (ncol - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        for note in &self.footnotes {
            out.push_str(&format!("* {note}\n"));
        }
        out
    }
}
