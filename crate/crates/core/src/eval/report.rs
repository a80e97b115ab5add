use serde::{Deserialize, Serialize};

use super::cv::EvaluationReport;
use crate::models::ClassifierKind;
use crate::signal::WindowMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config_fingerprint: String,
    pub cells: Vec<EvaluationReport>,
}

impl ResultsFile {
    pub fn new(fingerprint: &str, cells: Vec<EvaluationReport>) -> Self {
        Self { config_fingerprint: fingerprint.to_string(), cells }
    }

    pub fn cell(&self, classifier: ClassifierKind, window: WindowMode) -> Option<&EvaluationReport> {
        self.cells.iter().find(|c| c.classifier == classifier && c.window == window)
    }
}

/// `0.7091 ± 0.0224`
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}

fn window_header(mode: WindowMode) -> &'static str {
    match mode {
        WindowMode::F30 => "F1 for first 30 s (F30)",
        WindowMode::L30 => "F1 for last 30 s (L30)",
        WindowMode::L10 => "F1 for last 10 s (L10)",
    }
}

/// Aligned plain-text rendering: one row per classifier present, one column
/// per window, followed by the config fingerprint.
pub fn render_table(results: &ResultsFile) -> String {
    let mut kinds: Vec<ClassifierKind> = Vec::new();
    for c in &results.cells {
        if !kinds.contains(&c.classifier) {
            kinds.push(c.classifier);
        }
    }
    kinds.sort();
    let mut rows: Vec<Vec<String>> = vec![std::iter::once("Method".to_string())
        .chain(WindowMode::ALL.iter().map(|m| window_header(*m).to_string()))
        .collect()];
    for kind in kinds {
        let mut row = vec![kind.display_name().to_string()];
        for mode in WindowMode::ALL {
            row.push(match results.cell(kind, mode) {
                Some(c) => format_cell(c.f1_mean, c.f1_std),
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let line = |r: &[String]| -> String {
        r.iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule: String = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    let mut out = String::new();
    out.push_str(&line(&rows[0]));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for r in &rows[1..] {
        out.push_str(&line(r));
        out.push('\n');
    }
    out.push_str(&format!("config fingerprint: {}\n", results.config_fingerprint));
    out
}
