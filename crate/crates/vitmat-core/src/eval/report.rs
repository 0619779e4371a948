//! Report files: JSON, per-class CSV, and the confusion-matrix rendering
//! (PGM heatmap plus raw-count CSV).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{ConfusionMatrix, EvalReport};
use crate::augment::io::write_pgm;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes the report. JSON carries the full structure; CSV has one row per
/// class followed by a macro row and an overall row (class-count + 2 data
/// rows under the header).
pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let json = serde_json::to_vec_pretty(report)?;
            fs::write(path, json).map_err(|e| Error::io(path, e))
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            writeln!(
                buf,
                "class,true_pos,false_pos,false_neg,true_neg,precision,recall,f1,ovr_accuracy"
            )
            .expect("vec write");
            for (name, m) in report.classes.iter().zip(&report.per_class) {
                writeln!(
                    buf,
                    "{},{},{},{},{},{},{},{},{}",
                    name,
                    m.counts.true_pos,
                    m.counts.false_pos,
                    m.counts.false_neg,
                    m.counts.true_neg,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.ovr_accuracy
                )
                .expect("vec write");
            }
            writeln!(
                buf,
                "macro,,,,,{},{},{},",
                report.macro_precision, report.macro_recall, report.macro_f1
            )
            .expect("vec write");
            writeln!(buf, "overall,,,,,,,,{}", report.overall_accuracy).expect("vec write");
            fs::write(path, buf).map_err(|e| Error::io(path, e))
        }
    }
}

/// Reads a JSON report back.
pub fn read_report(path: &Path) -> Result<EvalReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Renders the matrix as a K x K grayscale PGM (counts mapped linearly onto
/// 0-255 against the largest cell; an all-zero matrix renders black) plus a
/// CSV of the raw counts, one row per true class.
pub fn render_confusion(cm: &ConfusionMatrix, pgm_path: &Path, csv_path: &Path) -> Result<()> {
    let k = cm.k();
    let max = (0..k)
        .flat_map(|t| (0..k).map(move |p| (t, p)))
        .map(|(t, p)| cm.at(t, p))
        .max()
        .unwrap_or(0);
    let gray: Vec<u8> = (0..k)
        .flat_map(|t| (0..k).map(move |p| cm.at(t, p)))
        .map(|count| {
            if max == 0 {
                0
            } else {
                crate::augment::round_to_u8(255.0 * count as f64 / max as f64)
            }
        })
        .collect();
    write_pgm(&gray, k, k, pgm_path)?;

    let mut buf = Vec::new();
    for t in 0..k {
        let row: Vec<String> = (0..k).map(|p| cm.at(t, p).to_string()).collect();
        writeln!(buf, "{}", row.join(",")).expect("vec write");
    }
    fs::write(csv_path, buf).map_err(|e| Error::io(csv_path, e))
}
