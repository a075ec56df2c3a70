//! Aligned text tables for standard output and tab-separated files for `--report-out`.

use std::fs;
use std::path::Path;

use crate::pipeline::{EvaluationReport, Located, TimingRow};
use crate::{Error, Result};

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join("\t"));
        out.push('\n');
    }
    out
}

fn class_name(k: usize) -> String {
    format!("class{k}")
}

fn accuracy_rows(reports: &[EvaluationReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for c in &r.accuracy {
            rows.push(vec![
                r.method.clone(),
                format!("{}-{}", class_name(c.class), c.condition),
                c.accuracy.map_or("n/a".into(), |a| format!("{a:.3}")),
                c.samples.to_string(),
                c.positives.to_string(),
            ]);
        }
    }
    rows
}

fn f1_rows(reports: &[EvaluationReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for f in &r.f1 {
            rows.push(vec![
                r.method.clone(),
                class_name(f.class),
                format!("{:.3}", f.mean_f1),
                format!("{:.3}", f.mean_precision),
                format!("{:.3}", f.mean_recall),
                f.volumes.to_string(),
            ]);
        }
    }
    rows
}

const ACCURACY_HEADER: [&str; 5] = ["method", "plane", "accuracy", "samples", "positives"];
const F1_HEADER: [&str; 6] = ["method", "plane", "f1", "precision", "recall", "volumes"];
const TIMING_HEADER: [&str; 5] = ["method", "dims", "candidates", "train_s", "test_s"];

pub fn evaluation_text(reports: &[EvaluationReport]) -> String {
    let mut out = String::new();
    let acc = accuracy_rows(reports);
    if !acc.is_empty() {
        out.push_str("Classification accuracy (balanced, per plane and condition)\n");
        out.push_str(&table(&ACCURACY_HEADER, &acc));
    }
    let f1 = f1_rows(reports);
    if !f1.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str("Retrieval F1 (averaged over volumes)\n");
        out.push_str(&table(&F1_HEADER, &f1));
    }
    out
}

/// One row per table cell: `table, method, plane, metric, value`.
pub fn evaluation_tsv(reports: &[EvaluationReport]) -> String {
    let mut rows = Vec::new();
    for r in reports {
        for c in &r.accuracy {
            rows.push(vec![
                "accuracy".into(),
                r.method.clone(),
                format!("{}-{}", class_name(c.class), c.condition),
                c.accuracy.map_or("nan".into(), |a| format!("{a}")),
            ]);
        }
        for f in &r.f1 {
            rows.push(vec!["f1".into(), r.method.clone(), class_name(f.class), format!("{}", f.mean_f1)]);
        }
        rows.push(vec!["time".into(), r.method.clone(), "train_s".into(), format!("{}", r.train_secs)]);
        rows.push(vec!["time".into(), r.method.clone(), "test_s".into(), format!("{}", r.test_secs)]);
    }
    tsv(&["table", "method", "row", "value"], &rows)
}

fn timing_rows(rows: &[TimingRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.method.name().into(),
                r.dims.to_string(),
                r.candidates.to_string(),
                format!("{:.4}", r.train_secs),
                format!("{:.4}", r.test_secs),
            ]
        })
        .collect()
}

pub fn timing_text(rows: &[TimingRow]) -> String {
    table(&TIMING_HEADER, &timing_rows(rows))
}

pub fn timing_tsv(rows: &[TimingRow]) -> String {
    tsv(&TIMING_HEADER, &timing_rows(rows))
}

pub fn located_text(located: &[Located]) -> String {
    let rows: Vec<Vec<String>> = located
        .iter()
        .enumerate()
        .map(|(rank, l)| {
            let c = l.params.center();
            let n = l.params.normal();
            vec![
                (rank + 1).to_string(),
                l.candidate.to_string(),
                format!("{:.6}", l.decision),
                format!("{:.2} {:.2} {:.2}", c[0], c[1], c[2]),
                format!("{:.4} {:.4} {:.4}", n[0], n[1], n[2]),
            ]
        })
        .collect();
    table(&["rank", "candidate", "decision", "center", "normal"], &rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
