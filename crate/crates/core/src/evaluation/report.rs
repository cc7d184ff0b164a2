use std::fmt::Write as _;

use super::experiment::{ExperimentResult, Summary};
use crate::data::format_float;

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(fields).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn p_text(p: Option<f64>) -> String {
    p.map(format_float).unwrap_or_default()
}

/// One row per repetition: dataset, level, method, diversity, classifier,
/// repetition, pr_auc.
pub fn raw_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("dataset,level,method,diversity,classifier,repetition,pr_auc\n");
    for c in &result.cells {
        for (rep, v) in c.samples.iter().enumerate() {
            out += &csv_line(&[
                c.dataset.clone(),
                c.level.to_string(),
                c.method.base_key(),
                c.method.diversity.to_string(),
                c.classifier.clone(),
                rep.to_string(),
                format_float(*v),
            ]);
        }
    }
    out
}

/// One row per cell with mean, sample std, the signed-rank p-value against
/// the base method (diversity cells only) and a `*` significance marker.
pub fn summary_csv(summary: &Summary) -> String {
    let mut out =
        String::from("dataset,level,method,diversity,classifier,mean,std,wilcoxon_p,significant\n");
    for r in &summary.rows {
        out += &csv_line(&[
            r.dataset.clone(),
            r.level.to_string(),
            r.method.base_key(),
            r.method.diversity.to_string(),
            r.classifier.clone(),
            format_float(r.mean),
            format_float(r.std),
            p_text(r.wilcoxon_p),
            if r.significant { "*" } else { "" }.to_string(),
        ]);
    }
    out
}

/// Aligned text tables, one block per (dataset, level): methods down,
/// classifiers across, cells as `mean±std` with `*` for significance.
pub fn text_tables(summary: &Summary) -> String {
    let mut out = String::new();
    let mut blocks: Vec<(String, String)> = Vec::new();
    for r in &summary.rows {
        let key = (r.dataset.clone(), r.level.to_string());
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }
    for (dataset, level) in blocks {
        let rows: Vec<_> = summary
            .rows
            .iter()
            .filter(|r| r.dataset == dataset && r.level.to_string() == level)
            .collect();
        let mut classifiers: Vec<&str> = Vec::new();
        let mut methods: Vec<String> = Vec::new();
        for r in &rows {
            if !classifiers.contains(&r.classifier.as_str()) {
                classifiers.push(&r.classifier);
            }
            let m = r.method.label();
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        let mut grid = vec![vec![String::new(); classifiers.len() + 1]; methods.len() + 1];
        grid[0][0] = "method".into();
        for (j, c) in classifiers.iter().enumerate() {
            grid[0][j + 1] = c.to_uppercase();
        }
        for (i, m) in methods.iter().enumerate() {
            grid[i + 1][0] = m.clone();
        }
        for r in &rows {
            let i = methods.iter().position(|m| *m == r.method.label()).unwrap();
            let j = classifiers.iter().position(|c| *c == r.classifier).unwrap();
            grid[i + 1][j + 1] = format!(
                "{:.3}±{:.3}{}",
                r.mean,
                r.std,
                if r.significant { "*" } else { "" }
            );
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|row| row[j].chars().count()).max().unwrap_or(0))
            .collect();
        let _ = writeln!(out, "{dataset} (level {level})");
        for row in &grid {
            let mut line = String::new();
            for (j, cell) in row.iter().enumerate() {
                let pad = widths[j] - cell.chars().count();
                if j == 0 {
                    line += cell;
                    line.extend(std::iter::repeat_n(' ', pad));
                } else {
                    line += "  ";
                    line.extend(std::iter::repeat_n(' ', pad));
                    line += cell;
                }
            }
            out += line.trim_end();
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Every collected PR curve point, one row per (cell, repetition, threshold).
pub fn curves_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "dataset,level,method,diversity,classifier,repetition,threshold,recall,precision\n",
    );
    for c in &result.cells {
        for (rep, curve) in c.curves.iter().enumerate() {
            for p in &curve.points {
                out += &csv_line(&[
                    c.dataset.clone(),
                    c.level.to_string(),
                    c.method.base_key(),
                    c.method.diversity.to_string(),
                    c.classifier.clone(),
                    rep.to_string(),
                    format_float(p.threshold),
                    format_float(p.recall),
                    format_float(p.precision),
                ]);
            }
        }
    }
    out
}
