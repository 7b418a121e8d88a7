//! Token-level per-class and macro precision/recall/F1, and side-by-side
//! comparison of several runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSchema;
use crate::error::{Error, Result};

/// All scores are percentages in `[0, 100]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold tokens with this label.
    pub support: usize,
    pub predicted: usize,
    pub true_positives: usize,
    /// Neither in gold nor predicted; scores are 0 by convention.
    pub absent: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// In schema order, outside label first.
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean over every class, the outside class included.
    pub macro_avg: MacroScores,
    /// Unweighted mean over the non-outside classes.
    pub macro_excluding_outside: MacroScores,
    pub n_tokens: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn mean_scores<'a>(classes: impl Iterator<Item = &'a ClassMetrics>) -> MacroScores {
    let mut n = 0.0;
    let mut m = MacroScores::default();
    for c in classes {
        n += 1.0;
        m.precision += c.precision;
        m.recall += c.recall;
        m.f1 += c.f1;
    }
    if n > 0.0 {
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
    }
    m
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.per_class.iter().map(|c| c.label.as_str())
    }

    /// Aligned text: one row per class, then the macro rows.
    pub fn to_table(&self) -> String {
        let w = self.per_class.iter().map(|c| c.label.len()).max().unwrap_or(5).max(14);
        let mut out = format!("{:<w$} {:>9} {:>9} {:>9} {:>8}\n", "label", "precision", "recall", "f1", "support");
        for c in &self.per_class {
            let flag = if c.absent { "  (absent)" } else { "" };
            let _ = writeln!(
                out,
                "{:<w$} {:>9.1} {:>9.1} {:>9.1} {:>8}{flag}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        for (name, m) in [("macro", &self.macro_avg), ("macro (no O)", &self.macro_excluding_outside)] {
            let _ = writeln!(
                out,
                "{:<w$} {:>9.1} {:>9.1} {:>9.1} {:>8}",
                name, m.precision, m.recall, m.f1, self.n_tokens
            );
        }
        out
    }
}

/// Scores predicted against gold token labels.
pub fn score<G: AsRef<str>, P: AsRef<str>>(gold: &[G], pred: &[P], schema: &LabelSchema) -> Result<MetricsReport> {
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "gold has {} tokens but prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    let labels: Vec<&str> = schema.all_labels().collect();
    let idx = |l: &str| {
        labels
            .iter()
            .position(|x| *x == l)
            .ok_or_else(|| Error::Schema(format!("unknown label `{l}`")))
    };
    let k = labels.len();
    let mut support = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    let mut tp = vec![0usize; k];
    for (g, p) in gold.iter().zip(pred) {
        let g = idx(g.as_ref())?;
        let p = idx(p.as_ref())?;
        support[g] += 1;
        predicted[p] += 1;
        if g == p {
            tp[g] += 1;
        }
    }
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let precision = pct(tp[i], predicted[i]);
            let recall = pct(tp[i], support[i]);
            ClassMetrics {
                label: labels[i].to_string(),
                precision,
                recall,
                f1: f1(precision, recall),
                support: support[i],
                predicted: predicted[i],
                true_positives: tp[i],
                absent: support[i] == 0 && predicted[i] == 0,
            }
        })
        .collect();
    Ok(MetricsReport {
        macro_avg: mean_scores(per_class.iter()),
        macro_excluding_outside: mean_scores(per_class.iter().skip(1)),
        per_class,
        n_tokens: gold.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    Best,
    Second,
    Worst,
}

impl Marker {
    fn symbol(self) -> char {
        match self {
            Marker::Best => '*',
            Marker::Second => '+',
            Marker::Worst => '!',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub values: Vec<f64>,
    pub markers: Vec<Option<Marker>>,
}

/// Per-class F1 columns followed by macro precision, recall and F1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

fn round1(v: f64) -> i64 {
    (v * 10.0).round() as i64
}

/// Marks, per column, the best, second-best and worst methods.
///
/// Values are compared at the displayed precision (one decimal), so equal
/// printed numbers tie. All tied methods share a marker. Second is the next
/// distinct value below the best; worst is the lowest value, marked only
/// when it differs from the best and from the second. Rows are in
/// method-name order.
pub fn compare(reports: &BTreeMap<String, MetricsReport>) -> Result<Comparison> {
    let Some(first) = reports.values().next() else {
        return Ok(Comparison { columns: Vec::new(), rows: Vec::new() });
    };
    let labels: Vec<&str> = first.labels().collect();
    for (name, r) in reports {
        if !r.labels().eq(labels.iter().copied()) {
            return Err(Error::Schema(format!("report `{name}` has a different label set")));
        }
    }
    let mut columns: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    columns.extend(["Precision", "Recall", "F1"].map(String::from));

    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(name, r)| {
            let mut values: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
            values.extend([r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1]);
            ComparisonRow { method: name.clone(), markers: vec![None; values.len()], values }
        })
        .collect();

    for col in 0..columns.len() {
        let mut distinct: Vec<i64> = rows.iter().map(|r| round1(r.values[col])).collect();
        distinct.sort_unstable_by(|a, b| b.cmp(a));
        distinct.dedup();
        for row in &mut rows {
            let v = round1(row.values[col]);
            row.markers[col] = if v == distinct[0] {
                Some(Marker::Best)
            } else if distinct.len() >= 3 && v == distinct[1] {
                Some(Marker::Second)
            } else if v == *distinct.last().expect("non-empty") {
                Some(Marker::Worst)
            } else {
                None
            };
        }
    }
    Ok(Comparison { columns, rows })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mw = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<mw$}", "method");
        for c in &self.columns {
            let _ = write!(out, " {c:>9}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<mw$}", r.method);
            for (v, m) in r.values.iter().zip(&r.markers) {
                let cell = format!("{v:.1}{}", m.map_or(' ', Marker::symbol));
                let _ = write!(out, " {cell:>9}");
            }
            out.push('\n');
        }
        out.push_str("* best  + second  ! worst\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn marker(&self, method: &str, column: &str) -> Option<Marker> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.method == method)?.markers[c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new("O", ["CLA"]).unwrap()
    }

    #[test]
    fn hand_confusion() {
        let r = score(&["CLA", "CLA", "O", "O"], &["CLA", "O", "O", "O"], &schema()).unwrap();
        let cla = r.class("CLA").unwrap();
        assert_eq!((cla.precision, cla.recall), (100.0, 50.0));
        assert!((cla.f1 - 66.7).abs() < 0.05);
        let o = r.class("O").unwrap();
        assert!((o.precision - 66.7).abs() < 0.05);
        assert_eq!(o.recall, 100.0);
        assert!((o.f1 - 80.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_and_absent() {
        let s = LabelSchema::new("O", ["CLA", "PER"]).unwrap();
        let r = score(&["CLA", "O"], &["CLA", "O"], &s).unwrap();
        assert_eq!(r.class("CLA").unwrap().f1, 100.0);
        let per = r.class("PER").unwrap();
        assert!(per.absent);
        assert_eq!((per.precision, per.recall, per.f1, per.support), (0.0, 0.0, 0.0, 0));
        assert!((r.macro_avg.f1 - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.macro_excluding_outside.f1, 50.0);
    }

    #[test]
    fn errors() {
        assert!(score(&["O"], &["O", "O"], &schema()).is_err());
        assert!(score(&["O"], &["XYZ"], &schema()).is_err());
    }

    #[test]
    fn identical_reports_all_best() {
        let r = score(&["CLA", "O"], &["CLA", "CLA"], &schema()).unwrap();
        let map = BTreeMap::from([("a".to_string(), r.clone()), ("b".to_string(), r)]);
        let c = compare(&map).unwrap();
        assert!(c.rows.iter().all(|row| row.markers.iter().all(|m| *m == Some(Marker::Best))));
        assert!(c.to_table().contains('*'));
        let single = BTreeMap::from([("only".to_string(), score(&["O"], &["O"], &schema()).unwrap())]);
        let c = compare(&single).unwrap();
        assert!(c.rows[0].markers.iter().all(|m| *m == Some(Marker::Best)));
    }
}
