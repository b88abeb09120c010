//! Confusion matrix, one-vs-rest classification metrics, ROC and PR curves.
//!
//! Per class the usual definitions are applied to the one-vs-rest counts:
//!
//! ```text
//! accuracy  = (TP + TN) / (TP + FP + TN + FN)
//! precision = TP / (TP + FP)
//! recall    = TP / (TP + FN)
//! F1        = 2 * precision * recall / (precision + recall)
//! ```
//!
//! A zero denominator yields 0 and marks the class as degenerate. The
//! report's headline accuracy is the overall `trace / total`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    /// Row-major, rows = true class, columns = predicted class.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::domain(
                "confusion matrix must be square and non-empty",
            ));
        }
        Ok(Self {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.classes)
            .map(<[u64]>::to_vec)
            .collect()
    }

    /// One-vs-rest counts for `class`.
    pub fn one_vs_rest(&self, class: usize) -> OvrCounts {
        let tp = self.get(class, class);
        let row: u64 = (0..self.classes).map(|j| self.get(class, j)).sum();
        let col: u64 = (0..self.classes).map(|i| self.get(i, class)).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        OvrCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvrCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::domain(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if classes == 0 {
        return Err(Error::domain("class count must be positive"));
    }
    let mut counts = vec![0u64; classes * classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return Err(Error::domain(format!(
                "label {} out of range for {classes} classes",
                t.max(p)
            )));
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub counts: OvrCounts,
    /// Number of samples whose true class is this one.
    pub support: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some metric had a zero denominator and was set to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAuc {
    pub class: usize,
    pub roc_auc: Option<f64>,
    pub average_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    #[serde(default)]
    pub auc: Vec<ClassAuc>,
}

pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    let c = cm.one_vs_rest(class);
    let accuracy = ratio(c.tp + c.tn, c.tp + c.fp + c.tn + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let degenerate = accuracy.is_none() || precision.is_none() || recall.is_none() || f1.is_none();
    ClassMetrics {
        class,
        counts: c,
        support: c.tp + c.fn_,
        accuracy: accuracy.unwrap_or(0.0),
        precision: precision.unwrap_or(0.0),
        recall: recall.unwrap_or(0.0),
        f1: f1.unwrap_or(0.0),
        degenerate,
    }
}

pub fn summarize(cm: &ConfusionMatrix) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = (0..cm.classes()).map(|c| class_metrics(cm, c)).collect();
    let k = per_class.len() as f64;
    let macro_avg = MacroMetrics {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    MetricsReport {
        class_names: (0..cm.classes()).map(|c| format!("class_{c}")).collect(),
        confusion: cm.rows(),
        accuracy: ratio(cm.trace(), cm.total()).unwrap_or(0.0),
        per_class,
        macro_avg,
        auc: Vec::new(),
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "metrics report",
            detail: e.to_string(),
        })?;
        report.check()?;
        Ok(report)
    }

    fn check(&self) -> Result<()> {
        let k = self.per_class.len();
        let bad = |detail: String| Error::Format {
            what: "metrics report",
            detail,
        };
        if self.confusion.len() != k || self.confusion.iter().any(|r| r.len() != k) {
            return Err(bad(format!("confusion matrix is not {k}x{k}")));
        }
        if self.class_names.len() != k {
            return Err(bad(format!(
                "{} class names for {k} classes",
                self.class_names.len()
            )));
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        let metrics_ok = in_unit(self.accuracy)
            && [
                self.macro_avg.precision,
                self.macro_avg.recall,
                self.macro_avg.f1,
            ]
            .into_iter()
            .all(in_unit)
            && self.per_class.iter().all(|m| {
                [m.accuracy, m.precision, m.recall, m.f1]
                    .into_iter()
                    .all(in_unit)
            })
            && self
                .auc
                .iter()
                .all(|a| a.roc_auc.is_none_or(in_unit) && a.average_precision.is_none_or(in_unit));
        if !metrics_ok {
            return Err(bad("metric outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(s, "{:<width$}  precision  recall     f1  support", "class");
        for (m, name) in self.per_class.iter().zip(&self.class_names) {
            let flag = if m.degenerate { "  (degenerate)" } else { "" };
            let _ = writeln!(
                s,
                "{name:<width$}  {:>9.4}  {:>6.4}  {:>5.4}  {:>7}{flag}",
                m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>9.4}  {:>6.4}  {:>5.4}",
            "macro", self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f1
        );
        let _ = writeln!(s, "\naccuracy: {:.4}", self.accuracy);
        if !self.auc.is_empty() {
            let _ = writeln!(s, "\n{:<width$}  roc_auc  avg_precision", "class");
            for a in &self.auc {
                let fmt =
                    |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
                let name = self.class_names.get(a.class).map_or("?", String::as_str);
                let _ = writeln!(
                    s,
                    "{name:<width$}  {:>7}  {:>13}",
                    fmt(a.roc_auc),
                    fmt(a.average_precision)
                );
            }
        }
        let _ = writeln!(s, "\nconfusion (rows = true, cols = predicted):");
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
            let _ = writeln!(s, "{}", cells.join(""));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Starts at (0, 0) with an infinite threshold and ends at (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

/// Cumulative (threshold, tp, fp) after each group of tied scores, highest
/// score first.
fn sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, u64, u64)>> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::domain("scores must not be NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (n, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(n + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            out.push((scores[i], tp, fp));
        }
    }
    Ok(out)
}

pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let steps = sweep(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::domain(
            "ROC needs at least one positive and one negative sample",
        ));
    }
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    points.extend(steps.iter().map(|&(t, tp, fp)| RocPoint {
        threshold: t,
        fpr: fp as f64 / neg,
        tpr: tp as f64 / pos,
    }));
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Precision/recall at every distinct threshold and the step-wise average
/// precision `sum (R_n - R_{n-1}) * P_n`.
pub fn pr_points(scores: &[f64], labels: &[bool]) -> Result<PrCurve> {
    let steps = sweep(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    if pos == 0.0 {
        return Err(Error::domain(
            "precision-recall needs at least one positive sample",
        ));
    }
    let points: Vec<PrPoint> = steps
        .iter()
        .map(|&(t, tp, fp)| PrPoint {
            threshold: t,
            recall: tp as f64 / pos,
            precision: tp as f64 / (tp + fp) as f64,
        })
        .collect();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in &points {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(PrCurve {
        points,
        average_precision: ap,
    })
}

/// One-vs-rest ROC-AUC and average precision from per-class scores.
/// Classes without both positives and negatives get `None`.
pub fn per_class_auc(
    scores: &[Vec<f64>],
    truth: &[usize],
    classes: usize,
) -> Result<Vec<ClassAuc>> {
    if scores.len() != truth.len() || scores.iter().any(|s| s.len() != classes) {
        return Err(Error::domain(
            "score rows must match labels and class count",
        ));
    }
    (0..classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let l: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            Ok(ClassAuc {
                class: c,
                roc_auc: roc_points(&s, &l).ok().map(|r| r.auc),
                average_precision: pr_points(&s, &l).ok().map(|p| p.average_precision),
            })
        })
        .collect()
}

/// Labels and optional per-class scores read from a predictions CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
    /// One row of class scores per sample, when the file has score columns.
    pub scores: Option<Vec<Vec<f64>>>,
}

impl Predictions {
    /// Parses `truth,predicted[,score_0,..,score_{K-1}]` with that header.
    /// Blank lines are ignored.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "predictions",
            detail,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "truth" || cols[1] != "predicted" {
            return Err(bad(format!(
                "header must start with 'truth,predicted', got '{header}'"
            )));
        }
        for (i, c) in cols[2..].iter().enumerate() {
            if *c != format!("score_{i}") {
                return Err(bad(format!(
                    "column {} must be 'score_{i}', got '{c}'",
                    i + 2
                )));
            }
        }
        let k = cols.len() - 2;
        let mut p = Predictions {
            truth: Vec::new(),
            predicted: Vec::new(),
            scores: (k > 0).then(Vec::new),
        };
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(bad(format!(
                    "line {}: expected {} fields, got {}",
                    n + 1,
                    cols.len(),
                    fields.len()
                )));
            }
            let label = |f: &str| {
                f.parse::<usize>()
                    .map_err(|_| bad(format!("line {}: bad label '{f}'", n + 1)))
            };
            p.truth.push(label(fields[0])?);
            p.predicted.push(label(fields[1])?);
            if let Some(scores) = &mut p.scores {
                let row = fields[2..]
                    .iter()
                    .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| bad(format!("line {}: bad score", n + 1)))?;
                scores.push(row);
            }
        }
        if p.truth.is_empty() {
            return Err(bad("no samples".into()));
        }
        Ok(p)
    }

    /// Number of classes: the score width when present, else the largest
    /// label plus one.
    pub fn classes(&self) -> usize {
        match &self.scores {
            Some(s) => s[0].len(),
            None => self
                .truth
                .iter()
                .chain(&self.predicted)
                .max()
                .map_or(0, |m| m + 1),
        }
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let k = self.classes();
        let cm = confusion(&self.truth, &self.predicted, k)?;
        let mut report = summarize(&cm);
        if let Some(scores) = &self.scores {
            report.auc = per_class_auc(scores, &self.truth, k)?;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_example() -> ConfusionMatrix {
        // TP=50, FN=10, FP=5, TN=35 with class 0 as positive
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (t, p, n) in [(0, 0, 50), (0, 1, 10), (1, 0, 5), (1, 1, 35)] {
            truth.extend(std::iter::repeat_n(t, n));
            pred.extend(std::iter::repeat_n(p, n));
        }
        confusion(&truth, &pred, 2).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let cm = binary_example();
        assert_eq!(cm.rows(), vec![vec![50, 10], vec![5, 35]]);
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.rows(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let cm = confusion(&[0, 1, 2, 2], &[1, 1, 1, 1], 3).unwrap();
        assert!(cm.rows().iter().all(|r| r[0] == 0 && r[2] == 0));
        assert!(confusion(&[0, 3], &[0, 0], 3).is_err());
        assert!(confusion(&[0], &[0, 1], 3).is_err());
    }

    #[test]
    fn binary_metrics() {
        let r = summarize(&binary_example());
        assert_eq!(r.accuracy, 0.85);
        let c0 = &r.per_class[0];
        assert!((c0.precision - 50.0 / 55.0).abs() < 1e-15);
        assert!((c0.recall - 50.0 / 60.0).abs() < 1e-15);
        assert!((c0.f1 - 0.869_565_217_391_304_3).abs() < 1e-12);
        assert_eq!(c0.accuracy, 0.85);
        assert!(!c0.degenerate);
    }

    #[test]
    fn diagonal_is_perfect() {
        let cm =
            ConfusionMatrix::from_counts(&[vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]).unwrap();
        let r = summarize(&cm);
        assert_eq!(r.accuracy, 1.0);
        for m in &r.per_class {
            assert_eq!(
                (m.precision, m.recall, m.f1, m.accuracy),
                (1.0, 1.0, 1.0, 1.0)
            );
        }
        assert_eq!(r.macro_avg.f1, 1.0);
    }

    #[test]
    fn absent_class_is_degenerate() {
        let cm =
            ConfusionMatrix::from_counts(&[vec![3, 1, 0], vec![2, 4, 0], vec![0, 0, 0]]).unwrap();
        let m = &summarize(&cm).per_class[2];
        assert!(m.degenerate);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn roc_examples() {
        let labels = [true, true, false, false];
        assert_eq!(roc_points(&[0.9, 0.8, 0.3, 0.1], &labels).unwrap().auc, 1.0);
        let flat = roc_points(&[0.5; 4], &labels).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points.len(), 2);
        assert!(roc_points(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn pr_examples() {
        let labels = [true, true, false, false];
        assert_eq!(
            pr_points(&[0.9, 0.8, 0.3, 0.1], &labels)
                .unwrap()
                .average_precision,
            1.0
        );
        let all_pos = pr_points(&[0.3, 0.1, 0.7], &[true, true, true]).unwrap();
        assert!(all_pos.points.iter().all(|p| p.precision == 1.0));
        assert_eq!(all_pos.average_precision, 1.0);
        assert!(pr_points(&[0.3], &[false]).is_err());
        // ranks: + - + -  -> AP = 0.5 * 1 + 0.5 * 2/3
        let ap = pr_points(&[0.9, 0.8, 0.7, 0.6], &labels_alt())
            .unwrap()
            .average_precision;
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    fn labels_alt() -> [bool; 4] {
        [true, false, true, false]
    }

    #[test]
    fn report_json_round_trip_and_validation() {
        let r = summarize(&binary_example());
        let back = MetricsReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(MetricsReport::from_json("{}").is_err());
        let broken = r
            .to_json()
            .replace("\"accuracy\": 0.85", "\"accuracy\": 1.85");
        assert!(MetricsReport::from_json(&broken).is_err());
        assert!(r.render().contains("accuracy: 0.8500"));
    }
    #[test]
    fn predictions_csv() {
        let p = Predictions::parse_csv(
            "truth,predicted,score_0,score_1\n0,0,0.9,0.1\n1,1,0.2,0.8\n\n1,0,0.6,0.4\n",
        )
        .unwrap();
        assert_eq!(p.truth, vec![0, 1, 1]);
        assert_eq!(p.classes(), 2);
        let r = p.report().unwrap();
        assert_eq!(r.confusion, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(r.auc[1].roc_auc, Some(1.0));
        let plain = Predictions::parse_csv("truth,predicted\n0,0\n2,2\n1,1\n").unwrap();
        let r = plain.report().unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class.iter().all(|m| m.f1 == 1.0));
        for bad in [
            "",
            "a,b\n",
            "truth,predicted\n",
            "truth,predicted\n0\n",
            "truth,predicted,score_1\n0,0,1\n",
            "truth,predicted,score_0\n0,0,nan\n",
            "truth,predicted\n-1,0\n",
            "truth,predicted,score_0\n3,0,1\n",
        ] {
            assert!(
                Predictions::parse_csv(bad)
                    .and_then(|p| p.report())
                    .is_err(),
                "{bad:?}"
            );
        }
    }
}
