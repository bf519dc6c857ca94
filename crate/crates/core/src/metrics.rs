//! Multi-label evaluation: Micro-F1, the two Macro-F1 definitions and
//! precision@n.
//!
//! Macro-F1 is reported two ways because the literature uses both:
//! the mean of per-class F1 ("standard"), and the F1 of the mean per-class
//! precision and mean per-class recall ("of means"). Zero denominators yield
//! zero precision, recall and F1.

use std::fmt::Write as _;

use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Per-document label scores with their true label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    /// Row-major `N × L` probabilities.
    pub probs: Vec<f64>,
    /// Row-major `N × L` 0/1 truths.
    pub truths: Vec<bool>,
    pub num_labels: usize,
    /// A cell is predicted positive iff its probability is `>= threshold`.
    pub threshold: f64,
}

impl PredictionSet {
    pub fn new(probs: Vec<f64>, truths: Vec<bool>, num_labels: usize) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::invalid("prediction set needs at least one label"));
        }
        if probs.len() != truths.len() || !probs.len().is_multiple_of(num_labels) {
            return Err(Error::Shape(format!(
                "{} scores and {} truths do not form N×{num_labels} matrices",
                probs.len(),
                truths.len()
            )));
        }
        if probs.is_empty() {
            return Err(Error::invalid("prediction set needs at least one document"));
        }
        Ok(PredictionSet {
            probs,
            truths,
            num_labels,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    /// Builds from per-document score rows and label-id lists.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[Vec<u32>], num_labels: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} score rows for {} documents",
                rows.len(),
                labels.len()
            )));
        }
        let mut truths = vec![false; rows.len() * num_labels];
        for (i, ls) in labels.iter().enumerate() {
            for &l in ls {
                let l = l as usize;
                if l >= num_labels {
                    return Err(Error::Shape(format!("label id {l} >= {num_labels}")));
                }
                truths[i * num_labels + l] = true;
            }
        }
        let probs = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PredictionSet::new(probs, truths, num_labels)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn num_docs(&self) -> usize {
        self.probs.len() / self.num_labels
    }

    fn predicted(&self, i: usize) -> bool {
        self.probs[i] >= self.threshold
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Counts {
    fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean over documents of the fraction of the `n` top-scored labels that are
/// true. Equal scores are ranked by lower label index first.
pub fn precision_at_n(preds: &PredictionSet, n: usize) -> Result<f64> {
    let l = preds.num_labels;
    if n == 0 || n > l {
        return Err(Error::invalid(format!("P@{n} needs 1 <= n <= {l}")));
    }
    let mut total = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(l);
    for doc in 0..preds.num_docs() {
        let scores = &preds.probs[doc * l..(doc + 1) * l];
        order.clear();
        order.extend(0..l);
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let hits = order[..n]
            .iter()
            .filter(|&&j| preds.truths[doc * l + j])
            .count();
        total += hits as f64 / n as f64;
    }
    Ok(total / preds.num_docs() as f64)
}

/// F1 over TP/FP/FN pooled across every (document, label) cell.
pub fn micro_f1(preds: &PredictionSet) -> f64 {
    let mut c = Counts::default();
    for i in 0..preds.probs.len() {
        c.add(preds.predicted(i), preds.truths[i]);
    }
    c.f1()
}

/// Returns `(standard, of_means)` Macro-F1.
pub fn macro_f1_both(preds: &PredictionSet) -> (f64, f64) {
    let l = preds.num_labels;
    let mut per_class = vec![Counts::default(); l];
    for i in 0..preds.probs.len() {
        per_class[i % l].add(preds.predicted(i), preds.truths[i]);
    }
    let n = l as f64;
    let standard = per_class.iter().map(Counts::f1).sum::<f64>() / n;
    let mean_p = per_class.iter().map(Counts::precision).sum::<f64>() / n;
    let mean_r = per_class.iter().map(Counts::recall).sum::<f64>() / n;
    (standard, harmonic(mean_p, mean_r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub macro_f1_standard: f64,
    pub macro_f1_of_means: f64,
    /// `(n, P@n)` in the order requested.
    pub p_at_n: Vec<(usize, f64)>,
}

impl MetricsReport {
    pub fn compute(preds: &PredictionSet, ns: &[usize]) -> Result<MetricsReport> {
        let (standard, of_means) = macro_f1_both(preds);
        let p_at_n = ns
            .iter()
            .map(|&n| precision_at_n(preds, n).map(|p| (n, p)))
            .collect::<Result<_>>()?;
        Ok(MetricsReport {
            micro_f1: micro_f1(preds),
            macro_f1_standard: standard,
            macro_f1_of_means: of_means,
            p_at_n,
        })
    }

    pub fn p_at(&self, n: usize) -> Option<f64> {
        self.p_at_n.iter().find(|(m, _)| *m == n).map(|(_, p)| *p)
    }

    /// `metric<TAB>value` lines with six decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "micro_f1\t{:.6}", self.micro_f1);
        let _ = writeln!(out, "macro_f1\t{:.6}", self.macro_f1_standard);
        let _ = writeln!(out, "macro_f1_of_means\t{:.6}", self.macro_f1_of_means);
        for (n, p) in &self.p_at_n {
            let _ = writeln!(out, "p@{n}\t{p:.6}");
        }
        out
    }
}
