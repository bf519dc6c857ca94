use std::fmt::Write as _;

use super::{TrialOutcome, TrialRecord};
use crate::{Error, Result};

/// Mean and sample (n − 1) standard deviation; the deviation is zero for a
/// single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    /// Grid indices of the selected trials, best first.
    pub selected: Vec<usize>,
    pub macro_f1_standard: MeanStd,
    pub macro_f1_of_means: MeanStd,
    pub micro_f1: MeanStd,
    pub p_at_n: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub metric_n: usize,
    pub top_m: usize,
    pub seeds: Vec<SeedSummary>,
    /// Mean over seeds of each per-seed mean: macro standard, macro of
    /// means, micro, P@n.
    pub grand_mean: [f64; 4],
}

/// Per seed (ascending), keeps the `top_m` successful trials with the highest
/// validation metric (ties: lower grid index) and summarises their test
/// metrics.
pub fn aggregate(records: &[TrialRecord], top_m: usize, metric_n: usize) -> Result<Summary> {
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    aggregate_seeds(records, top_m, metric_n, &seeds)
}

/// [`aggregate`] with an explicit seed order; every listed seed must have at
/// least `top_m` successful trials.
pub fn aggregate_seeds(
    records: &[TrialRecord],
    top_m: usize,
    metric_n: usize,
    seeds: &[u64],
) -> Result<Summary> {
    if top_m == 0 {
        return Err(Error::invalid("top_m must be at least 1"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds to aggregate"));
    }
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut ok: Vec<(f64, usize, &TrialRecord)> = records
            .iter()
            .filter(|r| r.seed == seed)
            .filter_map(|r| match &r.outcome {
                TrialOutcome::Completed { best_valid, .. } => Some((*best_valid, r.grid_index, r)),
                TrialOutcome::Failed(_) => None,
            })
            .collect();
        if ok.len() < top_m {
            return Err(Error::InsufficientTrials {
                seed,
                found: ok.len(),
                need: top_m,
            });
        }
        ok.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ok.truncate(top_m);

        let pick = |f: &dyn Fn(&TrialRecord) -> f64| -> MeanStd {
            MeanStd::of(&ok.iter().map(|(_, _, r)| f(r)).collect::<Vec<_>>())
        };
        let test = |r: &TrialRecord| match &r.outcome {
            TrialOutcome::Completed { test, .. } => test.clone(),
            TrialOutcome::Failed(_) => unreachable!("filtered above"),
        };
        out.push(SeedSummary {
            seed,
            selected: ok.iter().map(|(_, i, _)| *i).collect(),
            macro_f1_standard: pick(&|r| test(r).macro_f1_standard),
            macro_f1_of_means: pick(&|r| test(r).macro_f1_of_means),
            micro_f1: pick(&|r| test(r).micro_f1),
            p_at_n: pick(&|r| test(r).p_at(metric_n).unwrap_or(f64::NAN)),
        });
    }
    let n = out.len() as f64;
    let grand = |f: fn(&SeedSummary) -> f64| out.iter().map(f).sum::<f64>() / n;
    let grand_mean = [
        grand(|s| s.macro_f1_standard.mean),
        grand(|s| s.macro_f1_of_means.mean),
        grand(|s| s.micro_f1.mean),
        grand(|s| s.p_at_n.mean),
    ];
    Ok(Summary {
        metric_n,
        top_m,
        seeds: out,
        grand_mean,
    })
}

impl Summary {
    /// Aligned text table: one row per seed with `mean ± std`, then the
    /// cross-seed mean.
    pub fn render(&self, title: &str) -> String {
        let cols = [
            "Macro-F1".to_string(),
            "Macro-F1 (F1 of means)".to_string(),
            "Micro-F1".to_string(),
            format!("P@{}", self.metric_n),
        ];
        let cell = |m: &MeanStd| format!("{:.3} ± {:.3}", m.mean, m.std);
        let mut rows: Vec<(String, Vec<String>)> = self
            .seeds
            .iter()
            .map(|s| {
                (
                    s.seed.to_string(),
                    vec![
                        cell(&s.macro_f1_standard),
                        cell(&s.macro_f1_of_means),
                        cell(&s.micro_f1),
                        cell(&s.p_at_n),
                    ],
                )
            })
            .collect();
        rows.push((
            "mean".into(),
            self.grand_mean.iter().map(|m| format!("{m:.3}")).collect(),
        ));

        let mut widths: Vec<usize> = cols.iter().map(|c| c.chars().count()).collect();
        for (_, cells) in &rows {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.chars().count());
            }
        }
        let seed_w = rows.iter().map(|(s, _)| s.len()).max().unwrap_or(4).max(4);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{title}: top {} trials per seed by validation P@{}, test metrics as mean ± sample std",
            self.top_m, self.metric_n
        );
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
        let mut line = pad("Seed", seed_w);
        for (c, w) in cols.iter().zip(&widths) {
            line.push_str(" | ");
            line.push_str(&pad(c, *w));
        }
        let _ = writeln!(out, "{}", line.trim_end());
        let _ = writeln!(out, "{}", "-".repeat(line.trim_end().chars().count()));
        for (seed, cells) in &rows {
            let mut line = pad(seed, seed_w);
            for (c, w) in cells.iter().zip(&widths) {
                line.push_str(" | ");
                line.push_str(&pad(c, *w));
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}
