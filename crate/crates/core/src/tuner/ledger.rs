//! Append-only trial ledger: a header line, then one TSV row per trial in
//! plan order. Floats use shortest round-trip formatting so a resumed run
//! aggregates exactly what a fresh run would.

use std::io::BufRead;

use super::{TrialOutcome, TrialRecord};
use crate::metrics::MetricsReport;
use crate::nn::Hyperparams;
use crate::{Error, Result};

const FIELDS: usize = 12;

pub fn header(metric_n: usize) -> String {
    format!(
        "index\td_c\tk\tq\teta\tseed\tbest_valid_p@{metric_n}\ttest_micro_f1\ttest_macro_f1\t\
         test_macro_f1_of_means\ttest_p@{metric_n}\tstatus"
    )
}

pub fn format_row(r: &TrialRecord, metric_n: usize) -> String {
    let hp = &r.hyperparams;
    let head = format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        r.grid_index, hp.filters, hp.kernel, hp.dropout, hp.learning_rate, r.seed
    );
    match &r.outcome {
        TrialOutcome::Completed { best_valid, test } => format!(
            "{head}\t{}\t{}\t{}\t{}\t{}\tok",
            best_valid,
            test.micro_f1,
            test.macro_f1_standard,
            test.macro_f1_of_means,
            test.p_at(metric_n).unwrap_or(f64::NAN)
        ),
        TrialOutcome::Failed(msg) => {
            let msg: String = msg
                .chars()
                .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
                .collect();
            format!("{head}\t-\t-\t-\t-\t-\tfailed: {msg}")
        }
    }
}

/// Parses a ledger written with the same `metric_n`. An empty input yields
/// no records.
pub fn parse<R: BufRead>(reader: R, metric_n: usize) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Ledger {
            line: line_no,
            msg: e.to_string(),
        })?;
        if idx == 0 {
            if line != header(metric_n) {
                return Err(Error::Ledger {
                    line: 1,
                    msg: "unexpected header".into(),
                });
            }
            continue;
        }
        out.push(parse_row(&line, metric_n).map_err(|msg| Error::Ledger { line: line_no, msg })?);
    }
    Ok(out)
}

fn parse_row(line: &str, metric_n: usize) -> std::result::Result<TrialRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != FIELDS {
        return Err(format!("expected {FIELDS} fields, found {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {what} `{s}`"))
    }
    let hyperparams = Hyperparams {
        filters: num(f[1], "d_c")?,
        kernel: num(f[2], "k")?,
        dropout: num(f[3], "q")?,
        learning_rate: num(f[4], "eta")?,
    };
    let outcome = match f[11] {
        "ok" => {
            let unit = |s: &str, what: &str| -> std::result::Result<f64, String> {
                let x: f64 = num(s, what)?;
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(format!("{what} `{s}` outside [0, 1]"))
                }
            };
            TrialOutcome::Completed {
                best_valid: unit(f[6], "validation metric")?,
                test: MetricsReport {
                    micro_f1: unit(f[7], "micro_f1")?,
                    macro_f1_standard: unit(f[8], "macro_f1")?,
                    macro_f1_of_means: unit(f[9], "macro_f1_of_means")?,
                    p_at_n: vec![(metric_n, unit(f[10], "p@n")?)],
                },
            }
        }
        s if s.starts_with("failed") => {
            TrialOutcome::Failed(s.trim_start_matches("failed").trim_start_matches(": ").to_string())
        }
        other => return Err(format!("bad status `{other}`")),
    };
    Ok(TrialRecord {
        grid_index: num(f[0], "index")?,
        hyperparams,
        seed: num(f[5], "seed")?,
        outcome,
        checkpoint: None,
        wall_seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(outcome: TrialOutcome) -> TrialRecord {
        TrialRecord {
            grid_index: 3,
            hyperparams: Hyperparams {
                filters: 50,
                kernel: 4,
                dropout: 0.2,
                learning_rate: 0.0003,
            },
            seed: 1337,
            outcome,
            checkpoint: None,
            wall_seconds: 0.0,
        }
    }

    fn completed() -> TrialOutcome {
        TrialOutcome::Completed {
            best_valid: 0.1 + 0.2,
            test: MetricsReport {
                micro_f1: 2.0 / 3.0,
                macro_f1_standard: 0.5,
                macro_f1_of_means: 0.75,
                p_at_n: vec![(5, 0.65)],
            },
        }
    }

    #[test]
    fn rows_round_trip_exactly() {
        let recs = vec![record(completed()), record(TrialOutcome::Failed("boom\tx".into()))];
        let mut text = header(5);
        text.push('\n');
        for r in &recs {
            text.push_str(&format_row(r, 5));
            text.push('\n');
        }
        let back = parse(text.as_bytes(), 5).unwrap();
        assert_eq!(back[0], recs[0]);
        assert_eq!(back[1].outcome, TrialOutcome::Failed("boom x".into()));
    }

    #[test]
    fn corrupt_line_is_named() {
        let text = format!("{}\n{}\ngarbage\n", header(5), format_row(&record(completed()), 5));
        match parse(text.as_bytes(), 5) {
            Err(Error::Ledger { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_header = "index\tnope\n";
        assert!(matches!(
            parse(bad_header.as_bytes(), 5),
            Err(Error::Ledger { line: 1, .. })
        ));
    }

    #[test]
    fn empty_ledger_has_no_records() {
        assert!(parse("".as_bytes(), 5).unwrap().is_empty());
    }
}
