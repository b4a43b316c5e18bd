use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy of one readout fit on one random split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: String,
    pub encoding: String,
    pub ann_flag: bool,
    pub split: f64,
    pub trial: usize,
    pub accuracy: f64,
}

/// Max, mean and population std of a group of trials. `split` is `None`
/// for the group pooled over all splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub encoding: String,
    pub ann_flag: bool,
    pub split: Option<f64>,
    pub trials: usize,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub name: String,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<Aggregate>,
}

fn stats(acc: &[f64]) -> (f64, f64, f64) {
    let n = acc.len() as f64;
    let max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = acc.iter().sum::<f64>() / n;
    let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (max, mean, var.sqrt())
}

impl TrialReport {
    /// Rows are put into (method, split, trial) order so the report does not
    /// depend on execution order.
    pub fn new(name: impl Into<String>, mut rows: Vec<TrialRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.method, &a.encoding, a.ann_flag)
                .cmp(&(&b.method, &b.encoding, b.ann_flag))
                .then(a.split.total_cmp(&b.split))
                .then(a.trial.cmp(&b.trial))
        });
        let aggregates = Self::aggregate(&rows);
        Self {
            name: name.into(),
            rows,
            aggregates,
        }
    }

    pub fn aggregate(rows: &[TrialRow]) -> Vec<Aggregate> {
        // key: (method, encoding, ann_flag, split bits or none)
        let mut groups: BTreeMap<(String, String, bool, Option<u64>), Vec<f64>> = BTreeMap::new();
        for r in rows {
            let k = (r.method.clone(), r.encoding.clone(), r.ann_flag);
            groups
                .entry((k.0.clone(), k.1.clone(), k.2, Some(r.split.to_bits())))
                .or_default()
                .push(r.accuracy);
            groups.entry((k.0, k.1, k.2, None)).or_default().push(r.accuracy);
        }
        let mut out: Vec<Aggregate> = groups
            .into_iter()
            .map(|((method, encoding, ann_flag, split), acc)| {
                let (max, mean, std) = stats(&acc);
                Aggregate {
                    method,
                    encoding,
                    ann_flag,
                    split: split.map(f64::from_bits),
                    trials: acc.len(),
                    max,
                    mean,
                    std,
                }
            })
            .collect();
        // per-split rows ascending, pooled row last within each group
        out.sort_by(|a, b| {
            (&a.method, &a.encoding, a.ann_flag)
                .cmp(&(&b.method, &b.encoding, b.ann_flag))
                .then(match (a.split, b.split) {
                    (Some(x), Some(y)) => x.total_cmp(&y),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                })
        });
        out
    }

    /// Pooled aggregate of `method`.
    pub fn pooled(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.split.is_none())
    }
}

pub const TRIALS_HEADER: &str = "method,encoding,ann_flag,split,trial,accuracy";
pub const SUMMARY_HEADER: &str = "method,encoding,ann_flag,split,trials,max,mean,std";

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub trials: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<name>_trials.csv` and `<name>_summary.csv` under `dir`.
pub fn emit_report(report: &TrialReport, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        trials: dir.join(format!("{}_trials.csv", report.name)),
        summary: dir.join(format!("{}_summary.csv", report.name)),
    };
    write_lines(
        &files.trials,
        TRIALS_HEADER,
        report.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.method, r.encoding, r.ann_flag, r.split, r.trial, r.accuracy
            )
        }),
    )?;
    write_lines(
        &files.summary,
        SUMMARY_HEADER,
        report.aggregates.iter().map(|a| {
            let split = a.split.map_or_else(|| "all".to_owned(), |s| s.to_string());
            format!(
                "{},{},{},{split},{},{},{},{}",
                a.method, a.encoding, a.ann_flag, a.trials, a.max, a.mean, a.std
            )
        }),
    )?;
    Ok(files)
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}").map_err(io)?;
    for l in lines {
        writeln!(w, "{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Parses a trials file written by [`emit_report`].
pub fn read_trials(path: &Path) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<TrialRow>, _>>()?;
    Ok(rows)
}

/// Parses a summary file written by [`emit_report`].
pub fn read_summary(path: &Path) -> Result<Vec<Aggregate>> {
    #[derive(Deserialize)]
    struct Row {
        method: String,
        encoding: String,
        ann_flag: bool,
        split: String,
        trials: usize,
        max: f64,
        mean: f64,
        std: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            let split = match row.split.as_str() {
                "all" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| Error::data(format!("{}: bad split {s:?}", path.display())))?,
                ),
            };
            Ok(Aggregate {
                method: row.method,
                encoding: row.encoding,
                ann_flag: row.ann_flag,
                split,
                trials: row.trials,
                max: row.max,
                mean: row.mean,
                std: row.std,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, split: f64, trial: usize, accuracy: f64) -> TrialRow {
        TrialRow {
            method: method.into(),
            encoding: "amplitude".into(),
            ann_flag: true,
            split,
            trial,
            accuracy,
        }
    }

    #[test]
    fn aggregates_by_hand() {
        let r = TrialReport::new(
            "t",
            vec![
                row("linear", 0.1, 0, 50.0),
                row("linear", 0.1, 1, 70.0),
                row("linear", 0.2, 0, 90.0),
            ],
        );
        let a = &r.aggregates;
        assert_eq!(a.len(), 3);
        assert_eq!(
            (a[0].split, a[0].max, a[0].mean, a[0].std),
            (Some(0.1), 70.0, 60.0, 10.0)
        );
        let pooled = r.pooled("linear").unwrap();
        assert_eq!(pooled.trials, 3);
        assert_eq!(pooled.mean, 70.0);
        // population std of 50, 70, 90
        assert!((pooled.std - (800.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn order_independent() {
        let rows = vec![
            row("mlp", 0.2, 1, 1.0),
            row("linear", 0.1, 0, 2.0),
            row("mlp", 0.2, 0, 3.0),
        ];
        let mut rev = rows.clone();
        rev.reverse();
        assert_eq!(TrialReport::new("x", rows), TrialReport::new("x", rev));
    }

    #[test]
    fn csv_round_trip() {
        let r = TrialReport::new(
            "rt",
            vec![
                row("linear", 0.3, 0, 100.0 / 3.0),
                row("mlp", 0.3, 0, 2.0 / 3.0),
                row("mlp", 0.5, 4, 61.7),
            ],
        );
        let dir = tempfile::tempdir().unwrap();
        let f = emit_report(&r, dir.path()).unwrap();
        let rows = read_trials(&f.trials).unwrap();
        assert_eq!(rows, r.rows);
        let agg = read_summary(&f.summary).unwrap();
        assert_eq!(agg.len(), r.aggregates.len());
        for (a, b) in agg.iter().zip(&TrialReport::aggregate(&rows)) {
            assert_eq!((&a.method, a.split, a.trials), (&b.method, b.split, b.trials));
            assert!((a.mean - b.mean).abs() < 1e-9 && (a.std - b.std).abs() < 1e-9 && (a.max - b.max).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let f = emit_report(&TrialReport::new("e", vec![]), dir.path()).unwrap();
        assert_eq!(
            std::fs::read_to_string(&f.trials).unwrap(),
            format!("{TRIALS_HEADER}\n")
        );
        assert_eq!(
            std::fs::read_to_string(&f.summary).unwrap(),
            format!("{SUMMARY_HEADER}\n")
        );
        assert!(read_trials(&f.trials).unwrap().is_empty());
    }
}
