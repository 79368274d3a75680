use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{AverageMode, ScoreTriple, TrendlineFit};
use crate::model::Hyperparameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub hyperparameters: Hyperparameters,
    pub delivery_size: usize,
    pub window_capacity: usize,
    pub mode: AverageMode,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Labeled examples delivered so far.
    pub n_tweets: usize,
    pub scores: ScoreTriple,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ReportConfig,
    pub iterations: Vec<IterationRecord>,
    pub average: ScoreTriple,
    pub total_cpu_seconds: f64,
    /// Absent when there are fewer than two iterations.
    pub trendline: Option<TrendlineFit>,
}

impl SimulationReport {
    /// Copy with every CPU-time field zeroed, for byte-reproducible output.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.total_cpu_seconds = 0.0;
        r.iterations.iter_mut().for_each(|i| i.cpu_seconds = 0.0);
        r
    }

    pub fn mean_cpu_seconds(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.total_cpu_seconds / self.iterations.len() as f64
        }
    }

    pub fn crossing_n(&self) -> Option<u64> {
        self.trendline.and_then(|t| t.crossing_n)
    }

    /// CSV: `iteration,n_tweets,precision,recall,f1,cpu_seconds`, one row per
    /// iteration, then two footer rows:
    /// `average,<n_tweets>,<precision>,<recall>,<f1>,<total_cpu_seconds>` and
    /// `trendline,<crossing_n>,<a>,<b>,<target_f1>,`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,n_tweets,precision,recall,f1,cpu_seconds\n");
        for r in &self.iterations {
            let s = r.scores;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.n_tweets, s.precision, s.recall, s.f1, r.cpu_seconds
            );
        }
        let a = self.average;
        let n = self.iterations.last().map(|r| r.n_tweets).unwrap_or(0);
        let _ = writeln!(
            out,
            "average,{n},{},{},{},{}",
            a.precision, a.recall, a.f1, self.total_cpu_seconds
        );
        match self.trendline {
            Some(t) => {
                let crossing = t.crossing_n.map(|c| c.to_string()).unwrap_or_default();
                let target = t.target.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(out, "trendline,{crossing},{},{},{target},", t.a, t.b);
            }
            None => out.push_str("trendline,,,,,\n"),
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let hp = &self.config.hyperparameters;
        let mut out = format!(
            "{} (lr {}, batch {}, epochs {}), {} averaging, {} train / {} test\n\n",
            hp.model_type,
            hp.learning_rate,
            hp.batch_size,
            hp.epochs,
            self.config.mode,
            self.config.train_size,
            self.config.test_size
        );
        out.push_str("| Iteration | Tweets | Precision | Recall | F1 | CPU (s) |\n");
        out.push_str("|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.iterations {
            let s = r.scores;
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {:.4} | {:.3} |",
                r.iteration, r.n_tweets, s.precision, s.recall, s.f1, r.cpu_seconds
            );
        }
        let a = self.average;
        let _ = writeln!(
            out,
            "| **Average** | | {:.4} | {:.4} | {:.4} | {:.3} |",
            a.precision, a.recall, a.f1, self.total_cpu_seconds
        );
        if let Some(t) = self.trendline {
            let _ = write!(out, "\nTrendline: y = {:.4}·ln(x) + {:.4}", t.a, t.b);
            if let Some(n) = t.crossing_n {
                let _ = write!(out, ", reaches the average F1 at {n} tweets");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReportFormat {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "markdown")]
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn emit_report(report: &SimulationReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn num<T: FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("report: bad {what} {field:?}")))
}

fn opt_num<T: FromStr>(field: Option<&str>, what: &str) -> Result<Option<T>> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => num(field, what).map(Some),
    }
}

/// Reads a report written by [`SimulationReport::to_csv`]. Configuration is
/// not part of the CSV, so the returned report carries defaults there.
pub fn parse_report_csv<R: Read>(reader: R) -> Result<SimulationReport> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut iterations = Vec::new();
    let mut average = None;
    let mut total_cpu_seconds = 0.0;
    let mut trendline = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Dataset(format!("report: {e}")))?;
        match record.get(0).unwrap_or("") {
            "average" => {
                average = Some(ScoreTriple {
                    precision: num(record.get(2), "precision")?,
                    recall: num(record.get(3), "recall")?,
                    f1: num(record.get(4), "f1")?,
                });
                total_cpu_seconds = num(record.get(5), "cpu_seconds")?;
            }
            "trendline" => {
                if let Some(a) = opt_num::<f64>(record.get(2), "a")? {
                    trendline = Some(TrendlineFit {
                        a,
                        b: num(record.get(3), "b")?,
                        target: opt_num(record.get(4), "target")?,
                        crossing_n: opt_num(record.get(1), "crossing_n")?,
                    });
                }
            }
            _ => iterations.push(IterationRecord {
                iteration: num(record.get(0), "iteration")?,
                n_tweets: num(record.get(1), "n_tweets")?,
                scores: ScoreTriple {
                    precision: num(record.get(2), "precision")?,
                    recall: num(record.get(3), "recall")?,
                    f1: num(record.get(4), "f1")?,
                },
                cpu_seconds: num(record.get(5), "cpu_seconds")?,
            }),
        }
    }
    let average = average.ok_or_else(|| Error::Dataset("report: missing average row".into()))?;
    Ok(SimulationReport {
        config: ReportConfig {
            hyperparameters: Hyperparameters::default(),
            delivery_size: iterations.first().map(|r| r.n_tweets).unwrap_or(0),
            window_capacity: 0,
            mode: AverageMode::default(),
            train_size: 0,
            test_size: 0,
        },
        iterations,
        average,
        total_cpu_seconds,
        trendline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{average_f1, fit_log};

    pub(crate) fn sample_report() -> SimulationReport {
        let scores = [ScoreTriple::from_pr(0.51, 0.49), ScoreTriple::from_pr(0.6123456789, 0.7)];
        let iterations: Vec<_> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| IterationRecord {
                iteration: i + 1,
                n_tweets: (i + 1) * 10,
                scores: *s,
                cpu_seconds: 0.25 * (i + 1) as f64,
            })
            .collect();
        let average = average_f1(&scores).unwrap();
        let trend = fit_log(&[(10.0, scores[0].f1), (20.0, scores[1].f1)]).unwrap().with_target(average.f1);
        SimulationReport {
            config: ReportConfig {
                hyperparameters: Hyperparameters::cnn(),
                delivery_size: 10,
                window_capacity: 110,
                mode: AverageMode::Macro,
                train_size: 20,
                test_size: 20,
            },
            iterations,
            average,
            total_cpu_seconds: 0.75,
            trendline: Some(trend),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = sample_report().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "iteration,n_tweets,precision,recall,f1,cpu_seconds");
        assert!(lines[1].starts_with("1,10,0.51,0.49,"));
        assert!(lines[3].starts_with("average,20,"));
        assert!(lines[4].starts_with("trendline,"));
    }

    #[test]
    fn emission_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let report = sample_report();
        emit_report(&report, &a, ReportFormat::Csv).unwrap();
        emit_report(&report, &b, ReportFormat::Csv).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        emit_report(&report, dir.path().join("r.md"), ReportFormat::Markdown).unwrap();
    }

    #[test]
    fn csv_parses_back_exactly() {
        let report = sample_report();
        let parsed = parse_report_csv(report.to_csv().as_bytes()).unwrap();
        assert_eq!(parsed.iterations, report.iterations);
        assert_eq!(parsed.average, report.average);
        assert_eq!(parsed.trendline, report.trendline);
        assert_eq!(parsed.total_cpu_seconds, report.total_cpu_seconds);
    }

    #[test]
    fn markdown_has_rows() {
        let md = sample_report().to_markdown();
        assert!(md.contains("| 2 | 20 |"));
        assert!(md.contains("**Average**"));
    }
}
