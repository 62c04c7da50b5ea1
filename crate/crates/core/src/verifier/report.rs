use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LevyError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One row of the flat statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub stats: BTreeMap<String, f64>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            stats: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.stats.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub experiment: String,
    pub n_paths: usize,
    pub seeds: Vec<u64>,
    pub ratio_max: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub residual_max: Option<f64>,
    pub pass: bool,
    pub failures: usize,
    pub config_snapshot: Value,
    pub notes: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl VerificationReport {
    pub fn new(experiment: &str, n_paths: usize, seeds: Vec<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            n_paths,
            seeds,
            ratio_max: None,
            fitted_exponent: None,
            residual_max: None,
            pass: false,
            failures: 0,
            config_snapshot: Value::Null,
            notes: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Combines sub-reports: rows and notes are prefixed with the part label,
    /// the verdict is the conjunction, maxima are taken over parts.
    pub fn merge(experiment: &str, parts: Vec<(String, VerificationReport)>) -> Self {
        let mut out = Self::new(experiment, 0, Vec::new());
        out.pass = !parts.is_empty();
        let fmax = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        for (label, r) in parts {
            out.n_paths += r.n_paths;
            for s in r.seeds {
                if !out.seeds.contains(&s) {
                    out.seeds.push(s);
                }
            }
            out.ratio_max = fmax(out.ratio_max, r.ratio_max);
            out.residual_max = fmax(out.residual_max, r.residual_max);
            out.fitted_exponent = out.fitted_exponent.or(r.fitted_exponent);
            out.pass &= r.pass;
            out.failures += r.failures;
            let prefix = |s: &str| {
                if label.is_empty() {
                    s.to_string()
                } else {
                    format!("{label};{s}")
                }
            };
            out.notes.extend(r.notes.iter().map(|n| prefix(n)));
            out.rows.extend(r.rows.into_iter().map(|mut row| {
                row.label = prefix(&row.label);
                row
            }));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LevyError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LevyError::Format(e.to_string()))
    }

    /// Flat table: `schema_version, experiment, label` followed by every
    /// statistic key appearing in any row, in sorted order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut keys: Vec<&String> = self.rows.iter().flat_map(|r| r.stats.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut header = vec!["schema_version", "experiment", "label"];
        header.extend(keys.iter().map(|k| k.as_str()));
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            let mut cells = vec![
                self.schema_version.to_string(),
                self.experiment.clone(),
                csv_escape(&row.label),
            ];
            cells.extend(keys.iter().map(|k| {
                row.stats
                    .get(*k)
                    .map(|v| format!("{v}"))
                    .unwrap_or_default()
            }));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_csv() {
        let mut r = VerificationReport::new("verify-lp", 3, vec![7]);
        r.rows.push(
            ReportRow::new("s=0,dist=1")
                .with("ratio", 1.0)
                .with("s", 0.0),
        );
        r.rows.push(ReportRow::new("plain").with("extra", 2.5));
        r.pass = true;
        let back = VerificationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "schema_version,experiment,label,extra,ratio,s");
        assert_eq!(lines[1], "1,verify-lp,\"s=0,dist=1\",,1,0");
        assert_eq!(lines[2], "1,verify-lp,plain,2.5,,");
    }

    #[test]
    fn merge_is_conjunctive() {
        let mut a = VerificationReport::new("x", 2, vec![1]);
        a.pass = true;
        a.residual_max = Some(1.0);
        a.rows.push(ReportRow::new("r"));
        let mut b = VerificationReport::new("y", 3, vec![1, 2]);
        b.residual_max = Some(3.0);
        b.failures = 4;
        let m = VerificationReport::merge("z", vec![("a".into(), a.clone()), ("b".into(), b)]);
        assert!(!m.pass);
        assert_eq!((m.n_paths, m.failures), (5, 4));
        assert_eq!(m.seeds, vec![1, 2]);
        assert_eq!(m.residual_max, Some(3.0));
        assert_eq!(m.rows[0].label, "a;r");
        assert!(VerificationReport::merge("z", vec![(String::new(), a)]).pass);
    }
}
