//! Dataset and series CSV handling plus the sectioned key-value run
//! configuration format.
//!
//! Dataset files are comma-delimited UTF-8 with a mandatory header holding a
//! `week` column (integer period), an `outcome` column (label), and one
//! column per declared covariate. The intercept is injected on ingest as
//! covariate 0, so files never carry it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, RecordInput};

/// Declared role of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    /// Indicator variable; values must be 0 or 1.
    Dummy,
    /// Unrestricted real-valued variable.
    Quantitative,
}

/// Column schema: ordered outcome labels (last is the base category) and the
/// covariate columns with their roles.
#[derive(Debug, Clone)]
pub struct DataSchema {
    pub outcome_labels: Vec<String>,
    pub covariates: Vec<(String, CovKind)>,
    /// Total period count; `None` means "largest week seen".
    pub n_periods: Option<usize>,
}

impl DataSchema {
    pub fn validate(&self) -> Result<()> {
        if self.outcome_labels.len() < 2 {
            return Err(Error::Config(
                "need at least two outcome labels; the last is the base category".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.outcome_labels {
            if !seen.insert(l) {
                return Err(Error::Config(format!("duplicate outcome label `{l}`")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in &self.covariates {
            if name == "week" || name == "outcome" {
                return Err(Error::Config(format!(
                    "covariate column cannot be named `{name}`"
                )));
            }
            if !seen.insert(name) {
                return Err(Error::Config(format!("duplicate covariate column `{name}`")));
            }
        }
        Ok(())
    }

    /// Covariate count including the injected intercept.
    pub fn n_covariates(&self) -> usize {
        self.covariates.len() + 1
    }
}

/// Ingest summary: what was read and how it distributes.
#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub n_periods: usize,
    pub n_outcomes: usize,
    pub n_records: usize,
    pub outcome_counts: Vec<usize>,
    pub records_per_period: Vec<usize>,
}

impl IngestSummary {
    /// Human-readable digest: T, I, outcome counts, and a period histogram.
    pub fn describe(&self, labels: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} records over {} periods, {} outcome categories",
            self.n_records, self.n_periods, self.n_outcomes
        );
        for (label, count) in labels.iter().zip(&self.outcome_counts) {
            let _ = writeln!(s, "  outcome {label}: {count}");
        }
        let max = self.records_per_period.iter().copied().max().unwrap_or(0);
        let min = self.records_per_period.iter().copied().min().unwrap_or(0);
        let mean = if self.n_periods > 0 {
            self.n_records as f64 / self.n_periods as f64
        } else {
            0.0
        };
        let empty = self.records_per_period.iter().filter(|&&c| c == 0).count();
        let _ = writeln!(
            s,
            "  records per period: min {min}, mean {mean:.1}, max {max}, empty periods {empty}"
        );
        s
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    line.split(',').map(|f| f.trim().to_string()).collect()
}

/// Parse a dataset from CSV text. Errors cite 1-based file lines (the header
/// is line 1).
pub fn parse_dataset_csv(text: &str, schema: &DataSchema) -> Result<(Dataset, IngestSummary)> {
    schema.validate()?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Ingest {
        line: 1,
        message: "empty file: missing header".into(),
    })?;
    let columns = split_csv_line(header);
    let find = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Ingest {
                line: 1,
                message: format!("missing column `{name}` in header"),
            })
    };
    let week_col = find("week")?;
    let outcome_col = find("outcome")?;
    let cov_cols: Vec<(usize, CovKind)> = schema
        .covariates
        .iter()
        .map(|(name, kind)| find(name).map(|idx| (idx, *kind)))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut max_week = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != columns.len() {
            return Err(Error::Ingest {
                line: line_no,
                message: format!(
                    "row has {} fields, header has {}",
                    fields.len(),
                    columns.len()
                ),
            });
        }
        let week: usize = fields[week_col].parse().map_err(|_| Error::Ingest {
            line: line_no,
            message: format!("week `{}` is not an integer", fields[week_col]),
        })?;
        if week < 1 {
            return Err(Error::Ingest {
                line: line_no,
                message: format!("week {week} outside [1, T]"),
            });
        }
        if let Some(t) = schema.n_periods {
            if week > t {
                return Err(Error::Ingest {
                    line: line_no,
                    message: format!("week {week} outside [1, {t}]"),
                });
            }
        }
        max_week = max_week.max(week);
        let outcome_label = &fields[outcome_col];
        let outcome = schema
            .outcome_labels
            .iter()
            .position(|l| l == outcome_label)
            .ok_or_else(|| Error::Ingest {
                line: line_no,
                message: format!("unknown outcome label `{outcome_label}`"),
            })?
            + 1;
        let mut covariates = Vec::with_capacity(schema.n_covariates());
        covariates.push(1.0);
        for &(col, kind) in &cov_cols {
            let value: f64 = fields[col].parse().map_err(|_| Error::Ingest {
                line: line_no,
                message: format!(
                    "covariate `{}` value `{}` is not numeric",
                    columns[col], fields[col]
                ),
            })?;
            if kind == CovKind::Dummy && value != 0.0 && value != 1.0 {
                return Err(Error::Ingest {
                    line: line_no,
                    message: format!(
                        "dummy covariate `{}` value {} is not 0 or 1",
                        columns[col], value
                    ),
                });
            }
            covariates.push(value);
        }
        records.push(RecordInput { period: week, outcome, covariates });
    }
    let n_periods = schema.n_periods.unwrap_or(max_week.max(1));
    let n_outcomes = schema.outcome_labels.len();
    let data = if records.is_empty() {
        Dataset::empty(n_periods, n_outcomes, schema.n_covariates())?
    } else {
        Dataset::from_records(n_periods, n_outcomes, records)?
    };
    let summary = IngestSummary {
        n_periods: data.n_periods(),
        n_outcomes: data.n_outcomes(),
        n_records: data.n_records(),
        outcome_counts: data.outcome_counts(),
        records_per_period: (0..data.n_periods()).map(|t| data.records_in_period(t)).collect(),
    };
    Ok((data, summary))
}

/// Read and parse a dataset CSV file.
pub fn ingest(path: &Path, schema: &DataSchema) -> Result<(Dataset, IngestSummary)> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset_csv(&text, schema)
}

/// Serialize a dataset back to the CSV format `ingest` reads. The intercept
/// column is omitted; floats print in shortest round-trip form.
pub fn dataset_to_csv(data: &Dataset, schema: &DataSchema) -> String {
    let mut out = String::from("week,outcome");
    for (name, _) in &schema.covariates {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for n in 0..data.n_records() {
        let _ = write!(
            out,
            "{},{}",
            data.period(n) + 1,
            schema.outcome_labels[data.outcome(n)]
        );
        for d in 1..data.n_covariates() {
            let _ = write!(out, ",{}", data.xs(n)[d]);
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(data: &Dataset, schema: &DataSchema, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data, schema))?;
    Ok(())
}

/// Read a two-column `week,value` series CSV covering weeks 1..T. Rows may
/// appear in any order; duplicates and gaps are errors.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_series_csv(&text)
}

pub fn parse_series_csv(text: &str) -> Result<Vec<f64>> {
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line_no == 1 || line.trim().is_empty() {
            continue; // header
        }
        let fields = split_csv_line(line);
        if fields.len() < 2 {
            return Err(Error::Ingest {
                line: line_no,
                message: "series row needs `week,value`".into(),
            });
        }
        let week: usize = fields[0].parse().map_err(|_| Error::Ingest {
            line: line_no,
            message: format!("week `{}` is not an integer", fields[0]),
        })?;
        let value: f64 = fields[1].parse().map_err(|_| Error::Ingest {
            line: line_no,
            message: format!("value `{}` is not numeric", fields[1]),
        })?;
        if week < 1 {
            return Err(Error::Ingest {
                line: line_no,
                message: format!("week {week} outside [1, T]"),
            });
        }
        if rows.insert(week, value).is_some() {
            return Err(Error::Ingest {
                line: line_no,
                message: format!("duplicate week {week}"),
            });
        }
    }
    let t = rows.keys().max().copied().unwrap_or(0);
    if rows.len() != t {
        return Err(Error::Ingest {
            line: 1,
            message: format!("series covers {} weeks but the largest is {t}", rows.len()),
        });
    }
    Ok(rows.into_values().collect())
}

pub fn write_series_csv(path: &Path, value_header: &str, values: &[f64]) -> Result<()> {
    let mut out = format!("week,{value_header}\n");
    for (t, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", t + 1, v);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Sectioned flat key-value configuration:
/// `[section]` headers, `key = value` lines, `#` comments.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            if current.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key `{}` appears before any [section]",
                    idx + 1,
                    key.trim()
                )));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::Config(format!("missing [{section}] {key}")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("[{section}] {key} = `{raw}` is not valid"))
            }),
        }
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }
}
