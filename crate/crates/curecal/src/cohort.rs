//! Subjects, cohorts, and calibration targets.
//!
//! A cohort is an ordered list of time-to-event records with a shared
//! covariate layout. CSV ingestion rejects malformed rows loudly and drops
//! rows with missing values, reporting how many were dropped.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: observed time, event indicator, covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    /// Observed follow-up time (event or censoring), finite and non-negative.
    pub time: f64,
    /// True if the event was observed, false if censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

/// An ordered collection of records with named covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub records: Vec<SubjectRecord>,
    pub covariate_names: Vec<String>,
    pub label: String,
}

/// Covariate means used as a balancing target, with the size of the sample
/// they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTarget {
    pub means: Vec<f64>,
    pub source_n: usize,
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time_col: String,
    pub event_col: String,
    pub covariate_cols: Vec<String>,
}

/// A loaded cohort plus how many rows were dropped for missing values.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub cohort: Cohort,
    pub excluded_rows: usize,
}

impl Cohort {
    pub fn new(records: Vec<SubjectRecord>, covariate_names: Vec<String>, label: &str) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let p = covariate_names.len();
        for (i, r) in records.iter().enumerate() {
            if r.covariates.len() != p {
                return Err(Error::InvalidRecord {
                    row: i,
                    message: format!("expected {p} covariates, found {}", r.covariates.len()),
                });
            }
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::InvalidRecord {
                    row: i,
                    message: format!("time {} is not a finite non-negative number", r.time),
                });
            }
        }
        Ok(Cohort {
            records,
            covariate_names,
            label: label.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of covariates per record.
    pub fn dim(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    /// Covariate matrix in record order, one row per subject.
    pub fn covariate_rows(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.covariates.as_slice()).collect()
    }
}

/// Arithmetic mean of every covariate column.
pub fn covariate_target(cohort: &Cohort) -> CovariateTarget {
    let p = cohort.dim();
    let n = cohort.len();
    let mut means = vec![0.0; p];
    for r in &cohort.records {
        for (m, x) in means.iter_mut().zip(&r.covariates) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    CovariateTarget { means, source_n: n }
}

/// Load a cohort from CSV. Header row required; time and covariates must be
/// finite numbers, the event column must be exactly 0 or 1. Rows with empty
/// cells in any declared column are excluded and counted.
pub fn load_cohort(path: &Path, schema: &CsvSchema, label: &str) -> Result<LoadedCohort> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        },
        _ => Error::InvalidRecord {
            row: 0,
            message: e.to_string(),
        },
    })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidRecord { row: 0, message: e.to_string() })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = find(&schema.time_col)?;
    let event_idx = find(&schema.event_col)?;
    let cov_idx: Vec<usize> = schema
        .covariate_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut excluded = 0usize;
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::InvalidRecord { row: i + 1, message: e.to_string() })?;
        let all_idx = std::iter::once(time_idx)
            .chain(std::iter::once(event_idx))
            .chain(cov_idx.iter().copied());
        let mut missing = false;
        for idx in all_idx.clone() {
            if row.get(idx).map_or(true, |v| v.trim().is_empty()) {
                missing = true;
            }
        }
        if missing {
            excluded += 1;
            continue;
        }
        let parse_num = |idx: usize, col: &str| -> Result<f64> {
            let raw = row.get(idx).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                column: col.to_string(),
                value: raw.to_string(),
            })
        };
        let time = parse_num(time_idx, &schema.time_col)?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidRecord {
                row: i + 1,
                message: format!("time {time} must be finite and non-negative"),
            });
        }
        let event_raw = row.get(event_idx).unwrap_or("").trim();
        let event = match event_raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::InvalidRecord {
                    row: i + 1,
                    message: format!("event column must be 0 or 1, found {other:?}"),
                })
            }
        };
        let mut covariates = Vec::with_capacity(cov_idx.len());
        for (idx, col) in cov_idx.iter().zip(&schema.covariate_cols) {
            let v = parse_num(*idx, col)?;
            if !v.is_finite() {
                return Err(Error::InvalidRecord {
                    row: i + 1,
                    message: format!("covariate {col} is not finite"),
                });
            }
            covariates.push(v);
        }
        records.push(SubjectRecord { time, event, covariates });
    }

    let cohort = Cohort::new(records, schema.covariate_cols.clone(), label)?;
    Ok(LoadedCohort { cohort, excluded_rows: excluded })
}
