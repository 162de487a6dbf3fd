//! Survival datasets and the failure-time index used by every fitting routine.
//!
//! A dataset is right-censored: each row carries a follow-up time `z`, an
//! event indicator `delta` (1 = failure observed, 0 = censored) and a row of
//! covariates. Missing covariate cells are held as NaN until imputed.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Right-censored survival data with a fixed covariate matrix.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Array2<f64>,
    names: Vec<String>,
}

impl SurvivalDataset {
    /// Builds a dataset and validates its invariants: matching lengths,
    /// finite nonnegative times, and finite-or-NaN covariates.
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Array2<f64>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if events.len() != n {
            return Err(Error::InvalidInput(format!(
                "status length {} does not match time length {}",
                events.len(),
                n
            )));
        }
        if covariates.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "covariate rows {} do not match time length {}",
                covariates.nrows(),
                n
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    what: "follow-up time",
                    index: i,
                });
            }
            if t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "negative follow-up time {t} at row {i}"
                )));
            }
        }
        for (i, &v) in covariates.iter().enumerate() {
            if v.is_infinite() {
                return Err(Error::NonFinite {
                    what: "covariate",
                    index: i,
                });
            }
        }
        let names = match names {
            Some(names) => {
                if names.len() != covariates.ncols() {
                    return Err(Error::InvalidInput(format!(
                        "{} column names for {} covariate columns",
                        names.len(),
                        covariates.ncols()
                    )));
                }
                names
            }
            None => (1..=covariates.ncols()).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self {
            times,
            events,
            covariates,
            names,
        })
    }

    /// Reads a CSV with a header row. `time_col` and `status_col` name the
    /// follow-up time and event indicator; every other column is a covariate.
    /// Empty cells and the literal `NA` (any case) are treated as missing.
    pub fn load_csv(path: &Path, time_col: &str, status_col: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        let time_idx = headers
            .iter()
            .position(|h| h == time_col)
            .ok_or_else(|| Error::InvalidInput(format!("time column {time_col:?} not found")))?;
        let status_idx = headers
            .iter()
            .position(|h| h == status_col)
            .ok_or_else(|| {
                Error::InvalidInput(format!("status column {status_col:?} not found"))
            })?;
        if time_idx == status_idx {
            return Err(Error::InvalidInput(
                "time and status columns must differ".into(),
            ));
        }
        let cov_idx: Vec<usize> = (0..headers.len())
            .filter(|&j| j != time_idx && j != status_idx)
            .collect();
        let names: Vec<String> = cov_idx.iter().map(|&j| headers[j].to_string()).collect();

        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let t: f64 = record
                .get(time_idx)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {row}: unparseable time")))?;
            let s = record.get(status_idx).unwrap_or("");
            let event = match s {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "row {row}: status must be 0 or 1, got {other:?}"
                    )))
                }
            };
            times.push(t);
            events.push(event);
            for &j in &cov_idx {
                let cell = record.get(j).unwrap_or("");
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    values.push(f64::NAN);
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::InvalidInput(format!(
                            "row {row}: unparseable value {cell:?} in column {:?}",
                            headers[j].to_string()
                        ))
                    })?;
                    values.push(v);
                }
            }
        }
        let n = times.len();
        let covariates = Array2::from_shape_vec((n, cov_idx.len()), values)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(times, events, covariates, Some(names))
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn d(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rows whose follow-up time is exactly zero. Such rows are legal to
    /// carry but are rejected once fitting starts, so callers usually drop
    /// them up front.
    pub fn zero_time_rows(&self) -> Vec<usize> {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.covariates.iter().any(|v| v.is_nan())
    }

    /// New dataset keeping `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        for &r in rows {
            if r >= self.n() {
                return Err(Error::InvalidInput(format!("row {r} out of range")));
            }
        }
        let times = rows.iter().map(|&r| self.times[r]).collect();
        let events = rows.iter().map(|&r| self.events[r]).collect();
        let covariates = self.covariates.select(Axis(0), rows);
        Self::new(times, events, covariates, Some(self.names.clone()))
    }

    /// Drops all rows with zero follow-up time, returning the removed rows.
    pub fn drop_zero_times(self) -> Result<(Self, Vec<usize>)> {
        let zero = self.zero_time_rows();
        if zero.is_empty() {
            return Ok((self, zero));
        }
        let keep: Vec<usize> = (0..self.n()).filter(|i| self.times[*i] > 0.0).collect();
        let kept = self.subset(&keep)?;
        Ok((kept, zero))
    }

    /// Replaces missing cells by their column median over observed values.
    /// With an even number of observed values the median is the mean of the
    /// two middle ones. A column with no observed value at all is an error.
    pub fn impute_median(&mut self) -> Result<()> {
        for j in 0..self.d() {
            let mut col = self.covariates.column_mut(j);
            if !col.iter().any(|v| v.is_nan()) {
                continue;
            }
            let mut observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            if observed.is_empty() {
                return Err(Error::AllMissingColumn {
                    name: self.names[j].clone(),
                });
            }
            observed.sort_by(f64::total_cmp);
            let m = observed.len();
            let median = if m % 2 == 1 {
                observed[m / 2]
            } else {
                0.5 * (observed[m / 2 - 1] + observed[m / 2])
            };
            for v in col.iter_mut() {
                if v.is_nan() {
                    *v = median;
                }
            }
        }
        Ok(())
    }

    /// Centers and scales every covariate column to mean 0 and unit sample
    /// standard deviation (1/(n-1) convention). Constant columns cannot be
    /// scaled; they are dropped and listed in the returned record. Missing
    /// values must have been imputed first.
    pub fn standardize(self) -> Result<(Self, StandardizationRecord)> {
        if self.has_missing() {
            return Err(Error::InvalidInput(
                "impute missing values before standardizing".into(),
            ));
        }
        let n = self.n() as f64;
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for j in 0..self.d() {
            let col = self.covariates.column(j);
            let mean = col.sum() / n;
            let ss: f64 = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
            let sd = (ss / (n - 1.0)).sqrt();
            if sd <= 1e-12 * (1.0 + mean.abs()) {
                dropped.push((j, self.names[j].clone()));
            } else {
                kept.push(j);
                means.push(mean);
                sds.push(sd);
            }
        }
        let mut covariates = self.covariates.select(Axis(1), &kept);
        for (c, mut col) in covariates.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - means[c]) / sds[c]);
        }
        let names: Vec<String> = kept.iter().map(|&j| self.names[j].clone()).collect();
        let record = StandardizationRecord {
            means: Array1::from(means),
            sds: Array1::from(sds),
            kept,
            dropped,
        };
        let out = Self::new(self.times, self.events, covariates, Some(names))?;
        Ok((out, record))
    }
}

/// How a dataset was centered and scaled, so the same affine map can be
/// applied to held-out rows.
#[derive(Debug, Clone)]
pub struct StandardizationRecord {
    /// Per kept column, the training mean.
    pub means: Array1<f64>,
    /// Per kept column, the training standard deviation (1/(n-1)).
    pub sds: Array1<f64>,
    /// Original indices of the kept columns, ascending.
    pub kept: Vec<usize>,
    /// Original index and name of every dropped constant column.
    pub dropped: Vec<(usize, String)>,
}

impl StandardizationRecord {
    /// Applies the recorded transform to a matrix in the original column
    /// space: select kept columns, subtract means, divide by sds.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let max_kept = self.kept.iter().copied().max().unwrap_or(0);
        if x.ncols() <= max_kept && !self.kept.is_empty() {
            return Err(Error::InvalidInput(format!(
                "matrix has {} columns but the record refers to column {}",
                x.ncols(),
                max_kept
            )));
        }
        let mut out = x.select(Axis(1), &self.kept);
        for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[c], self.sds[c]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// A failure observed at a sorted position together with the start of its
/// risk set in the sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure {
    /// Position of the failing observation in `order`.
    pub position: usize,
    /// First sorted position whose time equals the failure time. The risk
    /// set is the suffix `risk_start..n`, so tied failures share one risk
    /// set and a censoring tied with a failure stays inside it (Breslow).
    pub risk_start: usize,
}

/// Sorted view of a dataset for partial-likelihood sweeps.
///
/// `order[q]` is the dataset row at sorted position `q`; rows are sorted by
/// ascending time with events placed before censorings at ties. `failures`
/// lists events in time order. The index carries no covariates, so one index
/// serves any design matrix over the same rows.
#[derive(Debug, Clone)]
pub struct FailureIndex {
    pub order: Vec<usize>,
    pub failures: Vec<Failure>,
    n: usize,
}

impl FailureIndex {
    /// Sorts the dataset and locates failures and risk-set boundaries.
    /// Rejects datasets with no event and rows with zero follow-up time.
    pub fn build(dataset: &SurvivalDataset) -> Result<Self> {
        let n = dataset.n();
        let times = dataset.times();
        let events = dataset.events();
        if let Some(&row) = dataset.zero_time_rows().first() {
            return Err(Error::ZeroFollowUp { row });
        }
        if dataset.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            times[a]
                .total_cmp(&times[b])
                .then_with(|| events[b].cmp(&events[a]))
                .then_with(|| a.cmp(&b))
        });
        let mut failures = Vec::with_capacity(dataset.n_events());
        let mut group_start = 0usize;
        for q in 0..n {
            if q > 0 && times[order[q]] != times[order[q - 1]] {
                group_start = q;
            }
            if events[order[q]] {
                failures.push(Failure {
                    position: q,
                    risk_start: group_start,
                });
            }
        }
        Ok(Self {
            order,
            failures,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_events(&self) -> usize {
        self.failures.len()
    }

    /// Event indicator by sorted position.
    pub fn event_at_position(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n];
        for f in &self.failures {
            flags[f.position] = true;
        }
        flags
    }
}
