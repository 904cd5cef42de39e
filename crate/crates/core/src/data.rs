//! Labeled financial-ratio datasets: CSV loading, missing-value handling,
//! feature bounds and a synthetic generator.
//!
//! Labels follow `1 = healthy`, `0 = bankrupt`, so a fitted model's output is
//! directly the probability of being healthy. Features stay in raw ratio
//! units; nothing in the crate standardizes them.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logistic::sigmoid;
use crate::{seeded_rng, unit_draw, Scalar};

/// Default name of the label column written by [`write_csv`].
pub const DEFAULT_LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unknown label column `{0}`")]
    UnknownLabelColumn(String),
    #[error("invalid label `{value}` at line {line}: expected 0 or 1")]
    InvalidLabel { line: u64, value: String },
    #[error("missing value in column `{column}` at line {line} and missing values are rejected")]
    MissingValuesRejected { column: String, line: u64 },
    #[error("column `{0}` has no values to compute a mean from")]
    AllMissingColumn(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// How missing feature cells are handled at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MissingPolicy {
    /// Replace each missing cell with the mean of the column's present values.
    #[default]
    #[serde(rename = "mean")]
    MeanImpute,
    #[serde(rename = "reject")]
    RejectMissing,
}

/// Feature matrix (`m` banks by `n` ratios) with binary health labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<Vec<T>>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Build a dataset from row-major features. Requires at least two rows,
    /// at least one feature, finite values and labels in `{0, 1}`.
    pub fn new(features: Vec<Vec<T>>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let n = feature_names.len();
        if n == 0 {
            return Err(DataError::InvalidDimensions("at least one feature is required".into()));
        }
        if features.len() < 2 {
            return Err(DataError::InvalidDimensions(format!(
                "at least two rows are required, got {}",
                features.len()
            )));
        }
        if labels.len() != features.len() {
            return Err(DataError::InvalidDimensions(format!(
                "{} rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != n {
                return Err(DataError::InvalidDimensions(format!(
                    "row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidDimensions(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(DataError::InvalidLabel {
                line: 0,
                value: bad.to_string(),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self) -> &[Vec<T>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        self.features.iter().map(move |row| row[j])
    }

    /// Number of rows labeled healthy.
    pub fn n_healthy(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Rows in the given order; used for permutation tests and resampling.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        Self {
            features: order.iter().map(|&i| self.features[i].clone()).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// The dataset stacked on top of itself.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.n_features() != self.n_features() {
            return Err(DataError::InvalidDimensions("feature counts differ".into()));
        }
        let mut out = self.clone();
        out.features.extend(other.features.iter().cloned());
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }
}

/// Per-feature box `[lower, upper]`: the PSO search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bounds<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(DataError::InvalidBounds(format!(
                "{} lower values but {} upper values",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(DataError::InvalidBounds(format!("dimension {i} is not finite")));
            }
            if l > u {
                return Err(DataError::InvalidBounds(format!(
                    "dimension {i} has lower {l} > upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval in every one of `dim` dimensions.
    pub fn uniform(dim: usize, lower: T, upper: T) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn range(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    /// Componentwise clamp into the box.
    pub fn clamp(&self, x: &mut [T]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(l).min(u);
        }
    }

    /// Chebyshev distance after scaling every dimension to unit width.
    /// Dimensions with zero width are skipped.
    pub fn normalized_distance(&self, a: &[T], b: &[T]) -> T {
        (0..self.dim())
            .filter(|&i| self.range(i) > T::zero())
            .map(|i| (a[i] - b[i]).abs() / self.range(i))
            .fold(T::zero(), T::max)
    }
}

/// Column minima and maxima of `d`.
pub fn compute_bounds<T: Scalar>(d: &Dataset<T>) -> Result<Bounds<T>> {
    if d.n_rows() == 0 {
        return Err(DataError::EmptyDataset);
    }
    let n = d.n_features();
    let mut lower = d.features[0].clone();
    let mut upper = d.features[0].clone();
    for row in &d.features[1..] {
        for j in 0..n {
            lower[j] = lower[j].min(row[j]);
            upper[j] = upper[j].max(row[j]);
        }
    }
    Bounds::new(lower, upper)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na")
}

/// Fill every `None` with the mean of the present values in its column.
pub fn impute_mean<T: Scalar>(rows: &[Vec<Option<T>>], names: &[String]) -> Result<Vec<Vec<T>>> {
    let n = names.len();
    let mut means = Vec::with_capacity(n);
    for (j, name) in names.iter().enumerate() {
        let (sum, count) = rows
            .iter()
            .filter_map(|r| r[j])
            .fold((T::zero(), 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            if rows.iter().any(|r| r[j].is_none()) {
                return Err(DataError::AllMissingColumn(name.clone()));
            }
            means.push(T::zero());
        } else {
            means.push(sum / T::from_usize_lossy(count));
        }
    }
    Ok(rows
        .iter()
        .map(|r| r.iter().zip(&means).map(|(v, &m)| v.unwrap_or(m)).collect())
        .collect())
}

/// Load a CSV with a mandatory header. The label column is removed from the
/// features; missing cells (empty or `NA`) are handled per `policy`.
pub fn load_dataset<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: &str,
    policy: MissingPolicy,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => DataError::FileNotFound(path.to_path_buf()),
        _ => DataError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    read_dataset(file, label_column, policy)
}

/// [`load_dataset`] over any reader.
pub fn read_dataset<T: Scalar, R: Read>(reader: R, label_column: &str, policy: MissingPolicy) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DataError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::UnknownLabelColumn(label_column.to_string()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut raw: Vec<Vec<Option<T>>> = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                let label = match field.parse::<f64>() {
                    Ok(0.0) => 0,
                    Ok(1.0) => 1,
                    _ => {
                        return Err(DataError::InvalidLabel {
                            line,
                            value: field.to_string(),
                        })
                    }
                };
                labels.push(label);
            } else if is_missing(field) {
                if policy == MissingPolicy::RejectMissing {
                    return Err(DataError::MissingValuesRejected {
                        column: header[i].to_string(),
                        line,
                    });
                }
                row.push(None);
            } else {
                let v: T = field
                    .parse()
                    .ok()
                    .filter(|v: &T| v.is_finite())
                    .ok_or_else(|| DataError::MalformedRow {
                        line,
                        reason: format!("column `{}`: `{field}` is not a finite number", &header[i]),
                    })?;
                row.push(Some(v));
            }
        }
        raw.push(row);
    }
    if raw.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let features = impute_mean(&raw, &names)?;
    Dataset::new(features, labels, names)
}

/// Write `d` as CSV with the label column last. Reals use the shortest
/// representation that parses back to the same value.
pub fn write_csv<T: Scalar, W: Write>(d: &Dataset<T>, writer: W, label_column: &str) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    for (row, label) in d.features.iter().zip(&d.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_csv(d, io::BufWriter::new(file), label_column).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

/// Draw `m_rows` banks with features uniform in `feature_ranges` and labels
/// Bernoulli with probability `sigmoid(beta0 + sum beta_i x_i)`.
///
/// Draw order is row-major: the row's features in column order, then one
/// uniform for its label.
pub fn generate_synthetic<T: Scalar>(
    n_features: usize,
    m_rows: usize,
    true_beta: &[T],
    feature_ranges: &Bounds<T>,
    seed: u64,
) -> Result<(Dataset<T>, Vec<T>)> {
    if n_features == 0 || m_rows < 2 {
        return Err(DataError::InvalidDimensions(format!(
            "need n_features >= 1 and m_rows >= 2, got {n_features} and {m_rows}"
        )));
    }
    if true_beta.len() != n_features + 1 {
        return Err(DataError::InvalidDimensions(format!(
            "beta has {} entries, expected {}",
            true_beta.len(),
            n_features + 1
        )));
    }
    if feature_ranges.dim() != n_features {
        return Err(DataError::InvalidDimensions(format!(
            "{} feature ranges for {n_features} features",
            feature_ranges.dim()
        )));
    }
    if (0..n_features).any(|i| feature_ranges.range(i) <= T::zero()) {
        return Err(DataError::InvalidDimensions(
            "feature ranges must have lower < upper".into(),
        ));
    }

    let mut rng = seeded_rng(seed);
    let mut features = Vec::with_capacity(m_rows);
    let mut labels = Vec::with_capacity(m_rows);
    for _ in 0..m_rows {
        let row: Vec<T> = (0..n_features)
            .map(|j| feature_ranges.lower()[j] + unit_draw::<T, _>(&mut rng) * feature_ranges.range(j))
            .collect();
        let score = row
            .iter()
            .zip(&true_beta[1..])
            .fold(true_beta[0], |acc, (&x, &b)| acc + b * x);
        let u: T = unit_draw(&mut rng);
        labels.push(u8::from(u < sigmoid(score)));
        features.push(row);
    }
    let names = (1..=n_features).map(|i| format!("x{i}")).collect();
    Ok((Dataset::new(features, labels, names)?, true_beta.to_vec()))
}
