//! Dataset model, CSV ingestion and horizon alignment.
//!
//! A [`TimeSeriesDataset`] holds the raw response series and covariates in
//! period order. [`align_horizon`] turns it into the regression sample of
//! [`PredictorResponsePairs`], pairing `(1, X_t)` with `Y_{t+h}`.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, GarError, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GarError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(GarError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the first `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }
}

/// Which tail of the conditional distribution is being modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailSide {
    Upper,
    Lower,
}

impl TailSide {
    pub fn as_str(self) -> &'static str {
        match self {
            TailSide::Upper => "upper",
            TailSide::Lower => "lower",
        }
    }

    /// Whether `y` lies in the tail beyond `threshold` (threshold included).
    #[inline]
    pub fn exceeds(self, y: f64, threshold: f64) -> bool {
        match self {
            TailSide::Upper => y >= threshold,
            TailSide::Lower => y <= threshold,
        }
    }

    /// Whether `threshold` sits strictly on this tail's side of `median`.
    #[inline]
    pub fn beyond_median(self, threshold: f64, median: f64) -> bool {
        match self {
            TailSide::Upper => threshold > median,
            TailSide::Lower => threshold < median,
        }
    }
}

impl fmt::Display for TailSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TailSide {
    type Err = GarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" | "right" => Ok(TailSide::Upper),
            "lower" | "left" => Ok(TailSide::Lower),
            other => Err(invalid("tail", format!("expected `upper` or `lower`, got `{other}`"))),
        }
    }
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub timestamp: String,
    pub response: String,
    /// Covariate columns in order. Empty means "every remaining column".
    pub covariates: Vec<String>,
}

impl Schema {
    pub fn new(
        timestamp: impl Into<String>,
        response: impl Into<String>,
        covariates: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            timestamp: timestamp.into(),
            response: response.into(),
            covariates: covariates.into_iter().map(Into::into).collect(),
        }
    }
}

impl Default for Schema {
    fn default() -> Self {
        Self::new("date", "y", Vec::<String>::new())
    }
}

/// Response series and covariates in period order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub timestamps: Vec<String>,
    pub response_name: String,
    pub covariate_names: Vec<String>,
    pub y: Vec<f64>,
    /// One row per period; no intercept column.
    pub x: RowMatrix,
}

impl TimeSeriesDataset {
    pub fn new(
        timestamps: Vec<String>,
        response_name: impl Into<String>,
        covariate_names: Vec<String>,
        y: Vec<f64>,
        x: RowMatrix,
    ) -> Result<Self> {
        if y.len() != timestamps.len() || x.nrows() != y.len() {
            return Err(GarError::DimensionMismatch {
                expected: timestamps.len(),
                got: y.len().min(x.nrows()),
            });
        }
        if x.ncols() != covariate_names.len() {
            return Err(GarError::DimensionMismatch {
                expected: covariate_names.len(),
                got: x.ncols(),
            });
        }
        if y.is_empty() {
            return Err(GarError::EmptyDataset);
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if compare_labels(&w[0], &w[1]) != Ordering::Less {
                return Err(GarError::UnorderedTimestamp {
                    row: i + 2,
                    label: w[1].clone(),
                });
            }
        }
        if let Some(pos) = y.iter().chain(x.as_slice()).position(|v| !v.is_finite()) {
            let row = if pos < y.len() { pos } else { (pos - y.len()) / x.ncols() };
            return Err(GarError::MissingValue {
                row: row + 1,
                column: "(non-finite)".into(),
            });
        }
        Ok(Self {
            timestamps,
            response_name: response_name.into(),
            covariate_names,
            y,
            x,
        })
    }

    /// Number of periods `T`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim_x(&self) -> usize {
        self.x.ncols()
    }

    /// Column means of the covariates.
    pub fn covariate_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim_x())
            .map(|j| self.x.column(j).sum::<f64>() / n)
            .collect()
    }

    /// Column medians of the covariates.
    pub fn covariate_medians(&self) -> Vec<f64> {
        (0..self.dim_x())
            .map(|j| crate::stats::median(&self.x.column(j).collect::<Vec<_>>()))
            .collect()
    }

    /// Write as CSV with the timestamp column named `date`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| GarError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string(), self.response_name.clone()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.timestamps[t].clone());
            rec.push(self.y[t].to_string());
            rec.extend(self.x.row(t).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| GarError::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Labels are compared numerically when both parse as numbers, lexically
/// otherwise ("1893Q1" < "1893Q2").
pub(crate) fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Load and validate a dataset. Row numbers in errors count data records
/// from 1 (the header is not counted).
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| GarError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &Schema) -> Result<TimeSeriesDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GarError::MissingColumn(name.to_string()))
    };
    let ts_col = find(&schema.timestamp)?;
    let y_col = find(&schema.response)?;
    let covariate_names: Vec<String> = if schema.covariates.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_col && *i != y_col)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        schema.covariates.clone()
    };
    if covariate_names.is_empty() {
        return Err(GarError::MissingColumn("<covariate>".into()));
    }
    let x_cols = covariate_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut timestamps: Vec<String> = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |col: usize| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            let name = &header[col];
            if raw.is_empty() {
                return Err(GarError::MissingValue {
                    row,
                    column: name.clone(),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(GarError::NonNumeric {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                }),
            }
        };
        let label = rec.get(ts_col).unwrap_or("").to_string();
        if label.is_empty() {
            return Err(GarError::MissingValue {
                row,
                column: header[ts_col].clone(),
            });
        }
        if let Some(prev) = timestamps.last() {
            if compare_labels(prev, &label) != Ordering::Less {
                return Err(GarError::UnorderedTimestamp { row, label });
            }
        }
        y.push(cell(y_col)?);
        for &c in &x_cols {
            x.push(cell(c)?);
        }
        timestamps.push(label);
    }
    let rows = y.len();
    let x = RowMatrix::new(rows, x_cols.len(), x)?;
    TimeSeriesDataset::new(timestamps, header[y_col].clone(), covariate_names, y, x)
}

/// Regression sample `(1, X_t) -> Y_{t+h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorResponsePairs {
    /// Design matrix; column 0 is the intercept.
    pub x: RowMatrix,
    pub y: Vec<f64>,
    pub horizon: usize,
}

impl PredictorResponsePairs {
    /// Build from covariates without an intercept column; the intercept is
    /// prepended here.
    pub fn from_covariates(covariates: &RowMatrix, y: Vec<f64>, horizon: usize) -> Result<Self> {
        if covariates.nrows() != y.len() {
            return Err(GarError::DimensionMismatch {
                expected: covariates.nrows(),
                got: y.len(),
            });
        }
        let p = covariates.ncols() + 1;
        let mut data = Vec::with_capacity(y.len() * p);
        for r in covariates.rows() {
            data.push(1.0);
            data.extend_from_slice(r);
        }
        Ok(Self {
            x: RowMatrix::new(y.len(), p, data)?,
            y,
            horizon,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.y.len()
    }

    /// Number of regression coefficients, `dim(X) + 1`.
    pub fn dim_beta(&self) -> usize {
        self.x.ncols()
    }

    /// Number of covariates excluding the intercept.
    pub fn dim_x(&self) -> usize {
        self.x.ncols() - 1
    }

    /// Covariates of pair `i` without the intercept.
    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.x.row(i)[1..]
    }

    /// The first `n` pairs.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.n_pairs());
        Self {
            x: self.x.head(n),
            y: self.y[..n].to_vec(),
            horizon: self.horizon,
        }
    }

    /// Mean of the covariates (no intercept).
    pub fn covariate_means(&self) -> Vec<f64> {
        let n = self.n_pairs() as f64;
        (1..self.dim_beta())
            .map(|j| self.x.column(j).sum::<f64>() / n)
            .collect()
    }

    /// `(1, x0)` with a dimension check.
    pub fn design_point(&self, x0: &[f64]) -> Result<Vec<f64>> {
        with_intercept(x0, self.dim_x())
    }
}

pub(crate) fn with_intercept(x0: &[f64], dim_x: usize) -> Result<Vec<f64>> {
    if x0.len() != dim_x {
        return Err(GarError::DimensionMismatch {
            expected: dim_x,
            got: x0.len(),
        });
    }
    let mut v = Vec::with_capacity(dim_x + 1);
    v.push(1.0);
    v.extend_from_slice(x0);
    Ok(v)
}

/// Pair each `X_t` with `Y_{t+h}`.
pub fn align_horizon(dataset: &TimeSeriesDataset, h: usize) -> Result<PredictorResponsePairs> {
    let t = dataset.len();
    if h == 0 || h >= t {
        return Err(GarError::InvalidHorizon {
            horizon: h,
            max: t.saturating_sub(1),
        });
    }
    let n = t - h;
    PredictorResponsePairs::from_covariates(&dataset.x.head(n), dataset.y[h..].to_vec(), h)
}
