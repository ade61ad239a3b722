//! Domain types shared by every stage of the aligner, plus the within-group
//! objective.
//!
//! Formulas in the docs use 1-based time indices (`x[1] .. x[T]`); storage is
//! ordinary 0-based `Vec`s, so `x[t]` lives at `values()[t - 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtwError};
use crate::trainer::TrainConfig;

/// One real-valued, finite sequence with at least two samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(TtwError::TooShort {
                index: 1,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(TtwError::NonFinite {
                series: 1,
                position: pos + 1,
            });
        }
        Ok(Self(values))
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = TtwError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<TimeSeries> for Vec<f64> {
    fn from(series: TimeSeries) -> Self {
        series.0
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks that `rows` form a valid dataset: non-empty, equal lengths of at
/// least 2, finite values, and (if given) one label per row.
///
/// The first violation is reported with 1-based indices.
pub fn validate_dataset(rows: &[Vec<f64>], labels: Option<&[i64]>) -> Result<()> {
    let first = rows.first().ok_or(TtwError::EmptyDataset)?;
    let expected = first.len();
    for (n, row) in rows.iter().enumerate() {
        if row.len() != expected {
            return Err(TtwError::LengthMismatch {
                index: n + 1,
                expected,
                found: row.len(),
            });
        }
        if row.len() < 2 {
            return Err(TtwError::TooShort {
                index: n + 1,
                len: row.len(),
            });
        }
        if let Some(t) = row.iter().position(|v| !v.is_finite()) {
            return Err(TtwError::NonFinite {
                series: n + 1,
                position: t + 1,
            });
        }
    }
    if let Some(labels) = labels {
        if labels.len() != rows.len() {
            return Err(TtwError::LabelCount {
                expected: rows.len(),
                found: labels.len(),
            });
        }
    }
    Ok(())
}

/// N equal-length series with optional integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledDataset {
    series: Vec<TimeSeries>,
    labels: Option<Vec<i64>>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<i64>>) -> Result<Self> {
        validate_dataset(&rows, labels.as_deref())?;
        Ok(Self {
            series: rows
                .into_iter()
                .map(TimeSeries::from_vec_unchecked)
                .collect(),
            labels,
        })
    }

    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows, None)
    }

    pub fn from_series(series: Vec<TimeSeries>, labels: Option<Vec<i64>>) -> Result<Self> {
        Self::new(
            series.into_iter().map(TimeSeries::into_inner).collect(),
            labels,
        )
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Number of series, N.
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Common series length, T.
    pub fn series_len(&self) -> usize {
        self.series[0].len()
    }

    /// Distinct labels in ascending order. Empty when unlabeled.
    pub fn classes(&self) -> Vec<i64> {
        let mut classes = self.labels.clone().unwrap_or_default();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Members with the given label, in dataset order.
    pub fn members_of(&self, label: i64) -> Vec<&TimeSeries> {
        match &self.labels {
            Some(labels) => self
                .series
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == label)
                .map(|(s, _)| s)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Builds a dataset from a subset of row indices.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices
            .iter()
            .map(|&i| self.series[i].values().to_vec())
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(rows, labels)
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.series.iter().map(TimeSeries::values).collect()
    }
}

/// Dense row-major matrix used for the N×K coefficients and N×T warps.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(TtwError::Dimension {
                what: "matrix row",
                expected_rows: n,
                expected_cols: cols,
                found_rows: n,
                found_cols: bad.len(),
            });
        }
        Ok(Self {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// The N×K matrix of DST coefficients; row n holds `a_1..a_K` for series n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WarpCoefficients(Matrix);

impl WarpCoefficients {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self(Matrix::zeros(n, k))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.cols() == 0 {
            return Err(TtwError::InvalidConfig(
                "coefficient matrix needs at least one column".into(),
            ));
        }
        if let Some(i) = m.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(TtwError::NonFinite {
                series: i / m.cols() + 1,
                position: i % m.cols() + 1,
            });
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn k(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        self.0.row(n)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for WarpCoefficients {
    type Error = TtwError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<WarpCoefficients> for Vec<Vec<f64>> {
    fn from(a: WarpCoefficients) -> Self {
        a.0.to_rows()
    }
}

/// The N×T matrix of real-valued read positions `tau_n[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WarpingFunctions(Matrix);

impl WarpingFunctions {
    pub fn from_matrix(m: Matrix) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows).map(Self)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn t(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        self.0.row(n)
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        self.0.row_mut(n)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Whether every row is non-decreasing.
    pub fn is_monotone(&self) -> bool {
        (0..self.n()).all(|n| self.row(n).windows(2).all(|w| w[1] >= w[0]))
    }

    /// Whether every row starts at 1 and ends at T within `tol`.
    pub fn satisfies_boundaries(&self, tol: f64) -> bool {
        let t = self.t() as f64;
        (0..self.n()).all(|n| {
            let row = self.row(n);
            (row[0] - 1.0).abs() <= tol && (row[row.len() - 1] - t).abs() <= tol
        })
    }
}

impl TryFrom<Vec<Vec<f64>>> for WarpingFunctions {
    type Error = TtwError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<WarpingFunctions> for Vec<Vec<f64>> {
    fn from(w: WarpingFunctions) -> Self {
        w.0.to_rows()
    }
}

/// Output of a full training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub centroid: TimeSeries,
    pub synchronized: Vec<TimeSeries>,
    pub warps: WarpingFunctions,
    pub coefficients: WarpCoefficients,
    /// Loss before each update; entry `i` is evaluated with the parameters
    /// produced by update `i - 1`.
    pub loss_trace: Vec<f64>,
    pub config: TrainConfig,
    /// Rows of the final warps whose last sample was lifted above T by the
    /// monotone clamp.
    #[serde(default)]
    pub endpoint_violations: usize,
}

impl AlignmentResult {
    /// Structural checks applied before serialization.
    pub fn check(&self) -> Result<()> {
        let n = self.synchronized.len();
        let t = self.centroid.len();
        if self.loss_trace.is_empty() {
            return Err(TtwError::MalformedResult("loss trace is empty".into()));
        }
        if let Some(i) = self
            .loss_trace
            .iter()
            .position(|l| !l.is_finite() || *l < 0.0)
        {
            return Err(TtwError::MalformedResult(format!(
                "loss trace entry {} is not a finite non-negative number",
                i + 1
            )));
        }
        if n == 0 || self.synchronized.iter().any(|s| s.len() != t) {
            return Err(TtwError::MalformedResult(
                "synchronized signals do not match the centroid length".into(),
            ));
        }
        if self.warps.n() != n || self.warps.t() != t {
            return Err(TtwError::MalformedResult(
                "warp matrix has wrong shape".into(),
            ));
        }
        if self.coefficients.n() != n {
            return Err(TtwError::MalformedResult(
                "coefficient matrix has wrong row count".into(),
            ));
        }
        Ok(())
    }
}

/// Within-group mean squared error of synchronized rows and their pointwise mean.
///
/// `y[t] = (1/N) Σ_n x̃_n[t]` and `loss = (1/(NT)) Σ_n Σ_t (x̃_n[t] - y[t])²`.
pub fn within_group_loss<R: AsRef<[f64]>>(rows: &[R]) -> Result<(f64, TimeSeries)> {
    let first = rows.first().ok_or(TtwError::EmptyDataset)?.as_ref();
    let t = first.len();
    for (n, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != t {
            return Err(TtwError::LengthMismatch {
                index: n + 1,
                expected: t,
                found: row.len(),
            });
        }
        if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
            return Err(TtwError::NonFinite {
                series: n + 1,
                position: pos + 1,
            });
        }
    }
    if t < 2 {
        return Err(TtwError::TooShort { index: 1, len: t });
    }
    let (loss, centroid) = loss_and_centroid(rows);
    Ok((loss, TimeSeries::from_vec_unchecked(centroid)))
}

/// Unchecked kernel of [`within_group_loss`]. Sums run in row order so the
/// result does not depend on how the rows were produced.
pub(crate) fn loss_and_centroid<R: AsRef<[f64]>>(rows: &[R]) -> (f64, Vec<f64>) {
    let n = rows.len();
    let t = rows[0].as_ref().len();
    let centroid = row_mean(rows);
    let mut sum = 0.0;
    for row in rows {
        for (v, c) in row.as_ref().iter().zip(&centroid) {
            let d = v - c;
            sum += d * d;
        }
    }
    (sum / (n * t) as f64, centroid)
}

/// Pointwise mean, accumulated as offsets from the first row so that
/// identical rows reproduce their common value exactly.
pub(crate) fn row_mean<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let reference = rows[0].as_ref();
    let mut offset = vec![0.0; reference.len()];
    for row in &rows[1..] {
        for ((o, v), r) in offset.iter_mut().zip(row.as_ref()).zip(reference) {
            *o += v - r;
        }
    }
    let n = rows.len() as f64;
    reference
        .iter()
        .zip(&offset)
        .map(|(r, o)| r + o / n)
        .collect()
}
