//! UCR-style text ingestion and result serialization.
//!
//! Input rows are `label, v1, v2, ...` separated by commas or tabs (one
//! delimiter per file). Rows of different lengths are linearly resampled to
//! the longest length.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtwError};
use crate::series::{AlignmentResult, LabeledDataset, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delimiter {
    Comma,
    Tab,
}

impl Delimiter {
    fn as_char(self) -> char {
        match self {
            Delimiter::Comma => ',',
            Delimiter::Tab => '\t',
        }
    }
}

/// Summary of what ingestion did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: usize,
    pub length: usize,
    pub delimiter: Delimiter,
    /// Series count per label id.
    pub class_histogram: BTreeMap<i64, usize>,
    pub interpolated: bool,
    /// Original label strings when they were not integers, indexed by id.
    pub label_names: Option<Vec<String>>,
    pub znormalized: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub znormalize: bool,
}

/// Linear resampling of `values` onto `len` uniformly spaced points with both
/// endpoints preserved.
pub fn resample_linear(values: &[f64], len: usize) -> Vec<f64> {
    if values.len() == len {
        return values.to_vec();
    }
    if values.len() == 1 {
        return vec![values[0]; len];
    }
    let last = values.len() - 1;
    let scale = last as f64 / (len - 1) as f64;
    (0..len)
        .map(|i| {
            if i == len - 1 {
                return values[last];
            }
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 {
                values[lo]
            } else {
                values[lo] + frac * (values[lo + 1] - values[lo])
            }
        })
        .collect()
}

/// Zero-mean, unit-variance (population) rescaling. Constant series map to
/// all zeros.
pub fn znormalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return vec![0.0; values.len()];
    }
    let sd = var.sqrt();
    values.iter().map(|v| (v - mean) / sd).collect()
}

fn detect_delimiter(line: &str) -> Delimiter {
    if line.contains('\t') {
        Delimiter::Tab
    } else {
        Delimiter::Comma
    }
}

/// Parses UCR-style text. Row and column numbers in errors are 1-based, with
/// column 1 being the label.
pub fn parse_ucr(text: &str, opts: LoadOptions) -> Result<(LabeledDataset, Manifest)> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let Some(&(_, first)) = lines.first() else {
        return Err(TtwError::EmptyFile);
    };
    let delimiter = detect_delimiter(first);
    let other = match delimiter {
        Delimiter::Comma => '\t',
        Delimiter::Tab => ',',
    };

    let mut raw_labels = Vec::with_capacity(lines.len());
    let mut rows = Vec::with_capacity(lines.len());
    for &(row, line) in &lines {
        if line.contains(other) {
            return Err(TtwError::InconsistentDelimiter { row });
        }
        let mut fields = line.split(delimiter.as_char()).map(str::trim);
        let label = fields.next().unwrap_or_default().to_string();
        if label.is_empty() {
            return Err(TtwError::Parse {
                row,
                column: 1,
                message: "missing label".into(),
            });
        }
        let values = fields
            .enumerate()
            .map(|(i, tok)| {
                let bad = |message: String| TtwError::Parse {
                    row,
                    column: i + 2,
                    message,
                };
                let v: f64 = tok
                    .parse()
                    .map_err(|_| bad(format!("cannot parse '{tok}' as a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad(format!("non-finite value '{tok}'")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(TtwError::Parse {
                row,
                column: 2,
                message: "row has no values".into(),
            });
        }
        raw_labels.push(label);
        rows.push(values);
    }

    let (labels, label_names) = map_labels(&raw_labels);
    let length = rows.iter().map(Vec::len).max().unwrap_or(0).max(2);
    let interpolated = rows.iter().any(|r| r.len() != length);
    let mut rows: Vec<Vec<f64>> = rows.iter().map(|r| resample_linear(r, length)).collect();
    if opts.znormalize {
        rows = rows.iter().map(|r| znormalize(r)).collect();
    }

    let mut class_histogram = BTreeMap::new();
    for l in &labels {
        *class_histogram.entry(*l).or_insert(0) += 1;
    }
    let manifest = Manifest {
        rows: rows.len(),
        length,
        delimiter,
        class_histogram,
        interpolated,
        label_names,
        znormalized: opts.znormalize,
    };
    Ok((LabeledDataset::new(rows, Some(labels))?, manifest))
}

/// Integer labels are kept (UCR labels like "1.0" included); otherwise each
/// distinct string gets a dense id in first-seen order.
fn map_labels(raw: &[String]) -> (Vec<i64>, Option<Vec<String>>) {
    let as_int = |s: &str| -> Option<i64> {
        s.parse::<i64>().ok().or_else(|| {
            let f: f64 = s.parse().ok()?;
            (f.fract() == 0.0 && f.abs() < 1e15).then_some(f as i64)
        })
    };
    if let Some(ints) = raw.iter().map(|s| as_int(s)).collect::<Option<Vec<_>>>() {
        return (ints, None);
    }
    let mut names: Vec<String> = Vec::new();
    let ids = raw
        .iter()
        .map(|s| match names.iter().position(|n| n == s) {
            Some(i) => i as i64,
            None => {
                names.push(s.clone());
                (names.len() - 1) as i64
            }
        })
        .collect();
    (ids, Some(names))
}

pub fn load_ucr(path: impl AsRef<Path>, opts: LoadOptions) -> Result<(LabeledDataset, Manifest)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TtwError::io(path, e))?;
    parse_ucr(&text, opts)
}

/// Reads a single series: the `centroid` field of a JSON result, or the first
/// non-empty line of a comma/tab separated file (no label column).
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TtwError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct WithCentroid {
            centroid: TimeSeries,
        }
        let doc: WithCentroid = serde_json::from_str(&text).map_err(|source| TtwError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        return Ok(doc.centroid);
    }
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or(TtwError::EmptyFile)?;
    let delim = detect_delimiter(line).as_char();
    let values = line
        .split(delim)
        .map(str::trim)
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>().map_err(|_| TtwError::Parse {
                row: 1,
                column: i + 1,
                message: format!("cannot parse '{tok}' as a number"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = TtwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(TtwError::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

fn csv_row(values: &[f64]) -> String {
    let mut s = values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| TtwError::io(path, e))
}

/// `dir/stem.ext` -> `dir/stem_<suffix>.csv`
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "result".into());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Writes an alignment result.
///
/// JSON: one document with `centroid`, `synchronized`, `warps`,
/// `coefficients`, `loss_trace` and `config`. CSV: sibling files
/// `<stem>_centroid.csv` (one row), `<stem>_synchronized.csv`,
/// `<stem>_warps.csv`, `<stem>_coefficients.csv` (one row per series) and
/// `<stem>_loss.csv` (one value per line). Returns the paths written.
pub fn save_result(
    result: &AlignmentResult,
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    result.check()?;
    let path = path.as_ref();
    match format {
        OutputFormat::Json => {
            save_json(result, path)?;
            Ok(vec![path.to_path_buf()])
        }
        OutputFormat::Csv => {
            let mut written = Vec::new();
            let mut emit = |suffix: &str, body: String| -> Result<()> {
                let p = sibling_path(path, suffix);
                write(&p, &body)?;
                written.push(p);
                Ok(())
            };
            emit("centroid", csv_row(result.centroid.values()))?;
            emit(
                "synchronized",
                result
                    .synchronized
                    .iter()
                    .map(|s| csv_row(s.values()))
                    .collect(),
            )?;
            emit(
                "warps",
                (0..result.warps.n())
                    .map(|n| csv_row(result.warps.row(n)))
                    .collect(),
            )?;
            emit(
                "coefficients",
                (0..result.coefficients.n())
                    .map(|n| csv_row(result.coefficients.row(n)))
                    .collect(),
            )?;
            emit(
                "loss",
                result
                    .loss_trace
                    .iter()
                    .map(|l| format!("{l:?}\n"))
                    .collect(),
            )?;
            Ok(written)
        }
    }
}

pub fn load_result(path: impl AsRef<Path>) -> Result<AlignmentResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TtwError::io(path, e))?;
    let result: AlignmentResult = serde_json::from_str(&text).map_err(|source| TtwError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    result.check()?;
    Ok(result)
}

/// Pretty JSON for any serializable report. Floats use the shortest
/// representation that parses back to the identical `f64`.
pub fn save_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| TtwError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_rows() {
        let (ds, m) = parse_ucr("1,0.0,1.0,2.0\n2,3.0,4.0,5.0", LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.series_len(), 3);
        assert_eq!(ds.labels().unwrap(), &[1, 2]);
        assert_eq!(ds.series()[1].values(), &[3.0, 4.0, 5.0]);
        assert!(!m.interpolated);
        assert_eq!(m.delimiter, Delimiter::Comma);
    }

    #[test]
    fn parses_tab_rows_with_float_labels() {
        let (ds, m) =
            parse_ucr("1.0\t0.5\t0.25\r\n-1.0\t1\t2\n\n", LoadOptions::default()).unwrap();
        assert_eq!(ds.labels().unwrap(), &[1, -1]);
        assert_eq!(m.delimiter, Delimiter::Tab);
        assert_eq!(m.class_histogram.get(&-1), Some(&1));
    }

    #[test]
    fn string_labels_map_in_first_seen_order() {
        let (ds, m) = parse_ucr("b,1,2\na,3,4\nb,5,6", LoadOptions::default()).unwrap();
        assert_eq!(ds.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(
            m.label_names.unwrap(),
            vec!["b".to_string(), "a".to_string()]
        );
    }

    #[test]
    fn ragged_rows_are_interpolated() {
        let (ds, m) = parse_ucr("1,0,1,2\n1,0,1,2,3,4", LoadOptions::default()).unwrap();
        assert!(m.interpolated);
        assert_eq!(ds.series_len(), 5);
        assert_eq!(ds.series()[0].values(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(ds.series()[1].values(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn resampling_keeps_endpoints() {
        let x = [3.0, -1.0, 7.5, 2.0];
        for len in [2, 3, 7, 50] {
            let r = resample_linear(&x, len);
            assert_eq!(r.len(), len);
            assert_eq!(r[0], 3.0);
            assert_eq!(r[len - 1], 2.0);
        }
        assert_eq!(resample_linear(&x, 4), x.to_vec());
    }

    #[test]
    fn parse_errors_name_location() {
        match parse_ucr("1,0.5,abc,2", LoadOptions::default()).unwrap_err() {
            TtwError::Parse { row, column, .. } => assert_eq!((row, column), (1, 3)),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse_ucr("\n \n", LoadOptions::default()),
            Err(TtwError::EmptyFile)
        ));
        assert!(matches!(
            parse_ucr("1,2,3\n1\t2\t3", LoadOptions::default()),
            Err(TtwError::InconsistentDelimiter { row: 2 })
        ));
        assert!(parse_ucr("1,2,nan", LoadOptions::default()).is_err());
    }

    #[test]
    fn znormalization_flag() {
        let opts = LoadOptions { znormalize: true };
        let (ds, m) = parse_ucr("1,1,2,3\n1,5,5,5", opts).unwrap();
        assert!(m.znormalized);
        let s = ds.series()[0].values();
        assert!(s.iter().sum::<f64>().abs() < 1e-12);
        assert_eq!(ds.series()[1].values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling_path(Path::new("/tmp/out/c.json"), "warps"),
            PathBuf::from("/tmp/out/c_warps.csv")
        );
    }
}
