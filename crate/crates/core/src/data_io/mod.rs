//! Dataset ingestion (CSV and NPY), manifest validation against the known
//! benchmark shapes, and the synthetic generator.

pub mod synth;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use npyz::WriterBuilder;

use crate::error::{Result, VistaError};
use crate::kv;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Npy,
}

impl std::str::FromStr for DataFormat {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "npy" => Ok(DataFormat::Npy),
            other => Err(VistaError::Config(format!("unknown data format `{other}` (expected csv or npy)"))),
        }
    }
}

impl DataFormat {
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("npy") => DataFormat::Npy,
            _ => DataFormat::Csv,
        }
    }
}

/// Shape reference for one public benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkShape {
    pub name: &'static str,
    pub dims: usize,
    pub train_len: usize,
    pub test_len: usize,
    /// Fraction of anomalous points in the test split.
    pub anomaly_ratio: f64,
}

pub const BENCHMARKS: [BenchmarkShape; 5] = [
    BenchmarkShape { name: "MSL", dims: 55, train_len: 58_317, test_len: 73_729, anomaly_ratio: 0.1050 },
    BenchmarkShape { name: "SMAP", dims: 25, train_len: 135_183, test_len: 427_617, anomaly_ratio: 0.1280 },
    BenchmarkShape { name: "SMD", dims: 38, train_len: 708_405, test_len: 708_420, anomaly_ratio: 0.0420 },
    BenchmarkShape { name: "PSM", dims: 25, train_len: 132_481, test_len: 87_841, anomaly_ratio: 0.2780 },
    BenchmarkShape { name: "SWaT", dims: 51, train_len: 496_800, test_len: 449_919, anomaly_ratio: 0.1210 },
];

pub fn benchmark(name: &str) -> Option<&'static BenchmarkShape> {
    BENCHMARKS.iter().find(|b| b.name.eq_ignore_ascii_case(name))
}

/// Absolute tolerance on the label positive rate when a manifest declares one.
pub const ANOMALY_RATIO_TOLERANCE: f64 = 0.005;

/// Files and expectations for one dataset. Each path field may list several
/// comma-separated files (entities), which are concatenated with their
/// boundaries recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub format: DataFormat,
    pub train_paths: Vec<PathBuf>,
    pub test_paths: Vec<PathBuf>,
    pub label_paths: Vec<PathBuf>,
    pub expected_dims: Option<usize>,
    pub expected_counts: Option<(usize, usize)>,
    pub expected_anomaly_ratio: Option<f64>,
    /// Column subset applied after validation.
    pub columns: Option<Vec<usize>>,
    /// Column holding the label in multi-column label files.
    pub label_column: Option<usize>,
}

fn split_paths(base: &Path, v: &str) -> Vec<PathBuf> {
    v.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| base.join(p))
        .collect()
}

impl DatasetManifest {
    /// Parses the key-value form. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = kv::parse(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let need = |k: &str| get(k).ok_or_else(|| VistaError::Config(format!("manifest is missing `{k}`")));
        let num = |k: &str| -> Result<Option<usize>> {
            get(k)
                .map(|v| {
                    v.replace('_', "")
                        .parse()
                        .map_err(|_| VistaError::Config(format!("manifest `{k}` is not an integer: `{v}`")))
                })
                .transpose()
        };
        for key in kv.keys() {
            if ![
                "name",
                "format",
                "train_path",
                "test_path",
                "label_path",
                "expected_dims",
                "expected_train",
                "expected_test",
                "expected_anomaly_ratio",
                "columns",
                "label_column",
            ]
            .contains(&key.as_str())
            {
                return Err(VistaError::Config(format!("unknown manifest key `{key}`")));
            }
        }
        let counts = match (num("expected_train")?, num("expected_test")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(VistaError::Config(
                    "manifest must give both expected_train and expected_test or neither".into(),
                ))
            }
        };
        let ratio = get("expected_anomaly_ratio")
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| VistaError::Config(format!("manifest expected_anomaly_ratio is not a number: `{v}`")))
            })
            .transpose()?;
        let columns = get("columns")
            .map(|v| {
                v.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<usize>()
                            .map_err(|_| VistaError::Config(format!("invalid column index `{c}`")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(DatasetManifest {
            name: need("name")?.to_string(),
            format: need("format")?.parse()?,
            train_paths: split_paths(base, need("train_path")?),
            test_paths: split_paths(base, need("test_path")?),
            label_paths: split_paths(base, need("label_path")?),
            expected_dims: num("expected_dims")?,
            expected_counts: counts,
            expected_anomaly_ratio: ratio,
            columns,
            label_column: num("label_column")?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VistaError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// A dense row-major matrix read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

fn check_finite(m: &Matrix, path: &Path) -> Result<()> {
    if let Some(i) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(VistaError::Data(format!(
            "{}: non-finite value at row {}, column {}",
            path.display(),
            i / m.cols.max(1),
            i % m.cols.max(1)
        )));
    }
    Ok(())
}

/// Comma-separated floats, one row per line. A first line that does not parse
/// as numbers is treated as a header.
pub fn read_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| VistaError::io(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows == 0 && cols.is_none() => continue,
            Err(_) => {
                return Err(VistaError::Data(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(VistaError::Data(format!(
                    "{}: line {} has {} columns, expected {c}",
                    path.display(),
                    lineno + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    let m = Matrix {
        rows,
        cols: cols.unwrap_or(0),
        data,
    };
    check_finite(&m, path)?;
    Ok(m)
}

/// Reads a 1-D or 2-D little-endian, C-ordered numeric NPY array as `f64`.
/// 1-D arrays are returned as a single column.
pub fn read_npy(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| VistaError::io(path, e))?;
    let npy = npyz::NpyFile::new(std::io::BufReader::new(file)).map_err(|e| VistaError::io(path, e))?;
    let bad = |msg: String| VistaError::Data(format!("{}: {msg}", path.display()));
    let shape = npy.shape().to_vec();
    let (rows, cols) = match shape.as_slice() {
        [r] => (*r as usize, 1),
        [r, c] => (*r as usize, *c as usize),
        other => return Err(bad(format!("expected a 1-D or 2-D array, found shape {other:?}"))),
    };
    if rows > 1 && cols > 1 && npy.order() != npyz::Order::C {
        return Err(bad("Fortran-ordered arrays are not supported".into()));
    }
    let dtype = match npy.dtype() {
        npyz::DType::Plain(t) => t.to_string(),
        other => return Err(bad(format!("unsupported dtype {other:?}"))),
    };
    let io = |e: std::io::Error| VistaError::io(path, e);
    let data: Vec<f64> = match dtype.as_str() {
        "<f8" => npy.into_vec::<f64>().map_err(io)?,
        "<f4" => npy.into_vec::<f32>().map_err(io)?.into_iter().map(f64::from).collect(),
        "<i8" => npy.into_vec::<i64>().map_err(io)?.into_iter().map(|v| v as f64).collect(),
        "<i4" => npy.into_vec::<i32>().map_err(io)?.into_iter().map(f64::from).collect(),
        "|u1" => npy.into_vec::<u8>().map_err(io)?.into_iter().map(f64::from).collect(),
        "|i1" => npy.into_vec::<i8>().map_err(io)?.into_iter().map(f64::from).collect(),
        "|b1" => npy.into_vec::<bool>().map_err(io)?.into_iter().map(|b| b as u8 as f64).collect(),
        other => return Err(bad(format!("unsupported dtype `{other}`; expected little-endian numeric"))),
    };
    if data.len() != rows * cols {
        return Err(bad(format!("payload holds {} values, header declares {rows}x{cols}", data.len())));
    }
    let m = Matrix { rows, cols, data };
    check_finite(&m, path)?;
    Ok(m)
}

pub fn read_matrix(path: &Path, format: DataFormat) -> Result<Matrix> {
    match format {
        DataFormat::Csv => read_csv(path),
        DataFormat::Npy => read_npy(path),
    }
}

/// One `{0,1}` label per line (CSV) or a 1-D / single-column NPY array.
pub fn read_labels(path: &Path, format: DataFormat) -> Result<Vec<u8>> {
    read_label_column(path, format, None)
}

/// Labels from column `column` of a label file; `None` requires exactly one column.
pub fn read_label_column(path: &Path, format: DataFormat, column: Option<usize>) -> Result<Vec<u8>> {
    let m = read_matrix(path, format)?;
    let col = match column {
        Some(c) if c < m.cols => c,
        Some(c) => {
            return Err(VistaError::Data(format!(
                "{}: label column {c} out of range for {} columns",
                path.display(),
                m.cols
            )))
        }
        None if m.cols == 1 => 0,
        None => {
            return Err(VistaError::Data(format!(
                "{}: label file must have one column, found {}",
                path.display(),
                m.cols
            )))
        }
    };
    m.data
        .iter()
        .skip(col)
        .step_by(m.cols)
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            _ => Err(VistaError::Data(format!("{}: label {v} at row {i} is not 0 or 1", path.display()))),
        })
        .collect()
}

/// Reads a data file as a series, inferring the format from the extension.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let m = read_matrix(path, DataFormat::from_path(path))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    TimeSeries::new(name, m.data, m.cols)
}

fn concat_entities(paths: &[PathBuf], format: DataFormat, what: &str) -> Result<(Matrix, Vec<usize>)> {
    if paths.is_empty() {
        return Err(VistaError::Config(format!("no {what} files listed")));
    }
    let mut starts = Vec::new();
    let mut out = Matrix { rows: 0, cols: 0, data: Vec::new() };
    for (i, p) in paths.iter().enumerate() {
        let m = read_matrix(p, format)?;
        if i > 0 && m.cols != out.cols {
            return Err(VistaError::Data(format!(
                "{}: {} columns, but the first {what} file has {}",
                p.display(),
                m.cols,
                out.cols
            )));
        }
        starts.push(out.rows);
        out.cols = m.cols;
        out.rows += m.rows;
        out.data.extend(m.data);
    }
    Ok((out, starts))
}

fn select_columns(m: Matrix, columns: &Option<Vec<usize>>) -> Result<Matrix> {
    let Some(cols) = columns else {
        return Ok(m);
    };
    if let Some(&bad) = cols.iter().find(|&&c| c >= m.cols) {
        return Err(VistaError::Config(format!("column {bad} out of range for {} columns", m.cols)));
    }
    let mut data = Vec::with_capacity(m.rows * cols.len());
    for r in 0..m.rows {
        data.extend(cols.iter().map(|&c| m.data[r * m.cols + c]));
    }
    Ok(Matrix {
        rows: m.rows,
        cols: cols.len(),
        data,
    })
}

/// Loads and validates the train and labeled test series of a manifest.
pub fn load_series(manifest: &DatasetManifest) -> Result<(TimeSeries, TimeSeries)> {
    let name = &manifest.name;
    let (train, train_starts) = concat_entities(&manifest.train_paths, manifest.format, "train")?;
    let (test, test_starts) = concat_entities(&manifest.test_paths, manifest.format, "test")?;
    let train = select_columns(train, &manifest.columns)?;
    let test = select_columns(test, &manifest.columns)?;
    let mut labels = Vec::new();
    for p in &manifest.label_paths {
        labels.extend(read_label_column(p, manifest.format, manifest.label_column)?);
    }

    if let Some(dims) = manifest.expected_dims {
        for (what, m) in [("train", &train), ("test", &test)] {
            if m.cols != dims {
                return Err(VistaError::Data(format!(
                    "{name}: {what} split has {} variables, expected {dims}",
                    m.cols
                )));
            }
        }
    }
    if train.cols != test.cols {
        return Err(VistaError::Data(format!(
            "{name}: train has {} variables but test has {}",
            train.cols, test.cols
        )));
    }
    if let Some((tr, te)) = manifest.expected_counts {
        if train.rows != tr {
            return Err(VistaError::Data(format!("{name}: train length {}, expected {tr}", train.rows)));
        }
        if test.rows != te {
            return Err(VistaError::Data(format!("{name}: test length {}, expected {te}", test.rows)));
        }
    }
    if labels.len() != test.rows {
        return Err(VistaError::Data(format!(
            "{name}: {} labels for {} test points",
            labels.len(),
            test.rows
        )));
    }
    if let Some(ratio) = manifest.expected_anomaly_ratio {
        let got = labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len().max(1) as f64;
        if (got - ratio).abs() > ANOMALY_RATIO_TOLERANCE {
            return Err(VistaError::Data(format!(
                "{name}: label positive rate {got:.4}, expected {ratio:.4}"
            )));
        }
    }

    let train_series =
        TimeSeries::new(format!("{name}-train"), train.data, train.cols)?.with_segments(train_starts)?;
    let test_series = TimeSeries::new(format!("{name}-test"), test.data, test.cols)?
        .with_segments(test_starts)?
        .with_labels(labels)?;
    Ok((train_series, test_series))
}

/// Writes values as CSV with shortest round-trip float formatting.
pub fn write_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut s = String::with_capacity(series.values().len() * 12);
    for t in 0..series.len() {
        for (c, v) in series.row(t).iter().enumerate() {
            if c > 0 {
                s.push(',');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| VistaError::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let s: String = labels.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, s).map_err(|e| VistaError::io(path, e))
}

/// Writes a `T × C` little-endian `f64` NPY file.
pub fn write_npy(path: &Path, series: &TimeSeries) -> Result<()> {
    let io = |e: std::io::Error| VistaError::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut writer = npyz::WriteOptions::new()
        .default_dtype()
        .shape(&[series.len() as u64, series.dims() as u64])
        .writer(BufWriter::new(file))
        .begin_nd()
        .map_err(io)?;
    writer.extend(series.values().iter().copied()).map_err(io)?;
    writer.finish().map_err(io)
}
