//! Time series containers and segmentation into fixed, non-overlapping windows.

use crate::error::{Result, VistaError};

/// A length-`T`, `C`-variable real-valued series stored row-major
/// (`values[t * C + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    len: usize,
    dims: usize,
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
    /// Start offsets of independent entities concatenated into this series.
    /// Always begins with 0. Windows never straddle two entities.
    segments: Vec<usize>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(VistaError::Data("series must have at least one variable".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(dims) {
            return Err(VistaError::Data(format!(
                "{} values cannot form a series with {} variables",
                values.len(),
                dims
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(VistaError::Data(format!(
                "non-finite value at t={}, variable {}",
                pos / dims,
                pos % dims
            )));
        }
        let len = values.len() / dims;
        Ok(TimeSeries {
            name: name.into(),
            len,
            dims,
            values,
            labels: None,
            segments: vec![0],
        })
    }

    /// Builds a series from rows of equal width.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != dims) {
            return Err(VistaError::Data(format!("row {i} has a different width than row 0")));
        }
        Self::new(name, rows.concat(), dims)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len {
            return Err(VistaError::Data(format!(
                "label count {} does not match series length {}",
                labels.len(),
                self.len
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(VistaError::Data(format!("label at t={pos} is not 0 or 1")));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Declares entity boundaries. `starts` must begin with 0 and be strictly increasing.
    pub fn with_segments(mut self, starts: Vec<usize>) -> Result<Self> {
        let ok = starts.first() == Some(&0)
            && starts.windows(2).all(|w| w[0] < w[1])
            && starts.last().is_some_and(|&s| s < self.len);
        if !ok {
            return Err(VistaError::Data(format!("invalid segment starts {starts:?}")));
        }
        self.segments = starts;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn value(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.dims + c]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn segments(&self) -> &[usize] {
        &self.segments
    }

    /// Column `c` as a contiguous vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.value(t, c)).collect()
    }

    /// Per-variable z-score normalization using this series' own statistics.
    /// Constant variables are only centered.
    pub fn zscored(&self) -> TimeSeries {
        let mut out = self.clone();
        for c in 0..self.dims {
            let col = self.column(c);
            let mean = col.iter().sum::<f64>() / self.len as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.len as f64;
            let sd = var.sqrt();
            let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
            for t in 0..self.len {
                out.values[t * self.dims + c] = (self.value(t, c) - mean) * scale;
            }
        }
        out
    }
}

/// How trailing points that do not fill a whole window are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailPolicy {
    Drop,
    PadRepeat,
}

impl TailPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TailPolicy::Drop => "drop",
            TailPolicy::PadRepeat => "pad_repeat",
        }
    }
}

impl std::str::FromStr for TailPolicy {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(TailPolicy::Drop),
            "pad_repeat" => Ok(TailPolicy::PadRepeat),
            other => Err(VistaError::Config(format!(
                "unknown tail policy `{other}` (expected drop or pad_repeat)"
            ))),
        }
    }
}

/// A `w_s × C` slice of a parent series, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub data: Vec<f64>,
    pub size: usize,
    pub dims: usize,
    pub start_index: usize,
    /// Number of trailing rows that repeat the last observed row.
    pub padded: usize,
}

impl Window {
    pub fn value(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.dims + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.size).map(|t| self.value(t, c)).collect()
    }

    pub fn is_padded(&self) -> bool {
        self.padded > 0
    }

    /// Number of rows that come from the parent series.
    pub fn observed(&self) -> usize {
        self.size - self.padded
    }
}

pub fn validate_window_size(window: usize) -> Result<()> {
    if window < 8 || !window.is_multiple_of(2) {
        return Err(VistaError::Config(format!(
            "window size {window} must be even and at least 8"
        )));
    }
    Ok(())
}

/// Tiles the series with stride `window`. Each entity segment is tiled on its
/// own, so a window never mixes rows from two entities.
pub fn segment_windows(series: &TimeSeries, window: usize, tail: TailPolicy) -> Result<Vec<Window>> {
    validate_window_size(window)?;
    tile_windows(series, window, tail)
}

/// Tiling without the downstream window-size constraints.
pub(crate) fn tile_windows(series: &TimeSeries, window: usize, tail: TailPolicy) -> Result<Vec<Window>> {
    if window == 0 {
        return Err(VistaError::Config("window size must be positive".into()));
    }
    let dims = series.dims();
    let mut bounds: Vec<usize> = series.segments().to_vec();
    bounds.push(series.len());

    let mut out = Vec::new();
    for seg in bounds.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let len = hi - lo;
        if tail == TailPolicy::Drop && len < window && series.segments().len() == 1 {
            return Err(VistaError::SeriesTooShort { len, window });
        }
        let full = len / window;
        for k in 0..full {
            let start = lo + k * window;
            out.push(Window {
                data: series.values()[start * dims..(start + window) * dims].to_vec(),
                size: window,
                dims,
                start_index: start,
                padded: 0,
            });
        }
        let rest = len % window;
        if rest > 0 && tail == TailPolicy::PadRepeat {
            let start = lo + full * window;
            let mut data = series.values()[start * dims..hi * dims].to_vec();
            let last = series.row(hi - 1).to_vec();
            for _ in rest..window {
                data.extend_from_slice(&last);
            }
            out.push(Window {
                data,
                size: window,
                dims,
                start_index: start,
                padded: window - rest,
            });
        }
    }
    if out.is_empty() {
        return Err(VistaError::SeriesTooShort {
            len: series.len(),
            window,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize, dims: usize) -> TimeSeries {
        let values = (0..len * dims).map(|v| v as f64).collect();
        TimeSeries::new("ramp", values, dims).unwrap()
    }

    #[test]
    fn drop_discards_tail() {
        let s = ramp(10, 1);
        let w = tile_windows(&s, 4, TailPolicy::Drop).unwrap();
        assert_eq!(w.iter().map(|w| w.start_index).collect::<Vec<_>>(), vec![0, 4]);
        assert_eq!(w[1].data, vec![4.0, 5.0, 6.0, 7.0]);
        // the public entry point enforces w_s >= 8
        assert!(segment_windows(&s, 4, TailPolicy::Drop).is_err());

        let s = ramp(20, 1);
        let w = segment_windows(&s, 8, TailPolicy::Drop).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start_index, 0);
        assert_eq!(w[1].start_index, 8);
    }

    #[test]
    fn single_window_is_identity() {
        let s = ramp(8, 2);
        let w = segment_windows(&s, 8, TailPolicy::Drop).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].data, s.values());
    }

    #[test]
    fn pad_repeat_repeats_last_row() {
        let s = ramp(10, 1);
        let w = tile_windows(&s, 4, TailPolicy::PadRepeat).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].data, vec![8.0, 9.0, 9.0, 9.0]);
        assert_eq!(w[2].padded, 2);

        let s = ramp(20, 1);
        let w = segment_windows(&s, 8, TailPolicy::PadRepeat).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].start_index, 16);
        assert_eq!(w[2].data, vec![16.0, 17.0, 18.0, 19.0, 19.0, 19.0, 19.0, 19.0]);
        assert_eq!(w[2].padded, 4);
    }

    #[test]
    fn short_series_errors_under_drop() {
        let s = ramp(7, 1);
        assert!(matches!(
            segment_windows(&s, 8, TailPolicy::Drop),
            Err(VistaError::SeriesTooShort { len: 7, window: 8 })
        ));
        let w = segment_windows(&s, 8, TailPolicy::PadRepeat).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].padded, 1);
    }

    #[test]
    fn odd_or_tiny_windows_rejected() {
        let s = ramp(64, 1);
        assert!(matches!(segment_windows(&s, 9, TailPolicy::Drop), Err(VistaError::Config(_))));
        assert!(matches!(segment_windows(&s, 6, TailPolicy::Drop), Err(VistaError::Config(_))));
    }

    #[test]
    fn windows_respect_entity_boundaries() {
        let s = ramp(20, 1).with_segments(vec![0, 10]).unwrap();
        let w = segment_windows(&s, 8, TailPolicy::Drop).unwrap();
        assert_eq!(w.iter().map(|w| w.start_index).collect::<Vec<_>>(), vec![0, 10]);
        let w = segment_windows(&s, 8, TailPolicy::PadRepeat).unwrap();
        assert_eq!(w.iter().map(|w| w.start_index).collect::<Vec<_>>(), vec![0, 8, 10, 18]);
        assert_eq!(w[1].data, vec![8.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(TimeSeries::new("x", vec![1.0, f64::NAN], 1).is_err());
        assert!(TimeSeries::new("x", vec![1.0, f64::INFINITY], 2).is_err());
    }

    #[test]
    fn labels_validated() {
        let s = ramp(3, 1);
        assert!(s.clone().with_labels(vec![0, 1]).is_err());
        assert!(s.clone().with_labels(vec![0, 2, 1]).is_err());
        assert!(s.with_labels(vec![0, 1, 1]).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn drop_concatenation_reproduces_prefix(len in 8usize..200, dims in 1usize..4, half in 4usize..20) {
                let window = half * 2;
                prop_assume!(len >= window);
                let s = ramp(len, dims);
                let ws = segment_windows(&s, window, TailPolicy::Drop).unwrap();
                prop_assert_eq!(ws.len(), len / window);
                let joined: Vec<f64> = ws.iter().flat_map(|w| w.data.iter().copied()).collect();
                prop_assert_eq!(&joined[..], &s.values()[..(len / window) * window * dims]);
            }

            #[test]
            fn pad_count_is_ceiling(len in 1usize..200, half in 4usize..20) {
                let window = half * 2;
                let s = ramp(len, 1);
                let ws = segment_windows(&s, window, TailPolicy::PadRepeat).unwrap();
                prop_assert_eq!(ws.len(), len.div_ceil(window));
                prop_assert!(ws.iter().all(|w| w.data.len() == window));
            }
        }
    }
}
