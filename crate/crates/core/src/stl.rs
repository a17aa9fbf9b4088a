//! Seasonal-trend decomposition by Loess, applied to each window and variable
//! independently.
//!
//! The procedure follows Cleveland et al. (1990): an inner loop of
//! detrending, cycle-subseries smoothing, low-pass filtering and trend
//! smoothing, optionally wrapped in an outer loop of bisquare robustness
//! reweighting. The residual is always the exact remainder.

use crate::error::{Result, VistaError};
use crate::series::Window;

/// Degree of the local polynomial fitted by Loess.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoessDegree {
    Constant,
    Linear,
}

impl LoessDegree {
    pub fn from_int(v: u32) -> Result<Self> {
        match v {
            0 => Ok(LoessDegree::Constant),
            1 => Ok(LoessDegree::Linear),
            _ => Err(VistaError::Config(format!("loess degree must be 0 or 1, got {v}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            LoessDegree::Constant => 0,
            LoessDegree::Linear => 1,
        }
    }
}

/// Smoother applied to each cycle-subseries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeasonalSmoother {
    /// Cycle-subseries means; the seasonal component is exactly periodic.
    Periodic,
    /// Loess with the given odd span.
    Span(usize),
}

impl std::fmt::Display for SeasonalSmoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeasonalSmoother::Periodic => f.write_str("periodic"),
            SeasonalSmoother::Span(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for SeasonalSmoother {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "periodic" {
            return Ok(SeasonalSmoother::Periodic);
        }
        s.parse::<usize>()
            .map(SeasonalSmoother::Span)
            .map_err(|_| VistaError::Config(format!("seasonal span must be `periodic` or an odd integer, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StlParams {
    pub period: usize,
    pub seasonal: SeasonalSmoother,
    pub trend_span: usize,
    pub lowpass_span: usize,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub degree: LoessDegree,
}

/// Optional user overrides of the derived STL defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StlOverrides {
    pub seasonal: Option<SeasonalSmoother>,
    pub trend_span: Option<usize>,
    pub lowpass_span: Option<usize>,
    pub inner_iters: Option<usize>,
    pub outer_iters: Option<usize>,
    pub degree: Option<LoessDegree>,
}

fn next_odd(v: usize) -> usize {
    if v.is_multiple_of(2) {
        v + 1
    } else {
        v
    }
}

impl StlParams {
    /// Cleveland's defaults for a window of `window` points whose seasonal
    /// period is `floor(seasonal_ratio * window)`.
    pub fn for_window(window: usize, seasonal_ratio: f64) -> Result<Self> {
        Self::resolve(window, seasonal_ratio, &StlOverrides::default())
    }

    pub fn resolve(window: usize, seasonal_ratio: f64, ov: &StlOverrides) -> Result<Self> {
        if !(seasonal_ratio > 0.0 && seasonal_ratio < 1.0) {
            return Err(VistaError::Config(format!(
                "seasonal_ratio must lie in (0, 1), got {seasonal_ratio}"
            )));
        }
        let period = (seasonal_ratio * window as f64).floor() as usize;
        let seasonal = ov.seasonal.unwrap_or(SeasonalSmoother::Periodic);
        // R's stl() treats a periodic seasonal smoother as a span of 10n + 1.
        let seasonal_effective = match seasonal {
            SeasonalSmoother::Periodic => 10 * window + 1,
            SeasonalSmoother::Span(s) => s,
        };
        let trend_span = match ov.trend_span {
            Some(t) => t,
            None => {
                let denom = 1.0 - 1.5 / seasonal_effective as f64;
                let raw = (1.5 * period as f64 / denom).ceil() as usize;
                next_odd(raw).max(3)
            }
        };
        let lowpass_span = ov.lowpass_span.unwrap_or_else(|| next_odd(period).max(3));
        let params = StlParams {
            period,
            seasonal,
            trend_span,
            lowpass_span,
            inner_iters: ov.inner_iters.unwrap_or(2),
            outer_iters: ov.outer_iters.unwrap_or(0),
            degree: ov.degree.unwrap_or(LoessDegree::Linear),
        };
        params.validate(window)?;
        Ok(params)
    }

    pub fn validate(&self, window: usize) -> Result<()> {
        if self.period < 2 {
            return Err(VistaError::Config(format!("period must be at least 2, got {}", self.period)));
        }
        if window < 2 * self.period {
            return Err(VistaError::Config(format!(
                "period {} needs at least two full cycles, but the window has {window} points",
                self.period
            )));
        }
        let check_span = |name: &str, v: usize| {
            if v < 3 || v.is_multiple_of(2) {
                Err(VistaError::Config(format!("{name} must be odd and at least 3, got {v}")))
            } else {
                Ok(())
            }
        };
        if let SeasonalSmoother::Span(s) = self.seasonal {
            check_span("seasonal_span", s)?;
        }
        check_span("trend_span", self.trend_span)?;
        check_span("lowpass_span", self.lowpass_span)?;
        if self.inner_iters < 1 {
            return Err(VistaError::Config("inner_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trend, seasonal and residual components of one window, each `w_s × C`
/// row-major like the window itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedWindow {
    pub size: usize,
    pub dims: usize,
    pub start_index: usize,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
}

impl DecomposedWindow {
    fn column(data: &[f64], dims: usize, c: usize) -> Vec<f64> {
        data.iter().skip(c).step_by(dims).copied().collect()
    }

    pub fn trend_column(&self, c: usize) -> Vec<f64> {
        Self::column(&self.trend, self.dims, c)
    }

    pub fn seasonal_column(&self, c: usize) -> Vec<f64> {
        Self::column(&self.seasonal, self.dims, c)
    }

    pub fn residual_column(&self, c: usize) -> Vec<f64> {
        Self::column(&self.residual, self.dims, c)
    }

    /// Trend + seasonal + residual, which reproduces the input window.
    pub fn original_column(&self, c: usize) -> Vec<f64> {
        (0..self.size)
            .map(|t| {
                let i = t * self.dims + c;
                self.trend[i] + self.seasonal[i] + self.residual[i]
            })
            .collect()
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let a = 1.0 - u * u * u;
        a * a * a
    }
}

/// Index of the first of the `q` positions nearest to `x0`.
fn neighborhood(positions: &[f64], x0: f64, q: usize) -> usize {
    let n = positions.len();
    let insert = positions.partition_point(|&p| p < x0);
    let mut lo = insert.saturating_sub(q).min(n - q);
    while lo + q < n && positions[lo + q] - x0 < x0 - positions[lo] {
        lo += 1;
    }
    lo
}

/// Local fit at `x0` over the `min(span, n)` nearest positions.
///
/// The bandwidth is the distance to the farthest neighbor plus half a mean
/// sample spacing (so that neighbor keeps a positive weight), widened by
/// `(span - n) / 2` spacings when the span exceeds the data length.
fn fit_at(
    values: &[f64],
    positions: &[f64],
    x0: f64,
    span: usize,
    degree: LoessDegree,
    robustness: Option<&[f64]>,
) -> f64 {
    let n = positions.len();
    let q = span.min(n);
    let lo = neighborhood(positions, x0, q);
    let hi = lo + q;
    let range = positions[n - 1] - positions[0];
    let spacing = range / (n - 1) as f64;
    let reach = (x0 - positions[lo]).max(positions[hi - 1] - x0);
    let h = reach + 0.5 * spacing + 0.5 * span.saturating_sub(n) as f64 * spacing;

    let mut weights = Vec::with_capacity(q);
    let mut total = 0.0;
    for i in lo..hi {
        let mut w = tricube((positions[i] - x0).abs() / h);
        if let Some(rw) = robustness {
            w *= rw[i];
        }
        weights.push(w);
        total += w;
    }
    if total <= 0.0 {
        return values[lo..hi].iter().sum::<f64>() / q as f64;
    }
    for w in &mut weights {
        *w /= total;
    }
    let xbar: f64 = weights.iter().zip(&positions[lo..hi]).map(|(w, p)| w * p).sum();
    let ybar: f64 = weights.iter().zip(&values[lo..hi]).map(|(w, v)| w * v).sum();
    if degree == LoessDegree::Constant {
        return ybar;
    }
    let sxx: f64 = weights
        .iter()
        .zip(&positions[lo..hi])
        .map(|(w, p)| w * (p - xbar) * (p - xbar))
        .sum();
    if sxx.sqrt() <= 1e-3 * range {
        return ybar;
    }
    let sxy: f64 = weights
        .iter()
        .zip(&positions[lo..hi])
        .zip(&values[lo..hi])
        .map(|((w, p), v)| w * (p - xbar) * (v - ybar))
        .sum();
    ybar + sxy / sxx * (x0 - xbar)
}

fn check_loess_inputs(values: &[f64], positions: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(VistaError::Data(format!("loess needs at least 2 points, got {}", values.len())));
    }
    if values.len() != positions.len() {
        return Err(VistaError::Data("loess values and positions differ in length".into()));
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VistaError::Data("loess positions must be strictly increasing".into()));
    }
    Ok(())
}

fn valid_span(span: usize) -> usize {
    next_odd(span).max(3)
}

/// Locally weighted regression evaluated at every input position.
///
/// Even spans are rounded up to the next odd value and spans below 3 are
/// raised to 3. Points whose tricube (times robustness) weights are all zero
/// fall back to the unweighted mean of their neighborhood.
pub fn loess_smooth(
    values: &[f64],
    positions: &[f64],
    span: usize,
    degree: LoessDegree,
    robustness: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_loess_inputs(values, positions)?;
    let span = valid_span(span);
    Ok(positions
        .iter()
        .map(|&x0| fit_at(values, positions, x0, span, degree, robustness))
        .collect())
}

/// Loess evaluated at arbitrary points, used to extend cycle-subseries one
/// cycle beyond each end.
pub fn loess_at(
    values: &[f64],
    positions: &[f64],
    at: &[f64],
    span: usize,
    degree: LoessDegree,
    robustness: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_loess_inputs(values, positions)?;
    let span = valid_span(span);
    Ok(at
        .iter()
        .map(|&x0| fit_at(values, positions, x0, span, degree, robustness))
        .collect())
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let inv = 1.0 / len as f64;
    let mut out = Vec::with_capacity(x.len() + 1 - len);
    let mut acc: f64 = x[..len].iter().sum();
    out.push(acc * inv);
    for i in len..x.len() {
        acc += x[i] - x[i - len];
        out.push(acc * inv);
    }
    out
}

/// Smooths each cycle-subseries of `detrended` and returns the result on the
/// extended index range `[-period, n + period)`.
fn cycle_subseries(
    detrended: &[f64],
    params: &StlParams,
    robustness: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = detrended.len();
    let np = params.period;
    let mut extended = vec![0.0; n + 2 * np];
    for phase in 0..np {
        let idx: Vec<usize> = (phase..n).step_by(np).collect();
        let sub: Vec<f64> = idx.iter().map(|&t| detrended[t]).collect();
        let sub_rw: Option<Vec<f64>> = robustness.map(|rw| idx.iter().map(|&t| rw[t]).collect());
        let k = sub.len();
        // fitted[j] is the smoothed subseries at cycle position j, j = 0..=k+1
        let fitted: Vec<f64> = match params.seasonal {
            SeasonalSmoother::Periodic => {
                let mean = match &sub_rw {
                    Some(rw) if rw.iter().sum::<f64>() > 0.0 => {
                        sub.iter().zip(rw).map(|(v, w)| v * w).sum::<f64>() / rw.iter().sum::<f64>()
                    }
                    _ => sub.iter().sum::<f64>() / k as f64,
                };
                vec![mean; k + 2]
            }
            SeasonalSmoother::Span(span) => {
                let pos: Vec<f64> = (1..=k).map(|j| j as f64).collect();
                let at: Vec<f64> = (0..=k + 1).map(|j| j as f64).collect();
                loess_at(&sub, &pos, &at, span, params.degree, sub_rw.as_deref())?
            }
        };
        // extended[e] holds time e - np; cycle position of time t is (t - phase) / np + 1
        let mut e = phase;
        let mut j = 0;
        while e < n + 2 * np {
            extended[e] = fitted[j];
            e += np;
            j += 1;
        }
    }
    Ok(extended)
}

fn bisquare_weights(residual: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let h = 6.0 * median;
    if h <= 0.0 {
        return vec![1.0; n];
    }
    for r in &mut abs {
        let u = *r / h;
        *r = if u <= 1e-3 {
            1.0
        } else if u <= 0.999 {
            let a = 1.0 - u * u;
            a * a
        } else {
            0.0
        };
    }
    abs
}

/// Decomposes one univariate series. Returns `(trend, seasonal, residual)`.
pub fn stl_series(y: &[f64], params: &StlParams) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = y.len();
    params.validate(n)?;
    let np = params.period;
    let positions: Vec<f64> = (1..=n).map(|t| t as f64).collect();

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut robustness: Option<Vec<f64>> = None;

    for outer in 0..=params.outer_iters {
        for _ in 0..params.inner_iters {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let extended = cycle_subseries(&detrended, params, robustness.as_deref())?;
            let low = moving_average(&moving_average(&moving_average(&extended, np), np), 3);
            let low = loess_smooth(&low, &positions, params.lowpass_span, params.degree, None)?;
            for t in 0..n {
                seasonal[t] = extended[np + t] - low[t];
            }
            let deseasonalized: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            trend = loess_smooth(
                &deseasonalized,
                &positions,
                params.trend_span,
                params.degree,
                robustness.as_deref(),
            )?;
        }
        if outer < params.outer_iters {
            let fit_residual: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
            robustness = Some(bisquare_weights(&fit_residual));
        }
    }

    if params.seasonal == SeasonalSmoother::Periodic {
        for phase in 0..np {
            let (sum, count) = (phase..n)
                .step_by(np)
                .fold((0.0, 0usize), |(s, c), t| (s + seasonal[t], c + 1));
            let mean = sum / count as f64;
            for t in (phase..n).step_by(np) {
                seasonal[t] = mean;
            }
        }
    }

    let residual: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
    Ok((trend, seasonal, residual))
}

/// Decomposes every variable of the window independently.
pub fn stl_decompose(window: &Window, params: &StlParams) -> Result<DecomposedWindow> {
    let (n, dims) = (window.size, window.dims);
    let mut out = DecomposedWindow {
        size: n,
        dims,
        start_index: window.start_index,
        trend: vec![0.0; n * dims],
        seasonal: vec![0.0; n * dims],
        residual: vec![0.0; n * dims],
    };
    for c in 0..dims {
        let (t, s, r) = stl_series(&window.column(c), params)?;
        for i in 0..n {
            out.trend[i * dims + c] = t[i];
            out.seasonal[i * dims + c] = s[i];
            out.residual[i * dims + c] = r[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_positions(n: usize) -> Vec<f64> {
        (1..=n).map(|t| t as f64).collect()
    }

    #[test]
    fn linear_fit_is_exact_on_affine_data() {
        let pos: Vec<f64> = (0..40).map(|i| 0.5 * i as f64 + (i as f64).sqrt()).collect();
        let y: Vec<f64> = pos.iter().map(|p| -2.5 * p + 7.0).collect();
        for span in [3, 7, 15, 39, 81] {
            let fit = loess_smooth(&y, &pos, span, LoessDegree::Linear, None).unwrap();
            for (a, b) in fit.iter().zip(&y) {
                assert!((a - b).abs() < 1e-9, "span {span}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_fit_on_constant_data() {
        let y = vec![3.25; 17];
        let fit = loess_smooth(&y, &unit_positions(17), 5, LoessDegree::Constant, None).unwrap();
        assert!(fit.iter().all(|&v| (v - 3.25).abs() < 1e-14), "{fit:?}");
    }

    /// Weighted least squares at index 2 of [0,1,4,9,16] over indices {1,2,3},
    /// solved from the 2x2 normal equations.
    #[test]
    fn three_point_fit_matches_normal_equations() {
        let y = [0.0, 1.0, 4.0, 9.0, 16.0];
        let pos = unit_positions(5);
        let fit = loess_smooth(&y, &pos, 3, LoessDegree::Linear, None).unwrap();

        // bandwidth 1.5 => edge weight (1 - (1/1.5)^3)^3
        let xs = [2.0, 3.0, 4.0];
        let ys = [1.0, 4.0, 9.0];
        let we = (1.0f64 - (1.0f64 / 1.5).powi(3)).powi(3);
        let ws = [we, 1.0, we];
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..3 {
            s0 += ws[i];
            s1 += ws[i] * xs[i];
            s2 += ws[i] * xs[i] * xs[i];
            t0 += ws[i] * ys[i];
            t1 += ws[i] * xs[i] * ys[i];
        }
        let det = s0 * s2 - s1 * s1;
        let b0 = (t0 * s2 - s1 * t1) / det;
        let b1 = (s0 * t1 - s1 * t0) / det;
        let oracle = b0 + b1 * 3.0;
        assert!((fit[2] - oracle).abs() < 1e-12, "{} vs {}", fit[2], oracle);
        assert!((oracle - 4.410_706_266_279_453).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_fall_back_to_mean() {
        let y = [1.0, 2.0, 3.0, 10.0, 5.0];
        let rw = [0.0; 5];
        let fit = loess_smooth(&y, &unit_positions(5), 3, LoessDegree::Linear, Some(&rw)).unwrap();
        assert!((fit[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn loess_input_errors() {
        assert!(loess_smooth(&[1.0], &[1.0], 3, LoessDegree::Linear, None).is_err());
        assert!(loess_smooth(&[1.0, 2.0], &[2.0, 1.0], 3, LoessDegree::Linear, None).is_err());
    }

    #[test]
    fn default_params_for_64() {
        let p = StlParams::for_window(64, 0.5).unwrap();
        assert_eq!(p.period, 32);
        assert_eq!(p.lowpass_span, 33);
        assert_eq!(p.trend_span, 49);
        assert_eq!(p.inner_iters, 2);
        assert_eq!(p.outer_iters, 0);
        assert_eq!(p.seasonal, SeasonalSmoother::Periodic);
    }

    #[test]
    fn precondition_names_parameter() {
        let err = StlParams::for_window(64, 0.6).unwrap_err().to_string();
        assert!(err.contains("period"), "{err}");
        let ov = StlOverrides {
            trend_span: Some(10),
            ..Default::default()
        };
        let err = StlParams::resolve(64, 0.5, &ov).unwrap_err().to_string();
        assert!(err.contains("trend_span"), "{err}");
    }

    fn window_of(col: Vec<f64>) -> Window {
        Window {
            size: col.len(),
            dims: 1,
            start_index: 0,
            padded: 0,
            data: col,
        }
    }

    #[test]
    fn constant_window() {
        let w = window_of(vec![5.0; 64]);
        let d = stl_decompose(&w, &StlParams::for_window(64, 0.5).unwrap()).unwrap();
        assert!(d.trend.iter().all(|v| (v - 5.0).abs() < 1e-9));
        assert!(d.seasonal.iter().all(|v| v.abs() < 1e-9));
        assert!(d.residual.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn sinusoid_goes_to_seasonal() {
        for n in [32usize, 64, 128] {
            let np = n / 2;
            let y: Vec<f64> = (0..n)
                .map(|t| (2.0 * std::f64::consts::PI * t as f64 / np as f64).sin())
                .collect();
            let d = stl_decompose(&window_of(y.clone()), &StlParams::for_window(n, 0.5).unwrap()).unwrap();
            let var = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
            };
            let ratio = var(&d.seasonal) / var(&y);
            assert!(ratio > 0.9, "n={n}: ratio {ratio}");
            let max_t = d.trend.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max_t < 0.1, "n={n}: trend {max_t}");
        }
    }

    #[test]
    fn periodic_seasonal_is_exactly_periodic() {
        let y: Vec<f64> = (0..64).map(|t| ((t * 37 % 11) as f64).sin() * 3.0 + 0.1 * t as f64).collect();
        let d = stl_decompose(&window_of(y), &StlParams::for_window(64, 0.5).unwrap()).unwrap();
        for t in 0..32 {
            assert_eq!(d.seasonal[t], d.seasonal[t + 32]);
        }
    }

    #[test]
    fn finite_seasonal_span_and_robust_iterations_run() {
        let y: Vec<f64> = (0..128)
            .map(|t| (t as f64 * 0.3).sin() + if t == 70 { 25.0 } else { 0.0 })
            .collect();
        let ov = StlOverrides {
            seasonal: Some(SeasonalSmoother::Span(7)),
            outer_iters: Some(2),
            ..Default::default()
        };
        let p = StlParams::resolve(128, 0.25, &ov).unwrap();
        let (t, s, r) = stl_series(&y, &p).unwrap();
        for i in 0..128 {
            assert!((t[i] + s[i] + r[i] - y[i]).abs() < 1e-12);
        }
        // robust fitting leaves the outlier in the residual
        let worst = r.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
        assert_eq!(worst, 70);
    }

    #[test]
    fn decomposition_is_deterministic() {
        let y: Vec<f64> = (0..128).map(|t| ((t * t) % 17) as f64).collect();
        let p = StlParams::for_window(128, 0.5).unwrap();
        let a = stl_series(&y, &p).unwrap();
        let b = stl_series(&y, &p).unwrap();
        assert_eq!(a, b);
    }
}
