//! Seeded synthetic multivariate series with labeled anomalies.
//!
//! Each variable is a linear trend plus a sinusoid plus Gaussian noise. The
//! per-variable shape (period, amplitude, slope, offset, phase) depends only
//! on the seed, so a clean training split and a contaminated test split drawn
//! from the same seed share their normal behavior.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, VistaError};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Additive impulse of 6 to 10 signal standard deviations on 1 to 3 points.
    Spike,
    /// Step of 4 standard deviations lasting a quarter to half a window.
    LevelShift,
    /// Locally slowed oscillation (period stretched 2 to 3 times) for half to one window.
    PeriodStretch,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::Spike, AnomalyKind::LevelShift, AnomalyKind::PeriodStretch];
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyKind::Spike => "spike",
            AnomalyKind::LevelShift => "level_shift",
            AnomalyKind::PeriodStretch => "period_stretch",
        })
    }
}

impl FromStr for AnomalyKind {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spike" => Ok(AnomalyKind::Spike),
            "level_shift" => Ok(AnomalyKind::LevelShift),
            "period_stretch" => Ok(AnomalyKind::PeriodStretch),
            other => Err(VistaError::Config(format!(
                "unknown anomaly kind `{other}` (expected spike, level_shift, period_stretch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub length: usize,
    pub variables: usize,
    pub kinds: Vec<AnomalyKind>,
    /// Target fraction of labeled points, in `[0, 0.3]`.
    pub contamination: f64,
    /// Window size the anomaly durations are scaled to.
    pub window_hint: usize,
}

impl SynthSpec {
    pub fn new(seed: u64, length: usize, variables: usize, kinds: &[AnomalyKind], contamination: f64) -> Self {
        SynthSpec {
            seed,
            length,
            variables,
            kinds: kinds.to_vec(),
            contamination,
            window_hint: 64,
        }
    }
}

#[derive(Debug, Clone)]
struct VariableShape {
    period: f64,
    amplitude: f64,
    slope: f64,
    offset: f64,
    phase: f64,
    noise: f64,
}

impl VariableShape {
    /// Standard deviation of the anomaly-free signal, ignoring the trend.
    fn sigma(&self) -> f64 {
        (self.amplitude * self.amplitude / 2.0 + self.noise * self.noise).sqrt()
    }
}

fn shapes(spec: &SynthSpec) -> Vec<VariableShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.variables)
        .map(|_| {
            let amplitude = rng.random_range(1.0..3.0);
            VariableShape {
                period: rng.random_range(12.0..48.0),
                amplitude,
                // total drift over the series of at most one amplitude
                slope: rng.random_range(-1.0..1.0) * amplitude / spec.length.max(1) as f64,
                offset: rng.random_range(-2.0..2.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                noise: 0.1 * amplitude,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Event {
    kind: AnomalyKind,
    start: usize,
    len: usize,
    variables: Vec<bool>,
    magnitude: f64,
    sign: f64,
}

fn plan_events(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let n = spec.length;
    let target = (spec.contamination * n as f64).round() as usize;
    if target == 0 || spec.kinds.is_empty() {
        return Vec::new();
    }
    let w = spec.window_hint.max(8);
    let mut taken = vec![false; n];
    let mut labeled = 0;
    let mut events = Vec::new();
    let mut failures = 0;
    while labeled < target && failures < 1000 {
        let kind = spec.kinds[rng.random_range(0..spec.kinds.len())];
        let len = match kind {
            AnomalyKind::Spike => rng.random_range(1..=3),
            AnomalyKind::LevelShift => rng.random_range(w / 4..=w / 2),
            AnomalyKind::PeriodStretch => rng.random_range(w / 2..=w),
        }
        .min(target - labeled)
        .min(n);
        let start = rng.random_range(0..=n - len);
        // keep one free point on each side so events never merge
        let lo = start.saturating_sub(1);
        let hi = (start + len + 1).min(n);
        if taken[lo..hi].iter().any(|&t| t) {
            failures += 1;
            continue;
        }
        taken[start..start + len].iter_mut().for_each(|t| *t = true);
        labeled += len;
        let mut variables: Vec<bool> = (0..spec.variables).map(|_| rng.random_bool(0.5)).collect();
        if !variables.iter().any(|&v| v) {
            let pick = rng.random_range(0..spec.variables);
            variables[pick] = true;
        }
        let magnitude = match kind {
            AnomalyKind::Spike => rng.random_range(6.0..=10.0),
            AnomalyKind::LevelShift => 4.0,
            AnomalyKind::PeriodStretch => rng.random_range(2.0..=3.0),
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        events.push(Event {
            kind,
            start,
            len,
            variables,
            magnitude,
            sign,
        });
    }
    events.sort_by_key(|e| e.start);
    events
}

fn render(spec: &SynthSpec, shapes: &[VariableShape], stream: u64) -> Result<TimeSeries> {
    if !(0.0..=0.3).contains(&spec.contamination) {
        return Err(VistaError::Config(format!(
            "contamination must lie in [0, 0.3], got {}",
            spec.contamination
        )));
    }
    if spec.length == 0 || spec.variables == 0 {
        return Err(VistaError::Config("synthetic series needs positive length and variables".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let events = plan_events(spec, &mut rng);
    let (n, dims) = (spec.length, spec.variables);

    // phase increment per step, stretched inside period_stretch events
    let mut rate = vec![vec![1.0; n]; dims];
    let mut additive = vec![vec![0.0; n]; dims];
    let mut labels = vec![0u8; n];
    for e in &events {
        labels[e.start..e.start + e.len].iter_mut().for_each(|l| *l = 1);
        for (c, _) in e.variables.iter().enumerate().filter(|(_, on)| **on) {
            let sigma = shapes[c].sigma();
            for t in e.start..e.start + e.len {
                match e.kind {
                    AnomalyKind::Spike => additive[c][t] += e.sign * e.magnitude * sigma,
                    AnomalyKind::LevelShift => additive[c][t] += e.sign * e.magnitude * sigma,
                    AnomalyKind::PeriodStretch => rate[c][t] = 1.0 / e.magnitude,
                }
            }
        }
    }

    let mut values = vec![0.0; n * dims];
    for (c, shape) in shapes.iter().enumerate() {
        let noise = Normal::new(0.0, shape.noise).expect("positive noise");
        let mut phase = shape.phase;
        for t in 0..n {
            let clean = shape.offset + shape.slope * t as f64 + shape.amplitude * phase.sin();
            values[t * dims + c] = clean + additive[c][t] + noise.sample(&mut rng);
            phase += std::f64::consts::TAU / shape.period * rate[c][t];
        }
    }
    TimeSeries::new(format!("synth-{}", spec.seed), values, dims)?.with_labels(labels)
}

/// One labeled series fully determined by the spec.
pub fn synth_generate(spec: &SynthSpec) -> Result<TimeSeries> {
    render(spec, &shapes(spec), 1)
}

/// A clean training series and a contaminated test series sharing the same
/// per-variable shapes but independent noise.
pub fn synth_train_test(spec: &SynthSpec) -> Result<(TimeSeries, TimeSeries)> {
    let s = shapes(spec);
    let clean = SynthSpec {
        contamination: 0.0,
        ..spec.clone()
    };
    let train = render(&clean, &s, 2)?;
    let test = render(spec, &s, 3)?;
    Ok((train, test))
}
