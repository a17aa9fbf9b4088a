//! Temporal correlation matrices: per-variable outer products of the
//! decomposed components, stacked as three channels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, VistaError};
use crate::interp;
use crate::stl::DecomposedWindow;

/// Side length of the matrices fed to the feature extractor.
pub const TCM_SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Original,
    Trend,
    Seasonal,
    Residual,
}

impl Component {
    fn name(self) -> &'static str {
        match self {
            Component::Original => "original",
            Component::Trend => "trend",
            Component::Seasonal => "seasonal",
            Component::Residual => "residual",
        }
    }
}

/// Subset of components placed in the three channels. `original` and `trend`
/// both occupy channel 0, so they cannot be selected together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentSet {
    pub original: bool,
    pub trend: bool,
    pub seasonal: bool,
    pub residual: bool,
}

impl Default for ComponentSet {
    fn default() -> Self {
        ComponentSet {
            original: false,
            trend: true,
            seasonal: true,
            residual: true,
        }
    }
}

impl ComponentSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.original || self.trend || self.seasonal || self.residual) {
            return Err(VistaError::Config("component selection is empty".into()));
        }
        if self.original && self.trend {
            return Err(VistaError::Config(
                "components `original` and `trend` both map to channel 0".into(),
            ));
        }
        Ok(())
    }

    /// Component feeding each channel, `None` for zero-filled channels.
    pub fn channels(&self) -> [Option<Component>; 3] {
        let first = if self.original {
            Some(Component::Original)
        } else if self.trend {
            Some(Component::Trend)
        } else {
            None
        };
        [
            first,
            self.seasonal.then_some(Component::Seasonal),
            self.residual.then_some(Component::Residual),
        ]
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.original, Component::Original),
            (self.trend, Component::Trend),
            (self.seasonal, Component::Seasonal),
            (self.residual, Component::Residual),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, c)| c.name())
        .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for ComponentSet {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = ComponentSet {
            original: false,
            trend: false,
            seasonal: false,
            residual: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "original" => set.original = true,
                "trend" => set.trend = true,
                "seasonal" => set.seasonal = true,
                "residual" => set.residual = true,
                other => {
                    return Err(VistaError::Config(format!(
                        "unknown component `{other}` (expected original, trend, seasonal, residual)"
                    )))
                }
            }
        }
        set.validate()?;
        Ok(set)
    }
}

/// Three `size × size` channels (trend, seasonal, residual), row-major, not normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCorrelationMatrix {
    pub size: usize,
    pub variable_index: usize,
    pub window_start: usize,
    pub channels: [Vec<f64>; 3],
}

/// A correlation matrix resampled to `32 × 32 × 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tcm32 {
    pub variable_index: usize,
    pub window_start: usize,
    pub channels: [Vec<f64>; 3],
}

fn outer(v: &[f64]) -> Vec<f64> {
    let mut m = Vec::with_capacity(v.len() * v.len());
    for &a in v {
        m.extend(v.iter().map(|&b| a * b));
    }
    m
}

pub fn build_tcm(d: &DecomposedWindow, variable: usize, components: &ComponentSet) -> Result<TemporalCorrelationMatrix> {
    if variable >= d.dims {
        return Err(VistaError::Config(format!(
            "variable index {variable} out of range for {} variables",
            d.dims
        )));
    }
    components.validate()?;
    let size = d.size;
    let channels = components.channels().map(|slot| match slot {
        None => vec![0.0; size * size],
        Some(Component::Original) => outer(&d.original_column(variable)),
        Some(Component::Trend) => outer(&d.trend_column(variable)),
        Some(Component::Seasonal) => outer(&d.seasonal_column(variable)),
        Some(Component::Residual) => outer(&d.residual_column(variable)),
    });
    Ok(TemporalCorrelationMatrix {
        size,
        variable_index: variable,
        window_start: d.start_index,
        channels,
    })
}

/// Area averaging when the side is a multiple of 32, bilinear otherwise.
pub fn downsample_tcm(m: &TemporalCorrelationMatrix) -> Result<Tcm32> {
    if m.size < TCM_SIDE {
        return Err(VistaError::Config(format!(
            "window size {} is below the {TCM_SIDE}-point minimum for downsampling",
            m.size
        )));
    }
    let channels = m.channels.clone().map(|ch| {
        if m.size == TCM_SIDE {
            ch
        } else if m.size.is_multiple_of(TCM_SIDE) {
            interp::block_mean(&ch, m.size, m.size / TCM_SIDE)
        } else {
            interp::bilinear(&ch, m.size, m.size, TCM_SIDE, TCM_SIDE)
        }
    });
    Ok(Tcm32 {
        variable_index: m.variable_index,
        window_start: m.window_start,
        channels,
    })
}

impl Tcm32 {
    /// Channel-major `3 × 32 × 32` single-precision tensor for the extractor.
    pub fn to_chw(&self) -> Vec<f32> {
        self.channels.iter().flat_map(|c| c.iter().map(|&v| v as f32)).collect()
    }

    pub fn render_png(&self, path: &Path) -> Result<()> {
        render_channels_png(TCM_SIDE, &self.channels, path)
    }
}

impl TemporalCorrelationMatrix {
    pub fn render_png(&self, path: &Path) -> Result<()> {
        render_channels_png(self.size, &self.channels, path)
    }
}

/// Maps each channel independently from its `[min, max]` to `[0, 255]`;
/// constant channels render as 0. R = channel 0, G = 1, B = 2.
pub fn to_rgb8(size: usize, channels: &[Vec<f64>; 3]) -> Vec<u8> {
    let ranges: Vec<(f64, f64)> = channels
        .iter()
        .map(|c| {
            c.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .collect();
    let mut pixels = Vec::with_capacity(size * size * 3);
    for i in 0..size * size {
        for (k, ch) in channels.iter().enumerate() {
            let (lo, hi) = ranges[k];
            let v = if hi > lo {
                ((ch[i] - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            pixels.push(v);
        }
    }
    pixels
}

pub fn render_channels_png(size: usize, channels: &[Vec<f64>; 3], path: &Path) -> Result<()> {
    let pixels = to_rgb8(size, channels);
    let file = std::fs::File::create(path).map_err(|e| VistaError::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), size as u32, size as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| VistaError::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&pixels).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}
