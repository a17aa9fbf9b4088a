//! Convolutional features of downsampled correlation matrices, concatenated
//! across the selected layers and summed across variables.

pub mod resnet;
pub mod weights;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Result, VistaError};
use crate::interp;
use crate::tcm::{Tcm32, TCM_SIDE};
use resnet::{Activation, ResNet18, INPUT_CHANNELS};

/// Where extractor weights come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractorSpec {
    Seeded(u64),
    File(PathBuf),
}

impl FromStr for ExtractorSpec {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("seeded:") {
            Some(seed) => seed
                .trim()
                .parse()
                .map(ExtractorSpec::Seeded)
                .map_err(|_| VistaError::Config(format!("invalid extractor seed `{seed}`"))),
            None if s.is_empty() => Err(VistaError::Config("empty extractor spec".into())),
            None => Ok(ExtractorSpec::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for ExtractorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractorSpec::Seeded(s) => write!(f, "seeded:{s}"),
            ExtractorSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Non-empty subset of the intermediate stages {2, 3, 4}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSet(u8);

impl LayerSet {
    pub fn new(layers: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &l in layers {
            if !(2..=4).contains(&l) {
                return Err(VistaError::Config(format!("layer {l} is not one of 2, 3, 4")));
            }
            bits |= 1 << l;
        }
        if bits == 0 {
            return Err(VistaError::Config("layer selection is empty".into()));
        }
        Ok(LayerSet(bits))
    }

    /// Selected layers in ascending order.
    pub fn layers(&self) -> Vec<usize> {
        (2..=4).filter(|l| self.0 & (1 << l) != 0).collect()
    }

    pub fn shallowest(&self) -> usize {
        self.layers()[0]
    }

    pub fn deepest(&self) -> usize {
        *self.layers().last().unwrap()
    }

    /// All seven non-empty subsets.
    pub fn all() -> Vec<LayerSet> {
        (1u8..8).map(|m| LayerSet(m << 2)).collect()
    }
}

impl Default for LayerSet {
    fn default() -> Self {
        LayerSet::new(&[3, 4]).unwrap()
    }
}

impl fmt::Display for LayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.layers().iter().map(|l| l.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

impl FromStr for LayerSet {
    type Err = VistaError;

    fn from_str(s: &str) -> Result<Self> {
        let layers = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| VistaError::Config(format!("invalid layer index `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        LayerSet::new(&layers)
    }
}

/// Output geometry `(height, width, channels)` of a stage for a 32×32×3 input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// A loaded, read-only ResNet-18 feature extractor.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    net: ResNet18,
    identity: String,
}

impl FeatureExtractor {
    pub fn seeded(seed: u64) -> Self {
        FeatureExtractor {
            net: ResNet18::seeded(seed),
            identity: format!("seeded:{seed}"),
        }
    }

    pub fn from_weight_bytes(bytes: &[u8]) -> Result<Self> {
        let tensors = weights::parse_weights(bytes)?;
        let net = ResNet18::from_tensors(&tensors)?;
        Ok(FeatureExtractor {
            net,
            identity: format!("sha256:{}", hex::encode(Sha256::digest(bytes))),
        })
    }

    /// Stable identifier of the weights: the seed, or the SHA-256 of the file.
    pub fn identity(&self) -> &str {
        &self.identity
    }

    /// Declared output geometry of stages 1 to 4.
    pub fn layer_geometry(&self) -> [LayerGeometry; 4] {
        let mut side = TCM_SIDE / 4;
        let mut out = [LayerGeometry { height: 0, width: 0, channels: 0 }; 4];
        for (i, &channels) in resnet::STAGE_WIDTHS.iter().enumerate() {
            if i > 0 {
                side = side.div_ceil(2);
            }
            out[i] = LayerGeometry { height: side, width: side, channels };
        }
        out
    }

    pub fn to_tensors(&self) -> Vec<(String, weights::Tensor)> {
        self.net.to_tensors()
    }

    /// Raw stage outputs `1..=deepest` for a `3 × 32 × 32` channel-major input.
    pub fn forward(&self, chw: &[f32], deepest: usize) -> Vec<Activation> {
        assert_eq!(chw.len(), INPUT_CHANNELS * TCM_SIDE * TCM_SIDE);
        let input = Activation {
            channels: INPUT_CHANNELS,
            height: TCM_SIDE,
            width: TCM_SIDE,
            data: chw.to_vec(),
        };
        self.net.forward(input, deepest)
    }
}

fn checksum_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    PathBuf::from(s)
}

/// Builds an extractor from `seeded:<seed>` or a weight file. When a
/// `<file>.sha256` sidecar exists its first token must equal the file's
/// SHA-256 digest.
pub fn load_extractor(spec: &ExtractorSpec) -> Result<FeatureExtractor> {
    match spec {
        ExtractorSpec::Seeded(seed) => Ok(FeatureExtractor::seeded(*seed)),
        ExtractorSpec::File(path) => {
            let bytes = std::fs::read(path).map_err(|e| VistaError::io(path, e))?;
            let sidecar = checksum_sidecar(path);
            if let Ok(text) = std::fs::read_to_string(&sidecar) {
                let want = text.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
                let got = hex::encode(Sha256::digest(&bytes));
                if want != got {
                    return Err(VistaError::Weights {
                        tensor: "<file>".into(),
                        message: format!("checksum mismatch: {} declares {want}, file hashes to {got}", sidecar.display()),
                    });
                }
            }
            FeatureExtractor::from_weight_bytes(&bytes)
        }
    }
}

/// Per-variable feature grid: `height × width` cells, each a vector of `dim`
/// values, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFeatureMap {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub variable_index: usize,
    pub data: Vec<f32>,
}

impl SignalFeatureMap {
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let i = row * self.width + col;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Sum of all variables' feature maps for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFeature {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub window_start: usize,
    pub data: Vec<f32>,
}

impl AggregatedFeature {
    pub fn patches(&self) -> usize {
        self.height * self.width
    }

    pub fn patch(&self, p: usize) -> &[f32] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }
}

/// Runs the extractor and concatenates the selected stages, resizing deeper
/// stages bilinearly to the grid of the shallowest selected stage.
pub fn extract_signal_features(x: &Tcm32, extractor: &FeatureExtractor, layers: LayerSet) -> SignalFeatureMap {
    let stages = extractor.forward(&x.to_chw(), layers.deepest());
    let base = &stages[layers.shallowest() - 1];
    let (h, w) = (base.height, base.width);
    let selected: Vec<&Activation> = layers.layers().iter().map(|&l| &stages[l - 1]).collect();
    let dim: usize = selected.iter().map(|a| a.channels).sum();

    let mut data = vec![0.0f32; h * w * dim];
    let mut offset = 0;
    for act in selected {
        let plane = act.height * act.width;
        for ch in 0..act.channels {
            let src = &act.data[ch * plane..(ch + 1) * plane];
            let resized: Vec<f32> = if (act.height, act.width) == (h, w) {
                src.to_vec()
            } else {
                let s64: Vec<f64> = src.iter().map(|&v| v as f64).collect();
                interp::bilinear(&s64, act.height, act.width, h, w)
                    .into_iter()
                    .map(|v| v as f32)
                    .collect()
            };
            for (cell, v) in resized.into_iter().enumerate() {
                data[cell * dim + offset + ch] = v;
            }
        }
        offset += act.channels;
    }
    SignalFeatureMap {
        height: h,
        width: w,
        dim,
        variable_index: x.variable_index,
        data,
    }
}

/// Cell-wise sum over variables, accumulated left to right in `f64`.
pub fn aggregate_variables(maps: &[SignalFeatureMap], window_start: usize) -> Result<AggregatedFeature> {
    let first = maps
        .first()
        .ok_or_else(|| VistaError::Data("no feature maps to aggregate".into()))?;
    let (h, w, dim) = (first.height, first.width, first.dim);
    let mut acc = vec![0.0f64; h * w * dim];
    for (i, m) in maps.iter().enumerate() {
        if (m.height, m.width, m.dim) != (h, w, dim) {
            return Err(VistaError::Data(format!(
                "feature map of variable {i} has shape {}x{}x{}, expected {h}x{w}x{dim}",
                m.height, m.width, m.dim
            )));
        }
        acc.iter_mut().zip(&m.data).for_each(|(a, &v)| *a += v as f64);
    }
    Ok(AggregatedFeature {
        height: h,
        width: w,
        dim,
        window_start,
        data: acc.into_iter().map(|v| v as f32).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tcm_filled(v: f64) -> Tcm32 {
        Tcm32 {
            variable_index: 0,
            window_start: 0,
            channels: [vec![v; 1024], vec![0.5 * v; 1024], vec![-v; 1024]],
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("seeded:42".parse::<ExtractorSpec>().unwrap(), ExtractorSpec::Seeded(42));
        assert!("seeded:x".parse::<ExtractorSpec>().is_err());
        assert_eq!(
            "w/resnet.vstw".parse::<ExtractorSpec>().unwrap(),
            ExtractorSpec::File("w/resnet.vstw".into())
        );
    }

    #[test]
    fn layer_set_parsing() {
        assert_eq!("3,4".parse::<LayerSet>().unwrap().layers(), vec![3, 4]);
        assert_eq!("4, 2".parse::<LayerSet>().unwrap().layers(), vec![2, 4]);
        assert!("1".parse::<LayerSet>().is_err());
        assert!("5".parse::<LayerSet>().is_err());
        assert!("".parse::<LayerSet>().is_err());
        assert_eq!(LayerSet::all().len(), 7);
    }

    #[test]
    fn reference_geometry() {
        let g = FeatureExtractor::seeded(0).layer_geometry();
        assert_eq!((g[1].height, g[1].width, g[1].channels), (4, 4, 128));
        assert_eq!((g[2].height, g[2].width, g[2].channels), (2, 2, 256));
        assert_eq!((g[3].height, g[3].width, g[3].channels), (1, 1, 512));
    }

    #[test]
    fn seeded_is_deterministic() {
        let a = FeatureExtractor::seeded(42);
        let b = FeatureExtractor::seeded(42);
        let x = tcm_filled(0.3);
        let fa = extract_signal_features(&x, &a, LayerSet::default());
        let fb = extract_signal_features(&x, &b, LayerSet::default());
        assert_eq!(fa, fb);
        let c = FeatureExtractor::seeded(43);
        assert_ne!(fa, extract_signal_features(&x, &c, LayerSet::default()));
    }

    #[test]
    fn single_layer_four() {
        let f = extract_signal_features(&tcm_filled(1.0), &FeatureExtractor::seeded(1), "4".parse().unwrap());
        assert_eq!((f.height, f.width, f.dim), (1, 1, 512));
    }

    #[test]
    fn layer_four_replicated_across_layer_three_grid() {
        let e = FeatureExtractor::seeded(5);
        let x = tcm_filled(2.0);
        let f = extract_signal_features(&x, &e, LayerSet::default());
        assert_eq!((f.height, f.width, f.dim), (2, 2, 768));
        let deep = extract_signal_features(&x, &e, "4".parse().unwrap());
        let shallow = extract_signal_features(&x, &e, "3".parse().unwrap());
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(&f.cell(r, c)[..256], shallow.cell(r, c));
                assert_eq!(&f.cell(r, c)[256..], deep.cell(0, 0));
            }
        }
    }

    #[test]
    fn zero_input_response_is_stable() {
        let e = FeatureExtractor::seeded(9);
        let x = tcm_filled(0.0);
        let a = extract_signal_features(&x, &e, LayerSet::default());
        let b = extract_signal_features(&x, &e, LayerSet::default());
        assert_eq!(a, b);
        // zero biases and zero input propagate to an all-zero response
        assert!(a.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregation_shape_mismatch_names_variable() {
        let m = |dim| SignalFeatureMap {
            height: 1,
            width: 1,
            dim,
            variable_index: 0,
            data: vec![1.0; dim],
        };
        let err = aggregate_variables(&[m(2), m(2), m(3)], 0).unwrap_err().to_string();
        assert!(err.contains("variable 2"), "{err}");
    }

    #[test]
    fn aggregation_single_and_cancelling() {
        let a = SignalFeatureMap {
            height: 1,
            width: 2,
            dim: 2,
            variable_index: 0,
            data: vec![1.0, -2.0, 3.5, 0.25],
        };
        let one = aggregate_variables(std::slice::from_ref(&a), 7).unwrap();
        assert_eq!(one.data, a.data);
        assert_eq!(one.window_start, 7);
        let mut neg = a.clone();
        neg.data.iter_mut().for_each(|v| *v = -*v);
        let zero = aggregate_variables(&[a, neg], 0).unwrap();
        assert!(zero.data.iter().all(|&v| v == 0.0));
    }
}
