//! Pipeline configuration, its key-value file form, and the digest that ties a
//! memory bank to the settings that produced its features.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, VistaError};
use crate::features::{ExtractorSpec, LayerSet};
use crate::kv;
use crate::series::TailPolicy;
use crate::stl::{LoessDegree, SeasonalSmoother, StlOverrides, StlParams};
use crate::tcm::ComponentSet;

/// Window sizes searched by the tuning grid.
pub const WINDOW_SIZES: [usize; 6] = [32, 64, 128, 256, 512, 1024];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_size: usize,
    pub seasonal_ratio: f64,
    pub coreset_ratio: f64,
    pub knn: usize,
    pub layers: LayerSet,
    pub components: ComponentSet,
    /// Tail handling when scoring. Fitting always drops incomplete windows.
    pub tail_policy: TailPolicy,
    pub extractor: ExtractorSpec,
    /// Seed of the coreset's initial pick.
    pub seed: u64,
    /// Per-variable z-scoring of each input series; off by default.
    pub zscore: bool,
    pub stl: StlOverrides,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window_size: 64,
            seasonal_ratio: 0.5,
            coreset_ratio: 0.5,
            knn: 9,
            layers: LayerSet::default(),
            components: ComponentSet::default(),
            tail_policy: TailPolicy::PadRepeat,
            extractor: ExtractorSpec::Seeded(0),
            seed: 0,
            zscore: false,
            stl: StlOverrides::default(),
        }
    }
}

/// Every key accepted in a config file.
pub const CONFIG_KEYS: [&str; 16] = [
    "window_size",
    "seasonal_ratio",
    "coreset_ratio",
    "knn",
    "layers",
    "components",
    "tail_policy",
    "extractor",
    "seed",
    "zscore",
    "stl_seasonal",
    "stl_trend_span",
    "stl_lowpass_span",
    "stl_inner_iters",
    "stl_outer_iters",
    "stl_degree",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| VistaError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(VistaError::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !WINDOW_SIZES.contains(&self.window_size) {
            return Err(VistaError::Config(format!(
                "window size {} is not one of {:?}",
                self.window_size, WINDOW_SIZES
            )));
        }
        if !(self.coreset_ratio > 0.0 && self.coreset_ratio <= 1.0) {
            return Err(VistaError::Config(format!(
                "coreset_ratio must lie in (0, 1], got {}",
                self.coreset_ratio
            )));
        }
        if self.knn < 1 {
            return Err(VistaError::Config("knn must be at least 1".into()));
        }
        self.components.validate()?;
        self.stl_params()?;
        Ok(())
    }

    pub fn stl_params(&self) -> Result<StlParams> {
        StlParams::resolve(self.window_size, self.seasonal_ratio, &self.stl)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "window_size" => self.window_size = parse_num(key, value)?,
            "seasonal_ratio" => self.seasonal_ratio = parse_num(key, value)?,
            "coreset_ratio" => self.coreset_ratio = parse_num(key, value)?,
            "knn" => self.knn = parse_num(key, value)?,
            "layers" => self.layers = value.parse()?,
            "components" => self.components = value.parse()?,
            "tail_policy" => self.tail_policy = value.parse()?,
            "extractor" => self.extractor = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "zscore" => self.zscore = parse_bool(key, value)?,
            "stl_seasonal" => self.stl.seasonal = Some(value.parse::<SeasonalSmoother>()?),
            "stl_trend_span" => self.stl.trend_span = Some(parse_num(key, value)?),
            "stl_lowpass_span" => self.stl.lowpass_span = Some(parse_num(key, value)?),
            "stl_inner_iters" => self.stl.inner_iters = Some(parse_num(key, value)?),
            "stl_outer_iters" => self.stl.outer_iters = Some(parse_num(key, value)?),
            "stl_degree" => self.stl.degree = Some(LoessDegree::from_int(parse_num(key, value)?)?),
            other => return Err(VistaError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in entries {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&kv::parse(text)?)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&kv::read(path)?)?;
        Ok(cfg)
    }

    /// Serializes every field. STL overrides that are unset are omitted so
    /// the derived defaults stay in force on reload.
    pub fn to_kv_text(&self) -> String {
        let mut e: Vec<(&str, String)> = vec![
            ("window_size", self.window_size.to_string()),
            ("seasonal_ratio", self.seasonal_ratio.to_string()),
            ("coreset_ratio", self.coreset_ratio.to_string()),
            ("knn", self.knn.to_string()),
            ("layers", self.layers.to_string()),
            ("components", self.components.to_string()),
            ("tail_policy", self.tail_policy.as_str().to_string()),
            ("extractor", self.extractor.to_string()),
            ("seed", self.seed.to_string()),
            ("zscore", self.zscore.to_string()),
        ];
        let s = &self.stl;
        if let Some(v) = s.seasonal {
            e.push(("stl_seasonal", v.to_string()));
        }
        if let Some(v) = s.trend_span {
            e.push(("stl_trend_span", v.to_string()));
        }
        if let Some(v) = s.lowpass_span {
            e.push(("stl_lowpass_span", v.to_string()));
        }
        if let Some(v) = s.inner_iters {
            e.push(("stl_inner_iters", v.to_string()));
        }
        if let Some(v) = s.outer_iters {
            e.push(("stl_outer_iters", v.to_string()));
        }
        if let Some(v) = s.degree {
            e.push(("stl_degree", v.as_int().to_string()));
        }
        kv::render(&e)
    }

    /// SHA-256 over every setting that shapes the patch features, plus the
    /// extractor's weight identity. Score-time settings (knn, tail policy)
    /// and the coreset size are excluded so one bank serves any of them.
    pub fn feature_digest(&self, extractor_identity: &str) -> Result<[u8; 32]> {
        let stl = self.stl_params()?;
        let canonical = format!(
            "window_size={}\nseasonal_ratio={}\nlayers={}\ncomponents={}\nzscore={}\n\
             stl_period={}\nstl_seasonal={}\nstl_trend_span={}\nstl_lowpass_span={}\n\
             stl_inner_iters={}\nstl_outer_iters={}\nstl_degree={}\nextractor={}\n",
            self.window_size,
            self.seasonal_ratio,
            self.layers,
            self.components,
            self.zscore,
            stl.period,
            stl.seasonal,
            stl.trend_span,
            stl.lowpass_span,
            stl.inner_iters,
            stl.outer_iters,
            stl.degree.as_int(),
            extractor_identity
        );
        Ok(Sha256::digest(canonical.as_bytes()).into())
    }
}
