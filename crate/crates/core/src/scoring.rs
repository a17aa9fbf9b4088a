//! Fit and score pipelines: window → decomposition → correlation matrices →
//! features → memory bank, and back from patch distances to per-timestep
//! anomaly scores.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Result, VistaError};
use crate::features::{aggregate_variables, extract_signal_features, AggregatedFeature, FeatureExtractor};
use crate::interp;
use crate::memory::{coreset_select, coreset_size, nearest_scores, rescale_score, MemoryBank};
use crate::series::{segment_windows, TailPolicy, TimeSeries, Window};
use crate::stl::{stl_decompose, StlParams};
use crate::tcm::{build_tcm, downsample_tcm};

/// Patch-level scores of one window and their upsampled `w_s × w_s` map.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    pub grid_height: usize,
    pub grid_width: usize,
    pub patch_scores: Vec<f64>,
    pub size: usize,
    pub upsampled: Vec<f64>,
}

impl AnomalyMap {
    pub fn from_patch_scores(patch_scores: Vec<f64>, grid_height: usize, grid_width: usize, size: usize) -> Self {
        let upsampled = interp::bilinear(&patch_scores, grid_height, grid_width, size, size);
        AnomalyMap {
            grid_height,
            grid_width,
            patch_scores,
            size,
            upsampled,
        }
    }

    /// One score per time column: the sum over rows of the upsampled map.
    pub fn timestep_scores(&self) -> Vec<f64> {
        let n = self.size;
        let mut out = vec![0.0; n];
        for row in self.upsampled.chunks_exact(n) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }
}

/// Per-position scores of a test series. Positions follow window order;
/// `index` gives the source timestep (the repeated row for padding).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesScores {
    pub scores: Vec<f64>,
    pub index: Vec<usize>,
    pub padded: Vec<bool>,
}

impl SeriesScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores of real (non-padded) positions, in order.
    pub fn observed(&self) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.padded)
            .filter(|(_, p)| !**p)
            .map(|(s, _)| *s)
            .collect()
    }

    /// Observed scores paired with the labels of their source timesteps.
    pub fn with_labels(&self, labels: &[u8]) -> Result<(Vec<f64>, Vec<u8>)> {
        let mut s = Vec::with_capacity(self.len());
        let mut l = Vec::with_capacity(self.len());
        for i in (0..self.len()).filter(|&i| !self.padded[i]) {
            let t = self.index[i];
            let label = *labels.get(t).ok_or_else(|| {
                VistaError::Data(format!("score at timestep {t} has no label ({} labels)", labels.len()))
            })?;
            s.push(self.scores[i]);
            l.push(label);
        }
        Ok((s, l))
    }

    /// `t,score,padded` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,score,padded\n");
        for i in 0..self.len() {
            s.push_str(&format!("{},{},{}\n", self.index[i], self.scores[i], self.padded[i] as u8));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut out = SeriesScores {
            scores: Vec::new(),
            index: Vec::new(),
            padded: Vec::new(),
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let bad = || VistaError::Data(format!("score csv line {}: cannot parse `{line}`", lineno + 1));
            let mut parts = line.split(',');
            let t: usize = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
            let score: f64 = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
            let padded = match parts.next().map(str::trim) {
                Some("1") => true,
                Some("0") | None => false,
                _ => return Err(bad()),
            };
            out.index.push(t);
            out.scores.push(score);
            out.padded.push(padded);
        }
        Ok(out)
    }
}

/// Resolved per-run state shared by the fit and score paths.
struct FeaturePath<'a> {
    cfg: &'a PipelineConfig,
    stl: StlParams,
    extractor: &'a FeatureExtractor,
}

impl<'a> FeaturePath<'a> {
    fn new(cfg: &'a PipelineConfig, extractor: &'a FeatureExtractor) -> Result<Self> {
        cfg.validate()?;
        Ok(FeaturePath {
            cfg,
            stl: cfg.stl_params()?,
            extractor,
        })
    }

    fn window_features(&self, window: &Window) -> Result<AggregatedFeature> {
        let decomposed = stl_decompose(window, &self.stl)?;
        let maps = (0..window.dims)
            .map(|c| {
                let tcm = build_tcm(&decomposed, c, &self.cfg.components)?;
                let small = downsample_tcm(&tcm)?;
                Ok(extract_signal_features(&small, self.extractor, self.cfg.layers))
            })
            .collect::<Result<Vec<_>>>()?;
        aggregate_variables(&maps, window.start_index)
    }

    fn series_windows(&self, series: &TimeSeries, tail: TailPolicy) -> Result<Vec<Window>> {
        let prepared;
        let series = if self.cfg.zscore {
            prepared = series.zscored();
            &prepared
        } else {
            series
        };
        segment_windows(series, self.cfg.window_size, tail)
    }
}

/// Aggregated features of every window of `series`, in window order.
pub fn series_features(
    series: &TimeSeries,
    cfg: &PipelineConfig,
    extractor: &FeatureExtractor,
    tail: TailPolicy,
) -> Result<Vec<(Window, AggregatedFeature)>> {
    let path = FeaturePath::new(cfg, extractor)?;
    let windows = path.series_windows(series, tail)?;
    windows
        .into_par_iter()
        .map(|w| {
            let f = path.window_features(&w)?;
            Ok((w, f))
        })
        .collect()
}

/// Row-major `N × D` candidate matrix of all patch vectors, window by window.
pub fn flatten_patches(features: &[AggregatedFeature]) -> (Vec<f32>, usize) {
    let dim = features.first().map(|f| f.dim).unwrap_or(0);
    let data = features.iter().flat_map(|f| f.data.iter().copied()).collect();
    (data, dim)
}

/// Builds the memory bank from a (normal) training series. Incomplete
/// trailing windows are dropped.
pub fn fit(train: &TimeSeries, cfg: &PipelineConfig, extractor: &FeatureExtractor) -> Result<MemoryBank> {
    let feats = series_features(train, cfg, extractor, TailPolicy::Drop)?;
    if feats.is_empty() {
        return Err(VistaError::Data("training series produced no windows".into()));
    }
    let feats: Vec<AggregatedFeature> = feats.into_iter().map(|(_, f)| f).collect();
    let (candidates, dim) = flatten_patches(&feats);
    let n = candidates.len() / dim;
    let bank = coreset_select(&candidates, dim, coreset_size(n, cfg.coreset_ratio), cfg.seed)?;
    Ok(bank.with_digest(cfg.feature_digest(extractor.identity())?))
}

fn check_digest(bank: &MemoryBank, cfg: &PipelineConfig, extractor: &FeatureExtractor) -> Result<()> {
    if bank.config_digest() != &cfg.feature_digest(extractor.identity())? {
        return Err(VistaError::DigestMismatch);
    }
    Ok(())
}

/// Rescaled nearest-neighbor score of every patch. `knn` is capped at the bank size.
pub fn patch_scores(feature: &AggregatedFeature, bank: &MemoryBank, knn: usize) -> Result<Vec<f64>> {
    let k = knn.min(bank.len());
    (0..feature.patches())
        .map(|p| {
            let near = nearest_scores(feature.patch(p), bank, k)?;
            Ok(rescale_score(near.s_star, &near.distances()))
        })
        .collect()
}

pub fn score_window(
    window: &Window,
    bank: &MemoryBank,
    extractor: &FeatureExtractor,
    cfg: &PipelineConfig,
) -> Result<(AnomalyMap, Vec<f64>)> {
    check_digest(bank, cfg, extractor)?;
    let path = FeaturePath::new(cfg, extractor)?;
    let feature = path.window_features(window)?;
    let map = AnomalyMap::from_patch_scores(
        patch_scores(&feature, bank, cfg.knn)?,
        feature.height,
        feature.width,
        window.size,
    );
    let per_step = map.timestep_scores();
    Ok((map, per_step))
}

/// Scores every window independently and concatenates the results in window order.
pub fn score_series(
    test: &TimeSeries,
    bank: &MemoryBank,
    extractor: &FeatureExtractor,
    cfg: &PipelineConfig,
) -> Result<SeriesScores> {
    check_digest(bank, cfg, extractor)?;
    let feats = series_features(test, cfg, extractor, cfg.tail_policy)?;
    let per_window: Vec<Vec<f64>> = feats
        .par_iter()
        .map(|(w, f)| {
            let scores = patch_scores(f, bank, cfg.knn)?;
            Ok(AnomalyMap::from_patch_scores(scores, f.height, f.width, w.size).timestep_scores())
        })
        .collect::<Result<_>>()?;
    Ok(stitch(&feats.iter().map(|(w, _)| w).collect::<Vec<_>>(), per_window))
}

pub(crate) fn stitch(windows: &[&Window], per_window: Vec<Vec<f64>>) -> SeriesScores {
    let mut out = SeriesScores {
        scores: Vec::new(),
        index: Vec::new(),
        padded: Vec::new(),
    };
    for (w, scores) in windows.iter().zip(per_window) {
        let observed = w.observed();
        for (i, s) in scores.into_iter().enumerate() {
            out.scores.push(s);
            out.index.push(w.start_index + i.min(observed - 1));
            out.padded.push(i >= observed);
        }
    }
    out
}

/// `1` where the score strictly exceeds `tau`.
pub fn predict(scores: &[f64], tau: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > tau)).collect()
}
