//! Grid search over window size, coreset ratio and neighbor count.
//!
//! Features are computed once per window size. Greedy coresets nest, so
//! every ratio's bank is a prefix of the largest one, and neighbor lists for
//! the largest `knn` serve every smaller one.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Result, VistaError};
use crate::eval::{optimal_f1, roc_auc};
use crate::features::{AggregatedFeature, FeatureExtractor};
use crate::memory::{coreset_size, greedy_order, initial_index, nearest_scores, rescale_score, MemoryBank};
use crate::scoring::{flatten_patches, series_features, stitch, AnomalyMap};
use crate::series::{TailPolicy, TimeSeries, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    pub window_sizes: Vec<usize>,
    pub coreset_ratios: Vec<f64>,
    pub knn: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        GridSpace {
            window_sizes: crate::config::WINDOW_SIZES.to_vec(),
            coreset_ratios: (1..=9).map(|i| i as f64 / 10.0).collect(),
            knn: (5..=15).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub window_size: usize,
    pub coreset_ratio: f64,
    pub knn: usize,
    pub bank_size: usize,
    pub f1: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub points: Vec<GridPoint>,
    /// Window sizes left out because a split was shorter than one window.
    pub skipped: Vec<usize>,
}

impl GridReport {
    /// Highest F1; ties go to the earliest point in grid order.
    pub fn best(&self) -> Option<&GridPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&GridPoint>, p| match best {
                Some(b) if b.f1 >= p.f1 => Some(b),
                _ => Some(p),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("window_size,coreset_ratio,knn,bank_size,f1,roc_auc\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.window_size, p.coreset_ratio, p.knn, p.bank_size, p.f1, p.roc_auc
            ));
        }
        s
    }
}

/// Evaluates every grid point on a labeled validation series. `base`
/// supplies all other settings.
pub fn grid_search(
    train: &TimeSeries,
    val: &TimeSeries,
    base: &PipelineConfig,
    extractor: &FeatureExtractor,
    space: &GridSpace,
) -> Result<GridReport> {
    let labels = val
        .labels()
        .ok_or_else(|| VistaError::Data("validation series needs labels".into()))?;
    if space.coreset_ratios.is_empty() || space.knn.is_empty() {
        return Err(VistaError::Config("grid needs at least one coreset ratio and one knn".into()));
    }
    let max_ratio = space.coreset_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_knn = *space.knn.iter().max().expect("non-empty");

    let mut report = GridReport {
        points: Vec::new(),
        skipped: Vec::new(),
    };
    for &w in &space.window_sizes {
        let cfg = PipelineConfig {
            window_size: w,
            ..base.clone()
        };
        for &r in &space.coreset_ratios {
            PipelineConfig {
                coreset_ratio: r,
                ..cfg.clone()
            }
            .validate()?;
        }
        let train_feats = match series_features(train, &cfg, extractor, TailPolicy::Drop) {
            Ok(f) if !f.is_empty() => f,
            Ok(_) | Err(VistaError::SeriesTooShort { .. }) => {
                report.skipped.push(w);
                continue;
            }
            Err(e) => return Err(e),
        };
        let val_feats = match series_features(val, &cfg, extractor, cfg.tail_policy) {
            Ok(f) => f,
            Err(VistaError::SeriesTooShort { .. }) => {
                report.skipped.push(w);
                continue;
            }
            Err(e) => return Err(e),
        };

        let train_feats: Vec<AggregatedFeature> = train_feats.into_iter().map(|(_, f)| f).collect();
        let (candidates, dim) = flatten_patches(&train_feats);
        let n = candidates.len() / dim;
        let order = greedy_order(&candidates, dim, coreset_size(n, max_ratio), initial_index(n, cfg.seed));
        let mut vectors = Vec::with_capacity(order.len() * dim);
        for &i in &order {
            vectors.extend_from_slice(&candidates[i * dim..(i + 1) * dim]);
        }
        let full = MemoryBank::new(dim, vectors, [0; 32], cfg.seed);
        let windows: Vec<&Window> = val_feats.iter().map(|(w, _)| w).collect();

        for &ratio in &space.coreset_ratios {
            let bank = full.prefix(coreset_size(n, ratio));
            let k_top = max_knn.min(bank.len());
            // per window, per patch: (s_star, ascending neighbor distances)
            let neighbors: Vec<Vec<(f64, Vec<f64>)>> = val_feats
                .par_iter()
                .map(|(_, f)| {
                    (0..f.patches())
                        .map(|p| {
                            let near = nearest_scores(f.patch(p), &bank, k_top)?;
                            Ok((near.s_star, near.distances()))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            for &knn in &space.knn {
                let k = knn.min(bank.len());
                let per_window: Vec<Vec<f64>> = val_feats
                    .iter()
                    .zip(&neighbors)
                    .map(|((w, f), patches)| {
                        let scores = patches.iter().map(|(s, d)| rescale_score(*s, &d[..k])).collect();
                        AnomalyMap::from_patch_scores(scores, f.height, f.width, w.size).timestep_scores()
                    })
                    .collect();
                let stitched = stitch(&windows, per_window);
                let (s, l) = stitched.with_labels(labels)?;
                report.points.push(GridPoint {
                    window_size: w,
                    coreset_ratio: ratio,
                    knn,
                    bank_size: bank.len(),
                    f1: optimal_f1(&s, &l, None)?.f1,
                    roc_auc: roc_auc(&s, &l, None)?,
                });
            }
        }
    }
    Ok(report)
}
