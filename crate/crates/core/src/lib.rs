//! Training-free multivariate time-series anomaly detection.
//!
//! Windows are decomposed into trend, seasonal and residual parts, turned
//! into per-variable temporal correlation images, embedded by a frozen
//! ResNet-18, and scored by nearest-neighbor distance to a coreset memory
//! bank built from normal data.

pub mod cli;
pub mod config;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod features;
pub mod interp;
pub mod kv;
pub mod memory;
pub mod scoring;
pub mod series;
pub mod stl;
pub mod tcm;
pub mod tuning;

pub use config::PipelineConfig;
pub use error::{Result, VistaError};
pub use eval::{evaluate, optimal_f1, roc_auc, EvalReport};
pub use features::{load_extractor, ExtractorSpec, FeatureExtractor, LayerSet};
pub use memory::{load_bank, save_bank, MemoryBank};
pub use scoring::{fit, score_series, SeriesScores};
pub use series::{segment_windows, TailPolicy, TimeSeries, Window};
