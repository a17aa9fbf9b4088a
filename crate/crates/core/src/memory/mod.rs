//! Memory bank of normal patch features: greedy coreset subsampling,
//! persistence, and exact nearest-neighbor scoring.

mod bank;
mod coreset;
mod knn;

pub use bank::{load_bank, save_bank, MemoryBank, BANK_MAGIC, BANK_VERSION};
pub use coreset::{coreset_select, coreset_size, greedy_order, initial_index};
pub use knn::{nearest_scores, rescale_score, squared_distance, Neighbor, NearestScores};
