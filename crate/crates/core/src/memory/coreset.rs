use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bank::MemoryBank;
use super::knn::squared_distance;
use crate::error::{Result, VistaError};

/// Size of the coreset for `n` candidates: `ceil(ratio * n)`, at least 1.
pub fn coreset_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Seeded uniform choice of the first coreset member.
pub fn initial_index(n: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..n)
}

/// Greedy k-center selection starting from `start`: each step adds the
/// candidate farthest from its nearest selected vector, lowest index on ties.
/// Returns indices in selection order.
pub fn greedy_order(candidates: &[f32], dim: usize, k: usize, start: usize) -> Vec<usize> {
    let n = candidates.len() / dim;
    let row = |i: usize| &candidates[i * dim..(i + 1) * dim];
    let mut selected = Vec::with_capacity(k);
    // Squared distance to the nearest selected vector; -inf marks selected rows.
    let mut nearest = vec![f64::INFINITY; n];
    let mut newest = start;
    loop {
        selected.push(newest);
        nearest[newest] = f64::NEG_INFINITY;
        if selected.len() == k {
            break;
        }
        let pivot = row(newest);
        nearest.par_iter_mut().enumerate().for_each(|(i, d)| {
            if *d != f64::NEG_INFINITY {
                let dist = squared_distance(pivot, &candidates[i * dim..(i + 1) * dim]);
                if dist < *d {
                    *d = dist;
                }
            }
        });
        let mut best = 0;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        newest = best;
    }
    selected
}

/// Subsamples `candidates` (`N × dim`, row-major) to `k` rows with the greedy
/// coreset rule, starting from a row chosen uniformly with `seed`.
pub fn coreset_select(candidates: &[f32], dim: usize, k: usize, seed: u64) -> Result<MemoryBank> {
    if dim == 0 || !candidates.len().is_multiple_of(dim) {
        return Err(VistaError::Data(format!(
            "candidate buffer of {} values is not a multiple of dimension {dim}",
            candidates.len()
        )));
    }
    let n = candidates.len() / dim;
    if k < 1 || k > n {
        return Err(VistaError::Config(format!(
            "coreset size {k} must lie in [1, {n}] for {n} candidates"
        )));
    }
    let order = greedy_order(candidates, dim, k, initial_index(n, seed));
    let mut vectors = Vec::with_capacity(k * dim);
    for &i in &order {
        vectors.extend_from_slice(&candidates[i * dim..(i + 1) * dim]);
    }
    Ok(MemoryBank::new(dim, vectors, [0u8; 32], seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_farthest_point() {
        let c = [0.0f32, 1.0, 10.0];
        assert_eq!(greedy_order(&c, 1, 2, 0), vec![0, 2]);
        assert_eq!(greedy_order(&c, 1, 3, 0), vec![0, 2, 1]);
    }

    #[test]
    fn single_member_is_seeded_start() {
        let c: Vec<f32> = (0..40).map(|v| (v as f32).sin()).collect();
        for seed in 0..5 {
            let bank = coreset_select(&c, 2, 1, seed).unwrap();
            let s = initial_index(20, seed);
            assert_eq!(bank.vectors(), &c[s * 2..s * 2 + 2]);
        }
    }

    #[test]
    fn full_size_keeps_everything() {
        let c: Vec<f32> = (0..30).map(|v| (v * 7 % 11) as f32).collect();
        let order = greedy_order(&c, 3, 10, 4);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_never_reselected() {
        let c = vec![1.0f32; 12];
        let mut order = greedy_order(&c, 2, 6, 3);
        assert_eq!(order[0], 3);
        order.sort();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn size_errors() {
        let c = [0.0f32; 6];
        assert!(coreset_select(&c, 2, 0, 0).is_err());
        assert!(coreset_select(&c, 2, 4, 0).is_err());
        assert!(coreset_select(&c, 4, 1, 0).is_err());
    }

    #[test]
    fn sizes_round_up() {
        assert_eq!(coreset_size(8, 1.0), 8);
        assert_eq!(coreset_size(8, 0.5), 4);
        assert_eq!(coreset_size(9, 0.5), 5);
        assert_eq!(coreset_size(3, 0.01), 1);
    }
}
