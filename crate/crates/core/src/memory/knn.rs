use super::bank::MemoryBank;
use crate::error::{Result, VistaError};

/// Squared Euclidean distance accumulated in `f64`.
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestScores {
    /// Distance to the nearest bank vector.
    pub s_star: f64,
    /// The `K` nearest bank vectors, ascending by distance then index.
    pub neighbors: Vec<Neighbor>,
}

impl NearestScores {
    pub fn distances(&self) -> Vec<f64> {
        self.neighbors.iter().map(|n| n.distance).collect()
    }
}

/// Exact `K`-nearest-neighbor search by linear scan.
pub fn nearest_scores(query: &[f32], bank: &MemoryBank, k: usize) -> Result<NearestScores> {
    let size = bank.len();
    if size == 0 {
        return Err(VistaError::Data("memory bank is empty".into()));
    }
    if k < 1 || k > size {
        return Err(VistaError::Config(format!("knn {k} must lie in [1, {size}] for this bank")));
    }
    if query.len() != bank.dim() {
        return Err(VistaError::Data(format!(
            "query dimension {} does not match bank dimension {}",
            query.len(),
            bank.dim()
        )));
    }
    // (squared distance, index), kept sorted; ties resolve to the lower index
    // because indices are visited in increasing order and insertion is strict.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..size {
        let d = squared_distance(query, bank.row(i));
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    let neighbors: Vec<Neighbor> = best
        .into_iter()
        .map(|(d, index)| Neighbor { index, distance: d.sqrt() })
        .collect();
    Ok(NearestScores {
        s_star: neighbors[0].distance,
        neighbors,
    })
}

/// Density-aware reweighting of the nearest distance:
/// `(1 - exp(d_0) / sum_k exp(d_k)) * s_star`, where `d` are the query's
/// distances to its `K` nearest bank vectors (`d_0 = s_star`). Evaluated with
/// the largest distance subtracted inside every exponential. `K = 1` always
/// yields 0.
pub fn rescale_score(s_star: f64, neighbor_distances: &[f64]) -> f64 {
    let Some(&first) = neighbor_distances.first() else {
        return 0.0;
    };
    let shift = neighbor_distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = neighbor_distances.iter().map(|d| (d - shift).exp()).sum();
    let weight = 1.0 - (first - shift).exp() / denom;
    weight * s_star
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(dim: usize, v: Vec<f32>) -> MemoryBank {
        MemoryBank::new(dim, v, [0; 32], 0)
    }

    #[test]
    fn three_four_five() {
        let b = bank(2, vec![0.0, 0.0]);
        let r = nearest_scores(&[3.0, 4.0], &b, 1).unwrap();
        assert_eq!(r.s_star, 5.0);
    }

    #[test]
    fn exact_match_scores_zero() {
        let b = bank(2, vec![1.0, 2.0, 3.0, 4.0]);
        let r = nearest_scores(&[3.0, 4.0], &b, 2).unwrap();
        assert_eq!(r.s_star, 0.0);
        assert_eq!(r.neighbors[0].index, 1);
    }

    #[test]
    fn ties_resolve_to_lower_index() {
        let b = bank(1, vec![2.0, 0.0, 2.0, 0.0]);
        let r = nearest_scores(&[1.0], &b, 3).unwrap();
        let idx: Vec<usize> = r.neighbors.iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn argument_errors() {
        let b = bank(1, vec![0.0]);
        assert!(nearest_scores(&[0.0], &b, 2).is_err());
        assert!(nearest_scores(&[0.0], &b, 0).is_err());
        assert!(nearest_scores(&[0.0, 1.0], &b, 1).is_err());
        assert!(nearest_scores(&[0.0], &bank(1, vec![]), 1).is_err());
    }

    #[test]
    fn equal_distances_give_one_minus_inverse_k() {
        let r = rescale_score(2.0, &[3.0; 9]);
        assert!((r - 2.0 * 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(rescale_score(4.2, &[4.2]), 0.0);
    }

    #[test]
    fn three_distance_example() {
        let e = std::f64::consts::E;
        let direct = 1.0 - e / (e + e * e + e * e * e);
        let got = rescale_score(1.0, &[1.0, 2.0, 3.0]);
        assert!((got - direct).abs() < 1e-15, "{got} vs {direct}");
    }

    #[test]
    fn large_distances_stay_finite() {
        let r = rescale_score(1000.0, &[1000.0, 1001.0, 1500.0]);
        assert!(r.is_finite() && r > 0.0 && r <= 1000.0);
    }

    #[test]
    fn sparse_neighborhood_raises_factor() {
        let tight = rescale_score(1.0, &[1.0, 1.0 + 1e-6, 1.0 + 2e-6, 1.0 + 3e-6, 1.0 + 4e-6]);
        let sparse = rescale_score(1.0, &[1.0, 30.0, 40.0, 50.0, 60.0]);
        assert!((tight - 0.8).abs() < 1e-5);
        assert!(sparse > 0.999_999);
        assert!(sparse > tight);
    }
}
