#![allow(dead_code)]

use neseek::{Game64, Matrix64};
use rand::Rng;

pub const CONNECTIVITY_SOURCES: [[f64; 2]; 4] = [[-4.0, -8.0], [-12.0, -3.0], [1.0, 7.0], [16.0, 8.0]];
pub const CONNECTIVITY_PERIODS: [f64; 4] = [0.01, 0.015, 0.02, 0.01];
pub const CONNECTIVITY_TAU0: [f64; 4] = [0.0, 0.002, 0.004, 0.006];

pub fn connectivity() -> Game64 {
    let sources = CONNECTIVITY_SOURCES.iter().map(|s| s.to_vec()).collect();
    Game64::connectivity(sources, 0.04).unwrap()
}

/// Splits `m` coordinates into random agent blocks.
pub fn random_dims<R: Rng>(rng: &mut R, m: usize) -> Vec<usize> {
    let mut dims = Vec::new();
    let mut left = m;
    while left > 0 {
        let d = rng.random_range(1..=left.min(3));
        dims.push(d);
        left -= d;
    }
    dims
}

/// `Q = BBᵀ + δI + K` with `K` skew-symmetric off the diagonal blocks, so the diagonal
/// blocks stay symmetric and `(Q + Qᵀ)/2 ⪰ δI`.
pub fn random_quadratic<R: Rng>(rng: &mut R, dims: &[usize]) -> Game64 {
    let m: usize = dims.iter().sum();
    let owner: Vec<usize> = dims.iter().enumerate().flat_map(|(i, &d)| vec![i; d]).collect();
    let b: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let delta = rng.random_range(0.2..1.5);
    let mut rows = vec![vec![0.0; m]; m];
    for r in 0..m {
        for c in 0..m {
            rows[r][c] = (0..m).map(|t| b[r][t] * b[c][t]).sum::<f64>();
        }
        rows[r][r] += delta;
    }
    for r in 0..m {
        for c in r + 1..m {
            if owner[r] != owner[c] {
                let k = rng.random_range(-0.5..0.5);
                rows[r][c] += k;
                rows[c][r] -= k;
            }
        }
    }
    let q = Matrix64::from_rows(&rows).unwrap();
    let offset = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    Game64::quadratic(dims.to_vec(), q, offset).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, m: usize, scale: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-scale..scale)).collect()
}
