//! Binary data whose pairwise correlations follow a latent binary tree.
//!
//! The variables are the leaves of a binary tree in heap layout (node 1 is the
//! root, node `i` has children `2i` and `2i + 1`, variable `v` sits at node
//! `vars + v`). Each instance draws a standard normal at the root and adds
//! independent `N(0, noise²)` at every edge; a variable is 1 when its leaf
//! latent is positive. Two variables share exactly the latent noise above
//! their lowest common ancestor, so correlation falls with tree distance.

use super::Dataset;
use crate::matrix::BinaryMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub vars: usize,
    pub rows: usize,
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            vars: 256,
            rows: 10_000,
            noise: 1.0,
        }
    }
}

/// 256 variables, 10000 rows split 7000/1000/2000.
pub fn gen_synthetic(seed: u64) -> Dataset {
    gen_synthetic_with(&SyntheticConfig::default(), seed)
}

pub fn gen_synthetic_with(config: &SyntheticConfig, seed: u64) -> Dataset {
    let n = config.vars;
    assert!(n >= 1, "need at least one variable");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latent = vec![0.0f64; 2 * n];
    let mut all = BinaryMatrix::zeros(config.rows, n);
    for r in 0..config.rows {
        for node in 1..2 * n {
            let z: f64 = StandardNormal.sample(&mut rng);
            latent[node] = if node == 1 {
                z
            } else {
                latent[node / 2] + config.noise * z
            };
        }
        for (v, bit) in all.row_mut(r).iter_mut().enumerate() {
            *bit = u8::from(latent[n + v] > 0.0);
        }
    }
    let train_end = config.rows * 7 / 10;
    let valid_end = train_end + config.rows / 10;
    let idx: Vec<usize> = (0..config.rows).collect();
    Dataset {
        name: "synthetic".into(),
        train: all.select(&idx[..train_end]),
        valid: all.select(&idx[train_end..valid_end]),
        test: all.select(&idx[valid_end..]),
    }
}

/// Number of edges between the leaves of variables `a` and `b`.
pub fn tree_distance(vars: usize, a: usize, b: usize) -> usize {
    let (mut x, mut y) = (vars + a, vars + b);
    let mut dist = 0;
    while x != y {
        if x > y {
            x /= 2;
        } else {
            y /= 2;
        }
        dist += 1;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_in_a_complete_tree() {
        assert_eq!(tree_distance(256, 0, 0), 0);
        assert_eq!(tree_distance(256, 0, 1), 2);
        assert_eq!(tree_distance(256, 0, 2), 4);
        assert_eq!(tree_distance(256, 0, 255), 16);
        assert_eq!(tree_distance(256, 127, 128), 16);
    }

    #[test]
    fn small_config_splits() {
        let ds = gen_synthetic_with(
            &SyntheticConfig {
                vars: 8,
                rows: 100,
                noise: 1.0,
            },
            3,
        );
        assert_eq!(
            (ds.train.rows(), ds.valid.rows(), ds.test.rows()),
            (70, 10, 20)
        );
        assert_eq!(ds.train.cols(), 8);
    }
}
