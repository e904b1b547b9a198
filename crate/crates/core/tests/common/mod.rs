//! Brute-force reference evaluators used as oracles by the integration tests.
#![allow(dead_code)]

use hyperspn::circuit::{leaf_probability, CircuitStructure, NodeKind, VarState, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linear-space evaluation of the circuit straight from its definition:
/// weighted sums and plain products, recursing from the root.
pub fn naive_prob(structure: &CircuitStructure, weights: &WeightStore, states: &[VarState]) -> f64 {
    let top = weights.sector(structure.top_sector());
    structure
        .replicas()
        .iter()
        .zip(top)
        .map(|(tree, w)| w * node_values(structure, weights, tree, tree.root(), states)[0])
        .sum()
}

fn node_values(
    structure: &CircuitStructure,
    weights: &WeightStore,
    tree: &hyperspn::circuit::ReplicaTree,
    node: usize,
    states: &[VarState],
) -> Vec<f64> {
    let n = &tree.nodes[node];
    let sector = structure.sector(n.sector);
    let w = weights.sector(sector);
    let inputs: Vec<f64> = match n.kind {
        NodeKind::Leaf { var } => (0..sector.cols)
            .map(|j| {
                let p = leaf_probability(j, structure.leaves());
                match states[var] {
                    VarState::One => p,
                    VarState::Zero => 1.0 - p,
                    VarState::Marginal => 1.0,
                }
            })
            .collect(),
        NodeKind::Merge { left, right } => {
            let a = node_values(structure, weights, tree, left, states);
            let b = node_values(structure, weights, tree, right, states);
            a.iter().zip(&b).map(|(x, y)| x * y).collect()
        }
    };
    (0..sector.rows)
        .map(|i| {
            (0..sector.cols)
                .map(|j| w[i * sector.cols + j] * inputs[j])
                .sum()
        })
        .collect()
}

/// Every complete assignment of `n` binary variables.
pub fn assignments(n: usize) -> Vec<Vec<u8>> {
    (0..1u32 << n)
        .map(|m| (0..n).map(|v| ((m >> v) & 1) as u8).collect())
        .collect()
}

/// Marginal probability by summing the naive evaluator over all completions.
pub fn enumerated_marginal(
    structure: &CircuitStructure,
    weights: &WeightStore,
    states: &[VarState],
) -> f64 {
    assignments(states.len())
        .iter()
        .filter(|x| {
            states.iter().zip(x.iter()).all(|(s, &b)| match s {
                VarState::Marginal => true,
                VarState::Zero => b == 0,
                VarState::One => b == 1,
            })
        })
        .map(|x| {
            let complete: Vec<VarState> = x.iter().map(|&b| VarState::from_bit(b)).collect();
            naive_prob(structure, weights, &complete)
        })
        .sum()
}

pub fn random_weights(structure: &CircuitStructure, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits: Vec<f64> = (0..structure.param_count())
        .map(|_| rng.random_range(-2.5..2.5))
        .collect();
    WeightStore::from_logits(structure, &logits).unwrap()
}

pub fn random_states(n: usize, rng: &mut impl Rng) -> Vec<VarState> {
    (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => VarState::Zero,
            1 => VarState::One,
            _ => VarState::Marginal,
        })
        .collect()
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}
