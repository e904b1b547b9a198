//! Reference computations for the acceptance suite, written straight from
//! the circuit definition and independent of the library's evaluators.
#![allow(dead_code)]

use hyperspn::circuit::{
    leaf_probability, CircuitStructure, NodeKind, ReplicaTree, VarState, WeightStore,
};

/// Probability of `states` by recursive weighted sums and plain products.
pub fn prob(structure: &CircuitStructure, weights: &WeightStore, states: &[VarState]) -> f64 {
    let top = weights.sector(structure.top_sector());
    structure
        .replicas()
        .iter()
        .zip(top)
        .map(|(tree, w)| w * node(structure, weights, tree, tree.root(), states)[0])
        .sum()
}

fn node(
    structure: &CircuitStructure,
    weights: &WeightStore,
    tree: &ReplicaTree,
    id: usize,
    states: &[VarState],
) -> Vec<f64> {
    let n = &tree.nodes[id];
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
            let a = node(structure, weights, tree, left, states);
            let b = node(structure, weights, tree, right, states);
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

pub fn assignments(n: usize) -> Vec<Vec<u8>> {
    (0..1u32 << n)
        .map(|m| (0..n).map(|v| ((m >> v) & 1) as u8).collect())
        .collect()
}

pub fn bits_to_states(bits: &[u8]) -> Vec<VarState> {
    bits.iter().map(|&b| VarState::from_bit(b)).collect()
}

/// Sums complete-assignment probabilities consistent with `states`.
pub fn marginal(structure: &CircuitStructure, weights: &WeightStore, states: &[VarState]) -> f64 {
    assignments(states.len())
        .iter()
        .filter(|x| {
            states.iter().zip(x.iter()).all(|(s, &b)| match s {
                VarState::Marginal => true,
                VarState::Zero => b == 0,
                VarState::One => b == 1,
            })
        })
        .map(|x| prob(structure, weights, &bits_to_states(x)))
        .sum()
}
