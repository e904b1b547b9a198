use super::eval::{leaf_probability, EvalError};
use super::structure::{CircuitStructure, NodeKind};
use super::weights::WeightStore;
use crate::matrix::BinaryMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ancestral sampling: pick a replica, then walk each tree top-down, choosing
/// one child per sum node and descending both sides of every product.
pub fn sample(
    structure: &CircuitStructure,
    weights: &WeightStore,
    count: usize,
    seed: u64,
) -> Result<BinaryMatrix, EvalError> {
    if weights.len() != structure.param_count() {
        return Err(EvalError::WeightShape {
            expected: structure.param_count(),
            actual: weights.len(),
        });
    }
    let n = structure.vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BinaryMatrix::zeros(count, n);
    // (node, selected sum unit within the node's layer)
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(2 * n);

    for i in 0..count {
        let top = weights.sector(structure.top_sector());
        let replica = categorical(top, &mut rng);
        let tree = &structure.replicas()[replica];
        let row = out.row_mut(i);
        stack.clear();
        stack.push((tree.root(), 0));
        while let Some((node_id, unit)) = stack.pop() {
            let node = &tree.nodes[node_id];
            let sector = structure.sector(node.sector);
            let w = weights.sector(sector);
            let choice = categorical(&w[unit * sector.cols..(unit + 1) * sector.cols], &mut rng);
            match node.kind {
                NodeKind::Leaf { var } => {
                    let p = leaf_probability(choice, structure.leaves());
                    row[var] = u8::from(rng.random::<f64>() < p);
                }
                NodeKind::Merge { left, right } => {
                    // Product unit `choice` pairs sum unit `choice` of each child.
                    stack.push((right, choice));
                    stack.push((left, choice));
                }
            }
        }
    }
    Ok(out)
}

fn categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}
