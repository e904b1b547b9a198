//! Post-order evaluation that keeps only the outputs still waiting for their
//! parent and asks for sector weights one sector at a time.

use super::eval::{product_layer, row_masses, sum_layer, top_layer, EvalError, LeafTable};
use super::evidence::Evidence;
use super::structure::{CircuitStructure, NodeKind};
use super::weights::WeightStore;
use std::borrow::Cow;

/// Source of normalized sector weights, materialized on demand.
pub trait SectorProvider {
    fn sector_weights(
        &self,
        structure: &CircuitStructure,
        sector: usize,
    ) -> Result<Cow<'_, [f64]>, Box<dyn std::error::Error + Send + Sync>>;
}

impl SectorProvider for WeightStore {
    fn sector_weights(
        &self,
        structure: &CircuitStructure,
        sector: usize,
    ) -> Result<Cow<'_, [f64]>, Box<dyn std::error::Error + Send + Sync>> {
        Ok(Cow::Borrowed(self.sector(structure.sector(sector))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOutput {
    pub log_prob: f64,
    /// Largest number of node output vectors held at once within one replica.
    pub peak_live_vectors: usize,
}

pub fn stream_eval<P: SectorProvider + ?Sized>(
    structure: &CircuitStructure,
    provider: &P,
    evidence: &Evidence,
) -> Result<StreamOutput, EvalError> {
    if evidence.len() != structure.vars() {
        return Err(EvalError::EvidenceLength {
            expected: structure.vars(),
            actual: evidence.len(),
        });
    }
    let k = structure.width();
    let leaves = LeafTable::new(structure.leaves());
    let r = structure.replicas().len();
    let mut child = vec![[0.0]; k.max(structure.leaves())];
    let mut mass = vec![0.0; k];
    let mut roots = Vec::with_capacity(r);
    let mut root_exps = Vec::with_capacity(r);
    // Each live entry is a node's scaled outputs and their exponent.
    let mut live: Vec<(Vec<[f64; 1]>, i32)> = Vec::new();
    let mut peak = 0;

    let fetch = |id: usize| -> Result<Cow<'_, [f64]>, EvalError> {
        let weights = provider
            .sector_weights(structure, id)
            .map_err(|source| EvalError::Provider { sector: id, source })?;
        let expected = structure.sector(id).len();
        if weights.len() != expected {
            return Err(EvalError::SectorShape {
                sector: id,
                expected,
                actual: weights.len(),
            });
        }
        Ok(weights)
    };

    for tree in structure.replicas() {
        for node in &tree.nodes {
            let weights = fetch(node.sector)?;
            let cols = structure.sector(node.sector).cols;
            row_masses(&weights, cols, &mut mass[..node.rows]);
            let mass = &mass[..node.rows];
            let mut out = vec![[0.0]; node.rows];
            let exp = match node.kind {
                NodeKind::Leaf { var } => {
                    for (c, &v) in child.iter_mut().zip(leaves.get(evidence.get(var))) {
                        *c = [v];
                    }
                    sum_layer(&weights, mass, &child[..cols], &mut out)[0]
                }
                NodeKind::Merge { .. } => {
                    // Children were the last two outputs produced, larger subtree first.
                    let (right, er) = live.pop().expect("post-order keeps both children live");
                    let (left, el) = live.pop().expect("post-order keeps both children live");
                    let e = product_layer(&left, &right, &mut child[..k])[0];
                    e + el + er + sum_layer(&weights, mass, &child[..k], &mut out)[0]
                }
            };
            live.push((out, exp));
            peak = peak.max(live.len());
        }
        let (root, exp) = live.pop().expect("root output");
        debug_assert!(live.is_empty());
        roots.push(root[0]);
        root_exps.push([exp]);
    }

    let top = fetch(structure.top_sector_id())?;
    let mut scaled = vec![[0.0]; r];
    let mut top_mass = [0.0];
    row_masses(&top, r, &mut top_mass);
    Ok(StreamOutput {
        log_prob: top_layer(&top, top_mass[0], &roots, &root_exps, &mut scaled)[0],
        peak_live_vectors: peak,
    })
}
