//! Shared fixtures for the benchmarks.

use hyperspn::circuit::{sample, CircuitStructure, StructureConfig, WeightStore};
use hyperspn::hypernet::{init_hyper, materialize_all, DecoderConfig, HyperParams};
use hyperspn::matrix::BinaryMatrix;

pub struct Fixture {
    pub structure: CircuitStructure,
    pub hyper: HyperParams,
    pub weights: WeightStore,
    pub rows: BinaryMatrix,
}

/// A hyper-initialized circuit, its materialized weights and `rows` samples
/// drawn from it.
pub fn fixture(vars: usize, width: usize, replicas: usize, rows: usize) -> Fixture {
    let structure = CircuitStructure::build(StructureConfig::new(vars, width, replicas, 0))
        .expect("valid structure");
    let hyper = init_hyper(&structure, 5, DecoderConfig::default(), 1).expect("valid decoder");
    let weights = materialize_all(&hyper, &structure);
    let rows = sample(&structure, &weights, rows, 2).expect("weights match");
    Fixture {
        structure,
        hyper,
        weights,
        rows,
    }
}
