//! Probabilistic circuits with RAT-SPN structure, trained either directly
//! with weight decay or through a hypernetwork that decodes per-sector
//! embeddings into mixture weights.
//!
//! ```
//! use hyperspn::circuit::{log_density, CircuitStructure, Evidence, StructureConfig, WeightStore};
//!
//! let structure = CircuitStructure::build(StructureConfig::new(4, 3, 1, 0)).unwrap();
//! let weights = WeightStore::uniform(&structure);
//! let lp = log_density(&structure, &weights, &Evidence::from_bits(&[0, 1, 1, 0])).unwrap();
//! assert!((lp - (-4.0 * 2f64.ln())).abs() < 1e-12);
//! ```

pub mod circuit;
pub mod data;
pub mod hypernet;
pub mod math;
pub mod matrix;
pub mod training;

pub use circuit::{CircuitStructure, Evidence, StructureConfig, VarState, WeightStore};
pub use data::Dataset;
pub use hypernet::{DecoderConfig, HyperParams};
pub use matrix::BinaryMatrix;
pub use training::{TrainConfig, TrainableModel};
