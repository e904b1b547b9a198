//! RAT-SPN structures, weights and exact inference.

mod eval;
mod evidence;
mod sample;
mod stream;
mod structure;
mod weights;

pub use eval::{
    conditional_log, eval_log_density, leaf_probability, log_density, log_density_rows,
    log_weight_gradient, EvalError,
};
pub use evidence::{ConflictingEvidence, Evidence, VarState};
pub use sample::sample;
pub use stream::{stream_eval, SectorProvider, StreamOutput};
pub use structure::{
    param_count, CircuitStructure, NodeKind, ReplicaTree, Sector, SectorKind, StructureConfig,
    StructureError, TreeNode,
};
pub use weights::{WeightError, WeightStore, ROW_SUM_TOLERANCE};
