//! Exact evaluation and reverse-mode differentiation of a RAT-SPN.
//!
//! Node outputs are kept as a vector `u` and a power-of-two exponent `e`
//! with true values `u_i · 2^e`; `u` is rescaled whenever its maximum drifts
//! far from 1. Rescaling by a power of two is exact, so this carries the
//! dynamic range of log-space arithmetic without an exponential or logarithm
//! per node; only the final replica mixture takes a logarithm. The batch evaluator, the gradient pass
//! and the streaming evaluator share the same kernels and agree bit for bit.

use super::evidence::{ConflictingEvidence, Evidence, VarState};
use super::structure::{CircuitStructure, NodeKind};
use super::weights::WeightStore;
use crate::matrix::BinaryMatrix;
use rayon::prelude::*;
use std::f64::consts::LN_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evidence has {actual} variables, circuit has {expected}")]
    EvidenceLength { expected: usize, actual: usize },
    #[error("weight store has {actual} entries, circuit needs {expected}")]
    WeightShape { expected: usize, actual: usize },
    #[error("sector {sector} has {actual} weights, expected {expected}")]
    SectorShape {
        sector: usize,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Conflict(#[from] ConflictingEvidence),
    #[error("conditioning event has probability zero")]
    ZeroProbabilityCondition,
    #[error("sector provider failed on sector {sector}: {source}")]
    Provider {
        sector: usize,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Rows per rayon task. Fixed so gradient reductions do not depend on the
/// thread count.
const CHUNK_ROWS: usize = 16;

/// Values of the `l` leaf distributions for each variable state.
///
/// Leaf `j` is a fixed Bernoulli with `P(X = 1) = j / (l - 1)` (`0.5` when
/// `l = 1`), so `l = 2` yields the indicators `[X = 0]` and `[X = 1]`.
#[derive(Debug, Clone)]
pub(crate) struct LeafTable {
    zero: Vec<f64>,
    one: Vec<f64>,
    marginal: Vec<f64>,
}

impl LeafTable {
    pub(crate) fn new(leaves: usize) -> Self {
        let probs: Vec<f64> = (0..leaves).map(|j| leaf_probability(j, leaves)).collect();
        Self {
            zero: probs.iter().map(|p| 1.0 - p).collect(),
            one: probs,
            marginal: vec![1.0; leaves],
        }
    }

    #[inline]
    pub(crate) fn get(&self, state: VarState) -> &[f64] {
        match state {
            VarState::Zero => &self.zero,
            VarState::One => &self.one,
            VarState::Marginal => &self.marginal,
        }
    }
}

/// `P(X = 1)` under leaf distribution `j` of `leaves`.
pub fn leaf_probability(j: usize, leaves: usize) -> f64 {
    if leaves == 1 {
        0.5
    } else {
        j as f64 / (leaves - 1) as f64
    }
}

/// Rows evaluated side by side. Every lane runs the exact scalar sequence of
/// floating-point operations, so results do not depend on the lane count.
pub(crate) const LANES: usize = 8;

/// One value per lane.
pub(crate) type Lane<const L: usize> = [f64; L];

/// `floor(log2 x)` for positive finite `x`.
#[inline]
fn exponent(x: f64) -> i32 {
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    if biased == 0 {
        exponent(x * 2f64.powi(64)) - 64
    } else {
        biased - 1023
    }
}

/// `2^e`, flushing to zero below the subnormal range.
#[inline]
fn pow2(e: i32) -> f64 {
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// Lanes whose maximum stays within `[2^-RANGE, 2^RANGE]` are not rescaled.
const RANGE: i32 = 256;

/// Rescales lanes of `v` whose maximum has drifted outside `2^±RANGE` by a
/// power of two so the maximum lands in `[1, 2)`, returning the powers taken
/// out. Power-of-two scaling is exact, so later arithmetic gives the same
/// bits whether or not a lane was rescaled. All-zero lanes are left alone.
#[inline]
fn normalize<const L: usize>(v: &mut [Lane<L>]) -> [i32; L] {
    let mut max = [0.0f64; L];
    for x in v.iter() {
        for l in 0..L {
            max[l] = max[l].max(x[l]);
        }
    }
    let (lo, hi) = (pow2(-RANGE), pow2(RANGE));
    if max.iter().all(|&m| m == 0.0 || (lo..=hi).contains(&m)) {
        return [0; L];
    }
    let mut e = [0i32; L];
    let mut a = [1.0f64; L];
    let mut b = [1.0f64; L];
    for l in 0..L {
        if max[l] > 0.0 && !(lo..=hi).contains(&max[l]) {
            e[l] = exponent(max[l]);
            // Split the shift so each factor stays representable.
            let half = -e[l] / 2;
            a[l] = pow2(half);
            b[l] = pow2(-e[l] - half);
        }
    }
    for x in v.iter_mut() {
        for l in 0..L {
            x[l] = x[l] * a[l] * b[l];
        }
    }
    e
}

/// Element-wise product of two child vectors, normalized.
#[inline]
pub(crate) fn product_layer<const L: usize>(
    left: &[Lane<L>],
    right: &[Lane<L>],
    out: &mut [Lane<L>],
) -> [i32; L] {
    for ((o, a), b) in out.iter_mut().zip(left).zip(right) {
        for l in 0..L {
            o[l] = a[l] * b[l];
        }
    }
    normalize(out)
}

/// Row sums of a row-major block with `cols` columns.
#[inline]
pub(crate) fn row_masses(weights: &[f64], cols: usize, out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(weights.chunks_exact(cols)) {
        *o = row.iter().fold(0.0, |acc, w| acc + w);
    }
}

/// `out[i] = Σ_j w[i, j] child[j] / mass[i]` for a row-major block.
#[inline]
fn mix<const L: usize>(weights: &[f64], mass: &[f64], child: &[Lane<L>], out: &mut [Lane<L>]) {
    let cols = child.len();
    for ((o, row), m) in out.iter_mut().zip(weights.chunks_exact(cols)).zip(mass) {
        let mut total = [0.0f64; L];
        for (w, c) in row.iter().zip(child) {
            for l in 0..L {
                total[l] += w * c[l];
            }
        }
        // Dividing by the stored row mass makes a fully marginalized circuit
        // evaluate to exactly 1 even when rows sum to 1 only up to rounding.
        for l in 0..L {
            o[l] = total[l] / m;
        }
    }
}

/// Sum layer over `child`, normalized; returns the exponents taken out.
#[inline]
pub(crate) fn sum_layer<const L: usize>(
    weights: &[f64],
    mass: &[f64],
    child: &[Lane<L>],
    out: &mut [Lane<L>],
) -> [i32; L] {
    mix(weights, mass, child, out);
    normalize(out)
}

/// Natural log of `Σ_r w_r · roots[r] · 2^exps[r]` per lane. `scaled`
/// receives the roots brought to a common exponent.
#[inline]
pub(crate) fn top_layer<const L: usize>(
    weights: &[f64],
    mass: f64,
    roots: &[Lane<L>],
    exps: &[[i32; L]],
    scaled: &mut [Lane<L>],
) -> Lane<L> {
    let mut common = [i32::MIN; L];
    for (u, e) in roots.iter().zip(exps) {
        for l in 0..L {
            if u[l] > 0.0 {
                common[l] = common[l].max(e[l]);
            }
        }
    }
    for ((s, u), e) in scaled.iter_mut().zip(roots).zip(exps) {
        for l in 0..L {
            s[l] = if common[l] == i32::MIN {
                0.0
            } else {
                u[l] * pow2(e[l] - common[l])
            };
        }
    }
    let mut out = [[0.0f64; L]];
    mix(weights, &[mass], scaled, &mut out);
    let mut lp = [f64::NEG_INFINITY; L];
    for l in 0..L {
        if common[l] != i32::MIN {
            lp[l] = out[0][l].ln() + f64::from(common[l]) * LN_2;
        }
    }
    lp
}

/// Reverse of [`sum_layer`] in log coordinates: given `∂L/∂ ln out_i`, adds
/// `∂L/∂ ln w_ij` (summed over lanes) into `grad` and `∂L/∂ ln child_j` into
/// `child_adj`. `totals[i]` is the unnormalized `Σ_j w_ij child_j`.
#[inline]
fn sum_layer_backward<const L: usize>(
    weights: &[f64],
    child: &[Lane<L>],
    totals: &[Lane<L>],
    out_adj: &[Lane<L>],
    grad: &mut [f64],
    child_adj: &mut [Lane<L>],
) {
    let cols = child.len();
    for (i, (adj, total)) in out_adj.iter().zip(totals).enumerate() {
        let mut coef = [0.0f64; L];
        let mut any = false;
        for l in 0..L {
            if adj[l] != 0.0 && total[l] != 0.0 {
                coef[l] = adj[l] / total[l];
                any = true;
            }
        }
        if !any {
            continue;
        }
        let row = &weights[i * cols..(i + 1) * cols];
        let grad_row = &mut grad[i * cols..(i + 1) * cols];
        for j in 0..cols {
            let mut sum = 0.0;
            for l in 0..L {
                let share = coef[l] * row[j] * child[j][l];
                sum += share;
                child_adj[j][l] += share;
            }
            grad_row[j] += sum;
        }
    }
}

/// Weights with their row sums, shared by all rows of one evaluation call.
pub(crate) struct Prepared<'a> {
    structure: &'a CircuitStructure,
    weights: &'a [f64],
    /// Indexed by [`Sector::row_offset`](super::Sector::row_offset).
    masses: Vec<f64>,
    leaves: LeafTable,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(structure: &'a CircuitStructure, weights: &'a WeightStore) -> Self {
        let w = weights.weights();
        let mut masses = vec![0.0; structure.row_count()];
        for sector in structure.sectors() {
            row_masses(
                &w[sector.range()],
                sector.cols,
                &mut masses[sector.row_offset..sector.row_offset + sector.rows],
            );
        }
        Self {
            structure,
            weights: w,
            masses,
            leaves: LeafTable::new(structure.leaves()),
        }
    }

    #[inline]
    fn sector(&self, id: usize) -> (&[f64], &[f64]) {
        let sector = self.structure.sector(id);
        (
            &self.weights[sector.range()],
            &self.masses[sector.row_offset..sector.row_offset + sector.rows],
        )
    }

    /// Leaf inputs of `var` for every lane.
    #[inline]
    fn leaf_inputs<const L: usize, F>(&self, state: &F, var: usize, out: &mut [Lane<L>])
    where
        F: Fn(usize, usize) -> VarState,
    {
        for l in 0..L {
            for (o, &v) in out.iter_mut().zip(self.leaves.get(state(l, var))) {
                o[l] = v;
            }
        }
    }
}

/// Reusable buffers for one block of `L` instances.
pub(crate) struct Workspace<const L: usize> {
    /// Scaled node outputs, `width` slots per node, replica-major.
    values: Vec<Lane<L>>,
    /// Power-of-two exponent of each node's outputs.
    exps: Vec<[i32; L]>,
    /// Exponent removed by each node's own sum layer.
    sum_exps: Vec<[i32; L]>,
    adjoints: Vec<Lane<L>>,
    roots: Vec<Lane<L>>,
    root_exps: Vec<[i32; L]>,
    /// Replica roots at a common exponent, as fed to the top mixture.
    scaled: Vec<Lane<L>>,
    root_adj: Vec<Lane<L>>,
    child: Vec<Lane<L>>,
    child_adj: Vec<Lane<L>>,
    totals: Vec<Lane<L>>,
}

impl<const L: usize> Workspace<L> {
    pub(crate) fn new(structure: &CircuitStructure) -> Self {
        let k = structure.width();
        let nodes = structure.tree_sector_count();
        let r = structure.replicas().len();
        let widest = k.max(structure.leaves());
        Self {
            values: vec![[0.0; L]; nodes * k],
            exps: vec![[0; L]; nodes],
            sum_exps: vec![[0; L]; nodes],
            adjoints: vec![[0.0; L]; nodes * k],
            roots: vec![[0.0; L]; r],
            root_exps: vec![[0; L]; r],
            scaled: vec![[0.0; L]; r],
            root_adj: vec![[0.0; L]; r],
            child: vec![[0.0; L]; widest],
            child_adj: vec![[0.0; L]; widest],
            totals: vec![[0.0; L]; k],
        }
    }
}

/// Full upward pass returning the log-probability of each lane; node outputs
/// stay in the workspace for the backward pass. `state(lane, var)` gives the
/// evidence.
pub(crate) fn forward<const L: usize, F>(
    prep: &Prepared,
    state: &F,
    ws: &mut Workspace<L>,
) -> Lane<L>
where
    F: Fn(usize, usize) -> VarState,
{
    let structure = prep.structure;
    let k = structure.width();
    let leaves = structure.leaves();
    let per_replica = structure.sectors_per_replica();
    for (r, tree) in structure.replicas().iter().enumerate() {
        let base = r * per_replica;
        for (i, node) in tree.nodes.iter().enumerate() {
            let (w, mass) = prep.sector(node.sector);
            let slot = (base + i) * k;
            let (lo, hi) = ws.values.split_at_mut(slot);
            let out = &mut hi[..node.rows];
            let (inputs, own) = match node.kind {
                NodeKind::Leaf { var } => {
                    prep.leaf_inputs(state, var, &mut ws.child[..leaves]);
                    ([0; L], sum_layer(w, mass, &ws.child[..leaves], out))
                }
                NodeKind::Merge { left, right } => {
                    // Children precede their parent, so both live in `lo`.
                    let (l, rr) = ((base + left) * k, (base + right) * k);
                    let mut e = product_layer(&lo[l..l + k], &lo[rr..rr + k], &mut ws.child[..k]);
                    let (el, er) = (ws.exps[base + left], ws.exps[base + right]);
                    for ((x, a), b) in e.iter_mut().zip(el).zip(er) {
                        *x += a + b;
                    }
                    (e, sum_layer(w, mass, &ws.child[..k], out))
                }
            };
            ws.sum_exps[base + i] = own;
            for lane in 0..L {
                ws.exps[base + i][lane] = inputs[lane] + own[lane];
            }
        }
        let root = base + tree.root();
        ws.roots[r] = ws.values[root * k];
        ws.root_exps[r] = ws.exps[root];
    }
    let (w, mass) = prep.sector(structure.top_sector_id());
    top_layer(w, mass[0], &ws.roots, &ws.root_exps, &mut ws.scaled)
}

/// Downward pass after [`forward`]; adds `Σ_lane scale[lane] · ∂ log p / ∂ ln w`
/// into `grad`.
pub(crate) fn backward<const L: usize, F>(
    prep: &Prepared,
    state: &F,
    scale: Lane<L>,
    ws: &mut Workspace<L>,
    grad: &mut [f64],
) where
    F: Fn(usize, usize) -> VarState,
{
    let structure = prep.structure;
    let k = structure.width();
    let leaves = structure.leaves();
    let per_replica = structure.sectors_per_replica();

    ws.adjoints.fill([0.0; L]);
    ws.root_adj.fill([0.0; L]);
    let top = structure.top_sector();
    let (w, _) = prep.sector(structure.top_sector_id());
    let mut total = [0.0f64; L];
    for (w, c) in w.iter().zip(&ws.scaled) {
        for l in 0..L {
            total[l] += w * c[l];
        }
    }
    sum_layer_backward(
        w,
        &ws.scaled,
        &[total],
        &[scale],
        &mut grad[top.range()],
        &mut ws.root_adj,
    );

    for (r, tree) in structure.replicas().iter().enumerate() {
        let base = r * per_replica;
        ws.adjoints[(base + tree.root()) * k] = ws.root_adj[r];
        for (i, node) in tree.nodes.iter().enumerate().rev() {
            let slot = (base + i) * k;
            let out_adj = &ws.adjoints[slot..slot + node.rows];
            if out_adj.iter().all(|a| a.iter().all(|&x| x == 0.0)) {
                continue;
            }
            let range = structure.sector(node.sector).range();
            let (w, mass) = prep.sector(node.sector);
            // Undo the output normalization: total_i = out_i · 2^e · mass_i.
            let shift = ws.sum_exps[base + i].map(pow2);
            for ((t, o), m) in ws
                .totals
                .iter_mut()
                .zip(&ws.values[slot..slot + node.rows])
                .zip(mass)
            {
                for l in 0..L {
                    t[l] = o[l] * shift[l] * m;
                }
            }
            ws.child_adj.fill([0.0; L]);
            match node.kind {
                NodeKind::Leaf { var } => {
                    // Leaves have no trainable inputs; their adjoints are discarded.
                    prep.leaf_inputs(state, var, &mut ws.child[..leaves]);
                    sum_layer_backward(
                        w,
                        &ws.child[..leaves],
                        &ws.totals[..node.rows],
                        out_adj,
                        &mut grad[range],
                        &mut ws.child_adj[..leaves],
                    );
                }
                NodeKind::Merge { left, right } => {
                    let (l, rr) = ((base + left) * k, (base + right) * k);
                    product_layer(
                        &ws.values[l..l + k],
                        &ws.values[rr..rr + k],
                        &mut ws.child[..k],
                    );
                    sum_layer_backward(
                        w,
                        &ws.child[..k],
                        &ws.totals[..node.rows],
                        out_adj,
                        &mut grad[range],
                        &mut ws.child_adj[..k],
                    );
                    for j in 0..k {
                        for lane in 0..L {
                            ws.adjoints[l + j][lane] += ws.child_adj[j][lane];
                            ws.adjoints[rr + j][lane] += ws.child_adj[j][lane];
                        }
                    }
                }
            }
        }
    }
}

/// Runs `f` over `items` in blocks of [`LANES`], padding the last block with
/// fully marginal lanes, and returns one value per item.
fn forward_blocks<'a, T, S>(prep: &Prepared, items: &'a [T], state: S) -> Vec<f64>
where
    T: Sync,
    S: Fn(&'a T, usize) -> VarState + Sync,
{
    items
        .par_chunks(CHUNK_ROWS)
        .flat_map_iter(|chunk| {
            let mut ws = Workspace::<LANES>::new(prep.structure);
            let mut out = Vec::with_capacity(chunk.len());
            for block in chunk.chunks(LANES) {
                let lane_state = |lane: usize, var: usize| match block.get(lane) {
                    Some(item) => state(item, var),
                    None => VarState::Marginal,
                };
                let lp = forward(prep, &lane_state, &mut ws);
                out.extend_from_slice(&lp[..block.len()]);
            }
            out
        })
        .collect()
}

fn check_weights(structure: &CircuitStructure, weights: &WeightStore) -> Result<(), EvalError> {
    if weights.len() != structure.param_count() {
        return Err(EvalError::WeightShape {
            expected: structure.param_count(),
            actual: weights.len(),
        });
    }
    Ok(())
}

fn check_vars(structure: &CircuitStructure, actual: usize) -> Result<(), EvalError> {
    if actual != structure.vars() {
        return Err(EvalError::EvidenceLength {
            expected: structure.vars(),
            actual,
        });
    }
    Ok(())
}

/// Log-probability of each evidence pattern (marginalized variables summed out).
pub fn eval_log_density(
    structure: &CircuitStructure,
    weights: &WeightStore,
    batch: &[Evidence],
) -> Result<Vec<f64>, EvalError> {
    check_weights(structure, weights)?;
    for e in batch {
        check_vars(structure, e.len())?;
    }
    let prep = Prepared::new(structure, weights);
    Ok(forward_blocks(&prep, batch, |e: &Evidence, v| e.get(v)))
}

pub fn log_density(
    structure: &CircuitStructure,
    weights: &WeightStore,
    evidence: &Evidence,
) -> Result<f64, EvalError> {
    Ok(eval_log_density(structure, weights, std::slice::from_ref(evidence))?[0])
}

/// Log-probability of each complete row of `data`.
pub fn log_density_rows(
    structure: &CircuitStructure,
    weights: &WeightStore,
    data: &BinaryMatrix,
) -> Result<Vec<f64>, EvalError> {
    check_weights(structure, weights)?;
    check_vars(structure, data.cols())?;
    let prep = Prepared::new(structure, weights);
    let rows: Vec<usize> = (0..data.rows()).collect();
    Ok(forward_blocks(&prep, &rows, |&i: &usize, v| {
        VarState::from_bit(data.row(i)[v])
    }))
}

/// `log P(query | condition)`.
pub fn conditional_log(
    structure: &CircuitStructure,
    weights: &WeightStore,
    query: &Evidence,
    condition: &Evidence,
) -> Result<f64, EvalError> {
    check_vars(structure, query.len())?;
    check_vars(structure, condition.len())?;
    let joint = query.union(condition)?;
    let values = eval_log_density(structure, weights, &[joint, condition.clone()])?;
    if values[1] == f64::NEG_INFINITY {
        return Err(EvalError::ZeroProbabilityCondition);
    }
    Ok(values[0] - values[1])
}

/// Sum of log-probabilities over the selected rows and the gradient of that
/// sum with respect to every log-weight `ln w`, laid out like the weights.
///
/// Rows are processed in fixed-size chunks and the chunk results are added in
/// order, so the result is independent of the thread pool size.
pub fn log_weight_gradient(
    structure: &CircuitStructure,
    weights: &WeightStore,
    data: &BinaryMatrix,
    rows: &[usize],
) -> Result<(f64, Vec<f64>), EvalError> {
    check_weights(structure, weights)?;
    check_vars(structure, data.cols())?;
    let prep = Prepared::new(structure, weights);
    let partials: Vec<(f64, Vec<f64>)> = rows
        .par_chunks(CHUNK_ROWS)
        .map(|chunk| {
            let mut ws = Workspace::<LANES>::new(structure);
            let mut grad = vec![0.0; structure.param_count()];
            let mut total = 0.0;
            for block in chunk.chunks(LANES) {
                let state = |lane: usize, v: usize| match block.get(lane) {
                    Some(&i) => VarState::from_bit(data.row(i)[v]),
                    None => VarState::Marginal,
                };
                let lp = forward(&prep, &state, &mut ws);
                let mut scale = [0.0; LANES];
                scale[..block.len()].fill(1.0);
                total += lp[..block.len()].iter().sum::<f64>();
                backward(&prep, &state, scale, &mut ws, &mut grad);
            }
            (total, grad)
        })
        .collect();

    let mut total = 0.0;
    let mut grad = vec![0.0; structure.param_count()];
    for (t, g) in partials {
        total += t;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((total, grad))
}
