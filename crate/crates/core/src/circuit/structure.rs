//! RAT-SPN topology: replicated balanced binary variable trees and the
//! sector layout of every sum layer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("need at least 2 variables for a binary split, got {0}")]
    TooFewVariables(usize),
    #[error("{0} must be at least 1")]
    ZeroWidth(&'static str),
}

/// Size knobs of a RAT-SPN. Together with `seed` they fully determine the
/// structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureConfig {
    /// Number of binary variables.
    pub vars: usize,
    /// Width of every sum and product layer.
    pub width: usize,
    /// Number of replicas mixed at the top.
    pub replicas: usize,
    /// Leaf distributions per variable.
    pub leaves: usize,
    pub seed: u64,
}

impl StructureConfig {
    pub fn new(vars: usize, width: usize, replicas: usize, seed: u64) -> Self {
        Self {
            vars,
            width,
            replicas,
            leaves: 2,
            seed,
        }
    }

    pub fn with_leaves(mut self, leaves: usize) -> Self {
        self.leaves = leaves;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorKind {
    /// `width × leaves` sum layer directly over the leaf distributions of one variable.
    Leaf { var: usize },
    /// `width × width` sum layer over an element-wise product layer.
    Internal,
    /// `1 × width` sum layer at the root of a replica tree.
    Root,
    /// `1 × replicas` mixture over replica roots.
    Top,
}

/// One fully connected sum layer. Weights of the sector occupy
/// `offset..offset + rows * cols` of the flat parameter vector, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sector {
    pub kind: SectorKind,
    /// Owning replica; `None` for the top mixture.
    pub replica: Option<usize>,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Index of the first row among the rows of all sectors.
    pub row_offset: usize,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Leaf {
        var: usize,
    },
    /// Product of `left` and `right` (element-wise over the layer) followed by a sum layer.
    Merge {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    /// Global sector id of this node's sum layer.
    pub sector: usize,
    /// Length of the node's output vector (`width`, or 1 at the root).
    pub rows: usize,
    pub depth: usize,
}

/// A balanced binary tree over one permutation of the variables.
///
/// Nodes are stored in evaluation order: every child precedes its parent,
/// the root is last, and of the two children of a merge the one holding more
/// variables comes first. Walking `nodes` front to back is the post-order
/// traversal used by both the batch and the streaming evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaTree {
    pub permutation: Vec<usize>,
    pub nodes: Vec<TreeNode>,
}

impl ReplicaTree {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of node levels, counting the leaves as one level.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }

    /// Variables below `node`, in permutation order.
    pub fn scope(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(i) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Leaf { var } => out.push(var),
                NodeKind::Merge { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }
}

/// Immutable RAT-SPN structure.
///
/// Sector ids are laid out replica by replica; inside a replica the sector id
/// of node `i` is `replica * (2n - 1) + i`. The top mixture is the final
/// sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitStructure {
    config: StructureConfig,
    replicas: Vec<ReplicaTree>,
    sectors: Vec<Sector>,
    param_len: usize,
    row_len: usize,
}

impl CircuitStructure {
    pub fn build(config: StructureConfig) -> Result<Self, StructureError> {
        if config.vars < 2 {
            return Err(StructureError::TooFewVariables(config.vars));
        }
        if config.width == 0 {
            return Err(StructureError::ZeroWidth("layer width"));
        }
        if config.replicas == 0 {
            return Err(StructureError::ZeroWidth("replica count"));
        }
        if config.leaves == 0 {
            return Err(StructureError::ZeroWidth("leaf count"));
        }

        let per_replica = 2 * config.vars - 1;
        let mut replicas = Vec::with_capacity(config.replicas);
        let mut sectors = Vec::with_capacity(config.replicas * per_replica + 1);
        let mut offset = 0;
        let mut row_offset = 0;

        for replica in 0..config.replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(replica as u64 + 1);
            let mut permutation: Vec<usize> = (0..config.vars).collect();
            permutation.shuffle(&mut rng);

            let mut nodes = Vec::with_capacity(per_replica);
            build_subtree(&permutation, 0, &mut nodes);
            let root = nodes.len() - 1;
            for node in nodes.iter_mut() {
                node.rows = config.width;
            }
            nodes[root].rows = 1;
            let base = replica * per_replica;
            for (i, node) in nodes.iter_mut().enumerate() {
                node.sector = base + i;
                let (kind, cols) = match node.kind {
                    NodeKind::Leaf { var } => (SectorKind::Leaf { var }, config.leaves),
                    NodeKind::Merge { .. } if i == root => (SectorKind::Root, config.width),
                    NodeKind::Merge { .. } => (SectorKind::Internal, config.width),
                };
                let sector = Sector {
                    kind,
                    replica: Some(replica),
                    rows: node.rows,
                    cols,
                    offset,
                    row_offset,
                };
                offset += sector.len();
                row_offset += sector.rows;
                sectors.push(sector);
            }
            // Parent links, now that indices are final.
            for i in 0..nodes.len() {
                if let NodeKind::Merge { left, right } = nodes[i].kind {
                    nodes[left].parent = Some(i);
                    nodes[right].parent = Some(i);
                }
            }
            replicas.push(ReplicaTree { permutation, nodes });
        }

        let top = Sector {
            kind: SectorKind::Top,
            replica: None,
            rows: 1,
            cols: config.replicas,
            offset,
            row_offset,
        };
        offset += top.len();
        let row_len = row_offset + 1;
        sectors.push(top);

        Ok(Self {
            config,
            replicas,
            sectors,
            param_len: offset,
            row_len,
        })
    }

    pub fn config(&self) -> &StructureConfig {
        &self.config
    }

    pub fn vars(&self) -> usize {
        self.config.vars
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn leaves(&self) -> usize {
        self.config.leaves
    }

    pub fn replicas(&self) -> &[ReplicaTree] {
        &self.replicas
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn sector(&self, id: usize) -> &Sector {
        &self.sectors[id]
    }

    pub fn top_sector_id(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn top_sector(&self) -> &Sector {
        &self.sectors[self.top_sector_id()]
    }

    /// Sectors owned by replica trees (everything but the top mixture).
    pub fn tree_sector_count(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn sectors_per_replica(&self) -> usize {
        2 * self.config.vars - 1
    }

    /// Total number of mixture weights, top mixture included.
    pub fn param_count(&self) -> usize {
        self.param_len
    }

    /// Number of weight rows (sum nodes) over all sectors.
    pub fn row_count(&self) -> usize {
        self.row_len
    }

    /// Weights owned by a single replica tree.
    pub fn replica_param_count(&self) -> usize {
        (self.param_len - self.config.replicas) / self.config.replicas
    }

    /// Largest sector size among replica-tree sectors, `width * max(width, leaves)`.
    pub fn max_sector_len(&self) -> usize {
        self.config.width * self.config.width.max(self.config.leaves)
    }
}

/// Closed-form weight count: per replica `(n-2)k² + n·k·l + k`, plus `r`
/// top-mixture weights.
pub fn param_count(config: &StructureConfig) -> usize {
    let StructureConfig {
        vars: n,
        width: k,
        replicas: r,
        leaves: l,
        ..
    } = *config;
    r * (n.saturating_sub(2) * k * k + n * k * l + k) + r
}

// Appends the subtree over `vars` in evaluation order and returns its index.
fn build_subtree(vars: &[usize], depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
    if let [var] = *vars {
        nodes.push(TreeNode {
            kind: NodeKind::Leaf { var },
            parent: None,
            sector: 0,
            rows: 0,
            depth,
        });
        return nodes.len() - 1;
    }
    // The larger half goes first so the post-order walk keeps at most
    // floor(log2 n) + 1 outputs alive.
    let split = vars.len().div_ceil(2);
    let left = build_subtree(&vars[..split], depth + 1, nodes);
    let right = build_subtree(&vars[split..], depth + 1, nodes);
    nodes.push(TreeNode {
        kind: NodeKind::Merge { left, right },
        parent: None,
        sector: 0,
        rows: 0,
        depth,
    });
    nodes.len() - 1
}
