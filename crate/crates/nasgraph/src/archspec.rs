//! Cell-based search-space encodings and their expansion into a layered
//! block plan under a surrogate configuration.
//!
//! Two encodings are understood:
//!
//! * the NAS-Bench-201 string form `|op~k|+|op~k|op~k|+|op~k|op~k|op~k|`, where
//!   group `g` lists the operations feeding cell node `g + 1` and `k` is the
//!   zero-based predecessor node;
//! * an adjacency form (NAS-Bench-101 style): a strictly upper-triangular 0/1
//!   matrix plus one label per node. Each 1-entry `(i, j)` becomes a cell edge
//!   carrying the label of node `j`.
//!
//! Cells are always edge-labelled internally: nodes are tensors, edges are
//! operations, and a node is the sum of its incoming edges.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Channels of the network input fed to the stem.
pub const STEM_INPUT_CHANNELS: usize = 3;

/// Number of cell nodes in a NAS-Bench-201 cell.
pub const NB201_NODES: usize = 4;

/// Number of edge slots in a NAS-Bench-201 cell.
pub const NB201_EDGES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArchError {
    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("predecessor index {index} in token `{token}` must be below destination node {dst}")]
    BadPredecessorIndex {
        token: String,
        index: usize,
        dst: usize,
    },
    #[error("adjacency entry ({row}, {col}) is on or below the diagonal")]
    NotUpperTriangular { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label `{label}` cannot be the destination of an edge (node {node})")]
    MisplacedLabel { label: String, node: usize },
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("invalid surrogate configuration: {0}")]
    InvalidSurrogate(String),
}

/// Candidate operation on a cell edge.
///
/// The set is closed: it is exactly the NAS-Bench-201 operation list. Adding a
/// search space with other operations means adding a variant here and a
/// lowering for it in `graphify::decompose`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    None,
    SkipConnect,
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
}

impl OperationKind {
    pub const ALL: [OperationKind; 5] = [
        OperationKind::None,
        OperationKind::SkipConnect,
        OperationKind::Conv1x1,
        OperationKind::Conv3x3,
        OperationKind::AvgPool3x3,
    ];

    /// Canonical NAS-Bench-201 name.
    pub fn name(self) -> &'static str {
        match self {
            OperationKind::None => "none",
            OperationKind::SkipConnect => "skip_connect",
            OperationKind::Conv1x1 => "nor_conv_1x1",
            OperationKind::Conv3x3 => "nor_conv_3x3",
            OperationKind::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    /// Position in [`OperationKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Looks up a name, accepting the NAS-Bench-201 names and the
    /// NAS-Bench-101 convolution labels.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "none" | "zero" => OperationKind::None,
            "skip_connect" | "identity" => OperationKind::SkipConnect,
            "nor_conv_1x1" | "conv1x1-bn-relu" => OperationKind::Conv1x1,
            "nor_conv_3x3" | "conv3x3-bn-relu" => OperationKind::Conv3x3,
            "avg_pool_3x3" | "avgpool3x3" => OperationKind::AvgPool3x3,
            _ => return None,
        })
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperationKind {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperationKind::from_name(s).ok_or_else(|| ArchError::UnknownOperation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellEdge {
    pub src: usize,
    pub dst: usize,
    pub op: OperationKind,
}

/// A cell DAG on `node_count` tensor nodes. Node 0 is the cell input and the
/// last node is the cell output.
///
/// Edges are kept sorted by `(dst, src)`, which is both a topological order
/// for block creation and the NAS-Bench-201 token order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CellSpec {
    node_count: usize,
    edges: Vec<CellEdge>,
}

impl CellSpec {
    pub fn new(node_count: usize, mut edges: Vec<CellEdge>) -> Result<Self, ArchError> {
        if node_count == 0 {
            return Err(ArchError::InvalidCell("cell needs at least one node".into()));
        }
        for e in &edges {
            if e.src >= e.dst || e.dst >= node_count {
                return Err(ArchError::InvalidCell(format!(
                    "edge {}->{} is not forward within {} nodes",
                    e.src, e.dst, node_count
                )));
            }
        }
        edges.sort_by_key(|e| (e.dst, e.src));
        if edges.windows(2).any(|w| (w[0].src, w[0].dst) == (w[1].src, w[1].dst)) {
            return Err(ArchError::InvalidCell("duplicate edge".into()));
        }
        Ok(CellSpec { node_count, edges })
    }

    /// NAS-Bench-201 cell from its six operations in token order
    /// `(0,1) (0,2) (1,2) (0,3) (1,3) (2,3)`.
    pub fn nb201(ops: [OperationKind; NB201_EDGES]) -> Self {
        let edges = nb201_slots()
            .zip(ops)
            .map(|((src, dst), op)| CellEdge { src, dst, op })
            .collect();
        CellSpec {
            node_count: NB201_NODES,
            edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[CellEdge] {
        &self.edges
    }

    pub fn edge(&self, src: usize, dst: usize) -> Option<OperationKind> {
        self.edges
            .iter()
            .find(|e| e.src == src && e.dst == dst)
            .map(|e| e.op)
    }

    /// True when every ordered node pair carries exactly one edge, i.e. the
    /// cell can be written in the NAS-Bench-201 grammar.
    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.node_count * (self.node_count - 1) / 2
    }

    /// Renders the cell in the NAS-Bench-201 grammar. Only complete
    /// four-node cells have a rendering.
    pub fn to_nb201_string(&self) -> Option<String> {
        if self.node_count != NB201_NODES || !self.is_complete() {
            return None;
        }
        let groups: Vec<String> = (1..self.node_count)
            .map(|dst| {
                let mut group = String::from("|");
                for e in self.edges.iter().filter(|e| e.dst == dst) {
                    group.push_str(&format!("{}~{}|", e.op.name(), e.src));
                }
                group
            })
            .collect();
        Some(groups.join("+"))
    }

    /// Operation occurrence counts indexed by [`OperationKind::index`].
    pub fn op_histogram(&self) -> [usize; 5] {
        let mut counts = [0; 5];
        for e in &self.edges {
            counts[e.op.index()] += 1;
        }
        counts
    }
}

fn nb201_slots() -> impl Iterator<Item = (usize, usize)> {
    (1..NB201_NODES).flat_map(|dst| (0..dst).map(move |src| (src, dst)))
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_nb201_string() {
            Some(s) => f.write_str(&s),
            None => {
                write!(f, "cell[{}]", self.node_count)?;
                for e in &self.edges {
                    write!(f, " {}->{}:{}", e.src, e.dst, e.op)?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for CellSpec {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_nb201_arch(s)
    }
}

/// Parses the NAS-Bench-201 string form into a four-node, six-edge cell.
pub fn parse_nb201_arch(encoding: &str) -> Result<CellSpec, ArchError> {
    let encoding = encoding.trim();
    let groups: Vec<&str> = encoding.split('+').collect();
    if groups.len() != NB201_NODES - 1 {
        return Err(ArchError::MalformedEncoding(format!(
            "expected {} `+`-separated groups, found {}",
            NB201_NODES - 1,
            groups.len()
        )));
    }

    let mut edges = Vec::with_capacity(NB201_EDGES);
    for (group_index, group) in groups.iter().enumerate() {
        let dst = group_index + 1;
        let inner = group
            .strip_prefix('|')
            .and_then(|g| g.strip_suffix('|'))
            .filter(|g| !g.is_empty())
            .ok_or_else(|| {
                ArchError::MalformedEncoding(format!("group `{group}` must be `|tok|...|`"))
            })?;
        let tokens: Vec<&str> = inner.split('|').collect();
        if tokens.len() != dst {
            return Err(ArchError::MalformedEncoding(format!(
                "group {group_index} has {} tokens, expected {dst}",
                tokens.len()
            )));
        }
        let mut seen = [false; NB201_NODES];
        for token in tokens {
            let (name, index) = token.split_once('~').ok_or_else(|| {
                ArchError::MalformedEncoding(format!("token `{token}` lacks `~`"))
            })?;
            let op = OperationKind::from_str(name)?;
            let src: usize = index.parse().map_err(|_| {
                ArchError::MalformedEncoding(format!("token `{token}` has a bad index"))
            })?;
            if src >= dst {
                return Err(ArchError::BadPredecessorIndex {
                    token: token.to_string(),
                    index: src,
                    dst,
                });
            }
            if std::mem::replace(&mut seen[src], true) {
                return Err(ArchError::MalformedEncoding(format!(
                    "predecessor {src} repeated in group {group_index}"
                )));
            }
            edges.push(CellEdge { src, dst, op });
        }
    }
    CellSpec::new(NB201_NODES, edges)
}

/// Node label of an adjacency-encoded cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLabel {
    Input,
    Output,
    Op(OperationKind),
}

impl FromStr for NodeLabel {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(NodeLabel::Input),
            "output" => Ok(NodeLabel::Output),
            other => OperationKind::from_str(other).map(NodeLabel::Op),
        }
    }
}

impl From<OperationKind> for NodeLabel {
    fn from(op: OperationKind) -> Self {
        NodeLabel::Op(op)
    }
}

/// Builds a cell from an upper-triangular adjacency matrix and node labels.
///
/// An edge into an `Output` node is an identity (the output aggregates its
/// inputs unchanged). Edges into an `Input` node are rejected.
pub fn parse_adjacency_cell<R: AsRef<[u8]>>(
    adjacency: &[R],
    labels: &[NodeLabel],
) -> Result<CellSpec, ArchError> {
    let n = adjacency.len();
    if labels.len() != n {
        return Err(ArchError::DimensionMismatch(format!(
            "{n}x{n} matrix with {} labels",
            labels.len()
        )));
    }
    let mut edges = Vec::new();
    for (row, entries) in adjacency.iter().enumerate() {
        let entries = entries.as_ref();
        if entries.len() != n {
            return Err(ArchError::DimensionMismatch(format!(
                "row {row} has {} entries, expected {n}",
                entries.len()
            )));
        }
        for (col, &v) in entries.iter().enumerate() {
            match v {
                0 => {}
                1 if col > row => {
                    let op = match labels[col] {
                        NodeLabel::Op(op) => op,
                        NodeLabel::Output => OperationKind::SkipConnect,
                        NodeLabel::Input => {
                            return Err(ArchError::MisplacedLabel {
                                label: "input".into(),
                                node: col,
                            })
                        }
                    };
                    edges.push(CellEdge { src: row, dst: col, op });
                }
                1 => return Err(ArchError::NotUpperTriangular { row, col }),
                other => {
                    return Err(ArchError::MalformedEncoding(format!(
                        "adjacency entry ({row}, {col}) is {other}, expected 0 or 1"
                    )))
                }
            }
        }
    }
    if n == 0 {
        return Err(ArchError::DimensionMismatch("empty adjacency matrix".into()));
    }
    CellSpec::new(n, edges)
}

#[derive(Deserialize)]
struct AdjacencyJson {
    matrix: Vec<Vec<u8>>,
    ops: Vec<String>,
}

/// Parses `{"matrix": [[...]], "ops": ["..."]}`.
pub fn parse_adjacency_json(text: &str) -> Result<CellSpec, ArchError> {
    let raw: AdjacencyJson = serde_json::from_str(text)
        .map_err(|e| ArchError::MalformedEncoding(format!("adjacency json: {e}")))?;
    let labels = raw
        .ops
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<NodeLabel>, _>>()?;
    parse_adjacency_cell(&raw.matrix, &labels)
}

/// Parses either encoding: JSON objects go to the adjacency parser, anything
/// else to the NAS-Bench-201 grammar.
pub fn parse_cell(text: &str) -> Result<CellSpec, ArchError> {
    if text.trim_start().starts_with('{') {
        parse_adjacency_json(text)
    } else {
        parse_nb201_arch(text)
    }
}

/// Uniform i.i.d. operation per NAS-Bench-201 edge slot, drawn from
/// ChaCha8 seeded with `seed`.
pub fn sample_random_cell(seed: u64) -> CellSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = std::array::from_fn(|_| OperationKind::ALL[rng.random_range(0..OperationKind::ALL.len())]);
    CellSpec::nb201(ops)
}

/// Surrogate model NASGraph(h, c, m) plus the probe spatial size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Channels of the first module (`h`).
    pub channels: usize,
    /// Cell copies per module (`c`).
    pub cells_per_module: usize,
    /// Number of modules (`m`).
    pub modules: usize,
    /// Height and width of the stem input.
    pub probe_resolution: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            channels: 16,
            cells_per_module: 1,
            modules: 3,
            probe_resolution: 32,
        }
    }
}

impl SurrogateConfig {
    pub fn new(channels: usize, cells_per_module: usize, modules: usize) -> Self {
        SurrogateConfig {
            channels,
            cells_per_module,
            modules,
            ..SurrogateConfig::default()
        }
    }

    pub fn with_probe_resolution(mut self, probe_resolution: usize) -> Self {
        self.probe_resolution = probe_resolution;
        self
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let fields = [
            ("channels", self.channels),
            ("cells_per_module", self.cells_per_module),
            ("modules", self.modules),
            ("probe_resolution", self.probe_resolution),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(ArchError::InvalidSurrogate(format!("{name} must be positive")));
        }
        // each reduction halves the resolution
        let reductions = self.modules - 1;
        if reductions >= usize::BITS as usize || self.probe_resolution >> reductions == 0 {
            return Err(ArchError::InvalidSurrogate(format!(
                "probe_resolution {} cannot be halved {} times",
                self.probe_resolution, reductions
            )));
        }
        if reductions >= usize::BITS as usize
            || self.channels.checked_shl(reductions as u32).is_none()
        {
            return Err(ArchError::InvalidSurrogate("channel width overflows".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SurrogateConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "NASGraph({}, {}, {})",
            self.channels, self.cells_per_module, self.modules
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    Sum,
    Concat,
}

/// Where a cell-op block sits in the expanded network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CellSite {
    pub module: usize,
    pub copy: usize,
    pub src: usize,
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    VirtualInput,
    Stem,
    CellOp(OperationKind),
    Reduction,
    Head,
}

/// One input of a block. `source` is a block id; id 0 is the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockInput {
    pub source: usize,
    pub mode: CombineMode,
    pub channel_offset: usize,
}

impl BlockInput {
    pub fn sum(source: usize) -> Self {
        BlockInput {
            source,
            mode: CombineMode::Sum,
            channel_offset: 0,
        }
    }

    pub fn concat(source: usize, channel_offset: usize) -> Self {
        BlockInput {
            source,
            mode: CombineMode::Concat,
            channel_offset,
        }
    }
}

/// Symbolic block of the expanded network; parameters are attached later
/// by `graphify::decompose`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BlockDescriptor {
    pub id: usize,
    pub kind: BlockKind,
    pub site: Option<CellSite>,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Square spatial size of the block input.
    pub input_hw: usize,
    pub inputs: Vec<BlockInput>,
}

/// Id of the network input in every block plan.
pub const NETWORK_INPUT: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ArchitectureSpec {
    pub cell: CellSpec,
    pub surrogate: SurrogateConfig,
    pub block_plan: Vec<BlockDescriptor>,
}

impl ArchitectureSpec {
    pub fn block(&self, id: usize) -> Option<&BlockDescriptor> {
        self.block_plan.iter().find(|b| b.id == id)
    }
}

/// Expands a cell into the macro skeleton:
///
/// ```text
/// stem Conv3x3(3 -> h)
/// module 0:      c cells at width h
/// reduction:     AvgPool(2, stride 2) + Conv1x1(h -> 2h)
/// module 1:      c cells at width 2h
/// ...
/// head:          global average pool
/// ```
///
/// Block ids start at 1; id 0 refers to the network input.
pub fn expand(cell: &CellSpec, surrogate: SurrogateConfig) -> Result<ArchitectureSpec, ArchError> {
    surrogate.validate()?;

    let mut plan = Vec::new();
    let mut next_id = NETWORK_INPUT + 1;
    let mut push = |plan: &mut Vec<BlockDescriptor>,
                    kind,
                    site,
                    in_channels,
                    out_channels,
                    input_hw,
                    sources: &[usize]| {
        let id = next_id;
        next_id += 1;
        plan.push(BlockDescriptor {
            id,
            kind,
            site,
            in_channels,
            out_channels,
            input_hw,
            inputs: sources.iter().copied().map(BlockInput::sum).collect(),
        });
        id
    };

    let mut width = surrogate.channels;
    let mut hw = surrogate.probe_resolution;
    let stem = push(
        &mut plan,
        BlockKind::Stem,
        None,
        STEM_INPUT_CHANNELS,
        width,
        hw,
        &[NETWORK_INPUT],
    );
    let mut frontier = vec![stem];

    for module in 0..surrogate.modules {
        if module > 0 {
            let reduction = push(
                &mut plan,
                BlockKind::Reduction,
                None,
                width,
                width * 2,
                hw,
                &frontier,
            );
            width *= 2;
            hw /= 2;
            frontier = vec![reduction];
        }
        for copy in 0..surrogate.cells_per_module {
            let mut node_sources: Vec<Vec<usize>> = vec![Vec::new(); cell.node_count()];
            node_sources[0] = std::mem::take(&mut frontier);
            for e in cell.edges() {
                let site = CellSite {
                    module,
                    copy,
                    src: e.src,
                    dst: e.dst,
                };
                let sources = node_sources[e.src].clone();
                let id = push(
                    &mut plan,
                    BlockKind::CellOp(e.op),
                    Some(site),
                    width,
                    width,
                    hw,
                    &sources,
                );
                node_sources[e.dst].push(id);
            }
            frontier = node_sources.pop().unwrap_or_default();
        }
    }

    push(&mut plan, BlockKind::Head, None, width, width, hw, &frontier);

    Ok(ArchitectureSpec {
        cell: cell.clone(),
        surrogate,
        block_plan: plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use OperationKind::*;

    #[test]
    fn parses_mixed_cell() {
        let cell =
            parse_nb201_arch("|nor_conv_3x3~0|+|none~0|skip_connect~1|+|none~0|none~1|avg_pool_3x3~2|")
                .unwrap();
        assert_eq!(cell.node_count(), 4);
        assert_eq!(cell.edges().len(), 6);
        assert_eq!(cell.edge(0, 1), Some(Conv3x3));
        assert_eq!(cell.edge(1, 2), Some(SkipConnect));
        assert_eq!(cell.edge(2, 3), Some(AvgPool3x3));
        assert_eq!(cell.edge(0, 3), Some(None));
    }

    #[test]
    fn parses_all_skip_cell() {
        let cell = parse_nb201_arch(
            "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|skip_connect~1|skip_connect~2|",
        )
        .unwrap();
        assert!(cell.edges().iter().all(|e| e.op == SkipConnect));
        assert_eq!(cell, CellSpec::nb201([SkipConnect; 6]));
    }

    #[test]
    fn rejects_unknown_operation() {
        let err = parse_nb201_arch("|conv~0|+|none~0|none~1|+|none~0|none~1|none~2|").unwrap_err();
        assert_eq!(err, ArchError::UnknownOperation("conv".into()));
    }

    #[test]
    fn rejects_bad_structure() {
        for bad in [
            "",
            "|none~0|",
            "|none~0|+|none~0|none~1|",
            "none~0|+|none~0|none~1|+|none~0|none~1|none~2|",
            "|none~0|+|none~0|+|none~0|none~1|none~2|",
            "|none0|+|none~0|none~1|+|none~0|none~1|none~2|",
            "|none~0|+|none~0|none~0|+|none~0|none~1|none~2|",
            "|none~x|+|none~0|none~1|+|none~0|none~1|none~2|",
            "||+|none~0|none~1|+|none~0|none~1|none~2|",
        ] {
            assert!(
                matches!(parse_nb201_arch(bad), Err(ArchError::MalformedEncoding(_))),
                "{bad:?} should be malformed"
            );
        }
    }

    #[test]
    fn rejects_forward_predecessor() {
        let err = parse_nb201_arch("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|").unwrap_err();
        assert!(matches!(
            err,
            ArchError::BadPredecessorIndex { index: 1, dst: 1, .. }
        ));
    }

    #[test]
    fn renders_back_to_grammar() {
        let s = "|nor_conv_3x3~0|+|none~0|skip_connect~1|+|none~0|none~1|avg_pool_3x3~2|";
        assert_eq!(parse_nb201_arch(s).unwrap().to_nb201_string().unwrap(), s);
    }

    #[test]
    fn adjacency_chain() {
        let m = [[0u8, 1, 0], [0, 0, 1], [0, 0, 0]];
        let cell =
            parse_adjacency_cell(&m, &[NodeLabel::Input, Conv3x3.into(), NodeLabel::Output])
                .unwrap();
        assert_eq!(cell.node_count(), 3);
        assert_eq!(cell.edges().len(), 2);
        assert_eq!(cell.edge(0, 1), Some(Conv3x3));
        assert_eq!(cell.edge(1, 2), Some(SkipConnect));
    }

    #[test]
    fn adjacency_empty_matrix_is_allowed() {
        let m = [[0u8; 3]; 3];
        let cell =
            parse_adjacency_cell(&m, &[NodeLabel::Input, Conv1x1.into(), NodeLabel::Output])
                .unwrap();
        assert!(cell.edges().is_empty());
    }

    #[test]
    fn adjacency_rejections() {
        let labels = [NodeLabel::Input, Conv3x3.into(), NodeLabel::Output];
        let lower = [[0u8, 0, 0], [1, 0, 0], [0, 0, 0]];
        assert_eq!(
            parse_adjacency_cell(&lower, &labels),
            Err(ArchError::NotUpperTriangular { row: 1, col: 0 })
        );
        let diag = [[1u8, 0, 0], [0, 0, 0], [0, 0, 0]];
        assert!(matches!(
            parse_adjacency_cell(&diag, &labels),
            Err(ArchError::NotUpperTriangular { .. })
        ));
        let m = [[0u8, 1, 0], [0, 0, 1], [0, 0, 0]];
        assert!(matches!(
            parse_adjacency_cell(&m, &labels[..2]),
            Err(ArchError::DimensionMismatch(_))
        ));
        let ragged: [&[u8]; 3] = [&[0, 1], &[0, 0, 1], &[0, 0, 0]];
        assert!(matches!(
            parse_adjacency_cell(&ragged, &labels),
            Err(ArchError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn adjacency_json() {
        let cell = parse_cell(
            r#"{"matrix": [[0,1,1],[0,0,1],[0,0,0]], "ops": ["input", "conv1x1-bn-relu", "output"]}"#,
        )
        .unwrap();
        assert_eq!(cell.edge(0, 1), Some(Conv1x1));
        assert_eq!(cell.edge(0, 2), Some(SkipConnect));
        assert!(matches!(
            parse_adjacency_json(r#"{"matrix": [[0]], "ops": ["maxpool3x3"]}"#),
            Err(ArchError::UnknownOperation(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_random_cell(0), sample_random_cell(0));
        assert_eq!(sample_random_cell(0).edges().len(), NB201_EDGES);
    }

    #[test]
    fn minimal_expansion() {
        let cell = CellSpec::nb201([SkipConnect; 6]);
        let arch = expand(&cell, SurrogateConfig::new(1, 1, 1)).unwrap();
        let kinds: Vec<_> = arch.block_plan.iter().map(|b| b.kind).collect();
        assert_eq!(kinds.first(), Some(&BlockKind::Stem));
        assert_eq!(kinds.last(), Some(&BlockKind::Head));
        assert_eq!(kinds.len(), 1 + 6 + 1);
        assert!(!kinds.contains(&BlockKind::Reduction));
    }

    #[test]
    fn head_reads_cell_output_node() {
        let cell = CellSpec::nb201([Conv3x3; 6]);
        let arch = expand(&cell, SurrogateConfig::new(4, 1, 1)).unwrap();
        let head = arch.block_plan.last().unwrap();
        let sources: Vec<_> = head.inputs.iter().map(|i| i.source).collect();
        let into_output: Vec<_> = arch
            .block_plan
            .iter()
            .filter(|b| b.site.is_some_and(|s| s.dst == 3))
            .map(|b| b.id)
            .collect();
        assert_eq!(sources, into_output);
    }

    #[test]
    fn surrogate_validation() {
        assert!(SurrogateConfig::new(0, 1, 1).validate().is_err());
        assert!(SurrogateConfig::new(16, 1, 7)
            .with_probe_resolution(32)
            .validate()
            .is_err());
        assert!(SurrogateConfig::new(16, 1, 6)
            .with_probe_resolution(32)
            .validate()
            .is_ok());
    }
}
