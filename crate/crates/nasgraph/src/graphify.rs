//! Block-wise conversion of an architecture into a DAG.
//!
//! Every graph block (a fused run of kernels whose output is non-negative) is
//! probed independently. A probe feeds an all-ones plane on exactly one input
//! channel and zeros elsewhere; the spatial sum of output channel `j` is the
//! score `ω[i][j]`. An edge `i -> j` exists iff `ω[i][j] > 0`. Because block
//! outputs are non-negative, `ω[i][j] == 0` exactly when output channel `j` is
//! all zeros, so the edge rule needs no tolerance.
//!
//! Each block contributes one node per output channel. A virtual identity
//! block (id 0) stands in for the network input so the stem has sources.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::archspec::{
    ArchitectureSpec, BlockDescriptor, BlockKind, CombineMode, OperationKind, NETWORK_INPUT,
    STEM_INPUT_CHANNELS,
};
use crate::measures::{MeasureError, MeasureKind};
use crate::tensorlite::{
    self, avg_pool, conv2d, global_avg_pool, relu, ConvParams, Tensor3, TensorError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("block {block}: output is not guaranteed non-negative")]
    NegativeOutput { block: usize },
    #[error("block {block}: {detail}")]
    ChannelMismatch { block: usize, detail: String },
    #[error("probe channel {channel} out of range for {in_channels} input channels")]
    ChannelOutOfRange { channel: usize, in_channels: usize },
    #[error("block {block} references unknown or later block {source_id}")]
    BadPredecessor { block: usize, source_id: usize },
    #[error("edge ({src}, {dst}) is out of range or a self-loop")]
    BadEdge { src: usize, dst: usize },
    #[error("at least one seed is required")]
    NoSeeds,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A kernel inside a graph block.
#[derive(Debug, Clone, PartialEq)]
pub enum FusedOp {
    Conv(ConvParams),
    Relu,
    AvgPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    GlobalAvgPool,
    Identity,
    /// Output of the same shape as the input, identically zero.
    Zero,
}

impl FusedOp {
    fn apply(&self, x: &Tensor3) -> Result<Tensor3, TensorError> {
        match self {
            FusedOp::Conv(p) => conv2d(x, p),
            FusedOp::Relu => Ok(relu(x)),
            FusedOp::AvgPool {
                kernel,
                stride,
                padding,
            } => avg_pool(x, *kernel, *stride, *padding),
            FusedOp::GlobalAvgPool => Ok(global_avg_pool(x)),
            FusedOp::Identity => Ok(x.clone()),
            FusedOp::Zero => Ok(Tensor3::zeros(x.channels(), x.height(), x.width())),
        }
    }

    /// Whether the op's output is non-negative given whether its input is.
    fn keeps_non_negative(&self, input_non_negative: bool) -> bool {
        match self {
            FusedOp::Conv(_) => false,
            FusedOp::Relu | FusedOp::Zero => true,
            FusedOp::AvgPool { .. } | FusedOp::GlobalAvgPool | FusedOp::Identity => {
                input_non_negative
            }
        }
    }
}

/// One input feeding a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Predecessor {
    pub block_id: usize,
    pub mode: CombineMode,
    /// Start of this predecessor's channels in the block input (concat only).
    pub channel_offset: usize,
    /// Output channels of the predecessor.
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphBlock {
    block_id: usize,
    kind: BlockKind,
    in_channels: usize,
    out_channels: usize,
    input_hw: (usize, usize),
    fused_ops: Vec<FusedOp>,
    predecessors: Vec<Predecessor>,
}

impl GraphBlock {
    /// Validates shapes, the non-negative output guarantee and the
    /// predecessor layout. The output channel count follows from the ops.
    pub fn new(
        block_id: usize,
        kind: BlockKind,
        in_channels: usize,
        input_hw: (usize, usize),
        fused_ops: Vec<FusedOp>,
        predecessors: Vec<Predecessor>,
    ) -> Result<Self, GraphError> {
        let mismatch = |detail: String| GraphError::ChannelMismatch {
            block: block_id,
            detail,
        };
        if fused_ops.is_empty() {
            return Err(mismatch("block has no kernels".into()));
        }

        // shape inference by a dry run on zeros
        let mut probe = Tensor3::zeros(in_channels, input_hw.0.max(1), input_hw.1.max(1));
        if input_hw.0 == 0 || input_hw.1 == 0 {
            return Err(mismatch("spatial size must be positive".into()));
        }
        let mut non_negative = true;
        for op in &fused_ops {
            probe = op.apply(&probe)?;
            non_negative = op.keeps_non_negative(non_negative);
        }
        if !non_negative {
            return Err(GraphError::NegativeOutput { block: block_id });
        }
        let out_channels = probe.channels();

        let mut ids: Vec<usize> = predecessors.iter().map(|p| p.block_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(mismatch("duplicate predecessor".into()));
        }
        if let Some(first) = predecessors.first() {
            if predecessors.iter().any(|p| p.mode != first.mode) {
                return Err(mismatch("mixed sum and concat inputs".into()));
            }
            match first.mode {
                CombineMode::Sum => {
                    if let Some(p) = predecessors
                        .iter()
                        .find(|p| p.channels != in_channels || p.channel_offset != 0)
                    {
                        return Err(mismatch(format!(
                            "sum input from block {} has {} channels, expected {in_channels}",
                            p.block_id, p.channels
                        )));
                    }
                }
                CombineMode::Concat => {
                    let mut spans: Vec<(usize, usize)> = predecessors
                        .iter()
                        .map(|p| (p.channel_offset, p.channels))
                        .collect();
                    spans.sort_unstable();
                    let mut next = 0;
                    for (offset, channels) in spans {
                        if offset != next || channels == 0 {
                            return Err(mismatch("concat offsets do not partition the input".into()));
                        }
                        next += channels;
                    }
                    if next != in_channels {
                        return Err(mismatch(format!(
                            "concat inputs cover {next} of {in_channels} channels"
                        )));
                    }
                }
            }
        }

        Ok(GraphBlock {
            block_id,
            kind,
            in_channels,
            out_channels,
            input_hw,
            fused_ops,
            predecessors,
        })
    }

    pub fn block_id(&self) -> usize {
        self.block_id
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn input_hw(&self) -> (usize, usize) {
        self.input_hw
    }

    pub fn fused_ops(&self) -> &[FusedOp] {
        &self.fused_ops
    }

    pub fn predecessors(&self) -> &[Predecessor] {
        &self.predecessors
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3, TensorError> {
        let mut y = self.fused_ops[0].apply(x)?;
        for op in &self.fused_ops[1..] {
            y = op.apply(&y)?;
        }
        Ok(y)
    }

    /// Runs a batch layer by layer: every sample goes through kernel `k`
    /// before any sample enters kernel `k + 1`. Samples are independent so the
    /// result equals per-sample [`GraphBlock::forward`] bit for bit.
    pub fn forward_batch(&self, xs: &[Tensor3]) -> Result<Vec<Tensor3>, TensorError> {
        let mut batch: Vec<Tensor3> = xs.to_vec();
        for op in &self.fused_ops {
            batch = batch
                .par_iter()
                .map(|x| op.apply(x))
                .collect::<Result<_, _>>()?;
        }
        Ok(batch)
    }

    pub fn probe_input(&self, channel: usize) -> Result<Tensor3, GraphError> {
        if channel >= self.in_channels {
            return Err(GraphError::ChannelOutOfRange {
                channel,
                in_channels: self.in_channels,
            });
        }
        let (h, w) = self.input_hw;
        Ok(Tensor3::one_hot_channel(self.in_channels, h, w, channel))
    }

    /// One probe source per real predecessor channel, in predecessor order.
    pub fn probe_sources(&self) -> Vec<ProbeSource> {
        self.predecessors
            .iter()
            .flat_map(|p| {
                (0..p.channels).map(move |c| ProbeSource {
                    pred_block: p.block_id,
                    pred_channel: c,
                    input_channel: match p.mode {
                        CombineMode::Sum => c,
                        CombineMode::Concat => p.channel_offset + c,
                    },
                })
            })
            .collect()
    }

    /// Copy with every convolution weight and bias multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> GraphBlock {
        let mut out = self.clone();
        for op in &mut out.fused_ops {
            if let FusedOp::Conv(p) = op {
                p.weights.iter_mut().for_each(|w| *w *= factor);
                p.bias.iter_mut().for_each(|b| *b *= factor);
            }
        }
        out
    }
}

/// Forward pass of `block` on the probe mask for input channel `channel`.
pub fn probe_block(block: &GraphBlock, channel: usize) -> Result<Tensor3, GraphError> {
    let input = block.probe_input(channel)?;
    Ok(block.forward(&input)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProbeSource {
    pub pred_block: usize,
    pub pred_channel: usize,
    /// Channel of the block input that the probe activates.
    pub input_channel: usize,
}

/// How the probes of one block are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeStrategy {
    /// One forward call per probe.
    #[default]
    Sequential,
    /// All probes of a block as one batch.
    Batched,
}

/// Counts probe forward passes.
#[derive(Debug, Default)]
pub struct ProbeCounter(AtomicUsize);

impl ProbeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }

    fn add(&self, n: usize) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }
}

/// Score matrix of one block: one row per probe source, one column per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    pub block_id: usize,
    pub sources: Vec<ProbeSource>,
    pub out_channels: usize,
    omega: Vec<f64>,
}

impl EdgeScores {
    pub fn get(&self, row: usize, out: usize) -> f64 {
        self.omega[row * self.out_channels + out]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.omega[row * self.out_channels..(row + 1) * self.out_channels]
    }

    pub fn rows(&self) -> usize {
        self.sources.len()
    }

    pub fn as_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r).to_vec()).collect()
    }
}

pub fn edge_scores(block: &GraphBlock) -> Result<EdgeScores, GraphError> {
    edge_scores_with(block, ProbeStrategy::Sequential, &ProbeCounter::new())
}

pub fn edge_scores_with(
    block: &GraphBlock,
    strategy: ProbeStrategy,
    counter: &ProbeCounter,
) -> Result<EdgeScores, GraphError> {
    let sources = block.probe_sources();
    let outputs: Vec<Tensor3> = match strategy {
        ProbeStrategy::Sequential => sources
            .iter()
            .map(|s| {
                counter.add(1);
                probe_block(block, s.input_channel)
            })
            .collect::<Result<_, _>>()?,
        ProbeStrategy::Batched => {
            let inputs = sources
                .iter()
                .map(|s| block.probe_input(s.input_channel))
                .collect::<Result<Vec<_>, _>>()?;
            counter.add(inputs.len());
            block.forward_batch(&inputs)?
        }
    };
    let out_channels = block.out_channels;
    let mut omega = Vec::with_capacity(sources.len() * out_channels);
    for y in &outputs {
        omega.extend((0..out_channels).map(|j| y.channel_sum(j)));
    }
    Ok(EdgeScores {
        block_id: block.block_id,
        sources,
        out_channels,
        omega,
    })
}

/// Graph node: one output channel of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId {
    pub block: usize,
    pub channel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}

/// Directed graph with edges sorted by `(src, dst)`, no duplicates and no
/// self-loops. Converted graphs additionally have `src < dst` on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchGraph {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
}

impl ArchGraph {
    /// Plain digraph on `node_count` nodes with unit scores; nodes are
    /// labelled `(0, i)`. Duplicate pairs are merged.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let nodes = (0..node_count)
            .map(|channel| NodeId { block: 0, channel })
            .collect();
        let mut list = Vec::new();
        for (src, dst) in edges {
            if src >= node_count || dst >= node_count || src == dst {
                return Err(GraphError::BadEdge { src, dst });
            }
            list.push(Edge {
                src,
                dst,
                score: 1.0,
            });
        }
        Ok(Self::from_parts(nodes, list))
    }

    fn from_parts(nodes: Vec<NodeId>, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.src, e.dst));
        edges.dedup_by_key(|e| (e.src, e.dst));
        ArchGraph { nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges
            .binary_search_by_key(&(src, dst), |e| (e.src, e.dst))
            .is_ok()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        self.edges.iter().for_each(|e| deg[e.dst] += 1);
        deg
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        self.edges.iter().for_each(|e| deg[e.src] += 1);
        deg
    }

    /// True when every edge points from a lower to a higher node index,
    /// which makes the graph acyclic.
    pub fn is_forward(&self) -> bool {
        self.edges.iter().all(|e| e.src < e.dst)
    }

    pub fn reversed(&self) -> ArchGraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: e.dst,
                dst: e.src,
                score: e.score,
            })
            .collect();
        Self::from_parts(self.nodes.clone(), edges)
    }

    /// Moves node `i` to position `perm[i]`. Node labels are reset to `(0, i)`.
    pub fn relabeled(&self, perm: &[usize]) -> ArchGraph {
        assert_eq!(perm.len(), self.nodes.len());
        let nodes = (0..self.nodes.len())
            .map(|channel| NodeId { block: 0, channel })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: perm[e.src],
                dst: perm[e.dst],
                score: e.score,
            })
            .collect();
        Self::from_parts(nodes, edges)
    }

    /// `src_block:src_ch<TAB>dst_block:dst_ch<TAB>score` per edge, sorted by
    /// `(src, dst)`, scores with 9 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (s, d) = (self.nodes[e.src], self.nodes[e.dst]);
            out.push_str(&format!(
                "{}:{}\t{}:{}\t{}\n",
                s.block,
                s.channel,
                d.block,
                d.channel,
                format_significant(e.score, 9)
            ));
        }
        out
    }

    /// Graphviz digraph with node ids `b<block>_c<channel>`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph nasgraph {\n");
        for n in &self.nodes {
            out.push_str(&format!("  b{}_c{};\n", n.block, n.channel));
        }
        for e in &self.edges {
            let (s, d) = (self.nodes[e.src], self.nodes[e.dst]);
            out.push_str(&format!(
                "  b{}_c{} -> b{}_c{} [score=\"{}\"];\n",
                s.block,
                s.channel,
                d.block,
                d.channel,
                format_significant(e.score, 9)
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// C `%.{digits}g` formatting.
pub fn format_significant(value: f64, digits: usize) -> String {
    assert!(digits > 0);
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Seeded parameters for every block of the plan, with the virtual input
/// block (id 0) prepended.
///
/// Convolution weights are `N(0, 1/fan_in)` from [`tensorlite::gaussian_init_stream`]
/// keyed by `seed` and stream `block_id << 8 | kernel_index`; biases are zero.
pub fn decompose(arch: &ArchitectureSpec, seed: u64) -> Result<Vec<GraphBlock>, GraphError> {
    let res = arch.surrogate.probe_resolution;
    let mut blocks = Vec::with_capacity(arch.block_plan.len() + 1);
    blocks.push(GraphBlock::new(
        NETWORK_INPUT,
        BlockKind::VirtualInput,
        STEM_INPUT_CHANNELS,
        (res, res),
        vec![FusedOp::Identity],
        Vec::new(),
    )?);
    let mut out_channels: HashMap<usize, usize> = HashMap::new();
    out_channels.insert(NETWORK_INPUT, STEM_INPUT_CHANNELS);

    for desc in &arch.block_plan {
        let predecessors = desc
            .inputs
            .iter()
            .map(|input| {
                let channels = *out_channels
                    .get(&input.source)
                    .ok_or(GraphError::BadPredecessor {
                        block: desc.id,
                        source_id: input.source,
                    })?;
                Ok(Predecessor {
                    block_id: input.source,
                    mode: input.mode,
                    channel_offset: input.channel_offset,
                    channels,
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        let ops = lower_block(desc, seed)?;
        let block = GraphBlock::new(
            desc.id,
            desc.kind,
            desc.in_channels,
            (desc.input_hw, desc.input_hw),
            ops,
            predecessors,
        )?;
        if block.out_channels() != desc.out_channels {
            return Err(GraphError::ChannelMismatch {
                block: desc.id,
                detail: format!(
                    "lowered block has {} outputs, plan says {}",
                    block.out_channels(),
                    desc.out_channels
                ),
            });
        }
        out_channels.insert(desc.id, block.out_channels());
        blocks.push(block);
    }
    Ok(blocks)
}

fn seeded_conv(
    desc: &BlockDescriptor,
    kernel_index: u64,
    seed: u64,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    padding: usize,
) -> Result<FusedOp, TensorError> {
    let shape = [out_channels, in_channels, kernel, kernel];
    let fan_in = (in_channels * kernel * kernel) as f64;
    let stream = ((desc.id as u64) << 8) | kernel_index;
    let weights = tensorlite::gaussian_init_stream(&shape, seed, stream, fan_in.sqrt().recip());
    Ok(FusedOp::Conv(ConvParams::square(
        out_channels,
        in_channels,
        kernel,
        1,
        padding,
        weights,
    )?))
}

fn lower_block(desc: &BlockDescriptor, seed: u64) -> Result<Vec<FusedOp>, GraphError> {
    let (cin, cout) = (desc.in_channels, desc.out_channels);
    let ops = match desc.kind {
        BlockKind::VirtualInput => vec![FusedOp::Identity],
        BlockKind::Stem => vec![seeded_conv(desc, 0, seed, cin, cout, 3, 1)?, FusedOp::Relu],
        BlockKind::CellOp(op) => match op {
            OperationKind::None => vec![FusedOp::Zero],
            OperationKind::SkipConnect => vec![FusedOp::Identity],
            OperationKind::Conv1x1 => {
                vec![seeded_conv(desc, 0, seed, cin, cout, 1, 0)?, FusedOp::Relu]
            }
            OperationKind::Conv3x3 => {
                vec![seeded_conv(desc, 0, seed, cin, cout, 3, 1)?, FusedOp::Relu]
            }
            OperationKind::AvgPool3x3 => vec![FusedOp::AvgPool {
                kernel: 3,
                stride: 1,
                padding: 1,
            }],
        },
        BlockKind::Reduction => vec![
            FusedOp::AvgPool {
                kernel: 2,
                stride: 2,
                padding: 0,
            },
            seeded_conv(desc, 1, seed, cin, cout, 1, 0)?,
            FusedOp::Relu,
        ],
        BlockKind::Head => vec![FusedOp::GlobalAvgPool],
    };
    Ok(ops)
}

/// Builds the graph of an already-decomposed, topologically ordered block
/// list. Blocks are probed in parallel; the edge list is canonical regardless.
pub fn convert_blocks(blocks: &[GraphBlock], strategy: ProbeStrategy) -> Result<ArchGraph, GraphError> {
    convert_blocks_counted(blocks, strategy, &ProbeCounter::new())
}

pub fn convert_blocks_counted(
    blocks: &[GraphBlock],
    strategy: ProbeStrategy,
    counter: &ProbeCounter,
) -> Result<ArchGraph, GraphError> {
    let mut offsets: HashMap<usize, usize> = HashMap::with_capacity(blocks.len());
    let mut nodes = Vec::new();
    for block in blocks {
        for p in block.predecessors() {
            if !offsets.contains_key(&p.block_id) {
                return Err(GraphError::BadPredecessor {
                    block: block.block_id(),
                    source_id: p.block_id,
                });
            }
        }
        if offsets.insert(block.block_id(), nodes.len()).is_some() {
            return Err(GraphError::ChannelMismatch {
                block: block.block_id(),
                detail: "duplicate block id".into(),
            });
        }
        nodes.extend((0..block.out_channels()).map(|channel| NodeId {
            block: block.block_id(),
            channel,
        }));
    }

    let scores: Vec<EdgeScores> = blocks
        .par_iter()
        .map(|b| edge_scores_with(b, strategy, counter))
        .collect::<Result<_, _>>()?;

    let mut edges = Vec::new();
    for s in &scores {
        let dst_base = offsets[&s.block_id];
        for (row, source) in s.sources.iter().enumerate() {
            let src = offsets[&source.pred_block] + source.pred_channel;
            for (j, &w) in s.row(row).iter().enumerate() {
                if w > 0.0 {
                    edges.push(Edge {
                        src,
                        dst: dst_base + j,
                        score: w,
                    });
                }
            }
        }
    }
    // Node ids sort by (block, channel) only when block ids ascend.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| nodes[i]);
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        let mut rank = vec![0; nodes.len()];
        for (k, &i) in order.iter().enumerate() {
            rank[i] = k;
        }
        edges.iter_mut().for_each(|e| {
            e.src = rank[e.src];
            e.dst = rank[e.dst];
        });
        nodes.sort();
    }
    Ok(ArchGraph::from_parts(nodes, edges))
}

pub fn convert(arch: &ArchitectureSpec, seed: u64) -> Result<ArchGraph, GraphError> {
    convert_with(arch, seed, ProbeStrategy::Sequential)
}

pub fn convert_with(
    arch: &ArchitectureSpec,
    seed: u64,
    strategy: ProbeStrategy,
) -> Result<ArchGraph, GraphError> {
    convert_blocks(&decompose(arch, seed)?, strategy)
}

/// Measure value of the converted graph for each seed, in seed order.
pub fn score_per_seed(
    arch: &ArchitectureSpec,
    measure: MeasureKind,
    seeds: &[u64],
) -> Result<Vec<f64>, GraphError> {
    seeds
        .iter()
        .map(|&seed| Ok(measure.evaluate(&convert(arch, seed)?)?))
        .collect()
}

/// Mean measure over per-seed conversions.
pub fn score_architecture(
    arch: &ArchitectureSpec,
    measure: MeasureKind,
    seeds: &[u64],
) -> Result<f64, GraphError> {
    if seeds.is_empty() {
        return Err(GraphError::NoSeeds);
    }
    Ok(order_free_mean(&score_per_seed(arch, measure, seeds)?))
}

/// Arithmetic mean that depends only on the multiset of values: the values
/// are sorted and summed as offsets from the minimum, so permutations give the
/// same bits and a constant list returns that constant exactly.
pub fn order_free_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = sorted[0];
    let offset: f64 = sorted.iter().map(|v| v - base).sum();
    base + offset / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspec::{expand, CellSpec, SurrogateConfig};

    fn sum_pred(block_id: usize, channels: usize) -> Predecessor {
        Predecessor {
            block_id,
            mode: CombineMode::Sum,
            channel_offset: 0,
            channels,
        }
    }

    fn input_block(channels: usize, hw: usize) -> GraphBlock {
        GraphBlock::new(
            0,
            BlockKind::VirtualInput,
            channels,
            (hw, hw),
            vec![FusedOp::Identity],
            vec![],
        )
        .unwrap()
    }

    fn pm_one_block() -> GraphBlock {
        let conv = ConvParams::square(2, 1, 1, 1, 0, vec![1.0, -1.0]).unwrap();
        GraphBlock::new(
            1,
            BlockKind::CellOp(OperationKind::Conv1x1),
            1,
            (2, 2),
            vec![FusedOp::Conv(conv), FusedOp::Relu],
            vec![sum_pred(0, 1)],
        )
        .unwrap()
    }

    #[test]
    fn probe_of_signed_conv() {
        let y = probe_block(&pm_one_block(), 0).unwrap();
        assert_eq!(y.channel(0), &[1.0; 4]);
        assert_eq!(y.channel(1), &[0.0; 4]);
        let scores = edge_scores(&pm_one_block()).unwrap();
        assert_eq!(scores.as_matrix(), vec![vec![4.0, 0.0]]);
        assert!(matches!(
            probe_block(&pm_one_block(), 1),
            Err(GraphError::ChannelOutOfRange { .. })
        ));
    }

    #[test]
    fn identity_and_zero_probes() {
        let k = 3;
        let skip = GraphBlock::new(
            1,
            BlockKind::CellOp(OperationKind::SkipConnect),
            k,
            (4, 4),
            vec![FusedOp::Identity],
            vec![sum_pred(0, k)],
        )
        .unwrap();
        let y = probe_block(&skip, 1).unwrap();
        assert!(y.is_channel_zero(0) && y.is_channel_zero(2));
        assert_eq!(y.channel(1), &[1.0; 16]);
        let m = edge_scores(&skip).unwrap().as_matrix();
        for (i, row) in m.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                assert_eq!(w, if i == j { 16.0 } else { 0.0 });
            }
        }

        let zero = GraphBlock::new(
            1,
            BlockKind::CellOp(OperationKind::None),
            k,
            (4, 4),
            vec![FusedOp::Zero],
            vec![sum_pred(0, k)],
        )
        .unwrap();
        assert_eq!(probe_block(&zero, 0).unwrap(), Tensor3::zeros(k, 4, 4));
    }

    #[test]
    fn rejects_possibly_negative_blocks() {
        let conv = ConvParams::square(1, 1, 1, 1, 0, vec![1.0]).unwrap();
        let err = GraphBlock::new(
            1,
            BlockKind::Stem,
            1,
            (2, 2),
            vec![FusedOp::Conv(conv.clone())],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::NegativeOutput { block: 1 });
        // pooling after ReLU keeps the guarantee
        assert!(GraphBlock::new(
            1,
            BlockKind::Stem,
            1,
            (4, 4),
            vec![
                FusedOp::Conv(conv),
                FusedOp::Relu,
                FusedOp::AvgPool {
                    kernel: 2,
                    stride: 2,
                    padding: 0
                }
            ],
            vec![],
        )
        .is_ok());
    }

    #[test]
    fn rejects_bad_predecessor_layouts() {
        let skip = |preds| {
            GraphBlock::new(
                5,
                BlockKind::CellOp(OperationKind::SkipConnect),
                4,
                (2, 2),
                vec![FusedOp::Identity],
                preds,
            )
        };
        assert!(skip(vec![sum_pred(0, 3)]).is_err());
        assert!(skip(vec![sum_pred(0, 4), sum_pred(0, 4)]).is_err());
        let cat = |id, offset, channels| Predecessor {
            block_id: id,
            mode: CombineMode::Concat,
            channel_offset: offset,
            channels,
        };
        assert!(skip(vec![cat(1, 0, 2), cat(2, 2, 2)]).is_ok());
        assert!(skip(vec![cat(1, 0, 2), cat(2, 1, 3)]).is_err());
        assert!(skip(vec![cat(1, 0, 2), cat(2, 2, 1)]).is_err());
        assert!(skip(vec![cat(1, 0, 2), sum_pred(2, 4)]).is_err());
    }

    #[test]
    fn identity_architecture_is_disjoint_chains() {
        let k = 4;
        let blocks = vec![
            input_block(k, 3),
            GraphBlock::new(
                1,
                BlockKind::CellOp(OperationKind::SkipConnect),
                k,
                (3, 3),
                vec![FusedOp::Identity],
                vec![sum_pred(0, k)],
            )
            .unwrap(),
        ];
        let g = convert_blocks(&blocks, ProbeStrategy::Sequential).unwrap();
        assert_eq!(g.node_count(), 2 * k);
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.src, e.dst, e.score)).collect();
        let expected: Vec<_> = (0..k).map(|c| (c, k + c, 9.0)).collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn negative_weights_give_no_edges() {
        let conv = ConvParams::square(3, 2, 3, 1, 1, vec![-0.5; 54]).unwrap();
        let blocks = vec![
            input_block(2, 4),
            GraphBlock::new(
                1,
                BlockKind::CellOp(OperationKind::Conv3x3),
                2,
                (4, 4),
                vec![FusedOp::Conv(conv), FusedOp::Relu],
                vec![sum_pred(0, 2)],
            )
            .unwrap(),
        ];
        let g = convert_blocks(&blocks, ProbeStrategy::Sequential).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 5);
    }

    #[test]
    fn decompose_all_skip_minimal() {
        let arch = expand(
            &CellSpec::nb201([OperationKind::SkipConnect; 6]),
            SurrogateConfig::new(1, 1, 1),
        )
        .unwrap();
        let blocks = decompose(&arch, 0).unwrap();
        let kinds: Vec<_> = blocks.iter().map(|b| b.kind()).collect();
        let mut expected = vec![BlockKind::VirtualInput, BlockKind::Stem];
        expected.extend([BlockKind::CellOp(OperationKind::SkipConnect); 6]);
        expected.push(BlockKind::Head);
        assert_eq!(kinds, expected);
        assert_eq!(decompose(&arch, 0).unwrap(), blocks);
        assert_ne!(decompose(&arch, 1).unwrap(), blocks);
    }

    #[test]
    fn tsv_and_dot_shapes() {
        let blocks = vec![input_block(1, 2), pm_one_block()];
        let g = convert_blocks(&blocks, ProbeStrategy::Sequential).unwrap();
        assert_eq!(g.to_tsv(), "0:0\t1:0\t4\n");
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph nasgraph {\n"));
        assert!(dot.contains("  b1_c1;\n"));
        assert!(dot.contains("  b0_c0 -> b1_c0 [score=\"4\"];\n"));
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(4.0, 9), "4");
        assert_eq!(format_significant(1024.0, 9), "1024");
        assert_eq!(format_significant(0.1234567891, 9), "0.123456789");
        assert_eq!(format_significant(123456789.4, 9), "123456789");
        assert_eq!(format_significant(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_significant(0.0000123, 9), "1.23e-05");
        assert_eq!(format_significant(0.9999999999, 9), "1");
        assert_eq!(format_significant(-2.5, 9), "-2.5");
    }

    #[test]
    fn mean_is_order_free() {
        let v = [0.1, 0.7, 0.3, 1e-3];
        let mut w = v;
        w.reverse();
        assert_eq!(order_free_mean(&v).to_bits(), order_free_mean(&w).to_bits());
        let c = 0.1 + 0.2;
        assert_eq!(order_free_mean(&[c; 7]), c);
    }
}
