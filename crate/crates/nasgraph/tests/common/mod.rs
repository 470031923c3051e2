//! Test-side oracles, written from the definitions and sharing no code with
//! the library beyond plain data types.
#![allow(dead_code, clippy::needless_range_loop)]

use nasgraph::archspec::{BlockKind, CombineMode, OperationKind};
use nasgraph::graphify::{FusedOp, GraphBlock, Predecessor};
use nasgraph::tensorlite::{ConvParams, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- kernels

/// Direct six-loop convolution, `(ic, ky, kx)` accumulation, bias last.
pub fn naive_conv(x: &Tensor3, p: &ConvParams) -> Tensor3 {
    let (cin, h, w) = x.shape();
    assert_eq!(cin, p.in_channels);
    let oh = (h + 2 * p.padding - p.kernel_h) / p.stride + 1;
    let ow = (w + 2 * p.padding - p.kernel_w) / p.stride + 1;
    let mut out = Vec::with_capacity(p.out_channels * oh * ow);
    for o in 0..p.out_channels {
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = 0.0;
                for i in 0..cin {
                    for a in 0..p.kernel_h {
                        for b in 0..p.kernel_w {
                            let iy = (r * p.stride + a) as isize - p.padding as isize;
                            let ix = (c * p.stride + b) as isize - p.padding as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                acc += p.weight(o, i, a, b) * x.get(i, iy as usize, ix as usize);
                            }
                        }
                    }
                }
                out.push(acc + p.bias[o]);
            }
        }
    }
    Tensor3::new(p.out_channels, oh, ow, out).unwrap()
}

pub fn naive_relu(x: &Tensor3) -> Tensor3 {
    let (c, h, w) = x.shape();
    Tensor3::new(c, h, w, x.data().iter().map(|&v| v.max(0.0)).collect()).unwrap()
}

/// Average over the in-bounds part of each window.
pub fn naive_avg_pool(x: &Tensor3, k: usize, s: usize, p: usize) -> Tensor3 {
    let (ch, h, w) = x.shape();
    let oh = (h + 2 * p - k) / s + 1;
    let ow = (w + 2 * p - k) / s + 1;
    let mut out = Vec::new();
    for c in 0..ch {
        for r in 0..oh {
            for q in 0..ow {
                let (mut sum, mut n) = (0.0, 0usize);
                for a in 0..k {
                    for b in 0..k {
                        let iy = (r * s + a) as isize - p as isize;
                        let ix = (q * s + b) as isize - p as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            sum += x.get(c, iy as usize, ix as usize);
                            n += 1;
                        }
                    }
                }
                out.push(sum / n as f64);
            }
        }
    }
    Tensor3::new(ch, oh, ow, out).unwrap()
}

pub fn naive_forward(x: &Tensor3, ops: &[FusedOp]) -> Tensor3 {
    let mut y = x.clone();
    for op in ops {
        y = match op {
            FusedOp::Conv(p) => naive_conv(&y, p),
            FusedOp::Relu => naive_relu(&y),
            FusedOp::AvgPool {
                kernel,
                stride,
                padding,
            } => naive_avg_pool(&y, *kernel, *stride, *padding),
            FusedOp::Identity => y,
            FusedOp::Zero => {
                let (c, h, w) = y.shape();
                Tensor3::new(c, h, w, vec![0.0; c * h * w]).unwrap()
            }
            FusedOp::GlobalAvgPool => {
                let (c, h, w) = y.shape();
                let means = (0..c)
                    .map(|ch| y.channel(ch).iter().sum::<f64>() / (h * w) as f64)
                    .collect();
                Tensor3::new(c, 1, 1, means).unwrap()
            }
        };
    }
    y
}

// ----------------------------------------------------------- random blocks

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; independent of the library's sampler.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Weights where each `(out, in)` kernel slice is, with equal chance, zero,
/// strictly negative, or Gaussian. The first two make absent edges common.
pub fn structured_weights(rng: &mut ChaCha8Rng, cout: usize, cin: usize, k: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(cout * cin * k * k);
    for _ in 0..cout * cin {
        let mode = rng.random_range(0..3);
        for _ in 0..k * k {
            w.push(match mode {
                0 => 0.0,
                1 => -rng.random_range(0.1..1.0),
                _ => normal(rng),
            });
        }
    }
    w
}

pub fn sum_input(block_id: usize, channels: usize) -> Predecessor {
    Predecessor {
        block_id,
        mode: CombineMode::Sum,
        channel_offset: 0,
        channels,
    }
}

/// Conv (kernel 1 or 3) with an optional average pool, then ReLU; channels
/// at most 8 and spatial size at most 8. Fed by block 0.
pub fn random_block(rng: &mut ChaCha8Rng) -> GraphBlock {
    let cin = rng.random_range(1..=8);
    let cout = rng.random_range(1..=8);
    let h = rng.random_range(1..=8);
    let w = rng.random_range(1..=8);
    let k = if rng.random_bool(0.5) { 1 } else { 3 };
    let pad = if k == 3 && rng.random_bool(0.8) { 1 } else { 0 };
    let (h, w) = (h.max(k - 2 * pad), w.max(k - 2 * pad));
    let weights = structured_weights(rng, cout, cin, k);
    let bias = if rng.random_bool(0.15) {
        (0..cout).map(|_| normal(rng) * 0.1).collect()
    } else {
        vec![0.0; cout]
    };
    let conv = ConvParams::new(cout, cin, k, k, 1, pad, weights, bias).unwrap();
    let mut ops = vec![FusedOp::Conv(conv)];
    let (oh, ow) = (h + 2 * pad - k + 1, w + 2 * pad - k + 1);
    match rng.random_range(0..3) {
        0 => ops.push(FusedOp::AvgPool {
            kernel: 3,
            stride: 1,
            padding: 1,
        }),
        1 if oh >= 2 && ow >= 2 => ops.push(FusedOp::AvgPool {
            kernel: 2,
            stride: 2,
            padding: 0,
        }),
        _ => {}
    }
    ops.push(FusedOp::Relu);
    let kind = BlockKind::CellOp(if k == 1 {
        OperationKind::Conv1x1
    } else {
        OperationKind::Conv3x3
    });
    GraphBlock::new(1, kind, cin, (h, w), ops, vec![sum_input(0, cin)]).unwrap()
}

pub fn input_block(channels: usize, hw: (usize, usize)) -> GraphBlock {
    GraphBlock::new(0, BlockKind::VirtualInput, channels, hw, vec![FusedOp::Identity], vec![]).unwrap()
}

/// `(i, j)` edges of a single block by the definition: probe input channel
/// `i` with all ones and check whether output channel `j` has any non-zero.
pub fn oracle_edges(block: &GraphBlock) -> Vec<(usize, usize)> {
    let (h, w) = block.input_hw();
    let mut edges = Vec::new();
    for i in 0..block.in_channels() {
        let mut data = vec![0.0; block.in_channels() * h * w];
        data[i * h * w..(i + 1) * h * w].iter_mut().for_each(|v| *v = 1.0);
        let x = Tensor3::new(block.in_channels(), h, w, data).unwrap();
        let y = naive_forward(&x, block.fused_ops());
        for j in 0..y.channels() {
            if y.channel(j).iter().any(|&v| v != 0.0) {
                edges.push((i, j));
            }
        }
    }
    edges
}

// ---------------------------------------------------------------- measures

pub struct Digraph {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
}

impl Digraph {
    pub fn random_dag(rng: &mut ChaCha8Rng, max_n: usize) -> Digraph {
        let n = rng.random_range(2..=max_n);
        let p = rng.random_range(0.0..1.0);
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                adj[i][j] = rng.random_bool(p);
            }
        }
        Digraph { n, adj }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.adj[i][j] {
                    e.push((i, j));
                }
            }
        }
        e
    }

    fn linked(&self, i: usize, j: usize) -> bool {
        self.adj[i][j] || self.adj[j][i]
    }

    pub fn average_degree(&self) -> f64 {
        let mut pairs = 0usize;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.linked(i, j) {
                    pairs += 1;
                }
            }
        }
        2.0 * pairs as f64 / self.n as f64
    }

    pub fn density(&self) -> f64 {
        self.edges().len() as f64 / (self.n * (self.n - 1)) as f64
    }

    /// `(1' A s_in) / (1' A 1)` with explicit matrix products.
    pub fn resilience(&self) -> f64 {
        let s_in: Vec<f64> = (0..self.n)
            .map(|j| (0..self.n).filter(|&i| self.adj[i][j]).count() as f64)
            .collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let a = if self.adj[i][j] { 1.0 } else { 0.0 };
                num += a * s_in[j];
                den += a;
            }
        }
        num / den
    }

    /// Paths of length two `u - v - w` with `u < w`, enumerated explicitly.
    pub fn wedge_count(&self) -> u64 {
        let mut count = 0;
        for v in 0..self.n {
            for u in 0..self.n {
                for w in u + 1..self.n {
                    if u != v && w != v && self.linked(u, v) && self.linked(v, w) {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

// ------------------------------------------------------------ correlations

/// Average ranks, 1 = largest, by counting.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let greater = x.iter().filter(|&&u| u > v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

/// Tau-b by enumerating all pairs.
pub fn oracle_kendall(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx * dy > 0.0 {
                concordant += 1;
            } else if dx * dy < 0.0 {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (concordant - discordant) as f64 / (((n0 - tie_x) as f64) * ((n0 - tie_y) as f64)).sqrt()
}

/// Vector of length `n` drawn from `levels` distinct values, so ties are
/// frequent when `levels` is small.
pub fn tied_vector(rng: &mut ChaCha8Rng, n: usize, levels: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(0..levels) as f64 * 0.37 - 1.0)
        .collect()
}
