//! The convolutional function node `Φ`: one convolutional layer over the
//! neural inputs `u`, followed by a dense combiner, both with ReLU.
//!
//! Each of the `f` filters spans both constellation rows and `κ` adjacent
//! positions, moves with stride 1 over a zero-padded input and so yields one
//! value per symbol. The dense combiner maps the `f` filter outputs at each
//! position to the two entries of `v_i`, with weights shared across positions.
//! Outputs are floored at [`NEURAL_FLOOR`] so `v` never annihilates a belief.
//!
//! Parameters of all unrolled iterations live in one flat buffer, block by
//! block, in the order: filters `[k][row][tap]`, filter biases `[k]`, dense
//! weights `[row][k]`, dense biases `[row]`, edge weights `[edge]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Lower bound on each entry of the neural factor `v`.
pub const NEURAL_FLOOR: f64 = 1e-6;

/// Standard deviation of the truncated-normal initialization.
pub const INIT_STD: f64 = 0.03;

/// Sizes of one iteration's parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamShape {
    /// Number of filters f.
    pub filters: usize,
    /// Filter width κ.
    pub kappa: usize,
    /// Number of directed factor-graph edges carrying a weight.
    pub edges: usize,
}

impl ParamShape {
    fn conv_len(&self) -> usize {
        self.filters * 2 * self.kappa
    }

    /// Offsets of the five groups inside a block, plus the block length.
    fn offsets(&self) -> [usize; 6] {
        let conv = 0;
        let conv_bias = conv + self.conv_len();
        let dense = conv_bias + self.filters;
        let dense_bias = dense + 2 * self.filters;
        let edges = dense_bias + 2;
        [conv, conv_bias, dense, dense_bias, edges, edges + self.edges]
    }

    pub fn block_len(&self) -> usize {
        self.offsets()[5]
    }

    /// Left zero padding; `κ − 1` positions are padded in total.
    pub fn left_pad(&self) -> usize {
        (self.kappa - 1) / 2
    }
}

/// Parameter groups, for per-group reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    ConvFilters,
    ConvBias,
    DenseWeights,
    DenseBias,
    EdgeWeights,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::ConvFilters,
        ParamGroup::ConvBias,
        ParamGroup::DenseWeights,
        ParamGroup::DenseBias,
        ParamGroup::EdgeWeights,
    ];
}

/// Borrowed parameters of one unrolled iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationParams<'a> {
    pub shape: ParamShape,
    pub conv: &'a [f64],
    pub conv_bias: &'a [f64],
    pub dense: &'a [f64],
    pub dense_bias: &'a [f64],
    pub edge_weights: &'a [f64],
}

impl<'a> IterationParams<'a> {
    fn split(shape: ParamShape, block: &'a [f64]) -> Self {
        let o = shape.offsets();
        IterationParams {
            shape,
            conv: &block[o[0]..o[1]],
            conv_bias: &block[o[1]..o[2]],
            dense: &block[o[2]..o[3]],
            dense_bias: &block[o[3]..o[4]],
            edge_weights: &block[o[4]..o[5]],
        }
    }

    #[inline]
    fn filter(&self, k: usize, row: usize, t: usize) -> f64 {
        self.conv[(k * 2 + row) * self.shape.kappa + t]
    }
}

/// Mutable view used to accumulate gradients.
#[derive(Debug)]
pub struct IterationParamsMut<'a> {
    pub shape: ParamShape,
    pub conv: &'a mut [f64],
    pub conv_bias: &'a mut [f64],
    pub dense: &'a mut [f64],
    pub dense_bias: &'a mut [f64],
    pub edge_weights: &'a mut [f64],
}

impl<'a> IterationParamsMut<'a> {
    fn split(shape: ParamShape, block: &'a mut [f64]) -> Self {
        let o = shape.offsets();
        let (conv, rest) = block.split_at_mut(o[1]);
        let (conv_bias, rest) = rest.split_at_mut(o[2] - o[1]);
        let (dense, rest) = rest.split_at_mut(o[3] - o[2]);
        let (dense_bias, edge_weights) = rest.split_at_mut(o[4] - o[3]);
        IterationParamsMut { shape, conv, conv_bias, dense, dense_bias, edge_weights }
    }
}

/// Parameters of the neural node for every unrolled iteration.
///
/// With tied weights a single block serves all `m_max` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    shape: ParamShape,
    iterations: usize,
    tied: bool,
    data: Vec<f64>,
}

impl CnnParams {
    /// All-zero parameters (edge weights included).
    pub fn zeros(shape: ParamShape, iterations: usize, tied: bool) -> Self {
        assert!(shape.filters >= 1 && shape.kappa >= 1 && iterations >= 1);
        let blocks = if tied { 1 } else { iterations };
        CnnParams { shape, iterations, tied, data: vec![0.0; blocks * shape.block_len()] }
    }

    /// Parameters that make `Φ` and the edge weights transparent: `v ≡ (1, 1)`,
    /// `w ≡ 1`.
    pub fn neutral(shape: ParamShape, iterations: usize, tied: bool) -> Self {
        let mut params = Self::zeros(shape, iterations, tied);
        for b in 0..params.blocks() {
            let block = params.block_mut(b);
            block.dense_bias.fill(1.0);
            block.edge_weights.fill(1.0);
        }
        params
    }

    /// Random initialization: filter and dense weights and the filter biases
    /// from a normal of standard deviation `std` truncated at `±2 std`; dense
    /// biases from the same law centred at 1 so every output starts alive;
    /// edge weights at 1.
    pub fn init<R: Rng + ?Sized>(
        shape: ParamShape,
        iterations: usize,
        tied: bool,
        std: f64,
        rng: &mut R,
    ) -> Self {
        let mut params = Self::zeros(shape, iterations, tied);
        let draw = |rng: &mut R| loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                return z * std;
            }
        };
        for b in 0..params.blocks() {
            let block = params.block_mut(b);
            for x in block.conv.iter_mut().chain(block.conv_bias.iter_mut()).chain(block.dense.iter_mut()) {
                *x = draw(rng);
            }
            for x in block.dense_bias.iter_mut() {
                *x = 1.0 + draw(rng);
            }
            block.edge_weights.fill(1.0);
        }
        params
    }

    /// Rebuilds parameters from a flat buffer in declared order.
    pub fn from_flat(shape: ParamShape, iterations: usize, tied: bool, data: Vec<f64>) -> Result<Self> {
        let blocks = if tied { 1 } else { iterations };
        if data.len() != blocks * shape.block_len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                blocks * shape.block_len(),
                data.len()
            )));
        }
        Ok(CnnParams { shape, iterations, tied, data })
    }

    pub fn shape(&self) -> ParamShape {
        self.shape
    }

    /// Number of unrolled iterations m_max.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn tied(&self) -> bool {
        self.tied
    }

    /// Number of stored parameter blocks.
    pub fn blocks(&self) -> usize {
        if self.tied {
            1
        } else {
            self.iterations
        }
    }

    /// Block index serving 0-based iteration `m`.
    pub fn block_of(&self, m: usize) -> usize {
        if self.tied {
            0
        } else {
            m
        }
    }

    pub fn iteration(&self, m: usize) -> IterationParams<'_> {
        self.block(self.block_of(m))
    }

    pub fn block(&self, b: usize) -> IterationParams<'_> {
        let len = self.shape.block_len();
        IterationParams::split(self.shape, &self.data[b * len..(b + 1) * len])
    }

    pub fn block_mut(&mut self, b: usize) -> IterationParamsMut<'_> {
        let len = self.shape.block_len();
        IterationParamsMut::split(self.shape, &mut self.data[b * len..(b + 1) * len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Group of the flat coordinate `index`.
    pub fn group_of(&self, index: usize) -> ParamGroup {
        let o = self.shape.offsets();
        let within = index % self.shape.block_len();
        match within {
            w if w < o[1] => ParamGroup::ConvFilters,
            w if w < o[2] => ParamGroup::ConvBias,
            w if w < o[3] => ParamGroup::DenseWeights,
            w if w < o[4] => ParamGroup::DenseBias,
            _ => ParamGroup::EdgeWeights,
        }
    }
}

/// Intermediate values of one forward pass of `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTape {
    pub(crate) input: Vec<[f64; 2]>,
    /// Filter pre-activations, `[k][n]`.
    pub(crate) conv_pre: Vec<f64>,
    /// Dense pre-activations, `[n]`.
    pub(crate) dense_pre: Vec<[f64; 2]>,
}

impl ForwardTape {
    /// Distance of the closest pre-activation to a ReLU kink (0 for the
    /// filters, the floor for the dense outputs).
    pub fn min_kink_distance(&self) -> f64 {
        let conv = self.conv_pre.iter().map(|x| x.abs());
        let dense = self.dense_pre.iter().flatten().map(|x| (x - NEURAL_FLOOR).abs());
        conv.chain(dense).fold(f64::INFINITY, f64::min)
    }

    /// Every ReLU input shifted so its kink sits at 0: the filter
    /// pre-activations, then the dense ones minus the floor.
    pub fn kink_offsets(&self) -> Vec<f64> {
        let dense = self.dense_pre.iter().flatten().map(|x| x - NEURAL_FLOOR);
        self.conv_pre.iter().copied().chain(dense).collect()
    }

    /// Active/inactive pattern of every ReLU, for detecting kink crossings.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let conv = self.conv_pre.iter().map(|&x| x > 0.0);
        let dense = self.dense_pre.iter().flatten().map(|&x| x > NEURAL_FLOOR);
        conv.chain(dense).collect()
    }
}

/// Evaluates `v = Φ(u)`.
pub fn cnn_forward(u: &[[f64; 2]], params: IterationParams<'_>) -> Result<(Vec<[f64; 2]>, ForwardTape)> {
    let n = u.len();
    if n == 0 {
        return Err(Error::Shape("neural input is empty".into()));
    }
    let shape = params.shape;
    let (f, kappa, left) = (shape.filters, shape.kappa, shape.left_pad());
    let mut conv_pre = vec![0.0; f * n];
    for k in 0..f {
        for pos in 0..n {
            let mut acc = params.conv_bias[k];
            for t in 0..kappa {
                let src = pos + t;
                if src < left || src - left >= n {
                    continue;
                }
                let [a, b] = u[src - left];
                acc += params.filter(k, 0, t) * a + params.filter(k, 1, t) * b;
            }
            conv_pre[k * n + pos] = acc;
        }
    }
    let mut dense_pre = vec![[0.0; 2]; n];
    let mut v = vec![[0.0; 2]; n];
    for pos in 0..n {
        for row in 0..2 {
            let mut acc = params.dense_bias[row];
            for k in 0..f {
                acc += params.dense[row * f + k] * conv_pre[k * n + pos].max(0.0);
            }
            dense_pre[pos][row] = acc;
            v[pos][row] = acc.max(NEURAL_FLOOR);
        }
    }
    Ok((v, ForwardTape { input: u.to_vec(), conv_pre, dense_pre }))
}

/// Back-propagates `grad_v` through the pass recorded in `tape`, adding the
/// parameter gradients into `grads` and returning the gradient for `u`.
pub fn cnn_backward(
    tape: &ForwardTape,
    grad_v: &[[f64; 2]],
    params: IterationParams<'_>,
    grads: &mut IterationParamsMut<'_>,
) -> Result<Vec<[f64; 2]>> {
    let n = tape.input.len();
    if grad_v.len() != n {
        return Err(Error::Shape(format!("gradient has {} rows, tape has {n}", grad_v.len())));
    }
    let shape = params.shape;
    if grads.shape != shape || tape.conv_pre.len() != shape.filters * n {
        return Err(Error::Shape("tape, parameters and gradient buffers disagree".into()));
    }
    let (f, kappa, left) = (shape.filters, shape.kappa, shape.left_pad());

    let mut grad_pre = vec![0.0; f * n];
    for pos in 0..n {
        for row in 0..2 {
            if tape.dense_pre[pos][row] <= NEURAL_FLOOR {
                continue;
            }
            let g = grad_v[pos][row];
            grads.dense_bias[row] += g;
            for k in 0..f {
                let pre = tape.conv_pre[k * n + pos];
                if pre > 0.0 {
                    grads.dense[row * f + k] += g * pre;
                    grad_pre[k * n + pos] += g * params.dense[row * f + k];
                }
            }
        }
    }

    let mut grad_u = vec![[0.0; 2]; n];
    for k in 0..f {
        for pos in 0..n {
            let g = grad_pre[k * n + pos];
            if g == 0.0 {
                continue;
            }
            grads.conv_bias[k] += g;
            for t in 0..kappa {
                let src = pos + t;
                if src < left || src - left >= n {
                    continue;
                }
                let i = src - left;
                for row in 0..2 {
                    let w = (k * 2 + row) * kappa + t;
                    grads.conv[w] += g * tape.input[i][row];
                    grad_u[i][row] += g * params.conv[w];
                }
            }
        }
    }
    Ok(grad_u)
}
