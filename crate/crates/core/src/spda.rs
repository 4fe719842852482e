//! Sum-product detection on the Ungerboeck factor graph.
//!
//! Each symbol `x_i` is a variable node connected to its prior `O_i`, its
//! likelihood `T_i(x) = exp[(y_i x − g_0 x²/2)/σ²]`, and one pairwise factor
//! `I_{i,j}(x_i, x_j) = exp[−g_{|i−j|} x_i x_j / σ²]` per neighbour with
//! `0 < |i − j| ≤ L_E`. An optional neural factor `v_i` multiplies into the
//! beliefs; the plain detector keeps `v ≡ 1`.
//!
//! Every message here is a normalized distribution over `{+1, −1}`, so it is
//! stored as its log-ratio. The normalized pairs are available through the
//! table accessors. Products of messages become sums, the division in
//! `p = Q / q` becomes a subtraction, and the sum over `x_j` against the
//! pairwise factor has the closed form
//! `log cosh(L/2 − c) − log cosh(L/2 + c)` with `c = g/σ²`.

use crate::error::{Error, Result};
use crate::llr::{clip, llr_to_pair, ln_cosh, log_sum_exp_all, softplus, LlrDomain, LlrSequence};
use crate::waveform::IsiProfile;

/// Largest log-ratio representable with both probabilities above 1e-12.
const SATURATION_LLR: f64 = 27.631021115928547;

/// The truncated channel model a detector works with.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    taps: Vec<f64>,
    sigma2: f64,
    n: usize,
}

impl DetectorModel {
    /// Uses the first `l_e` taps of `profile` beyond `g_0`.
    pub fn new(profile: &IsiProfile, l_e: usize, sigma2: f64, n: usize) -> Result<Self> {
        if l_e > profile.memory() {
            return Err(Error::Config(format!(
                "detector taps L_E = {l_e} exceed the channel memory L = {}",
                profile.memory()
            )));
        }
        Self::from_taps(profile.truncated(l_e), sigma2, n)
    }

    /// Builds a model from explicit taps `g_0..g_{L_E}`.
    pub fn from_taps(taps: Vec<f64>, sigma2: f64, n: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("detector needs g_0".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("noise variance {sigma2} must be positive")));
        }
        if n == 0 {
            return Err(Error::Config("block length must be positive".into()));
        }
        Ok(DetectorModel { taps, sigma2, n })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn detector_taps(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn block_len(&self) -> usize {
        self.n
    }

    /// Same taps and block length at another noise level.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::from_taps(self.taps.clone(), sigma2, self.n)
    }

    /// Same taps and noise level at another block length.
    pub fn with_block_len(&self, n: usize) -> Result<Self> {
        Self::from_taps(self.taps.clone(), self.sigma2, n)
    }

    /// Log-ratio `log T_i(+1) / T_i(−1) = 2 y_i / σ²`.
    pub fn likelihood_llr(&self, y: f64) -> f64 {
        2.0 * y / self.sigma2
    }

    /// Coupling strength `c = g_l / σ²` of the pairwise factor at distance `l`.
    pub fn coupling(&self, l: usize) -> f64 {
        self.taps[l] / self.sigma2
    }
}

/// One directed edge of the factor graph: variable `node` and the pairwise
/// factor it shares with `neighbor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub node: usize,
    pub neighbor: usize,
    /// `|node − neighbor|`, the tap index of the factor.
    pub distance: usize,
    /// Index of the edge `(neighbor, node)`.
    pub reverse: usize,
}

/// Edge table of a block of `n` symbols with `L_E` modelled taps.
///
/// Edges are ordered by node, then by signed offset, so each node owns a
/// contiguous range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTable {
    edges: Vec<Edge>,
    ranges: Vec<std::ops::Range<usize>>,
}

impl EdgeTable {
    pub fn new(n: usize, l_e: usize) -> Self {
        let mut edges = Vec::new();
        let mut ranges = Vec::with_capacity(n);
        let l = l_e as isize;
        for i in 0..n {
            let start = edges.len();
            for d in (-l..=l).filter(|&d| d != 0) {
                let j = i as isize + d;
                if j >= 0 && (j as usize) < n {
                    edges.push(Edge {
                        node: i,
                        neighbor: j as usize,
                        distance: d.unsigned_abs(),
                        reverse: usize::MAX,
                    });
                }
            }
            ranges.push(start..edges.len());
        }
        for e in 0..edges.len() {
            let Edge { node, neighbor, .. } = edges[e];
            let reverse = ranges[neighbor]
                .clone()
                .find(|&r| edges[r].neighbor == node)
                .expect("pairwise factors are symmetric");
            edges[e].reverse = reverse;
        }
        EdgeTable { edges, ranges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges whose variable node is `i`.
    pub fn of_node(&self, i: usize) -> std::ops::Range<usize> {
        self.ranges[i].clone()
    }

    pub fn nodes(&self) -> usize {
        self.ranges.len()
    }
}

/// Per-block counters for the simulation harness.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    /// Messages whose smaller probability fell below 1e-12.
    pub saturated: usize,
    /// Largest belief log-ratio magnitude before clipping.
    pub max_abs_llr: f64,
}

/// Factor-graph state of one block.
#[derive(Debug, Clone)]
pub struct MessageState {
    pub(crate) edges: EdgeTable,
    /// `c_l = g_l / σ²` for `l = 0..=L_E`.
    pub(crate) coupling: Vec<f64>,
    pub(crate) likelihood: Vec<f64>,
    pub(crate) prior: Vec<f64>,
    pub(crate) q: Vec<f64>,
    pub(crate) p: Vec<f64>,
    pub(crate) belief: Vec<f64>,
    pub(crate) u: Vec<f64>,
    /// Neural factor, unnormalized, both entries positive.
    pub(crate) v: Vec<[f64; 2]>,
    pub(crate) saturated: usize,
}

/// Sets up the likelihood, prior and pairwise factors for `y` and resets
/// all edge messages to `(1/2, 1/2)`.
pub fn init_factors(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
) -> Result<MessageState> {
    let n = model.block_len();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: y.len() });
    }
    let prior = match priors {
        Some(p) if p.len() != n => {
            return Err(Error::LengthMismatch { expected: n, actual: p.len() })
        }
        Some(p) => p.values().iter().map(|&l| clip(l)).collect(),
        None => vec![0.0; n],
    };
    let edges = EdgeTable::new(n, model.detector_taps());
    let e = edges.len();
    Ok(MessageState {
        coupling: (0..=model.detector_taps()).map(|l| model.coupling(l)).collect(),
        likelihood: y.iter().map(|&yi| model.likelihood_llr(yi)).collect(),
        prior,
        q: vec![0.0; e],
        p: vec![0.0; e],
        belief: vec![0.0; n],
        u: vec![0.0; n],
        v: vec![[1.0, 1.0]; n],
        edges,
        saturated: 0,
    })
}

/// `Σ_{x_j} I(x_i, x_j) p(x_j)` as a log-ratio over `x_i`, for a pairwise
/// factor of coupling `c` and an incoming log-ratio `l`.
#[inline]
pub(crate) fn pairwise_llr(l: f64, c: f64) -> f64 {
    ln_cosh(0.5 * l - c) - ln_cosh(0.5 * l + c)
}

/// Derivative of [`pairwise_llr`] with respect to `l`.
#[inline]
pub(crate) fn pairwise_llr_grad(l: f64, c: f64) -> f64 {
    0.5 * ((0.5 * l - c).tanh() - (0.5 * l + c).tanh())
}

impl MessageState {
    pub fn block_len(&self) -> usize {
        self.prior.len()
    }

    pub fn edges(&self) -> &EdgeTable {
        &self.edges
    }

    /// Belief log-ratio of node `i` from the current messages
    /// (`O_i T_i v_i Π_j q_{i,j}`).
    pub fn belief_llr(&self, i: usize) -> f64 {
        let [vp, vm] = self.v[i];
        let mut acc = self.prior[i] + self.likelihood[i] + (vp.ln() - vm.ln());
        for e in self.edges.of_node(i) {
            acc += self.q[e];
        }
        acc
    }

    /// Step 1: beliefs `Q_i = O_i T_i v_i Π_j q_{i,j}`.
    pub fn update_beliefs(&mut self) {
        for i in 0..self.block_len() {
            self.belief[i] = self.belief_llr(i);
        }
    }

    /// Step 2: `p_{i,j} = Q_i / q_{i,j}`.
    pub fn update_variable_messages(&mut self) {
        for (e, edge) in self.edges.edges.iter().enumerate() {
            self.p[e] = self.belief[edge.node] - self.q[e];
        }
    }

    /// Step 3: `q_{i,j}(x_i) = Σ_{x_j} I_{i,j}(x_i, x_j) p̃_{j,i}(x_j)`, where
    /// `p̃ ∝ p^w` carries the trainable edge weight (`w = 1` when `None`).
    pub fn update_factor_messages(&mut self, weights: Option<&[f64]>) {
        for (e, edge) in self.edges.edges.iter().enumerate() {
            let r = edge.reverse;
            let incoming = match weights {
                Some(w) => w[r] * self.p[r],
                None => self.p[r],
            };
            self.q[e] = pairwise_llr(incoming, self.coupling[edge.distance]);
        }
        self.saturated += self.q.iter().filter(|l| l.abs() > SATURATION_LLR).count();
        self.saturated += self.p.iter().filter(|l| l.abs() > SATURATION_LLR).count();
    }

    /// Step 4: `u_i = Π_j q_{i,j}`, the input of the neural factor.
    pub fn update_neural_input(&mut self) {
        for i in 0..self.block_len() {
            self.u[i] = self.edges.of_node(i).map(|e| self.q[e]).sum();
        }
    }

    /// Installs the neural factor `v`; entries must be positive.
    pub fn set_neural_factor(&mut self, v: &[[f64; 2]]) -> Result<()> {
        if v.len() != self.block_len() {
            return Err(Error::LengthMismatch { expected: self.block_len(), actual: v.len() });
        }
        if v.iter().flatten().any(|&x| !(x > 0.0)) {
            return Err(Error::Shape("neural factor must be strictly positive".into()));
        }
        self.v.copy_from_slice(v);
        Ok(())
    }

    /// Replaces the priors, keeping the edge messages (warm start).
    pub fn set_priors(&mut self, priors: &LlrSequence) -> Result<()> {
        if priors.len() != self.block_len() {
            return Err(Error::LengthMismatch { expected: self.block_len(), actual: priors.len() });
        }
        for (o, &l) in self.prior.iter_mut().zip(priors.values()) {
            *o = clip(l);
        }
        Ok(())
    }

    /// Resets all edge messages and the neural factor to uniform.
    pub fn reset_messages(&mut self) {
        self.q.iter_mut().for_each(|x| *x = 0.0);
        self.p.iter_mut().for_each(|x| *x = 0.0);
        self.u.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = [1.0, 1.0]);
    }

    pub fn likelihood_table(&self) -> Vec<[f64; 2]> {
        self.likelihood.iter().map(|&l| llr_to_pair(l)).collect()
    }

    pub fn prior_table(&self) -> Vec<[f64; 2]> {
        self.prior.iter().map(|&l| llr_to_pair(l)).collect()
    }

    pub fn belief_table(&self) -> Vec<[f64; 2]> {
        self.belief.iter().map(|&l| llr_to_pair(l)).collect()
    }

    pub fn neural_input_table(&self) -> Vec<[f64; 2]> {
        self.u.iter().map(|&l| llr_to_pair(l)).collect()
    }

    pub fn neural_factor(&self) -> &[[f64; 2]] {
        &self.v
    }

    /// `q_{i,j}` for edge `e` as `(P(+1), P(−1))`.
    pub fn factor_message(&self, e: usize) -> [f64; 2] {
        llr_to_pair(self.q[e])
    }

    /// `p_{i,j}` for edge `e` as `(P(+1), P(−1))`.
    pub fn variable_message(&self, e: usize) -> [f64; 2] {
        llr_to_pair(self.p[e])
    }

    /// Pairwise factor `I_{i,j}` of edge `e`, scaled so its largest entry is 1;
    /// indexed `[x_i][x_j]` with 0 ↔ +1.
    pub fn pairwise_factor(&self, e: usize) -> [[f64; 2]; 2] {
        let c = self.coupling[self.edges.edges[e].distance];
        let same = (-c - c.abs()).exp();
        let diff = (c - c.abs()).exp();
        [[same, diff], [diff, same]]
    }

    /// APP log-ratios `log Q_i(+1)/Q_i(−1)` from the current messages, clipped.
    pub fn app_output(&self) -> LlrSequence {
        let values = (0..self.block_len()).map(|i| self.belief_llr(i)).collect();
        LlrSequence::new(LlrDomain::Symbol, values)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let max_abs_llr = (0..self.block_len())
            .map(|i| self.belief_llr(i).abs())
            .fold(0.0, f64::max);
        Diagnostics { saturated: self.saturated, max_abs_llr }
    }
}

/// One flooding sweep: all beliefs, then all `p`, then all `q`.
pub fn spda_iterate(state: &mut MessageState) {
    state.update_beliefs();
    state.update_variable_messages();
    state.update_factor_messages(None);
}

/// Extrinsic symbol log-ratios `log o_i(+1)/o_i(−1)` with `o_i = Q_i / O_i`.
pub fn extrinsic_output(state: &MessageState) -> LlrSequence {
    let values = (0..state.block_len())
        .map(|i| state.belief_llr(i) - state.prior[i])
        .collect();
    LlrSequence::new(LlrDomain::Symbol, values)
}

/// Soft output of a detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    /// APP symbol log-ratios.
    pub app: LlrSequence,
    /// APP minus the supplied prior.
    pub extrinsic: LlrSequence,
    pub diagnostics: Diagnostics,
}

/// Runs `sweeps` SPDA iterations followed by the final belief update.
pub fn spda_detect(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    sweeps: usize,
) -> Result<DetectorOutput> {
    let mut state = init_factors(y, model, priors)?;
    for _ in 0..sweeps {
        spda_iterate(&mut state);
    }
    state.update_beliefs();
    Ok(DetectorOutput {
        app: state.app_output(),
        extrinsic: extrinsic_output(&state),
        diagnostics: state.diagnostics(),
    })
}

/// Largest block [`exhaustive_app`] will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// Exact APP log-ratios of the truncated model by summing
/// `Π_i O_i T_i Π_{j<i} I_{i,j}` over all `2^N` symbol vectors.
pub fn exhaustive_app(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
) -> Result<LlrSequence> {
    let n = model.block_len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge { what: "exhaustive block", size: n, limit: EXHAUSTIVE_LIMIT });
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: y.len() });
    }
    let prior: Vec<f64> = match priors {
        Some(p) if p.len() != n => {
            return Err(Error::LengthMismatch { expected: n, actual: p.len() })
        }
        Some(p) => p.values().to_vec(),
        None => vec![0.0; n],
    };
    let s2 = model.sigma2();
    let g = model.taps();
    let mut plus = vec![Vec::with_capacity(1 << n.saturating_sub(1)); n];
    let mut minus = vec![Vec::with_capacity(1 << n.saturating_sub(1)); n];
    let mut x = vec![0.0; n];
    for word in 0u32..(1 << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if word >> i & 1 == 0 { 1.0 } else { -1.0 };
        }
        let mut weight = 0.0;
        for i in 0..n {
            let log_prior = -softplus(-x[i] * prior[i]);
            weight += log_prior + (y[i] * x[i] - 0.5 * g[0] * x[i] * x[i]) / s2;
            for (l, &gl) in g.iter().enumerate().skip(1) {
                if l <= i {
                    weight -= gl * x[i] * x[i - l] / s2;
                }
            }
        }
        for i in 0..n {
            if x[i] > 0.0 {
                plus[i].push(weight);
            } else {
                minus[i].push(weight);
            }
        }
    }
    let values = (0..n)
        .map(|i| log_sum_exp_all(&plus[i]) - log_sum_exp_all(&minus[i]))
        .collect();
    Ok(LlrSequence::new(LlrDomain::Symbol, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(taps: Vec<f64>, sigma2: f64, n: usize) -> DetectorModel {
        DetectorModel::from_taps(taps, sigma2, n).unwrap()
    }

    #[test]
    fn edge_table_structure() {
        let t = EdgeTable::new(6, 2);
        // 2 * ((6 - 1) + (6 - 2))
        assert_eq!(t.len(), 18);
        for (e, edge) in t.edges().iter().enumerate() {
            assert!(edge.distance >= 1 && edge.distance <= 2);
            assert_eq!(edge.node.abs_diff(edge.neighbor), edge.distance);
            let r = t.edges()[edge.reverse];
            assert_eq!((r.node, r.neighbor), (edge.neighbor, edge.node));
            assert_eq!(r.reverse, e);
        }
        assert_eq!(t.of_node(0).len(), 2);
        assert_eq!(t.of_node(3).len(), 4);
    }

    #[test]
    fn likelihood_ratio() {
        let m = model(vec![1.0], 1.0, 3);
        let s = init_factors(&[0.0, 1.0, -0.5], &m, None).unwrap();
        let t = s.likelihood_table();
        assert_abs_diff_eq!(t[0][0], t[0][1]);
        assert_abs_diff_eq!(t[1][0] / t[1][1], 2f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!((t[1][0] / t[1][1]).ln(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_tap_factor_is_flat() {
        let m = model(vec![1.0, 0.0], 0.3, 4);
        let s = init_factors(&[0.1, 0.2, 0.3, 0.4], &m, None).unwrap();
        for e in 0..s.edges().len() {
            assert_eq!(s.pairwise_factor(e), [[1.0, 1.0], [1.0, 1.0]]);
        }
    }

    #[test]
    fn pairwise_factor_matches_definition() {
        let m = model(vec![1.0, 0.4], 0.5, 3);
        let s = init_factors(&[0.0; 3], &m, None).unwrap();
        let f = s.pairwise_factor(0);
        // I(+,+)/I(+,−) = exp(−2 g/σ²)
        assert_abs_diff_eq!(f[0][0] / f[0][1], (-2.0 * 0.4 / 0.5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(f[1][1], f[0][0]);
    }

    #[test]
    fn pairwise_closed_form_matches_sum() {
        for &(l, c) in &[(0.3f64, 0.7f64), (-4.0, 0.2), (12.0, -1.5), (0.0, 2.0)] {
            let p = llr_to_pair(l);
            let plus = (-c).exp() * p[0] + c.exp() * p[1];
            let minus = c.exp() * p[0] + (-c).exp() * p[1];
            assert_abs_diff_eq!(pairwise_llr(l, c), (plus / minus).ln(), epsilon = 1e-12);
            let h = 1e-6;
            let fd = (pairwise_llr(l + h, c) - pairwise_llr(l - h, c)) / (2.0 * h);
            assert_abs_diff_eq!(pairwise_llr_grad(l, c), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn uniform_messages_through_flat_factor_stay_uniform() {
        let m = model(vec![1.0, 0.0, 0.0], 0.5, 5);
        let mut s = init_factors(&[0.3, -0.1, 0.9, 0.0, -2.0], &m, None).unwrap();
        s.update_factor_messages(None);
        assert!(s.q.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn memoryless_is_exact_after_one_sweep() {
        let m = model(vec![1.0, 0.0], 0.7, 4);
        let y = [0.4, -1.1, 0.05, 2.0];
        let priors = LlrSequence::new(LlrDomain::Symbol, vec![0.5, -1.0, 0.0, 3.0]);
        let out = spda_detect(&y, &m, Some(&priors), 1).unwrap();
        for i in 0..4 {
            let lik = 2.0 * y[i] / 0.7;
            assert_abs_diff_eq!(out.app.values()[i], lik + priors.values()[i], epsilon = 1e-12);
            assert_abs_diff_eq!(out.extrinsic.values()[i], lik, epsilon = 1e-12);
        }
    }

    #[test]
    fn extrinsic_ignores_prior_on_memoryless_model() {
        let m = model(vec![1.0], 0.4, 3);
        let y = [0.2, -0.3, 0.8];
        let a = LlrSequence::new(LlrDomain::Symbol, vec![1.0, 1.0, 1.0]);
        let b = LlrSequence::new(LlrDomain::Symbol, vec![2.0, 2.0, 2.0]);
        let ea = spda_detect(&y, &m, Some(&a), 3).unwrap().extrinsic;
        let eb = spda_detect(&y, &m, Some(&b), 3).unwrap().extrinsic;
        for (x, z) in ea.values().iter().zip(eb.values()) {
            assert_abs_diff_eq!(*x, *z, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_prior_extrinsic_equals_app() {
        let m = model(vec![1.0, 0.45, -0.12], 0.3, 10);
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.77).sin()).collect();
        let out = spda_detect(&y, &m, None, 5).unwrap();
        assert_eq!(out.app, out.extrinsic);
    }

    #[test]
    fn tables_are_normalized() {
        let m = model(vec![1.0, 0.45, -0.12], 0.3, 10);
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut s = init_factors(&y, &m, None).unwrap();
        for _ in 0..4 {
            spda_iterate(&mut s);
            for pair in s.belief_table().into_iter().chain(s.likelihood_table()) {
                assert!(pair[0] >= 0.0 && pair[1] >= 0.0);
                assert_abs_diff_eq!(pair[0] + pair[1], 1.0, epsilon = 1e-15);
            }
            for e in 0..s.edges().len() {
                let q = s.factor_message(e);
                let p = s.variable_message(e);
                assert_abs_diff_eq!(q[0] + q[1], 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn exhaustive_single_symbol() {
        let m = model(vec![1.0], 0.5, 1);
        let priors = LlrSequence::new(LlrDomain::Symbol, vec![0.7]);
        let app = exhaustive_app(&[0.3], &m, Some(&priors)).unwrap();
        assert_abs_diff_eq!(app.values()[0], 2.0 * 0.3 / 0.5 + 0.7, epsilon = 1e-12);
    }

    #[test]
    fn exhaustive_refuses_large_blocks() {
        let m = model(vec![1.0], 0.5, 17);
        assert!(matches!(exhaustive_app(&[0.0; 17], &m, None), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn certain_priors_dominate() {
        let m = model(vec![1.0, 0.5, 0.1], 0.5, 8);
        let priors = LlrSequence::new(LlrDomain::Symbol, vec![30.0; 8]);
        let y = [-0.5, 0.1, 0.3, -0.2, 0.0, 0.4, -0.1, 0.2];
        let app = exhaustive_app(&y, &m, Some(&priors)).unwrap();
        assert!(app.values().iter().all(|&l| l > 20.0));
    }

    #[test]
    fn model_validation() {
        let profile = IsiProfile::from_taps(0.6, vec![1.0, 0.5]).unwrap();
        assert!(DetectorModel::new(&profile, 2, 0.5, 8).is_err());
        assert!(DetectorModel::new(&profile, 1, 0.0, 8).is_err());
        assert!(DetectorModel::new(&profile, 1, 0.5, 0).is_err());
        let m = DetectorModel::new(&profile, 1, 0.5, 8).unwrap();
        assert!(init_factors(&[0.0; 7], &m, None).is_err());
    }
}
