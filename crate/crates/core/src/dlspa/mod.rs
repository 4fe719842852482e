//! The neural-assisted sum-product detector.
//!
//! Relative to plain sum-product detection, each of the `m_max` unrolled
//! iterations (a) raises the variable-to-factor messages to a trainable edge
//! weight before they cross a pairwise factor, and (b) sends the product of
//! the pairwise messages `u_i = Π_j q_{i,j}` through the convolutional node,
//! whose output `v_i` multiplies into the beliefs of the next iteration:
//!
//! 1. `Q_i = O_i T_i v_i Π_j q_{i,j}`
//! 2. `p_{i,j} = Q_i / q_{i,j}`
//! 3. `q_{i,j}(x_i) = Σ_{x_j} I_{i,j}(x_i, x_j) p̃_{j,i}(x_j)`, `p̃ ∝ p^w`
//! 4. `u_i = Π_j q_{i,j}`
//! 5. `v = Φ_m(u)`
//!
//! and a last belief update closes the loop. Neither the priors nor the
//! likelihoods reach the neural node, so a trained detector can sit in a Turbo
//! loop with any decoder.

mod model;
mod trace;
mod train;

pub use model::{read_model, write_model, ModelHeader, MODEL_MAGIC, MODEL_VERSION};
pub use trace::{loss_curve, stability_index, LossCurve, LossTrace, STABILITY_THRESHOLD};
pub use train::{RmsProp, TrainConfig, Trainer, BatchReport, NoiseConvention};

use crate::error::{Error, Result};
use crate::llr::{sigmoid, softplus, LlrSequence};
use crate::neural::{cnn_backward, cnn_forward, CnnParams, ForwardTape, ParamShape};
use crate::spda::{
    extrinsic_output, init_factors, pairwise_llr_grad, DetectorModel, DetectorOutput, EdgeTable,
    MessageState,
};

/// Detector output plus the belief log-ratios after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DlSpaOutput {
    pub output: DetectorOutput,
    /// `R̂^1..R̂^{m_max}`, unclipped.
    pub per_iteration: Vec<Vec<f64>>,
}

/// Parameter shape a block of `model` requires.
pub fn param_shape(model: &DetectorModel, filters: usize, kappa: usize) -> ParamShape {
    ParamShape {
        filters,
        kappa,
        edges: EdgeTable::new(model.block_len(), model.detector_taps()).len(),
    }
}

pub(crate) fn check_params(model: &DetectorModel, params: &CnnParams, m_max: usize) -> Result<()> {
    if params.iterations() != m_max {
        return Err(Error::ModelMismatch(format!(
            "parameters cover {} iterations, detector runs {m_max}",
            params.iterations()
        )));
    }
    let edges = EdgeTable::new(model.block_len(), model.detector_taps()).len();
    if params.shape().edges != edges {
        return Err(Error::ModelMismatch(format!(
            "parameters carry {} edge weights, an N = {} / L_E = {} graph has {edges}",
            params.shape().edges,
            model.block_len(),
            model.detector_taps()
        )));
    }
    Ok(())
}

/// One unrolled iteration (steps 1–5) on `state`.
fn iterate(state: &mut MessageState, params: &CnnParams, m: usize) -> Result<ForwardTape> {
    let block = params.iteration(m);
    state.update_beliefs();
    state.update_variable_messages();
    state.update_factor_messages(Some(block.edge_weights));
    state.update_neural_input();
    let (v, tape) = cnn_forward(&state.neural_input_table(), block)?;
    state.set_neural_factor(&v)?;
    Ok(tape)
}

/// Runs the detector from an initialized state.
pub fn dlspa_run(state: &mut MessageState, params: &CnnParams) -> Result<Vec<Vec<f64>>> {
    let m_max = params.iterations();
    let mut per_iteration = Vec::with_capacity(m_max);
    for m in 0..m_max {
        iterate(state, params, m)?;
        if m > 0 {
            per_iteration.push(state.belief.clone());
        }
    }
    state.update_beliefs();
    per_iteration.push(state.belief.clone());
    Ok(per_iteration)
}

/// Forward tapes of every neural node in a detector run, for checking how
/// close the run passes to a ReLU kink.
pub fn dlspa_tapes(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    params: &CnnParams,
) -> Result<Vec<ForwardTape>> {
    check_params(model, params, params.iterations())?;
    let mut state = init_factors(y, model, priors)?;
    (0..params.iterations()).map(|m| iterate(&mut state, params, m)).collect()
}

/// Runs `m_max` neural-assisted iterations and the final belief update.
pub fn dlspa_detect(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    params: &CnnParams,
    m_max: usize,
) -> Result<DlSpaOutput> {
    check_params(model, params, m_max)?;
    let mut state = init_factors(y, model, priors)?;
    let per_iteration = dlspa_run(&mut state, params)?;
    Ok(DlSpaOutput {
        output: DetectorOutput {
            app: state.app_output(),
            extrinsic: extrinsic_output(&state),
            diagnostics: state.diagnostics(),
        },
        per_iteration,
    })
}

/// Labels `R_i ∈ {0, 1}` of a symbol block, `R = 1 ↔ x = +1`.
pub fn labels_of(symbols: &[f64]) -> Vec<f64> {
    symbols.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// Mean binary cross-entropy of `sigmoid(llr)` against `labels`.
pub fn cross_entropy(labels: &[f64], llr: &[f64]) -> f64 {
    let n = labels.len() as f64;
    labels
        .iter()
        .zip(llr)
        .map(|(&r, &l)| r * softplus(-l) + (1.0 - r) * softplus(l))
        .sum::<f64>()
        / n
}

/// Discounted multi-iteration loss `Σ_m γ^{M−m} F_ce(R, R̂^m)`.
///
/// Returns `None` when any LLR is NaN.
pub fn loss(labels: &[f64], per_iteration: &[Vec<f64>], gamma: f64) -> Option<f64> {
    let m_max = per_iteration.len();
    let mut total = 0.0;
    for (m, llr) in per_iteration.iter().enumerate() {
        if llr.iter().any(|l| l.is_nan()) {
            return None;
        }
        total += gamma.powi((m_max - 1 - m) as i32) * cross_entropy(labels, llr);
    }
    Some(total)
}

/// Everything the backward pass needs from one unrolled iteration.
struct IterationTape {
    belief: Vec<f64>,
    p: Vec<f64>,
    u: Vec<f64>,
    v: Vec<[f64; 2]>,
    cnn: ForwardTape,
}

/// Loss of one block and its gradient with respect to every parameter,
/// accumulated into `grads` (same layout as `params`).
///
/// The gradient is exact reverse-mode through all unrolled iterations; the
/// output floor of the neural node contributes a zero subgradient.
pub fn loss_and_gradient(
    y: &[f64],
    labels: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    params: &CnnParams,
    gamma: f64,
    grads: &mut CnnParams,
) -> Result<f64> {
    let m_max = params.iterations();
    check_params(model, params, m_max)?;
    if grads.shape() != params.shape() || grads.blocks() != params.blocks() {
        return Err(Error::Shape("gradient buffer does not match parameters".into()));
    }
    let n = model.block_len();
    if labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: labels.len() });
    }

    let mut state = init_factors(y, model, priors)?;
    let mut tapes = Vec::with_capacity(m_max);
    for m in 0..m_max {
        let cnn = iterate(&mut state, params, m)?;
        tapes.push(IterationTape {
            belief: state.belief.clone(),
            p: state.p.clone(),
            u: state.u.clone(),
            v: state.v.clone(),
            cnn,
        });
    }
    state.update_beliefs();
    let final_belief = state.belief.clone();

    let mut per_iteration: Vec<Vec<f64>> = tapes.iter().skip(1).map(|t| t.belief.clone()).collect();
    per_iteration.push(final_belief.clone());
    let value = loss(labels, &per_iteration, gamma)
        .ok_or_else(|| Error::Shape("NaN belief in unrolled detector".into()))?;

    let edges = state.edges.edges();
    let inv_n = 1.0 / n as f64;
    // dF/dLLR for one belief vector, weighted.
    let loss_grad = |belief: &[f64], weight: f64, out: &mut [f64]| {
        for i in 0..n {
            out[i] += weight * inv_n * (sigmoid(belief[i]) - labels[i]);
        }
    };

    let mut g_belief = vec![0.0; n];
    loss_grad(&final_belief, 1.0, &mut g_belief);
    let mut g_v: Vec<f64> = g_belief.clone();
    let mut g_q: Vec<f64> = edges.iter().map(|e| g_belief[e.node]).collect();

    let mut g_p = vec![0.0; edges.len()];
    let mut g_vtable = vec![[0.0; 2]; n];
    for m in (0..m_max).rev() {
        let tape = &tapes[m];
        let block = params.iteration(m);

        // Step 5: log-ratio of v, then the neural node.
        for i in 0..n {
            let [vp, vm] = tape.v[i];
            g_vtable[i] = [g_v[i] / vp, -g_v[i] / vm];
        }
        let b = grads.block_of(m);
        let g_utable = cnn_backward(&tape.cnn, &g_vtable, block, &mut grads.block_mut(b))?;

        // Step 4: u is the normalized pair of Σ_j q_{i,j}.
        for (e, edge) in edges.iter().enumerate() {
            let s = sigmoid(tape.u[edge.node]);
            let [gp, gm] = g_utable[edge.node];
            g_q[e] += (gp - gm) * s * (1.0 - s);
        }

        // Step 3: q_e = φ(w_r p_r) over the reverse edge r.
        g_p.iter_mut().for_each(|g| *g = 0.0);
        let gw = grads.block_mut(b);
        for (e, edge) in edges.iter().enumerate() {
            let r = edge.reverse;
            let w = block.edge_weights[r];
            let d = g_q[e] * pairwise_llr_grad(w * tape.p[r], state.coupling[edge.distance]);
            g_p[r] += d * w;
            gw.edge_weights[r] += d * tape.p[r];
        }

        // Step 2: p_e = Q_node − q_e (previous iteration's q).
        g_belief.iter_mut().for_each(|g| *g = 0.0);
        for (e, edge) in edges.iter().enumerate() {
            g_belief[edge.node] += g_p[e];
            g_q[e] = -g_p[e];
        }

        if m == 0 {
            break;
        }
        // Step 1: this iteration's belief is R̂^m.
        loss_grad(&tape.belief, gamma.powi((m_max - m) as i32), &mut g_belief);
        for (e, edge) in edges.iter().enumerate() {
            g_q[e] += g_belief[edge.node];
        }
        g_v.copy_from_slice(&g_belief);
    }
    Ok(value)
}
