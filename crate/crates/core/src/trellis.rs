//! Exact MAP symbol detection on the truncated Ungerboeck model.
//!
//! The trellis state is the last `L_E` symbols. Each branch carries the log
//! of the likelihood, prior and pairwise factors that involve the current
//! symbol and its predecessors, so a path's summed metric is the log of the
//! same product the sum-product detector factorizes. Forward-backward with
//! exact log-sum-exp then gives the APPs of that model.

use crate::error::{Error, Result};
use crate::llr::{clip, log_sum_exp_all, softplus, LlrDomain, LlrSequence};
use crate::spda::DetectorModel;

/// Largest number of detector taps the trellis accepts (256 states).
pub const MAX_TRELLIS_TAPS: usize = 8;

/// Runs BCJR over `y` and returns APP symbol log-ratios for the payload.
///
/// With `terminated`, `y` carries `L_E` known `+1` pilot symbols before and
/// after the `N` payload symbols; the pilots pin the trellis to the all-plus
/// state at both ends and are not part of the output. Otherwise `y` holds
/// exactly the payload.
pub fn trellis_detect(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    terminated: bool,
) -> Result<LlrSequence> {
    Ok(LlrSequence::new(LlrDomain::Symbol, app_values(y, model, priors, terminated)?))
}

/// APP minus prior, formed before clipping so that a confident prior that
/// agrees with a confident channel does not cancel it.
pub fn trellis_extrinsic(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    terminated: bool,
) -> Result<LlrSequence> {
    let mut app = app_values(y, model, priors, terminated)?;
    if let Some(p) = priors {
        for (a, o) in app.iter_mut().zip(p.values()) {
            *a -= o;
        }
    }
    Ok(LlrSequence::new(LlrDomain::Symbol, app))
}

fn app_values(
    y: &[f64],
    model: &DetectorModel,
    priors: Option<&LlrSequence>,
    terminated: bool,
) -> Result<Vec<f64>> {
    let l_e = model.detector_taps();
    if l_e > MAX_TRELLIS_TAPS {
        return Err(Error::TooLarge { what: "trellis memory", size: l_e, limit: MAX_TRELLIS_TAPS });
    }
    let n = model.block_len();
    let pilots = if terminated { l_e } else { 0 };
    let total = n + 2 * pilots;
    if y.len() != total {
        return Err(Error::LengthMismatch { expected: total, actual: y.len() });
    }
    if let Some(p) = priors {
        if p.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: p.len() });
        }
    }
    let states = 1usize << l_e;
    let mask = states - 1;
    let s2 = model.sigma2();
    let g = model.taps();
    let symbol = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };

    // log O_i(x) for x = +1, −1; pilots are certain.
    let log_prior = |i: usize| -> [f64; 2] {
        if i < pilots || i >= pilots + n {
            return [0.0, f64::NEG_INFINITY];
        }
        let l = priors.map_or(0.0, |p| clip(p.values()[i - pilots]));
        [-softplus(-l), -softplus(l)]
    };
    let branch = |i: usize, state: usize, bit: usize| -> f64 {
        let x = symbol(bit);
        let mut metric = y[i] * x - 0.5 * g[0];
        for l in 1..=l_e.min(i) {
            metric -= g[l] * x * symbol(state >> (l - 1) & 1);
        }
        metric / s2 + log_prior(i)[bit]
    };
    let next = |state: usize, bit: usize| ((state << 1) | bit) & mask;

    let mut alpha = vec![vec![f64::NEG_INFINITY; states]; total + 1];
    alpha[0].iter_mut().for_each(|a| *a = 0.0);
    let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(2); states];
    for i in 0..total {
        terms.iter_mut().for_each(Vec::clear);
        for s in 0..states {
            if alpha[i][s] == f64::NEG_INFINITY {
                continue;
            }
            for bit in 0..2 {
                terms[next(s, bit)].push(alpha[i][s] + branch(i, s, bit));
            }
        }
        for s in 0..states {
            alpha[i + 1][s] = log_sum_exp_all(&terms[s]);
        }
    }

    let mut beta = vec![vec![f64::NEG_INFINITY; states]; total + 1];
    beta[total].iter_mut().for_each(|b| *b = 0.0);
    for i in (0..total).rev() {
        for s in 0..states {
            let t = [0, 1].map(|bit| beta[i + 1][next(s, bit)] + branch(i, s, bit));
            beta[i][s] = log_sum_exp_all(&t);
        }
    }

    let mut app = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(states);
    let mut minus = Vec::with_capacity(states);
    for i in pilots..pilots + n {
        plus.clear();
        minus.clear();
        for s in 0..states {
            for bit in 0..2 {
                let m = alpha[i][s] + branch(i, s, bit) + beta[i + 1][next(s, bit)];
                if bit == 0 {
                    plus.push(m);
                } else {
                    minus.push(m);
                }
            }
        }
        app.push(log_sum_exp_all(&plus) - log_sum_exp_all(&minus));
    }
    Ok(app)
}
