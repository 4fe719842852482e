//! Turbo equalization: extrinsic exchange between a symbol detector and the
//! channel decoder through the interleaver.

use crate::code::{ConvCode, Interleaver};
use crate::dlspa::{check_params, dlspa_run};
use crate::error::{Error, Result};
use crate::llr::{LlrDomain, LlrSequence};
use crate::neural::CnnParams;
use crate::spda::{extrinsic_output, init_factors, spda_iterate, DetectorModel, MessageState};
use crate::trellis::trellis_extrinsic;

/// Symbol detector used inside the Turbo loop.
#[derive(Debug, Clone)]
pub enum Detector {
    /// Plain sum-product detection with a fixed number of sweeps.
    Spda { model: DetectorModel, sweeps: usize },
    /// Neural-assisted detection; runs `params.iterations()` iterations.
    DlSpa { model: DetectorModel, params: CnnParams },
    /// Exact BCJR over the `2^{L_E}`-state trellis, terminated by pilots.
    Trellis { model: DetectorModel },
}

impl Detector {
    /// Neural-assisted detector; refuses parameters sized for another graph.
    pub fn dlspa(model: DetectorModel, params: CnnParams) -> Result<Self> {
        check_params(&model, &params, params.iterations())?;
        Ok(Detector::DlSpa { model, params })
    }

    pub fn model(&self) -> &DetectorModel {
        match self {
            Detector::Spda { model, .. } | Detector::DlSpa { model, .. } | Detector::Trellis { model } => model,
        }
    }

    /// Payload symbols per block.
    pub fn block_len(&self) -> usize {
        self.model().block_len()
    }

    /// Known `+1` symbols sent before and after the payload.
    pub fn pilots(&self) -> usize {
        match self {
            Detector::Trellis { model } => model.detector_taps(),
            _ => 0,
        }
    }

    /// Received samples per block, pilots included.
    pub fn frame_len(&self) -> usize {
        self.block_len() + 2 * self.pilots()
    }

    /// Copy of the detector for noise variance `sigma2`.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Ok(match self {
            Detector::Spda { model, sweeps } => Detector::Spda { model: model.with_sigma2(sigma2)?, sweeps: *sweeps },
            Detector::DlSpa { model, params } => {
                Detector::DlSpa { model: model.with_sigma2(sigma2)?, params: params.clone() }
            }
            Detector::Trellis { model } => Detector::Trellis { model: model.with_sigma2(sigma2)? },
        })
    }

    /// Extrinsic symbol log-ratios for one frame. `state` carries the
    /// message-passing state between calls when warm starting.
    fn extrinsic(
        &self,
        y: &[f64],
        priors: Option<&LlrSequence>,
        state: &mut Option<MessageState>,
        warm: bool,
    ) -> Result<LlrSequence> {
        if let Detector::Trellis { model } = self {
            return trellis_extrinsic(y, model, priors, true);
        }
        match state {
            Some(s) if warm => {
                if let Some(p) = priors {
                    s.set_priors(p)?;
                }
            }
            _ => *state = Some(init_factors(y, self.model(), priors)?),
        }
        let s = state.as_mut().expect("state initialized above");
        match self {
            Detector::Spda { sweeps, .. } => {
                for _ in 0..*sweeps {
                    spda_iterate(s);
                }
                s.update_beliefs();
            }
            Detector::DlSpa { params, .. } => {
                dlspa_run(s, params)?;
            }
            Detector::Trellis { .. } => unreachable!(),
        }
        Ok(extrinsic_output(s))
    }
}

/// Decisions of a Turbo run.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboOutput {
    /// Decided information bits after the last iteration.
    pub bits: Vec<u8>,
    /// Decided information bits after every iteration, `ρ = 1..=ρ_max`.
    pub per_iteration: Vec<Vec<u8>>,
}

/// Runs `rho_max` Turbo iterations on the received frame `y`.
///
/// The detector starts from uniform priors. Its extrinsic output is
/// deinterleaved and decoded, and the decoder's coded-bit extrinsic is
/// interleaved back as the next detector prior. Symbols and coded bits share
/// one log-ratio convention (`bit 0 ↔ +1`), so no sign change is needed.
/// With `warm_start`, edge messages persist across Turbo iterations instead
/// of being reset.
pub fn turbo_run(
    y: &[f64],
    detector: &Detector,
    code: &ConvCode,
    interleaver: &Interleaver,
    rho_max: usize,
    warm_start: bool,
) -> Result<TurboOutput> {
    if rho_max == 0 {
        return Err(Error::Config("rho_max must be at least 1".into()));
    }
    let n = detector.block_len();
    if interleaver.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: interleaver.len() });
    }
    if y.len() != detector.frame_len() {
        return Err(Error::LengthMismatch { expected: detector.frame_len(), actual: y.len() });
    }
    let mut priors: Option<LlrSequence> = None;
    let mut state = None;
    let mut per_iteration = Vec::with_capacity(rho_max);
    for _ in 0..rho_max {
        let ext = detector.extrinsic(y, priors.as_ref(), &mut state, warm_start)?;
        let coded = interleaver.deinterleave_llr(&ext, LlrDomain::CodedBit)?;
        let (coded_ext, info_app) = code.bcjr_decode(&coded)?;
        per_iteration.push(info_app.hard_bits());
        priors = Some(interleaver.interleave_llr(&coded_ext, LlrDomain::Symbol)?);
    }
    Ok(TurboOutput { bits: per_iteration.last().cloned().unwrap_or_default(), per_iteration })
}

/// Transmitted frame for a block of information bits: encode, interleave,
/// map to BPSK and surround with `pilots` known `+1` symbols on each side.
pub fn modulate_frame(bits: &[u8], code: &ConvCode, interleaver: &Interleaver, pilots: usize) -> Result<Vec<f64>> {
    let coded = code.encode(bits);
    let symbols = crate::code::bpsk(&interleaver.interleave(&coded)?);
    let mut frame = vec![1.0; symbols.len() + 2 * pilots];
    frame[pilots..pilots + symbols.len()].copy_from_slice(&symbols);
    Ok(frame)
}
