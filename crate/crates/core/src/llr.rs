//! Log-likelihood ratios and the scalar helpers shared by the detectors.
//!
//! Convention: an LLR is `log P(+1) / P(−1)` for symbols and
//! `log P(0) / P(1)` for bits. BPSK maps bit 0 to +1, so both agree.

/// Magnitude at which LLRs are clipped when they cross a module boundary.
pub const LLR_CLIP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrDomain {
    InfoBit,
    CodedBit,
    Symbol,
}

/// A block of clipped, finite LLRs tagged with what they describe.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrSequence {
    values: Vec<f64>,
    domain: LlrDomain,
}

impl LlrSequence {
    /// Wraps `values`, clipping them to `±LLR_CLIP`. NaN becomes 0.
    pub fn new(domain: LlrDomain, mut values: Vec<f64>) -> Self {
        for v in &mut values {
            *v = clip(*v);
        }
        LlrSequence { values, domain }
    }

    pub fn zeros(domain: LlrDomain, len: usize) -> Self {
        LlrSequence { values: vec![0.0; len], domain }
    }

    pub fn domain(&self) -> LlrDomain {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same values, different tag.
    pub fn retag(self, domain: LlrDomain) -> Self {
        LlrSequence { domain, ..self }
    }

    /// Hard decisions as bits: 0 for a nonnegative LLR.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&l| u8::from(l < 0.0)).collect()
    }

    /// Hard decisions as BPSK symbols.
    pub fn hard_symbols(&self) -> Vec<f64> {
        self.values.iter().map(|&l| if l < 0.0 { -1.0 } else { 1.0 }).collect()
    }
}

pub fn clip(llr: f64) -> f64 {
    if llr.is_nan() {
        0.0
    } else {
        llr.clamp(-LLR_CLIP, LLR_CLIP)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(e^a + e^b)`.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// `log Σ e^{x_k}` over a slice.
pub fn log_sum_exp_all(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Normalized probability pair `(P(+1), P(−1))` of an LLR.
pub fn llr_to_pair(llr: f64) -> [f64; 2] {
    [sigmoid(llr), sigmoid(-llr)]
}

/// A priori symbol table `O_i = (σ(L_i), 1 − σ(L_i))` from symbol LLRs.
pub fn llr_symbol_to_prior(extrinsic: &LlrSequence) -> Vec<[f64; 2]> {
    extrinsic.values().iter().map(|&l| llr_to_pair(clip(l))).collect()
}
