//! The terminated (7,5) rate-1/2 convolutional code, the channel interleaver
//! and a log-MAP BCJR decoder.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::llr::{clip, log_sum_exp_all, LlrDomain, LlrSequence};
use crate::rng::{stream, Purpose};

/// A feedforward rate-1/n convolutional code terminated to the zero state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCode {
    /// Generator taps, MSB multiplies the current input bit.
    generators: Vec<u8>,
    memory: usize,
}

impl Default for ConvCode {
    fn default() -> Self {
        Self::cc75()
    }
}

impl ConvCode {
    /// The 4-state (7,5) code: `1 + D + D²` and `1 + D²`.
    pub fn cc75() -> Self {
        ConvCode { generators: vec![0o7, 0o5], memory: 2 }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn outputs_per_bit(&self) -> usize {
        self.generators.len()
    }

    /// Codeword length for `k` information bits, termination included.
    pub fn codeword_len(&self, k: usize) -> usize {
        self.outputs_per_bit() * (k + self.memory)
    }

    /// Code rate `K / N` counting the termination tail.
    pub fn rate(&self, k: usize) -> f64 {
        k as f64 / self.codeword_len(k) as f64
    }

    /// Output bits and next state for input `bit` from `state`.
    ///
    /// The state holds the previous inputs, most recent in the high bit.
    fn step(&self, state: usize, bit: u8) -> (usize, impl Iterator<Item = u8> + '_) {
        let register = ((bit as usize) << self.memory) | state;
        let next = register >> 1;
        let outputs = self
            .generators
            .iter()
            .map(move |&g| ((register & g as usize).count_ones() & 1) as u8);
        (next, outputs)
    }

    /// Encodes `bits` and appends `memory` zero bits of termination.
    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        let mut state = 0;
        let mut out = Vec::with_capacity(self.codeword_len(bits.len()));
        for &b in bits.iter().chain(std::iter::repeat_n(&0, self.memory)) {
            let (next, outputs) = self.step(state, b & 1);
            out.extend(outputs);
            state = next;
        }
        debug_assert_eq!(state, 0);
        out
    }

    /// Log-MAP decoding of one terminated codeword.
    ///
    /// Returns the coded-bit extrinsic LLRs (APP minus prior) and the APP LLRs
    /// of the information bits.
    pub fn bcjr_decode(&self, coded_priors: &LlrSequence) -> Result<(LlrSequence, LlrSequence)> {
        let n_out = self.outputs_per_bit();
        if coded_priors.len() % n_out != 0 || coded_priors.len() < n_out * (self.memory + 1) {
            return Err(Error::Shape(format!(
                "{} coded LLRs do not form a terminated codeword",
                coded_priors.len()
            )));
        }
        let steps = coded_priors.len() / n_out;
        let k = steps - self.memory;
        let priors: Vec<f64> = coded_priors.values().iter().map(|&l| clip(l)).collect();
        let states = self.num_states();

        // Transition table: (from, bit, to, outputs).
        let transitions: Vec<(usize, u8, usize, Vec<u8>)> = (0..states)
            .flat_map(|s| {
                [0u8, 1].into_iter().map(move |b| {
                    let (next, out) = self.step(s, b);
                    (s, b, next, out.collect())
                })
            })
            .collect();

        let gamma = |t: usize, outputs: &[u8]| -> f64 {
            outputs
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let l = priors[t * n_out + j];
                    if c == 0 {
                        0.5 * l
                    } else {
                        -0.5 * l
                    }
                })
                .sum()
        };
        let allowed = |t: usize, bit: u8| t < k || bit == 0;

        let mut alpha = vec![vec![f64::NEG_INFINITY; states]; steps + 1];
        alpha[0][0] = 0.0;
        for t in 0..steps {
            let mut terms = vec![Vec::with_capacity(2); states];
            for (s, b, next, out) in &transitions {
                if allowed(t, *b) && alpha[t][*s] > f64::NEG_INFINITY {
                    terms[*next].push(alpha[t][*s] + gamma(t, out));
                }
            }
            for (s, ts) in terms.iter().enumerate() {
                alpha[t + 1][s] = log_sum_exp_all(ts);
            }
        }

        let mut beta = vec![vec![f64::NEG_INFINITY; states]; steps + 1];
        beta[steps][0] = 0.0;
        for t in (0..steps).rev() {
            let mut terms = vec![Vec::with_capacity(2); states];
            for (s, b, next, out) in &transitions {
                if allowed(t, *b) {
                    terms[*s].push(beta[t + 1][*next] + gamma(t, out));
                }
            }
            for (s, ts) in terms.iter().enumerate() {
                beta[t][s] = log_sum_exp_all(ts);
            }
        }

        let mut coded_app = vec![0.0; priors.len()];
        let mut info_app = vec![0.0; k];
        for t in 0..steps {
            let mut info_terms = [Vec::new(), Vec::new()];
            let mut coded_terms = vec![[Vec::new(), Vec::new()]; n_out];
            for (s, b, next, out) in &transitions {
                if !allowed(t, *b) {
                    continue;
                }
                let metric = alpha[t][*s] + gamma(t, out) + beta[t + 1][*next];
                if metric == f64::NEG_INFINITY {
                    continue;
                }
                info_terms[*b as usize].push(metric);
                for (j, &c) in out.iter().enumerate() {
                    coded_terms[j][c as usize].push(metric);
                }
            }
            if t < k {
                info_app[t] = log_sum_exp_all(&info_terms[0]) - log_sum_exp_all(&info_terms[1]);
            }
            for (j, [zero, one]) in coded_terms.iter().enumerate() {
                coded_app[t * n_out + j] = log_sum_exp_all(zero) - log_sum_exp_all(one);
            }
        }
        let extrinsic = coded_app.iter().zip(&priors).map(|(a, p)| a - p).collect();
        Ok((
            LlrSequence::new(LlrDomain::CodedBit, extrinsic),
            LlrSequence::new(LlrDomain::InfoBit, info_app),
        ))
    }
}

/// A fixed permutation applied between the code and the modulator.
///
/// `interleave(s)[n] = s[perm[n]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    permutation: Vec<usize>,
    inverse: Vec<usize>,
    seed: Option<u64>,
}

impl Interleaver {
    pub fn identity(len: usize) -> Self {
        Self::from_permutation((0..len).collect()).expect("identity is a permutation")
    }

    pub fn from_permutation(permutation: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; permutation.len()];
        for (n, &p) in permutation.iter().enumerate() {
            if p >= permutation.len() || inverse[p] != usize::MAX {
                return Err(Error::Config("interleaver is not a permutation".into()));
            }
            inverse[p] = n;
        }
        Ok(Interleaver { permutation, inverse, seed: None })
    }

    /// Uniform random permutation by Fisher–Yates.
    ///
    /// Draws come from the `Interleaver` stream of `seed`; for `i` from
    /// `len − 1` down to 1, `j = ⌊u · (i + 1) / 2⁶⁴⌋` for the next 64-bit word
    /// `u`, then positions `i` and `j` swap.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Purpose::Interleaver, 0);
        let mut permutation: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
            permutation.swap(i, j);
        }
        let mut interleaver = Self::from_permutation(permutation).expect("shuffle is a permutation");
        interleaver.seed = Some(seed);
        interleaver
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn interleave<T: Copy>(&self, seq: &[T]) -> Result<Vec<T>> {
        self.check(seq.len())?;
        Ok(self.permutation.iter().map(|&p| seq[p]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, seq: &[T]) -> Result<Vec<T>> {
        self.check(seq.len())?;
        Ok(self.inverse.iter().map(|&p| seq[p]).collect())
    }

    pub fn interleave_llr(&self, seq: &LlrSequence, domain: LlrDomain) -> Result<LlrSequence> {
        Ok(LlrSequence::new(domain, self.interleave(seq.values())?))
    }

    pub fn deinterleave_llr(&self, seq: &LlrSequence, domain: LlrDomain) -> Result<LlrSequence> {
        Ok(LlrSequence::new(domain, self.deinterleave(seq.values())?))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: len });
        }
        Ok(())
    }
}

/// BPSK mapping: bit 0 → +1, bit 1 → −1.
pub fn bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_response() {
        let code = ConvCode::cc75();
        assert_eq!(code.encode(&[1]), vec![1, 1, 1, 0, 1, 1]);
        assert_eq!(code.encode(&[0; 5]), vec![0; 14]);
        assert_eq!(code.encode(&[0; 62]).len(), 128);
        assert!((code.rate(62) - 62.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn strong_zero_priors_decode_to_zero() {
        let code = ConvCode::cc75();
        let priors = LlrSequence::new(LlrDomain::CodedBit, vec![25.0; code.codeword_len(10)]);
        let (_, info) = code.bcjr_decode(&priors).unwrap();
        assert!(info.values().iter().all(|&l| l > 10.0));
        assert_eq!(info.hard_bits(), vec![0; 10]);
    }

    #[test]
    fn uninformative_priors_give_zero_extrinsic() {
        let code = ConvCode::cc75();
        let priors = LlrSequence::zeros(LlrDomain::CodedBit, code.codeword_len(12));
        let (ext, info) = code.bcjr_decode(&priors).unwrap();
        assert!(ext.values().iter().all(|l| l.abs() < 1e-12));
        assert!(info.values().iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn rejects_ragged_codeword() {
        let code = ConvCode::cc75();
        assert!(code.bcjr_decode(&LlrSequence::zeros(LlrDomain::CodedBit, 7)).is_err());
        assert!(code.bcjr_decode(&LlrSequence::zeros(LlrDomain::CodedBit, 4)).is_err());
    }

    #[test]
    fn identity_interleaver() {
        let il = Interleaver::identity(5);
        assert_eq!(il.interleave(&[1, 2, 3, 4, 5]).unwrap(), vec![1, 2, 3, 4, 5]);
        assert!(il.interleave(&[1, 2]).is_err());
        assert!(Interleaver::from_permutation(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn seeded_interleaver_is_stable() {
        // Frozen from the documented Fisher–Yates draw on stream (7, Interleaver, 0).
        let il = Interleaver::random(8, 7);
        let mut rng = stream(7, Purpose::Interleaver, 0);
        let mut perm: Vec<usize> = (0..8).collect();
        for i in (1..8usize).rev() {
            let u = rng.next_u64();
            let j = ((u as u128 * (i as u128 + 1)) >> 64) as usize;
            perm.swap(i, j);
        }
        assert_eq!(il.permutation(), perm.as_slice());
        assert_eq!(il.permutation(), FROZEN_SEED7_N8);
        assert_eq!(il.seed(), Some(7));
    }

    const FROZEN_SEED7_N8: &[usize] = &[7, 0, 4, 3, 1, 6, 5, 2];
}
