//! Root-raised-cosine pulses, FTN intersymbol-interference taps and the
//! discrete Ungerboeck channel `y = Gx + η`.
//!
//! Nothing here synthesizes an oversampled waveform. The matched-filter
//! outputs sampled at the FTN rate are generated directly from the Gram
//! matrix `G`, whose entries are the pulse autocorrelations `g_{i-j}`, and the
//! noise is drawn with covariance `σ²G`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on a retained tap when the quadrature resolution is doubled.
pub const RESOLUTION_TOLERANCE: f64 = 1e-8;

/// Tap significance threshold `|g_k / g_0|` used throughout.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// A T-orthogonal root-raised-cosine pulse and the quadrature grid used to
/// integrate it.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    /// Roll-off factor α.
    pub rolloff: f64,
    /// Symbol period T.
    pub symbol_period: f64,
    /// Symbol energy E_s.
    pub energy: f64,
    /// Support of the pulse used for integration, in symbol periods.
    pub truncation_span: usize,
    /// Quadrature samples per symbol period.
    pub integration_resolution: usize,
}

impl PulseSpec {
    pub const DEFAULT_SPAN: usize = 80;
    pub const DEFAULT_RESOLUTION: usize = 1024;

    /// Unit-energy pulse with `T = 1` and the default quadrature grid.
    pub fn root_raised_cosine(rolloff: f64) -> Self {
        PulseSpec {
            rolloff,
            symbol_period: 1.0,
            energy: 1.0,
            truncation_span: Self::DEFAULT_SPAN,
            integration_resolution: Self::DEFAULT_RESOLUTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!("rolloff {} outside [0, 1]", self.rolloff)));
        }
        if !(self.symbol_period > 0.0) {
            return Err(Error::Config("symbol_period must be positive".into()));
        }
        if !(self.energy > 0.0) {
            return Err(Error::Config("energy must be positive".into()));
        }
        if self.truncation_span == 0 || self.integration_resolution == 0 {
            return Err(Error::Config(
                "truncation_span and integration_resolution must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the unit-energy pulse `h(t)`.
    pub fn sample(&self, t: f64) -> f64 {
        let period = self.symbol_period;
        let a = self.rolloff;
        let x = t / period;
        let scale = 1.0 / period.sqrt();
        let pi = std::f64::consts::PI;
        if x.abs() < 1e-12 {
            return scale * (1.0 - a + 4.0 * a / pi);
        }
        if a > 0.0 && ((4.0 * a * x).abs() - 1.0).abs() < 1e-9 {
            let arg = pi / (4.0 * a);
            return scale
                * a
                * std::f64::consts::FRAC_1_SQRT_2
                * ((1.0 + 2.0 / pi) * arg.sin() + (1.0 - 2.0 / pi) * arg.cos());
        }
        let numerator = (pi * x * (1.0 - a)).sin() + 4.0 * a * x * (pi * x * (1.0 + a)).cos();
        let denominator = pi * x * (1.0 - (4.0 * a * x).powi(2));
        scale * numerator / denominator
    }

    /// `∫ h(t) h(t - shift) dt` by midpoint quadrature over the truncated support.
    pub fn autocorrelation(&self, shift: f64) -> f64 {
        self.autocorrelation_at(shift, self.integration_resolution)
    }

    fn autocorrelation_at(&self, shift: f64, resolution: usize) -> f64 {
        let dt = self.symbol_period / resolution as f64;
        let samples = self.truncation_span * resolution;
        let start = -0.5 * self.truncation_span as f64 * self.symbol_period;
        let mut acc = 0.0;
        for k in 0..samples {
            let t = start + (k as f64 + 0.5) * dt;
            acc += self.sample(t) * self.sample(t - shift);
        }
        acc * dt
    }

    /// Energy of the truncated pulse; 1 up to truncation error.
    pub fn energy_integral(&self) -> f64 {
        self.autocorrelation(0.0)
    }
}

/// ISI taps `g_0..g_L` of an FTN system; `g_{-i} = g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiProfile {
    tau: f64,
    taps: Vec<f64>,
}

impl IsiProfile {
    /// Builds a profile from explicit one-sided taps `g_0..g_L`.
    pub fn from_taps(tau: f64, taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("a profile needs at least g_0".into()));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config(format!("tau {tau} outside (0, 1]")));
        }
        Ok(IsiProfile { tau, taps })
    }

    /// The memoryless profile `g_0 = 1`.
    pub fn identity() -> Self {
        IsiProfile { tau: 1.0, taps: vec![1.0] }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of significant one-sided taps L.
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    /// One-sided taps `g_0..g_L`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap `g_i` for any integer `i`; zero beyond L.
    pub fn tap(&self, i: isize) -> f64 {
        self.taps.get(i.unsigned_abs()).copied().unwrap_or(0.0)
    }

    /// `(i, g_i)` for `i = -L..=L`.
    pub fn two_sided(&self) -> Vec<(isize, f64)> {
        let l = self.memory() as isize;
        (-l..=l).map(|i| (i, self.tap(i))).collect()
    }

    /// The first `l_e + 1` taps, zero padded when `l_e > L`.
    pub fn truncated(&self, l_e: usize) -> Vec<f64> {
        (0..=l_e).map(|i| self.tap(i as isize)).collect()
    }
}

/// Computes the ISI taps of `pulse` at acceleration `tau`, keeping taps out to
/// the largest index whose magnitude relative to `g_0` reaches `threshold`.
///
/// Taps are normalized by the integrated `g_0`, so `g_0 = 1` exactly.
pub fn compute_taps(pulse: &PulseSpec, tau: f64, threshold: f64) -> Result<IsiProfile> {
    pulse.validate()?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau {tau} outside (0, 1]")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1)")));
    }
    // Shifts beyond a quarter of the support lose too much of the overlap.
    let max_index = ((pulse.truncation_span as f64 / 4.0) / tau).floor() as usize;
    let shift = |i: usize| i as f64 * tau * pulse.symbol_period;
    let raw: Vec<f64> = (0..=max_index).map(|i| pulse.autocorrelation(shift(i))).collect();
    let g0 = raw[0];
    let memory = (0..=max_index)
        .rev()
        .find(|&i| (raw[i] / g0).abs() >= threshold)
        .unwrap_or(0);

    let fine = 2 * pulse.integration_resolution;
    let fine_g0 = pulse.autocorrelation_at(0.0, fine);
    for i in 0..=memory {
        let delta = (pulse.autocorrelation_at(shift(i), fine) / fine_g0 - raw[i] / g0).abs();
        if delta > RESOLUTION_TOLERANCE {
            return Err(Error::Resolution { index: i, delta });
        }
    }
    let taps = raw[..=memory].iter().map(|g| g / g0).collect();
    Ok(IsiProfile { tau, taps })
}

/// Banded symmetric Toeplitz matrix with `G_{i,j} = g_{i-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    size: usize,
    taps: Vec<f64>,
}

/// Builds the `n × n` Gram matrix of `profile`.
pub fn build_gram(profile: &IsiProfile, n: usize) -> GramMatrix {
    assert!(n >= 1, "Gram matrix needs at least one row");
    GramMatrix { size: n, taps: profile.taps().to_vec() }
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.taps.get(i.abs_diff(j)).copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }

    /// `G x` exploiting the band structure.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size);
        let l = self.bandwidth();
        (0..self.size)
            .map(|i| {
                let lo = i.saturating_sub(l);
                let hi = (i + l).min(self.size - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }
}

/// The discrete FTN channel: ISI through `G` plus noise of covariance `σ²G`.
///
/// Noise is sampled as `η = σ V diag(√max(λ, 0)) z` from the eigendecomposition
/// `G = V Λ Vᵀ`; eigenvalues pushed negative by tap truncation are clamped.
#[derive(Debug, Clone)]
pub struct Channel {
    gram: GramMatrix,
    noise_factor: DMatrix<f64>,
    clamped: usize,
}

impl Channel {
    pub fn new(gram: GramMatrix) -> Self {
        let eig = SymmetricEigen::new(gram.to_dense());
        let clamped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let roots = DVector::from_iterator(
            gram.size(),
            eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
        );
        let mut noise_factor = eig.eigenvectors;
        for (j, mut col) in noise_factor.column_iter_mut().enumerate() {
            col *= roots[j];
        }
        Channel { gram, noise_factor, clamped }
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn size(&self) -> usize {
        self.gram.size()
    }

    /// Number of negative eigenvalues that were clamped to zero.
    pub fn clamped_eigenvalues(&self) -> usize {
        self.clamped
    }

    /// Draws one colored noise vector with covariance `sigma2 · G`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, sigma2: f64, rng: &mut R) -> Vec<f64> {
        let n = self.size();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let eta = &self.noise_factor * z;
        let sigma = sigma2.sqrt();
        eta.iter().map(|e| sigma * e).collect()
    }

    /// Returns `y = G x + η` for a BPSK block `x`.
    pub fn sample_received_block<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        sigma2: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("noise variance {sigma2} must be positive")));
        }
        if x.len() != self.size() {
            return Err(Error::LengthMismatch { expected: self.size(), actual: x.len() });
        }
        if let Some(bad) = x.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::Config(format!("symbol {bad} is not BPSK")));
        }
        let mut y = self.gram.apply(x);
        for (yi, ni) in y.iter_mut().zip(self.sample_noise(sigma2, rng)) {
            *yi += ni;
        }
        Ok(y)
    }
}

/// Noise variance `σ² = E_s / (2 · rate · 10^(snr_db/10))` for an `E_b/N_0` in dB.
pub fn noise_variance(snr_db: f64, rate: f64, energy: f64) -> f64 {
    energy / (2.0 * rate * 10f64.powf(snr_db / 10.0))
}
