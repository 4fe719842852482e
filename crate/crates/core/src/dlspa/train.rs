//! Training through the unrolled detector with RMSProp.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{labels_of, loss_and_gradient, param_shape, LossTrace};
use crate::code::{bpsk, ConvCode, Interleaver};
use crate::error::{Error, Result};
use crate::neural::{CnnParams, INIT_STD};
use crate::rng::{stream, Purpose};
use crate::spda::DetectorModel;
use crate::waveform::{build_gram, noise_variance, Channel, IsiProfile};

/// Samples per unit of parallel work; the reduction order is fixed by it.
const CHUNK: usize = 8;

/// How a training SNR in dB maps to a noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseConvention {
    /// `E_b/N_0` of a code of the given rate: `σ² = 1 / (2 · rate · 10^(snr/10))`.
    EbN0 { rate: f64 },
}

impl NoiseConvention {
    pub fn sigma2(&self, snr_db: f64) -> f64 {
        match *self {
            NoiseConvention::EbN0 { rate } => noise_variance(snr_db, rate, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Sequences per batch.
    pub batch_size: usize,
    /// Inclusive SNR range in dB.
    pub snr_range_db: (f64, f64),
    pub snr_step_db: f64,
    pub batches_per_snr: usize,
    /// Discount γ of the multi-iteration loss.
    pub gamma: f64,
    pub m_max: usize,
    pub filters: usize,
    pub kappa: usize,
    /// Passes over the SNR schedule.
    pub passes: usize,
    /// Optional hard cap on the number of batches.
    pub max_batches: Option<usize>,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub init_std: f64,
    pub tie_weights: bool,
    /// Train on encoded, interleaved blocks instead of i.i.d. symbols.
    pub coded_training: bool,
    pub noise: NoiseConvention,
    /// Shuffle the SNR order on every pass.
    pub shuffle_snr: bool,
    pub seed: u64,
    pub interleaver_seed: u64,
    /// Consecutive batches above 10× the initial loss before aborting.
    pub divergence_window: usize,
}

impl TrainConfig {
    /// Default hyperparameters for acceleration `tau` on blocks of the
    /// terminated (7,5) code with `k` information bits.
    pub fn defaults(tau: f64, k: usize) -> Self {
        let code = ConvCode::cc75();
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 360,
            snr_range_db: (3.0, 8.0),
            snr_step_db: 1.0,
            batches_per_snr: 60,
            gamma: 0.95,
            m_max: 15,
            filters: if tau <= 0.5 { 20 } else { 15 },
            kappa: 4,
            passes: 1,
            max_batches: None,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            init_std: INIT_STD,
            tie_weights: false,
            coded_training: false,
            noise: NoiseConvention::EbN0 { rate: code.rate(k) },
            shuffle_snr: true,
            seed: 1,
            interleaver_seed: 1,
            divergence_window: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.m_max == 0 || self.filters == 0 || self.kappa == 0 {
            return bad("m_max, filters and kappa must be positive");
        }
        if self.batch_size == 0 || self.batches_per_snr == 0 {
            return bad("batch_size and batches_per_snr must be positive");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate must be nonnegative");
        }
        if !(self.snr_step_db > 0.0) || self.snr_range_db.1 < self.snr_range_db.0 {
            return bad("SNR range must be ordered with a positive step");
        }
        if !(self.rmsprop_decay >= 0.0 && self.rmsprop_decay < 1.0) || !(self.rmsprop_epsilon > 0.0) {
            return bad("RMSProp decay must lie in [0, 1) and epsilon be positive");
        }
        let NoiseConvention::EbN0 { rate } = self.noise;
        if !(rate > 0.0) {
            return bad("noise rate must be positive");
        }
        Ok(())
    }

    /// SNR points `lo, lo + step, …` up to and including `hi`.
    pub fn snr_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.snr_range_db;
        let count = ((hi - lo) / self.snr_step_db + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + i as f64 * self.snr_step_db).collect()
    }

    pub fn batches_per_pass(&self) -> usize {
        self.snr_grid().len() * self.batches_per_snr
    }

    pub fn total_batches(&self) -> usize {
        let planned = self.passes * self.batches_per_pass();
        self.max_batches.map_or(planned, |cap| cap.min(planned))
    }
}

/// RMSProp without momentum: `s ← ρ s + (1 − ρ) g²`, `θ ← θ − η g / (√s + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    mean_square: Vec<f64>,
}

impl RmsProp {
    pub fn new(len: usize, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        RmsProp { learning_rate, decay, epsilon, mean_square: vec![0.0; len] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.mean_square.len());
        assert_eq!(grad.len(), self.mean_square.len());
        for ((theta, s), &g) in params.iter_mut().zip(&mut self.mean_square).zip(grad) {
            *s = self.decay * *s + (1.0 - self.decay) * g * g;
            *theta -= self.learning_rate * g / (s.sqrt() + self.epsilon);
        }
    }
}

/// Progress of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchReport {
    pub batch: usize,
    pub total: usize,
    pub snr_db: f64,
    pub loss: f64,
    pub rejected: usize,
}

/// Stateful trainer for one channel and detector size.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    channel: Channel,
    model: DetectorModel,
    code: Option<(ConvCode, Interleaver, usize)>,
    params: CnnParams,
    optimizer: RmsProp,
    trace: LossTrace,
    batch: usize,
    above_limit: usize,
}

impl Trainer {
    /// Sets up training on blocks of `n` symbols through `profile`, with a
    /// detector modelling `l_e` taps. Parameters are drawn from the `Init`
    /// stream of the configured seed.
    pub fn new(config: TrainConfig, profile: &IsiProfile, l_e: usize, n: usize) -> Result<Self> {
        config.validate()?;
        let model = DetectorModel::new(profile, l_e, 1.0, n)?;
        let shape = param_shape(&model, config.filters, config.kappa);
        let mut rng = stream(config.seed, Purpose::Init, 0);
        let params = CnnParams::init(shape, config.m_max, config.tie_weights, config.init_std, &mut rng);
        Self::with_params(config, profile, l_e, n, params)
    }

    /// Continues from existing parameters.
    pub fn with_params(
        config: TrainConfig,
        profile: &IsiProfile,
        l_e: usize,
        n: usize,
        params: CnnParams,
    ) -> Result<Self> {
        config.validate()?;
        let model = DetectorModel::new(profile, l_e, 1.0, n)?;
        if params.shape() != param_shape(&model, config.filters, config.kappa)
            || params.iterations() != config.m_max
            || params.tied() != config.tie_weights
        {
            return Err(Error::ModelMismatch("initial parameters do not fit the training setup".into()));
        }
        let code = if config.coded_training {
            let code = ConvCode::cc75();
            if n % 2 != 0 || n / 2 <= code.memory() {
                return Err(Error::Config(format!("coded training needs N = 2(K + 2), got N = {n}")));
            }
            let k = n / 2 - code.memory();
            Some((code, Interleaver::random(n, config.interleaver_seed), k))
        } else {
            None
        };
        let optimizer = RmsProp::new(
            params.as_slice().len(),
            config.learning_rate,
            config.rmsprop_decay,
            config.rmsprop_epsilon,
        );
        Ok(Trainer {
            channel: Channel::new(build_gram(profile, n)),
            model,
            code,
            params,
            optimizer,
            trace: LossTrace::new(),
            batch: 0,
            above_limit: 0,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &CnnParams {
        &self.params
    }

    pub fn trace(&self) -> &LossTrace {
        &self.trace
    }

    pub fn into_parts(self) -> (CnnParams, LossTrace) {
        (self.params, self.trace)
    }

    /// Transmitted symbols of training sample `index`.
    fn symbols(&self, index: u64) -> Vec<f64> {
        let mut rng = stream(self.config.seed, Purpose::Data, index);
        match &self.code {
            None => (0..self.model.block_len())
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
            Some((code, interleaver, k)) => {
                let bits: Vec<u8> = (0..*k).map(|_| rng.random::<bool>() as u8).collect();
                let coded = code.encode(&bits);
                bpsk(&interleaver.interleave(&coded).expect("interleaver sized to the codeword"))
            }
        }
    }

    /// SNR of every batch of pass `pass`, in schedule order.
    pub fn pass_schedule(&self, pass: usize) -> Vec<f64> {
        let mut grid = self.config.snr_grid();
        if self.config.shuffle_snr {
            grid.shuffle(&mut stream(self.config.seed, Purpose::Schedule, pass as u64));
        }
        grid.into_iter()
            .flat_map(|snr| std::iter::repeat_n(snr, self.config.batches_per_snr))
            .collect()
    }

    /// Computes the batch gradient at `snr_db` and takes one optimizer step.
    /// Returns the mean loss and the number of rejected samples.
    pub fn train_batch(&mut self, snr_db: f64) -> Result<(f64, usize)> {
        let sigma2 = self.config.noise.sigma2(snr_db);
        let model = self.model.with_sigma2(sigma2)?;
        let first = (self.batch * self.config.batch_size) as u64;
        let indices: Vec<u64> = (first..first + self.config.batch_size as u64).collect();
        let params = &self.params;
        let gamma = self.config.gamma;

        let partials: Vec<(CnnParams, f64, usize, usize)> = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = CnnParams::zeros(params.shape(), params.iterations(), params.tied());
                let mut scratch = grad.clone();
                let (mut loss_sum, mut accepted, mut rejected) = (0.0, 0, 0);
                for &index in chunk {
                    let x = self.symbols(index);
                    let mut rng = stream(self.config.seed, Purpose::Noise, index);
                    let y = self
                        .channel
                        .sample_received_block(&x, sigma2, &mut rng)
                        .expect("training blocks are BPSK of the channel size");
                    scratch.as_mut_slice().fill(0.0);
                    match loss_and_gradient(&y, &labels_of(&x), &model, None, params, gamma, &mut scratch) {
                        Ok(loss) if loss.is_finite() && scratch.as_slice().iter().all(|g| g.is_finite()) => {
                            loss_sum += loss;
                            accepted += 1;
                            for (g, s) in grad.as_mut_slice().iter_mut().zip(scratch.as_slice()) {
                                *g += s;
                            }
                        }
                        _ => rejected += 1,
                    }
                }
                (grad, loss_sum, accepted, rejected)
            })
            .collect();

        let mut grad = CnnParams::zeros(params.shape(), params.iterations(), params.tied());
        let (mut loss_sum, mut accepted, mut rejected) = (0.0, 0, 0);
        for (g, l, a, r) in &partials {
            for (acc, x) in grad.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *acc += x;
            }
            loss_sum += l;
            accepted += a;
            rejected += r;
        }
        for _ in 0..rejected {
            self.trace.reject();
        }
        self.batch += 1;
        if accepted == 0 {
            return Ok((f64::NAN, rejected));
        }
        let scale = 1.0 / accepted as f64;
        grad.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
        self.optimizer.step(self.params.as_mut_slice(), grad.as_slice());
        let loss = loss_sum * scale;
        self.trace.push(loss);
        Ok((loss, rejected))
    }

    /// Runs the configured schedule, reporting after every batch.
    pub fn run(&mut self, mut on_batch: impl FnMut(&BatchReport)) -> Result<()> {
        let total = self.config.total_batches();
        let per_pass = self.config.batches_per_pass();
        while self.batch < total {
            let pass = self.batch / per_pass;
            let schedule = self.pass_schedule(pass);
            let snr_db = schedule[self.batch % per_pass];
            let batch = self.batch;
            let (loss, rejected) = self.train_batch(snr_db)?;
            self.check_divergence(batch, loss)?;
            on_batch(&BatchReport { batch, total, snr_db, loss, rejected });
        }
        Ok(())
    }

    fn check_divergence(&mut self, batch: usize, loss: f64) -> Result<()> {
        let Some(&initial) = self.trace.losses().first() else {
            return Ok(());
        };
        if loss.is_nan() || loss > 10.0 * initial {
            self.above_limit += 1;
        } else {
            self.above_limit = 0;
        }
        if self.above_limit >= self.config.divergence_window {
            return Err(Error::Divergence { batch, loss, initial, window: self.config.divergence_window });
        }
        Ok(())
    }
}
