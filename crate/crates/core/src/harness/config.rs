//! Flat `key = value` configuration shared by every subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::code::ConvCode;
use crate::dlspa::{NoiseConvention, TrainConfig};
use crate::error::{Error, Result};
use crate::waveform::PulseSpec;

/// Which detector runs inside the Turbo loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Spda,
    DlSpa,
    Trellis,
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spda" => Ok(DetectorKind::Spda),
            "dlspa" => Ok(DetectorKind::DlSpa),
            "trellis" => Ok(DetectorKind::Trellis),
            other => Err(Error::Config(format!("unknown detector `{other}` (spda, dlspa, trellis)"))),
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorKind::Spda => "spda",
            DetectorKind::DlSpa => "dlspa",
            DetectorKind::Trellis => "trellis",
        })
    }
}

/// Every setting of a run. Field names are the config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tau: f64,
    pub alpha: f64,
    /// Relative tap magnitude below which the channel memory ends.
    pub threshold: f64,
    pub span: usize,
    pub resolution: usize,
    pub l_e: usize,
    /// Information bits per block.
    pub k: usize,
    pub detector: DetectorKind,
    pub rho_max: usize,
    pub m_max: usize,
    pub snr_db: Vec<f64>,
    pub max_blocks: usize,
    pub target_errors: usize,
    pub seed: u64,
    pub interleaver_seed: u64,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub warm_start: bool,
    /// Adds a wall-time column, which makes sweep output nondeterministic.
    pub timing: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub train_snr_min: f64,
    pub train_snr_max: f64,
    pub train_snr_step: f64,
    pub batches_per_snr: usize,
    pub gamma: f64,
    /// CNN filters, 0 to pick by `tau`.
    pub filters: usize,
    pub kappa: usize,
    pub passes: usize,
    /// Batch cap, 0 for none.
    pub max_batches: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub init_std: f64,
    pub tie_weights: bool,
    pub coded_training: bool,
    /// Code rate of the training SNR, 0 for the rate of the configured code.
    pub train_rate: f64,
    pub divergence_window: usize,
    pub fine_window: usize,
    pub coarse_window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tau: 0.6,
            alpha: 0.3,
            threshold: crate::waveform::DEFAULT_THRESHOLD,
            span: PulseSpec::DEFAULT_SPAN,
            resolution: PulseSpec::DEFAULT_RESOLUTION,
            l_e: 2,
            k: 62,
            detector: DetectorKind::Spda,
            rho_max: 5,
            m_max: 15,
            snr_db: vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            max_blocks: 10_000,
            target_errors: 100,
            seed: 1,
            interleaver_seed: 1,
            model: None,
            output: None,
            trace: None,
            threads: 0,
            warm_start: false,
            timing: false,
            learning_rate: 1e-3,
            batch_size: 360,
            train_snr_min: 3.0,
            train_snr_max: 8.0,
            train_snr_step: 1.0,
            batches_per_snr: 60,
            gamma: 0.95,
            filters: 0,
            kappa: 4,
            passes: 1,
            max_batches: 0,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            init_std: crate::neural::INIT_STD,
            tie_weights: false,
            coded_training: false,
            train_rate: 0.0,
            divergence_window: 1000,
            fine_window: 1000,
            coarse_window: 5000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl SimConfig {
    /// All recognized keys, in file order.
    pub const KEYS: &'static [&'static str] = &[
        "tau", "alpha", "threshold", "span", "resolution", "l_e", "k", "detector", "rho_max", "m_max",
        "snr_db", "max_blocks", "target_errors", "seed", "interleaver_seed", "model", "output", "trace",
        "threads", "warm_start", "timing", "learning_rate", "batch_size", "train_snr_min",
        "train_snr_max", "train_snr_step", "batches_per_snr", "gamma", "filters", "kappa", "passes",
        "max_batches", "rmsprop_decay", "rmsprop_epsilon", "init_std", "tie_weights",
        "coded_training", "train_rate", "divergence_window", "fine_window", "coarse_window",
    ];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "tau" => self.tau = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "span" => self.span = parse(key, v)?,
            "resolution" => self.resolution = parse(key, v)?,
            "l_e" => self.l_e = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "detector" => self.detector = v.parse()?,
            "rho_max" => self.rho_max = parse(key, v)?,
            "m_max" => self.m_max = parse(key, v)?,
            "snr_db" => {
                self.snr_db = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "max_blocks" => self.max_blocks = parse(key, v)?,
            "target_errors" => self.target_errors = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "interleaver_seed" => self.interleaver_seed = parse(key, v)?,
            "model" => self.model = parse_path(v),
            "output" => self.output = parse_path(v),
            "trace" => self.trace = parse_path(v),
            "threads" => self.threads = parse(key, v)?,
            "warm_start" => self.warm_start = parse_bool(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "train_snr_min" => self.train_snr_min = parse(key, v)?,
            "train_snr_max" => self.train_snr_max = parse(key, v)?,
            "train_snr_step" => self.train_snr_step = parse(key, v)?,
            "batches_per_snr" => self.batches_per_snr = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "filters" => self.filters = parse(key, v)?,
            "kappa" => self.kappa = parse(key, v)?,
            "passes" => self.passes = parse(key, v)?,
            "max_batches" => self.max_batches = parse(key, v)?,
            "rmsprop_decay" => self.rmsprop_decay = parse(key, v)?,
            "rmsprop_epsilon" => self.rmsprop_epsilon = parse(key, v)?,
            "init_std" => self.init_std = parse(key, v)?,
            "tie_weights" => self.tie_weights = parse_bool(key, v)?,
            "coded_training" => self.coded_training = parse_bool(key, v)?,
            "train_rate" => self.train_rate = parse(key, v)?,
            "divergence_window" => self.divergence_window = parse(key, v)?,
            "fine_window" => self.fine_window = parse(key, v)?,
            "coarse_window" => self.coarse_window = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of `key` in config syntax.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "tau" => self.tau.to_string(),
            "alpha" => self.alpha.to_string(),
            "threshold" => self.threshold.to_string(),
            "span" => self.span.to_string(),
            "resolution" => self.resolution.to_string(),
            "l_e" => self.l_e.to_string(),
            "k" => self.k.to_string(),
            "detector" => self.detector.to_string(),
            "rho_max" => self.rho_max.to_string(),
            "m_max" => self.m_max.to_string(),
            "snr_db" => self.snr_db.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            "max_blocks" => self.max_blocks.to_string(),
            "target_errors" => self.target_errors.to_string(),
            "seed" => self.seed.to_string(),
            "interleaver_seed" => self.interleaver_seed.to_string(),
            "model" => show_path(&self.model),
            "output" => show_path(&self.output),
            "trace" => show_path(&self.trace),
            "threads" => self.threads.to_string(),
            "warm_start" => self.warm_start.to_string(),
            "timing" => self.timing.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "train_snr_min" => self.train_snr_min.to_string(),
            "train_snr_max" => self.train_snr_max.to_string(),
            "train_snr_step" => self.train_snr_step.to_string(),
            "batches_per_snr" => self.batches_per_snr.to_string(),
            "gamma" => self.gamma.to_string(),
            "filters" => self.filters.to_string(),
            "kappa" => self.kappa.to_string(),
            "passes" => self.passes.to_string(),
            "max_batches" => self.max_batches.to_string(),
            "rmsprop_decay" => self.rmsprop_decay.to_string(),
            "rmsprop_epsilon" => self.rmsprop_epsilon.to_string(),
            "init_std" => self.init_std.to_string(),
            "tie_weights" => self.tie_weights.to_string(),
            "coded_training" => self.coded_training.to_string(),
            "train_rate" => self.train_rate.to_string(),
            "divergence_window" => self.divergence_window.to_string(),
            "fine_window" => self.fine_window.to_string(),
            "coarse_window" => self.coarse_window.to_string(),
            _ => return None,
        })
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = SimConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    /// Applies config text on top of the current values. Blank lines and
    /// `#` comments are skipped; a key given twice keeps the last value.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", number + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {}", number + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File { path: path.into(), source })?;
        Self::parse(&text)
    }

    /// The resolved config as `# key = value` lines, for CSV headers.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "# {key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// Checks ranges that do not depend on the task.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db must list at least one point".into());
        }
        if self.rho_max == 0 || self.m_max == 0 {
            return bad("rho_max and m_max must be at least 1".into());
        }
        if self.max_blocks == 0 || self.target_errors == 0 {
            return bad("max_blocks and target_errors must be at least 1".into());
        }
        if self.fine_window == 0 || self.coarse_window == 0 {
            return bad("loss windows must be at least 1".into());
        }
        Ok(())
    }

    /// Pulse the taps are computed from.
    pub fn pulse(&self) -> PulseSpec {
        PulseSpec {
            truncation_span: self.span,
            integration_resolution: self.resolution,
            ..PulseSpec::root_raised_cosine(self.alpha)
        }
    }

    pub fn code(&self) -> ConvCode {
        ConvCode::cc75()
    }

    /// Coded symbols per block.
    pub fn block_len(&self) -> usize {
        self.code().codeword_len(self.k)
    }

    pub fn filters_or_default(&self) -> usize {
        if self.filters > 0 {
            self.filters
        } else if self.tau <= 0.5 {
            20
        } else {
            15
        }
    }

    /// Training hyperparameters derived from this config.
    pub fn train_config(&self) -> TrainConfig {
        let rate = if self.train_rate > 0.0 { self.train_rate } else { self.code().rate(self.k) };
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            snr_range_db: (self.train_snr_min, self.train_snr_max),
            snr_step_db: self.train_snr_step,
            batches_per_snr: self.batches_per_snr,
            gamma: self.gamma,
            m_max: self.m_max,
            filters: self.filters_or_default(),
            kappa: self.kappa,
            passes: self.passes,
            max_batches: (self.max_batches > 0).then_some(self.max_batches),
            rmsprop_decay: self.rmsprop_decay,
            rmsprop_epsilon: self.rmsprop_epsilon,
            init_std: self.init_std,
            tie_weights: self.tie_weights,
            coded_training: self.coded_training,
            noise: NoiseConvention::EbN0 { rate },
            shuffle_snr: true,
            seed: self.seed,
            interleaver_seed: self.interleaver_seed,
            divergence_window: self.divergence_window,
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
