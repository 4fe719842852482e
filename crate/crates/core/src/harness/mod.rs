//! Monte-Carlo sweeps, training runs and CSV output behind the CLI.

mod config;

pub use config::{DetectorKind, SimConfig};

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::code::Interleaver;
use crate::dlspa::{loss_curve, param_shape, read_model, write_model, BatchReport, LossTrace, ModelHeader, Trainer};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::spda::DetectorModel;
use crate::turbo::{modulate_frame, turbo_run, Detector};
use crate::waveform::{build_gram, compute_taps, noise_variance, Channel, IsiProfile};

/// Sweep blocks use stream indices from here on, so they never share data
/// or noise with training samples drawn under the same seed.
pub const SWEEP_STREAM_OFFSET: u64 = 1 << 48;

/// Blocks simulated between two checks of the stopping rule. The rule is
/// applied block by block in index order, so the count is a throughput knob
/// only and never changes results.
const ROUND: usize = 64;

/// ISI profile of the configured pulse and acceleration.
pub fn channel_profile(config: &SimConfig) -> Result<IsiProfile> {
    compute_taps(&config.pulse(), config.tau, config.threshold)
}

/// Taps the detector models: `L_E` capped at the channel memory, so that
/// `tau = 1` runs a memoryless detector.
pub fn detector_taps(config: &SimConfig, profile: &IsiProfile) -> usize {
    config.l_e.min(profile.memory())
}

/// CSV of the normalized taps `g_0..g_L`.
pub fn taps_csv(config: &SimConfig, profile: &IsiProfile) -> String {
    let mut out = config.header();
    let _ = writeln!(out, "# memory = {}", profile.memory());
    out.push_str("index,g\n");
    for (i, g) in profile.taps().iter().enumerate() {
        let _ = writeln!(out, "{i},{g:e}");
    }
    out
}

/// Runs `f` on a pool of `threads` workers (0 for one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Reads a model file and checks it against the detector it will drive.
pub fn load_model(path: &Path, config: &SimConfig, model: &DetectorModel) -> Result<crate::neural::CnnParams> {
    let file = File::open(path).map_err(|source| Error::File { path: path.into(), source })?;
    let (header, params) = read_model(BufReader::new(file))?;
    header.check(config.tau, model, config.m_max)?;
    Ok(params)
}

/// Builds the configured detector with unit noise variance; the sweep
/// rescales it per SNR point.
pub fn build_detector(config: &SimConfig, profile: &IsiProfile) -> Result<Detector> {
    let model = DetectorModel::new(profile, detector_taps(config, profile), 1.0, config.block_len())?;
    Ok(match config.detector {
        DetectorKind::Spda => Detector::Spda { model, sweeps: config.m_max },
        DetectorKind::Trellis => Detector::Trellis { model },
        DetectorKind::DlSpa => {
            let path = config
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("detector = dlspa needs a model file".into()))?;
            let params = load_model(path, config, &model)?;
            Detector::dlspa(model, params)?
        }
    })
}

/// One SNR point of a BER sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub blocks: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// BER after each Turbo iteration, `ρ = 1..=ρ_max`.
    pub ber_per_iteration: Vec<f64>,
    pub wall_time_s: f64,
}

/// Errors of one block, per Turbo iteration.
fn simulate_block(
    config: &SimConfig,
    detector: &Detector,
    channel: &Channel,
    interleaver: &Interleaver,
    sigma2: f64,
    block: u64,
) -> Result<Vec<usize>> {
    let index = SWEEP_STREAM_OFFSET + block;
    let mut rng = stream(config.seed, Purpose::Data, index);
    let bits: Vec<u8> = (0..config.k).map(|_| rng.random::<bool>() as u8).collect();
    let code = config.code();
    let x = modulate_frame(&bits, &code, interleaver, detector.pilots())?;
    let y = channel.sample_received_block(&x, sigma2, &mut stream(config.seed, Purpose::Noise, index))?;
    let out = turbo_run(&y, detector, &code, interleaver, config.rho_max, config.warm_start)?;
    Ok(out
        .per_iteration
        .iter()
        .map(|decided| decided.iter().zip(&bits).filter(|(a, b)| a != b).count())
        .collect())
}

/// Simulates one SNR point until `target_errors` bit errors or
/// `max_blocks` blocks, whichever comes first.
///
/// Block `b` draws its bits and noise from streams keyed by `(seed, b)`, so
/// every detector and SNR point sees the same bits and the same unit noise.
pub fn ber_point(config: &SimConfig, detector: &Detector, profile: &IsiProfile, snr_db: f64) -> Result<BerRecord> {
    let start = Instant::now();
    let sigma2 = noise_variance(snr_db, config.code().rate(config.k), 1.0);
    let detector = detector.with_sigma2(sigma2)?;
    let channel = Channel::new(build_gram(profile, detector.frame_len()));
    let interleaver = Interleaver::random(detector.block_len(), config.interleaver_seed);
    let mut errors = vec![0usize; config.rho_max];
    let mut blocks = 0usize;
    'rounds: while blocks < config.max_blocks {
        let round = ROUND.min(config.max_blocks - blocks);
        let results: Vec<Result<Vec<usize>>> = (blocks..blocks + round)
            .into_par_iter()
            .map(|b| simulate_block(config, &detector, &channel, &interleaver, sigma2, b as u64))
            .collect();
        for r in results {
            for (acc, e) in errors.iter_mut().zip(r?) {
                *acc += e;
            }
            blocks += 1;
            if errors[config.rho_max - 1] >= config.target_errors {
                break 'rounds;
            }
        }
    }
    let bits = (blocks * config.k) as f64;
    Ok(BerRecord {
        snr_db,
        blocks,
        bit_errors: errors[config.rho_max - 1],
        ber: errors[config.rho_max - 1] as f64 / bits,
        ber_per_iteration: errors.iter().map(|&e| e as f64 / bits).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every SNR point of the config.
pub fn ber_sweep(config: &SimConfig) -> Result<Vec<BerRecord>> {
    config.validate()?;
    let profile = channel_profile(config)?;
    let detector = build_detector(config, &profile)?;
    with_threads(config.threads, || {
        config.snr_db.iter().map(|&snr| ber_point(config, &detector, &profile, snr)).collect()
    })?
}

/// Sweep results as CSV under the config header.
pub fn ber_csv(config: &SimConfig, records: &[BerRecord]) -> String {
    let mut out = config.header();
    out.push_str("snr_db,blocks,bit_errors,ber");
    for rho in 1..=config.rho_max {
        let _ = write!(out, ",ber_rho{rho}");
    }
    if config.timing {
        out.push_str(",wall_time_s");
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{},{},{:e}", r.snr_db, r.blocks, r.bit_errors, r.ber);
        for b in &r.ber_per_iteration {
            let _ = write!(out, ",{b:e}");
        }
        if config.timing {
            let _ = write!(out, ",{:.3}", r.wall_time_s);
        }
        out.push('\n');
    }
    out
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub header: ModelHeader,
    pub params: crate::neural::CnnParams,
    pub trace: LossTrace,
}

/// Trains the neural detector for the configured channel.
pub fn train(config: &SimConfig, on_batch: impl FnMut(&BatchReport) + Send) -> Result<TrainOutcome> {
    config.validate()?;
    let profile = channel_profile(config)?;
    let l_e = detector_taps(config, &profile);
    let n = config.block_len();
    let train_config = config.train_config();
    let mut trainer = Trainer::new(train_config.clone(), &profile, l_e, n)?;
    with_threads(config.threads, || trainer.run(on_batch))??;
    let (params, trace) = trainer.into_parts();
    let header = ModelHeader {
        tau: config.tau,
        alpha: config.alpha,
        l_e,
        n,
        filters: train_config.filters,
        kappa: train_config.kappa,
        m_max: train_config.m_max,
        tied: train_config.tie_weights,
    };
    debug_assert_eq!(
        params.shape(),
        param_shape(&DetectorModel::new(&profile, l_e, 1.0, n)?, header.filters, header.kappa)
    );
    Ok(TrainOutcome { header, params, trace })
}

pub fn save_model(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::File { path: path.into(), source })?;
    let mut w = BufWriter::new(file);
    write_model(&mut w, &outcome.header, &outcome.params)?;
    w.flush().map_err(|source| Error::File { path: path.into(), source })
}

/// Raw loss trace as CSV, one row per accepted batch.
pub fn trace_csv(config: &SimConfig, trace: &LossTrace) -> String {
    let mut out = config.header();
    let _ = writeln!(out, "# rejected_samples = {}", trace.rejected());
    out.push_str("batch,loss\n");
    for (b, l) in trace.losses().iter().enumerate() {
        let _ = writeln!(out, "{b},{l:e}");
    }
    out
}

/// Parses the output of [`trace_csv`].
pub fn parse_trace(text: &str) -> Result<LossTrace> {
    let mut losses = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "batch,loss" {
            continue;
        }
        let loss = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("trace line {}: expected `batch,loss`", number + 1)))?;
        losses.push(loss);
    }
    if losses.is_empty() {
        return Err(Error::Config("trace holds no losses".into()));
    }
    Ok(LossTrace::from_losses(losses))
}

/// Loss-curve CSV of a trace under the config header.
pub fn loss_curve_csv(config: &SimConfig, trace: &LossTrace) -> String {
    let curve = loss_curve(trace, config.fine_window, config.coarse_window);
    let mut out = config.header();
    let _ = writeln!(
        out,
        "# stable_at = {}",
        curve.stable_at.map_or_else(|| "none".to_string(), |a| a.to_string())
    );
    out.push_str(&curve.to_csv());
    out
}
