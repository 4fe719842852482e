//! Acceptance checks, one line per criterion.
//!
//! Criteria 8 and 9 need a trained detector. The first run trains it
//! (about an hour on one core) and caches model and trace under the target
//! directory; later runs reuse the cache when its recorded config matches.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ftn::code::{bpsk, ConvCode};
use ftn::dlspa::{dlspa_tapes, dlspa_detect, loss_and_gradient, labels_of, param_shape, loss_curve, LossTrace};
use ftn::harness::{self, DetectorKind, SimConfig};
use ftn::llr::{clip, log_sum_exp_all, LlrDomain, LlrSequence};
use ftn::neural::{CnnParams, ParamGroup};
use ftn::rng::{stream, Purpose};
use ftn::spda::{exhaustive_app, spda_detect, DetectorModel};
use ftn::trellis::trellis_detect;
use ftn::turbo::Detector;
use ftn::waveform::{build_gram, compute_taps, noise_variance, Channel, IsiProfile, PulseSpec};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn bpsk_block<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn tau06() -> IsiProfile {
    compute_taps(&PulseSpec::root_raised_cosine(0.3), 0.6, 0.01).unwrap()
}

fn criterion_1() -> Outcome {
    let profile = tau06();
    let mut worst: f64 = 0.0;
    let mut blocks = 0;
    for b in 0..1200u64 {
        let mut rng = stream(1, Purpose::Scratch, b);
        let n = rng.random_range(4..=12);
        let l_e = rng.random_range(1..=3);
        let sigma2 = rng.random_range(0.2..1.5);
        let model = DetectorModel::new(&profile, l_e, sigma2, n).unwrap();
        let x = bpsk_block(&mut rng, n);
        let y = Channel::new(build_gram(&profile, n))
            .sample_received_block(&x, sigma2, &mut stream(1, Purpose::Noise, b))
            .unwrap();
        let priors = (b % 2 == 0).then(|| {
            LlrSequence::new(LlrDomain::Symbol, (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        });
        let exact = exhaustive_app(&y, &model, priors.as_ref()).unwrap();
        let trellis = trellis_detect(&y, &model, priors.as_ref(), false).unwrap();
        for (a, t) in exact.values().iter().zip(trellis.values()) {
            worst = worst.max((a - t).abs());
        }
        blocks += 1;
    }
    outcome(worst <= 1e-6, format!("{blocks} blocks, N 4..12, L_E 1..3, max |trellis - exhaustive| = {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let n = 24;
    let mut worst: f64 = 0.0;
    for b in 0..100u64 {
        let mut rng = stream(2, Purpose::Scratch, b);
        let sigma2 = rng.random_range(0.3..2.0);
        let model = DetectorModel::from_taps(vec![1.0, 0.0, 0.0], sigma2, n).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let prior: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let priors = LlrSequence::new(LlrDomain::Symbol, prior.clone());
        let params = CnnParams::neutral(param_shape(&model, 3, 4), 5, false);
        let outputs = [
            spda_detect(&y, &model, Some(&priors), 15).unwrap().app,
            dlspa_detect(&y, &model, Some(&priors), &params, 5).unwrap().output.app,
            trellis_detect(&y, &model, Some(&priors), false).unwrap(),
        ];
        for out in &outputs {
            for i in 0..n {
                worst = worst.max((out.values()[i] - (2.0 * y[i] / sigma2 + prior[i])).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("G = I, 100 blocks x 3 detectors, max |LLR - (2y/s2 + prior)| = {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let profile = tau06();
    let n = 128;
    let channel = Channel::new(build_gram(&profile, n));
    let mut worst: f64 = 0.0;
    for b in 0..100u64 {
        let snr = 2.0 + (b % 7) as f64;
        let sigma2 = noise_variance(snr, 62.0 / 128.0, 1.0);
        let model = DetectorModel::new(&profile, 2, sigma2, n).unwrap();
        let x = bpsk_block(&mut stream(3, Purpose::Data, b), n);
        let y = channel.sample_received_block(&x, sigma2, &mut stream(3, Purpose::Noise, b)).unwrap();
        let params = CnnParams::neutral(param_shape(&model, 15, 4), 15, false);
        let dl = dlspa_detect(&y, &model, None, &params, 15).unwrap().output.app;
        let plain = spda_detect(&y, &model, None, 15).unwrap().app;
        for (a, p) in dl.values().iter().zip(plain.values()) {
            worst = worst.max((a - p).abs());
        }
    }
    outcome(worst <= 1e-12, format!("100 blocks, N = 128, L_E = 2, max |DL-SPA(v=1, w=1) - SPDA| = {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let profile = tau06();
    let (n, m_max, h, gamma) = (16, 3, 1e-5, 0.95);
    let channel = Channel::new(build_gram(&profile, n));
    let mut worst = [0.0f64; 5];
    let mut checked = [0usize; 5];
    let mut excluded = 0;
    for inst in 0..3u64 {
        let sigma2 = noise_variance(3.0 + 2.0 * inst as f64, 0.5, 1.0);
        let model = DetectorModel::new(&profile, 2, sigma2, n).unwrap();
        let x = bpsk_block(&mut stream(4, Purpose::Data, inst), n);
        let y = channel.sample_received_block(&x, sigma2, &mut stream(4, Purpose::Noise, inst)).unwrap();
        let labels = labels_of(&x);
        let mut params = CnnParams::init(param_shape(&model, 3, 4), m_max, false, 0.3, &mut stream(4, Purpose::Init, inst));
        let mut rng = stream(4, Purpose::Scratch, inst);
        for j in 0..params.as_slice().len() {
            if params.group_of(j) == ParamGroup::EdgeWeights {
                params.as_mut_slice()[j] = rng.random_range(0.7..1.3);
            }
        }
        let mut grads = CnnParams::zeros(params.shape(), m_max, false);
        loss_and_gradient(&y, &labels, &model, None, &params, gamma, &mut grads).unwrap();
        let kinks = |p: &CnnParams| -> Vec<f64> {
            dlspa_tapes(&y, &model, None, p).unwrap().iter().flat_map(|t| t.kink_offsets()).collect()
        };
        let base = kinks(&params);
        let mut scratch = grads.clone();
        for j in 0..params.as_slice().len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[j] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[j] -= h;
            // Skip coordinates that move a pre-activation lying within 1e-3 of its kink.
            let (kp, km) = (kinks(&plus), kinks(&minus));
            if base.iter().zip(kp.iter().zip(&km)).any(|(b, (p, m))| b.abs() < 1e-3 && p != m) {
                excluded += 1;
                continue;
            }
            let lp = loss_and_gradient(&y, &labels, &model, None, &plus, gamma, &mut scratch).unwrap();
            let lm = loss_and_gradient(&y, &labels, &model, None, &minus, gamma, &mut scratch).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let an = grads.as_slice()[j];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            let g = ParamGroup::ALL.iter().position(|&x| x == params.group_of(j)).unwrap();
            worst[g] = worst[g].max(rel);
            checked[g] += 1;
        }
    }
    let pass = worst.iter().all(|&w| w < 1e-4) && checked.iter().all(|&c| c > 0);
    let groups: Vec<String> = ParamGroup::ALL
        .iter()
        .zip(worst.iter().zip(&checked))
        .map(|(g, (w, c))| format!("{g:?} {w:.1e} ({c})"))
        .collect();
    outcome(pass, format!("max relative error per group [{}], {excluded} near-kink coordinates skipped", groups.join(", ")))
}

fn criterion_5() -> Outcome {
    let (n, sigma2, draws) = (32, 0.5, 100_000);
    let gram = build_gram(&tau06(), n);
    let target = gram.to_dense() * sigma2;
    let channel = Channel::new(gram);
    let mut cov = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut rng = stream(5, Purpose::Noise, 0);
    for _ in 0..draws {
        let eta = nalgebra::DVector::from_vec(channel.sample_noise(sigma2, &mut rng));
        cov.syger(1.0, &eta, &eta, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= draws as f64;
    let rel = (&cov - &target).norm() / target.norm();
    outcome(rel < 0.02, format!("N = 32, tau = 0.6, 1e5 draws, relative Frobenius error {:.3}%", 100.0 * rel))
}

fn criterion_6() -> Outcome {
    let code = ConvCode::cc75();
    let impulse = code.encode(&[1]);
    let mut worst: f64 = 0.0;
    for trial in 0..60u64 {
        let mut rng = stream(6, Purpose::Scratch, trial);
        let k = 1 + (trial as usize % 10);
        let len = code.codeword_len(k);
        let priors: Vec<f64> = (0..len).map(|_| rng.random_range(-4.0..4.0)).collect();
        let (ext, app) = code.bcjr_decode(&LlrSequence::new(LlrDomain::CodedBit, priors.clone())).unwrap();
        // log P(c) up to a constant: Σ_j ±L_j/2 with + for a zero bit.
        let mut info_terms = vec![[Vec::new(), Vec::new()]; k];
        let mut coded_terms = vec![[Vec::new(), Vec::new()]; len];
        for word in 0..1u32 << k {
            let bits: Vec<u8> = (0..k).map(|i| (word >> i & 1) as u8).collect();
            let c = code.encode(&bits);
            let metric: f64 = c.iter().zip(&priors).map(|(&b, l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum();
            for i in 0..k {
                info_terms[i][bits[i] as usize].push(metric);
            }
            for j in 0..len {
                coded_terms[j][c[j] as usize].push(metric);
            }
        }
        for i in 0..k {
            let exact = clip(log_sum_exp_all(&info_terms[i][0]) - log_sum_exp_all(&info_terms[i][1]));
            worst = worst.max((exact - app.values()[i]).abs());
        }
        for j in 0..len {
            // Tail bits fixed by termination have infinite APP; both sides clip.
            let exact = clip(log_sum_exp_all(&coded_terms[j][0]) - log_sum_exp_all(&coded_terms[j][1]) - priors[j]);
            worst = worst.max((exact - ext.values()[j]).abs());
        }
    }
    let impulse_ok = impulse == [1, 1, 1, 0, 1, 1];
    outcome(
        worst <= 1e-6 && impulse_ok,
        format!("K = 1..10, max |BCJR - exhaustive MAP| = {worst:.2e}, impulse response {impulse:?}"),
    )
}

/// SNR at which a BER curve first drops to `target`, interpolating log BER
/// linearly between grid points. A zero count stands for half an error.
fn snr_at(points: &[(f64, f64, usize)], target: f64) -> Option<f64> {
    let log = |(_, ber, bits): (f64, f64, usize)| if ber > 0.0 { ber.log10() } else { (0.5 / bits as f64).log10() };
    let t = target.log10();
    for w in points.windows(2) {
        let (a, b) = (log(w[0]), log(w[1]));
        if a > t && b <= t {
            return Some(w[0].0 + (w[1].0 - w[0].0) * (a - t) / (a - b));
        }
    }
    if points.first().is_some_and(|&p| log(p) <= t) {
        return Some(points[0].0);
    }
    None
}

fn standalone_cc(snr_db: f64, k: usize, target_errors: usize, max_blocks: usize) -> (f64, f64, usize) {
    let code = ConvCode::cc75();
    let sigma2 = noise_variance(snr_db, code.rate(k), 1.0);
    let (mut errors, mut blocks) = (0, 0);
    while errors < target_errors && blocks < max_blocks {
        let mut rng = stream(77, Purpose::Scratch, blocks as u64);
        let bits: Vec<u8> = (0..k).map(|_| rng.random::<bool>() as u8).collect();
        let llr: Vec<f64> = bpsk(&code.encode(&bits))
            .iter()
            .map(|x| 2.0 * (x + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)) / sigma2)
            .collect();
        let (_, app) = code.bcjr_decode(&LlrSequence::new(LlrDomain::CodedBit, llr)).unwrap();
        errors += app.hard_bits().iter().zip(&bits).filter(|(a, b)| a != b).count();
        blocks += 1;
    }
    (snr_db, errors as f64 / (blocks * k) as f64, blocks * k)
}

fn criterion_7() -> Outcome {
    let grid: Vec<f64> = (0..9).map(|i| 2.5 + 0.5 * i as f64).collect();
    let (target_errors, max_blocks) = (200, 40_000);
    let config = SimConfig { tau: 1.0, rho_max: 2, m_max: 5, target_errors, max_blocks, ..SimConfig::default() };
    let profile = harness::channel_profile(&config).unwrap();
    let reference: Vec<_> = grid.iter().map(|&s| standalone_cc(s, config.k, target_errors, max_blocks)).collect();
    let Some(ref_snr) = snr_at(&reference, 1e-4) else {
        return outcome(false, "standalone curve never reached 1e-4");
    };
    let mut details = vec![format!("standalone CC reaches 1e-4 at {ref_snr:.2} dB")];
    let mut pass = true;
    for kind in [DetectorKind::Spda, DetectorKind::Trellis, DetectorKind::DlSpa] {
        let detector = match kind {
            DetectorKind::DlSpa => {
                let model = DetectorModel::new(&profile, 0, 1.0, config.block_len()).unwrap();
                let params = CnnParams::neutral(param_shape(&model, 3, 4), 5, false);
                Detector::dlspa(model, params).unwrap()
            }
            _ => harness::build_detector(&SimConfig { detector: kind, ..config.clone() }, &profile).unwrap(),
        };
        let curve: Vec<_> = grid
            .iter()
            .map(|&s| {
                let r = harness::ber_point(&config, &detector, &profile, s).unwrap();
                (s, r.ber, r.blocks * config.k)
            })
            .collect();
        match snr_at(&curve, 1e-4) {
            Some(snr) => {
                pass &= (snr - ref_snr).abs() <= 0.2;
                details.push(format!("{kind} {snr:.2} dB"));
            }
            None => {
                pass = false;
                details.push(format!("{kind} never reached 1e-4"));
            }
        }
    }
    outcome(pass, format!("tau = 1: {}", details.join(", ")))
}

fn cache_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Training setup of criteria 8 and 9: Table-1 hyperparameters, 16 passes of
/// 360 batches of 360 sequences (about 2.07 million samples).
fn training_config() -> SimConfig {
    let dir = cache_dir();
    SimConfig {
        tau: 0.6,
        l_e: 2,
        k: 62,
        m_max: 15,
        passes: 16,
        seed: 1,
        model: Some(dir.join("c8.bin")),
        trace: Some(dir.join("c8_trace.csv")),
        ..SimConfig::default()
    }
}

/// The config with the fields that do not affect training cleared.
fn fingerprint(config: &SimConfig) -> String {
    SimConfig { model: None, trace: None, output: None, threads: 0, ..config.clone() }.header()
}

/// Cached trace if it was produced by `config`, else a fresh training run.
fn trained(config: &SimConfig) -> LossTrace {
    let (model, trace) = (config.model.as_ref().unwrap(), config.trace.as_ref().unwrap());
    if let (true, Ok(text)) = (model.exists(), std::fs::read_to_string(trace)) {
        let body: String = text
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .filter(|l| !l.starts_with("rejected_samples"))
            .map(|l| format!("{l}\n"))
            .collect();
        if SimConfig::parse(&body).is_ok_and(|cached| fingerprint(&cached) == fingerprint(config)) {
            return harness::parse_trace(&text).unwrap();
        }
    }
    eprintln!("training the detector for criteria 8 and 9; this takes about an hour on one core");
    let start = Instant::now();
    let outcome = harness::train(config, |r| {
        if r.batch % 500 == 0 {
            eprintln!("  batch {}/{} loss {:.4}", r.batch, r.total, r.loss);
        }
    })
    .unwrap();
    eprintln!("training took {:.0} s", start.elapsed().as_secs_f64());
    harness::save_model(model, &outcome).unwrap();
    std::fs::write(trace, harness::trace_csv(config, &outcome.trace)).unwrap();
    outcome.trace
}

fn criterion_8(train: &SimConfig) -> Outcome {
    let grid: Vec<f64> = (0..15).map(|i| 2.0 + 0.5 * i as f64).collect();
    let sweep = |detector| {
        let config = SimConfig { detector, snr_db: grid.clone(), target_errors: 200, max_blocks: 6000, ..train.clone() };
        harness::ber_sweep(&config)
            .unwrap()
            .iter()
            .map(|r| (r.snr_db, r.ber, r.blocks * config.k))
            .collect::<Vec<_>>()
    };
    let dl = sweep(DetectorKind::DlSpa);
    let spda = sweep(DetectorKind::Spda);
    let show = |c: &[(f64, f64, usize)]| c.iter().map(|(s, b, _)| format!("{s}:{b:.1e}")).collect::<Vec<_>>().join(" ");
    eprintln!("  DL-SPA(5,2) {}", show(&dl));
    eprintln!("  SPDA(5,2)   {}", show(&spda));
    let Some(dl_snr) = snr_at(&dl, 1e-3) else {
        return outcome(false, "DL-SPA(5,2) never reached 1e-3 on the grid");
    };
    match snr_at(&spda, 1e-3) {
        Some(spda_snr) => {
            let gain = spda_snr - dl_snr;
            outcome(
                gain >= 1.0,
                format!("BER 1e-3 at tau = 0.6: DL-SPA(5,2) {dl_snr:.2} dB, SPDA(5,2) {spda_snr:.2} dB, gain {gain:.2} dB"),
            )
        }
        None => {
            let gain = grid.last().unwrap() - dl_snr;
            outcome(
                gain >= 1.0,
                format!("BER 1e-3 at tau = 0.6: DL-SPA(5,2) {dl_snr:.2} dB, SPDA(5,2) above the grid, gain > {gain:.2} dB"),
            )
        }
    }
}

/// Windows of one and two training passes. Each pass visits every SNR for the
/// same number of batches, so pass-aligned windows compare like with like;
/// unaligned short windows mostly measure which SNRs they happened to cover.
fn criterion_9(config: &SimConfig, trace: &LossTrace) -> Outcome {
    let pass = config.train_config().batches_per_pass();
    let curve = loss_curve(trace, pass, 2 * pass);
    let synthetic = ftn::dlspa::stability_index(&[1.0, 0.5, 0.45, 0.44, 0.438]) == Some(2)
        && LossTrace::from_losses(vec![3.0; 40]).xi_cg(10).iter().all(|&c| c == 0.0);
    let Some(stable) = curve.stable_at else {
        return outcome(false, format!("stability never reached over {} coarse windows", curve.coarse.len()));
    };
    let tail_ok = curve.change[stable + 1..].iter().all(|&c| c < 0.1);
    let fine = &curve.fine;
    let decreasing = fine.last().unwrap() < &fine[0]
        && fine[1..].windows(2).filter(|w| w[1] > w[0] * 1.1).count() == 0
        && curve.coarse.windows(2).skip(1).all(|w| w[1] <= w[0] * 1.02);
    outcome(
        synthetic && tail_ok && decreasing,
        format!(
            "{} batches, windows {pass}/{}, stable at coarse window {stable} of {}, final xi_avg {:.3}, max later xi_cg {:.3}",
            trace.len(),
            2 * pass,
            curve.coarse.len() - 1,
            fine.last().unwrap(),
            curve.change[stable + 1..].iter().cloned().fold(0.0, f64::max),
        ),
    )
}

fn criterion_10() -> Outcome {
    let base = SimConfig {
        k: 30,
        rho_max: 3,
        m_max: 5,
        snr_db: vec![3.0, 5.0, 7.0],
        max_blocks: 300,
        target_errors: 50,
        threads: 1,
        ..SimConfig::default()
    };
    let csv = |c: &SimConfig| harness::ber_csv(c, &harness::ber_sweep(c).unwrap());
    let serial_identical = csv(&base) == csv(&base);
    let counts = |c: &SimConfig| {
        harness::ber_sweep(c).unwrap().iter().map(|r| (r.blocks, r.bit_errors)).collect::<Vec<_>>()
    };
    let parallel_identical = counts(&base) == counts(&SimConfig { threads: 4, ..base.clone() });

    let tiny = SimConfig { batch_size: 24, batches_per_snr: 2, filters: 3, ..base.clone() };
    let run = |c: &SimConfig| {
        let o = harness::train(c, |_| {}).unwrap();
        let mut bytes = Vec::new();
        ftn::dlspa::write_model(&mut bytes, &o.header, &o.params).unwrap();
        (harness::trace_csv(c, &o.trace), bytes)
    };
    let training_identical = run(&tiny) == run(&tiny) && run(&tiny).1 == run(&SimConfig { threads: 4, ..tiny.clone() }).1;
    outcome(
        serial_identical && parallel_identical && training_identical,
        format!(
            "serial CSV identical: {serial_identical}, 1 vs 4 threads block counts identical: {parallel_identical}, training bit-identical: {training_identical}"
        ),
    )
}

fn main() {
    // `cargo test` passes filter arguments; honour `--list` and plain filters.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let filter = args.iter().find(|a| !a.starts_with('-')).cloned();
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f) && !f.starts_with("criterion")) {
        return;
    }
    let only: Option<usize> = filter.as_deref().and_then(|f| f.strip_prefix("criterion_")).and_then(|n| n.parse().ok());

    let train = training_config();
    let mut trace = None;
    let mut failed = 0;
    for id in 1..=10 {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let result = match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => {
                trace = Some(trained(&train));
                criterion_8(&train)
            }
            9 => criterion_9(&train, trace.get_or_insert_with(|| trained(&train))),
            _ => criterion_10(),
        };
        failed += usize::from(!result.pass);
        println!(
            "criterion {id:>2}: {} ({:.1} s) {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
