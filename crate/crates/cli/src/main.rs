//! Command-line front end: `taps`, `train`, `ber-sweep` and `loss-curve`.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use ftn::harness::{self, SimConfig};
use ftn::{Error, Result};

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

/// Subcommand with `--config` plus one flag per config key.
fn subcommand(name: &'static str, about: &'static str) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("FILE")
            .help("key = value file; flags override it"),
    );
    for key in SimConfig::KEYS {
        cmd = cmd.arg(Arg::new(*key).long(flag(key)).value_name("VALUE").action(ArgAction::Set));
    }
    cmd
}

fn cli() -> Command {
    Command::new("ftn")
        .about("Faster-than-Nyquist detection experiments")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .subcommand(subcommand("taps", "Print the ISI taps of the configured pulse"))
        .subcommand(subcommand("train", "Train the neural-assisted detector"))
        .subcommand(subcommand("ber-sweep", "Simulate BER over the SNR grid"))
        .subcommand(subcommand("loss-curve", "Windowed loss statistics of a training trace"))
}

fn resolve(matches: &ArgMatches) -> Result<SimConfig> {
    let mut config = match matches.get_one::<String>("config") {
        Some(path) => SimConfig::load(Path::new(path))?,
        None => SimConfig::default(),
    };
    for key in SimConfig::KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            config
                .set(key, value)
                .map_err(|e| Error::Config(format!("--{}: {}", flag(key), e)))?;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Opens the configured output up front so a bad path fails before any work.
fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|source| Error::File { path: p.clone(), source })?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn require<'a>(path: Option<&'a PathBuf>, key: &str) -> Result<&'a PathBuf> {
    path.ok_or_else(|| Error::Config(format!("`{key}` must be set")))
}

fn run(name: &str, matches: &ArgMatches) -> Result<()> {
    let config = resolve(matches)?;
    match name {
        "taps" => {
            let mut out = open_output(config.output.as_ref())?;
            let profile = harness::channel_profile(&config)?;
            emit(&mut out, &harness::taps_csv(&config, &profile))
        }
        "train" => {
            let model_path = require(config.model.as_ref(), "model")?;
            let mut model_file = File::create(model_path).map_err(|source| Error::File { path: model_path.clone(), source })?;
            let mut trace_out = config.trace.as_ref().map(|p| open_output(Some(p))).transpose()?;
            let outcome = harness::train(&config, |r| {
                if r.batch % 100 == 0 || r.batch + 1 == r.total {
                    eprintln!("batch {}/{}  snr {} dB  loss {:.5}", r.batch + 1, r.total, r.snr_db, r.loss);
                }
            });
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    let _ = std::fs::remove_file(model_path);
                    return Err(e);
                }
            };
            ftn::dlspa::write_model(&mut model_file, &outcome.header, &outcome.params)?;
            if let Some(out) = trace_out.as_mut() {
                emit(out, &harness::trace_csv(&config, &outcome.trace))?;
            }
            Ok(())
        }
        "ber-sweep" => {
            let mut out = open_output(config.output.as_ref())?;
            let records = harness::ber_sweep(&config)?;
            emit(&mut out, &harness::ber_csv(&config, &records))
        }
        "loss-curve" => {
            let path = require(config.trace.as_ref(), "trace")?;
            let text = std::fs::read_to_string(path).map_err(|source| Error::File { path: path.clone(), source })?;
            let trace = harness::parse_trace(&text)?;
            let mut out = open_output(config.output.as_ref())?;
            emit(&mut out, &harness::loss_curve_csv(&config, &trace))
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
