//! Simulation of faster-than-Nyquist (FTN) signaling with iterative detection.
//!
//! The crate covers the whole link: root-raised-cosine pulses sent every
//! `τT` seconds and the resulting ISI taps ([`waveform`]), the rate-1/2
//! (7,5) convolutional code and its BCJR decoder ([`code`]), sum-product
//! detection on the Ungerboeck factor graph ([`spda`]), exact trellis
//! detection ([`trellis`]), the neural-assisted detector and its training
//! ([`neural`], [`dlspa`]), Turbo equalization ([`turbo`]) and seeded BER
//! sweeps ([`harness`]).
//!
//! ```
//! use ftn::waveform::{compute_taps, PulseSpec, DEFAULT_THRESHOLD};
//!
//! let profile = compute_taps(&PulseSpec::root_raised_cosine(0.3), 0.6, DEFAULT_THRESHOLD).unwrap();
//! assert_eq!(profile.taps()[0], 1.0);
//! assert!((profile.taps()[1] - 0.4894).abs() < 1e-4);
//! ```

pub mod code;
pub mod dlspa;
pub mod error;
pub mod harness;
pub mod llr;
pub mod neural;
pub mod rng;
pub mod spda;
pub mod trellis;
pub mod turbo;
pub mod waveform;

pub use error::{Error, Result};

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/neural.md")]
    mod neural {}
    #[doc = include_str!("../../../book/src/turbo.md")]
    mod turbo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
