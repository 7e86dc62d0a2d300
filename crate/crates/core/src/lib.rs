//! Forest radio channel toolkit.
//!
//! Large-scale path-loss models for ground-to-ground and air-to-ground links
//! through vegetation, a bounded least-squares fitting engine with shadow
//! fading statistics, a stochastic forest multipath synthesizer, an LTE-style
//! OFDM channel-sounding simulator, and delay/angle domain parameter
//! extraction.
//!
//! Module map:
//!
//! - [`pathloss`]: closed-form path-loss models (CI, FSPL, ITU horizontal and
//!   slant foliage, SUI, BHF, BHF-M, flat-earth two-ray, FE2R-M, Hata).
//! - [`fitting`]: multi-start Levenberg-Marquardt regression, RMSE, shadowing
//!   residuals and normal-distribution fits.
//! - [`synth`]: Saleh-Valenzuela and three-component forest channel draws.
//! - [`ofdm`]: frame construction, channel application, Zadoff-Chu sync,
//!   CFR/CIR estimation.
//! - [`mpc`]: peak search, mean excess delay, RMS delay spread, Rician K.
//! - [`angular`]: angular power spectrum and azimuth spread from sector sweeps.
//! - [`tool`]: file formats, configuration and the command-line verbs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod error;
pub mod fitting;
pub mod mpc;
pub mod ofdm;
pub mod pathloss;
pub mod rng;
pub mod synth;
pub mod tool;

pub use error::{Error, Result};
