//! Sound field reconstruction from sparse microphone measurements.
//!
//! The library models a sound field at a single frequency as a weighted sum of
//! propagating plane waves, `p(r) ≈ Σ_n x_n exp(j k d_n · r)`, and recovers the
//! coefficients `x` from a handful of pressure measurements. Two solver
//! families are provided:
//!
//! * classical regularized inversion (Tikhonov closed form and ℓ1 sparse
//!   recovery, see [`solve`]), and
//! * a generative prior: a convolutional GAN trained on synthetic random-wave
//!   fields whose latent space is searched to fit the measurements
//!   (see [`gan`] and [`invert`]).
//!
//! Time-domain room impulse responses are handled per frequency bin by the
//! [`rir`] module. All complex pressure data is double precision; single
//! precision is used only inside network training.
//!
//! # Phase convention
//!
//! The time convention is `e^{-jωt}`, so `e^{+j k d · r}` is a wave traveling
//! along `+d`. The RIR spectral transforms in [`rir`] follow the same
//! convention.

pub mod error;
pub mod field;
pub mod gan;
pub mod invert;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod recon;
pub mod rir;
mod seeding;
pub mod solve;
pub mod synth;

pub use error::{Error, Result};
pub use field::{
    build_dictionary, sample_directions, vekua_wave_count, wavenumber, CoefficientVector,
    Dictionary, DirectionSet, Grid2D, Position3, PressureField, SamplingScheme,
    DEFAULT_SPEED_OF_SOUND,
};

/// Complex scalar used throughout the public API.
pub type Complex64 = num_complex::Complex<f64>;
