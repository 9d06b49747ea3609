//! On-the-fly generation of random-wave sound fields for training and
//! evaluation, plus measurement masking.
//!
//! A random-wave field is a truncated sum of plane waves with random
//! directions, uniform random phases and amplitudes drawn per
//! [`AmplitudeLaw`], optionally corrupted by complex Gaussian noise at a
//! configured SNR. Above the Schroeder frequency of a room this is a decent
//! statistical model of the pressure over a small aperture.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    build_dictionary, grid_wave, sample_directions, wavenumber, Dictionary, Grid2D, Position3,
    PressureField, SamplingScheme, DEFAULT_SPEED_OF_SOUND,
};
use crate::seeding::derive_seed;

type Complex64 = Complex<f64>;

const TAG_FIELD: u64 = 0x01;
const TAG_DIRECTIONS: u64 = 0x02;

/// Amplitude law for the random waves. The magnitude/phase split is
/// `a_w · exp(j φ_w)` with `φ_w ~ U[0, 2π)` in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeLaw {
    /// `a_w = 1`: pure phase randomization (default).
    UnitMagnitude,
    /// `a_w · exp(j φ_w) ~ CN(0, 1)`: Rayleigh magnitudes, `E[a_w²] = 1`.
    ComplexGaussian,
}

/// Configuration for random-wave field generation.
///
/// The defaults follow the training setup: a 21×21 grid at 0.05 m spacing,
/// frequencies spanning [30, 4000] Hz, 512 waves per field and 40 dB SNR.
/// The wave count and noise level are assumptions (large enough for diffuse
/// statistics at 4 kHz over a 1 m aperture); both are configurable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomWaveConfig {
    pub grid: Grid2D,
    pub freq_range: (f64, f64),
    pub waves_per_field: usize,
    pub amplitude: AmplitudeLaw,
    /// Signal-to-noise ratio in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    pub speed_of_sound: f64,
    /// Number of dictionary atoms paired with each training field.
    pub dictionary_size: usize,
}

impl RandomWaveConfig {
    pub fn new(grid: Grid2D) -> Self {
        RandomWaveConfig {
            grid,
            freq_range: (30.0, 4000.0),
            waves_per_field: 512,
            amplitude: AmplitudeLaw::UnitMagnitude,
            snr_db: 40.0,
            seed: 0,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            dictionary_size: 4096,
        }
    }

    /// The 21×21, 0.05 m aperture centered on the origin.
    pub fn default_aperture() -> Result<Self> {
        let grid = Grid2D::axis_aligned(Position3::new(-0.5, -0.5, 0.0), 0.05, 21, 21)?;
        Ok(RandomWaveConfig::new(grid))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.freq_range;
        if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::invalid(format!(
                "frequency range must satisfy 0 < f_min <= f_max, got [{lo}, {hi}]"
            )));
        }
        if self.waves_per_field == 0 {
            return Err(Error::invalid("waves_per_field must be >= 1"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db must be finite or +inf"));
        }
        if !(self.speed_of_sound > 0.0) || !self.speed_of_sound.is_finite() {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        if self.dictionary_size == 0 {
            return Err(Error::invalid("dictionary_size must be >= 1"));
        }
        Ok(())
    }
}

/// The plane-wave components of one random-wave field: unit directions and
/// complex amplitudes `a_w e^{j φ_w}`. Exposed so oracles can re-project a
/// generated field through a dictionary containing its true components.
#[derive(Debug, Clone)]
pub struct WaveComponents {
    pub directions: Vec<[f64; 3]>,
    pub amplitudes: Vec<Complex64>,
}

fn draw_components(cfg: &RandomWaveConfig, rng: &mut ChaCha8Rng) -> WaveComponents {
    let w = cfg.waves_per_field;
    let mut directions = Vec::with_capacity(w);
    let mut amplitudes = Vec::with_capacity(w);
    for _ in 0..w {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let theta: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        directions.push([r * theta.cos(), r * theta.sin(), z]);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let magnitude = match cfg.amplitude {
            AmplitudeLaw::UnitMagnitude => 1.0,
            AmplitudeLaw::ComplexGaussian => {
                // Rayleigh with E[a^2] = 1.
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (-u.ln()).sqrt()
            }
        };
        amplitudes.push(Complex64::new(magnitude * phase.cos(), magnitude * phase.sin()));
    }
    WaveComponents { directions, amplitudes }
}

/// Deterministically draws the wave components that
/// [`random_wave_field`] sums for the same `(config, frequency, seed)`.
pub fn random_wave_components(
    cfg: &RandomWaveConfig,
    frequency: f64,
    seed: u64,
) -> Result<WaveComponents> {
    cfg.validate()?;
    check_frequency(cfg, frequency)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_components(cfg, &mut rng))
}

fn check_frequency(cfg: &RandomWaveConfig, frequency: f64) -> Result<()> {
    let (lo, hi) = cfg.freq_range;
    if !frequency.is_finite() || frequency < lo || frequency > hi {
        return Err(Error::invalid(format!(
            "frequency {frequency} Hz outside the configured range [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Sums the wave components over the grid positions.
fn synthesize(grid: &Grid2D, k: f64, comps: &WaveComponents) -> Array1<Complex64> {
    let m = grid.len();
    let mut field = vec![Complex64::new(0.0, 0.0); m];
    let mut atom = vec![Complex64::new(0.0, 0.0); m];
    for (d, a) in comps.directions.iter().zip(&comps.amplitudes) {
        grid_wave(grid, k, *d, &mut atom);
        for (f, e) in field.iter_mut().zip(&atom) {
            *f += a * e;
        }
    }
    Array1::from_vec(field)
}

/// Generates one random-wave pressure field on the configured grid:
/// `p(r) = Σ_w a_w e^{jφ_w} e^{j k d_w · r}` plus complex Gaussian noise
/// scaled to the configured SNR. Bit-reproducible given
/// `(config, frequency, seed)`.
pub fn random_wave_field(cfg: &RandomWaveConfig, frequency: f64, seed: u64) -> Result<PressureField> {
    cfg.validate()?;
    check_frequency(cfg, frequency)?;
    let k = wavenumber(frequency, cfg.speed_of_sound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = draw_components(cfg, &mut rng);
    let mut values = synthesize(&cfg.grid, k, &comps);
    if cfg.snr_db.is_finite() {
        let signal_power = values.iter().map(|v| v.norm_sqr()).sum::<f64>() / values.len() as f64;
        let noise_power = signal_power * 10f64.powf(-cfg.snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        for v in values.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    PressureField::new(values, cfg.grid.positions(), frequency)
}

/// One training batch: random-wave fields, their frequencies, and a freshly
/// sampled dictionary per field at the matching wavenumber.
#[derive(Debug)]
pub struct TrainingBatch {
    pub fields: Vec<PressureField>,
    pub frequencies: Vec<f64>,
    pub dictionaries: Vec<Dictionary>,
}

/// Samples a batch of training fields with frequencies drawn uniformly from
/// the configured range, each paired with a fresh uniform-random direction
/// dictionary at its wavenumber.
///
/// Fields and dictionaries derive per-item seeds from `seed`, so generation
/// may be parallelized without affecting the result.
pub fn sample_training_batch(
    cfg: &RandomWaveConfig,
    batch_size: usize,
    seed: u64,
) -> Result<TrainingBatch> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let (lo, hi) = cfg.freq_range;
    let mut freq_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let frequencies: Vec<f64> = (0..batch_size).map(|_| freq_rng.gen_range(lo..=hi)).collect();
    let positions = cfg.grid.positions();
    let items: Result<Vec<(PressureField, Dictionary)>> = frequencies
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let field = random_wave_field(cfg, f, derive_seed(seed, &[TAG_FIELD, i as u64]))?;
            let dirs = Arc::new(sample_directions(
                cfg.dictionary_size,
                SamplingScheme::UniformRandom,
                derive_seed(seed, &[TAG_DIRECTIONS, i as u64]),
            )?);
            let k = wavenumber(f, cfg.speed_of_sound)?;
            let dict = build_dictionary(&positions, dirs, k)?;
            Ok((field, dict))
        })
        .collect();
    let (fields, dictionaries): (Vec<_>, Vec<_>) = items?.into_iter().unzip();
    Ok(TrainingBatch { fields, frequencies, dictionaries })
}

/// Restricts a field to the positions at `keep_indices`, preserving the
/// order of the indices.
pub fn apply_mask(field: &PressureField, keep_indices: &[usize]) -> Result<PressureField> {
    let m = field.len();
    let mut values = Vec::with_capacity(keep_indices.len());
    let mut positions = Vec::with_capacity(keep_indices.len());
    for &i in keep_indices {
        if i >= m {
            return Err(Error::invalid(format!("mask index {i} out of range for {m} positions")));
        }
        values.push(field.values[i]);
        positions.push(field.positions[i]);
    }
    PressureField::new(Array1::from_vec(values), positions, field.frequency)
}
