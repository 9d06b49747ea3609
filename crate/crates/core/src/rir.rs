//! Bridges time domain and frequency domain: spectra from measured room
//! impulse responses, per-bin reconstruction, and assembly of reconstructed
//! RIRs.
//!
//! # Transform conventions
//!
//! The transform length is the next power of two at or above the RIR length,
//! zero-padded. The forward transform is unnormalized, the inverse carries
//! `1/T`. Under the library-wide `e^{-jωt}` time convention the pressure
//! phasor at a positive frequency bin is the *conjugate* of the standard DFT
//! coefficient; `rir_to_spectra` returns phasors in that convention and
//! `spectra_to_rir` undoes it, so round trips are exact and plane-wave
//! dictionaries (`e^{+j k d · r}` outgoing along `+d`) see consistent data.

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::{Position3, PressureField};
use crate::metrics::FieldReconstructor;

type Complex64 = Complex<f64>;

/// Time-domain impulse responses at known positions, one row per channel.
#[derive(Debug, Clone)]
pub struct RirDataset {
    pub positions: Vec<Position3>,
    /// M×T, one impulse response per row.
    pub impulse_responses: Array2<f64>,
    /// Sampling rate, Hz.
    pub fs: f64,
}

impl RirDataset {
    pub fn new(positions: Vec<Position3>, impulse_responses: Array2<f64>, fs: f64) -> Result<Self> {
        if impulse_responses.nrows() != positions.len() {
            return Err(Error::invalid(format!(
                "RIR rows {} do not match position count {}",
                impulse_responses.nrows(),
                positions.len()
            )));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::invalid(format!("sampling rate must be positive, got {fs}")));
        }
        Ok(RirDataset { positions, impulse_responses, fs })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.impulse_responses.ncols()
    }
}

/// Per-bin pressure fields sharing one position set, bins strictly
/// increasing.
#[derive(Debug, Clone)]
pub struct SpectralStack {
    pub frequencies: Vec<f64>,
    pub fields: Vec<PressureField>,
    /// Transform length the bins live on.
    pub nfft: usize,
    /// Sampling rate of the underlying time data, Hz.
    pub fs: f64,
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// FFT-based band-limited resampling (anti-aliasing at `min(fs, target)/2`).
/// The output length scales by `target_fs / fs`.
pub fn resample(dataset: &RirDataset, target_fs: f64) -> Result<RirDataset> {
    if !(target_fs > 0.0) || !target_fs.is_finite() {
        return Err(Error::invalid(format!("target sampling rate must be positive, got {target_fs}")));
    }
    if (target_fs - dataset.fs).abs() < 1e-12 * dataset.fs {
        return Ok(dataset.clone());
    }
    let n_in = dataset.num_samples();
    let n_out = ((n_in as f64) * target_fs / dataset.fs).round().max(1.0) as usize;
    let m = dataset.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|ch| {
            let mut x: Vec<Complex64> = dataset
                .impulse_responses
                .row(ch)
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            fft_in_place(&mut x, false);
            let mut y = vec![Complex64::new(0.0, 0.0); n_out];
            let n_keep = n_in.min(n_out);
            let half = n_keep / 2;
            // Positive frequencies (and DC).
            for k in 0..=half.min(n_out - 1) {
                if k < x.len() && k < y.len() {
                    y[k] = x[k];
                }
            }
            // Negative frequencies.
            for k in 1..half + (n_keep % 2) {
                y[n_out - k] = x[n_in - k];
            }
            if n_keep % 2 == 0 && half > 0 && half < n_out {
                if n_out < n_in {
                    // Downsampling: fold the conjugate partner into the new
                    // Nyquist bin to keep the signal real.
                    y[half] = Complex64::new((x[half] + x[n_in - half]).re * 0.5, 0.0);
                } else {
                    // Upsampling: split the old Nyquist bin between the two
                    // symmetric positions.
                    y[half] = x[half] * 0.5;
                    y[n_out - half] = x[half] * 0.5;
                }
            }
            fft_in_place(&mut y, true);
            let scale = 1.0 / n_in as f64;
            y.iter().map(|v| v.re * scale).collect()
        })
        .collect();
    let mut out = Array2::zeros((m, n_out));
    for (ch, row) in rows.into_iter().enumerate() {
        for (t, v) in row.into_iter().enumerate() {
            out[[ch, t]] = v;
        }
    }
    RirDataset::new(dataset.positions.clone(), out, target_fs)
}

/// Transform length used for a RIR of `len` samples.
pub fn transform_length(len: usize) -> usize {
    len.next_power_of_two()
}

/// All non-negative bin frequencies (0 ..= nfft/2) of the padded transform.
pub fn all_bin_frequencies(rir_len: usize, fs: f64) -> Vec<f64> {
    let nfft = transform_length(rir_len);
    (0..=nfft / 2).map(|k| k as f64 * fs / nfft as f64).collect()
}

fn bin_index(frequency: f64, nfft: usize, fs: f64) -> Result<usize> {
    let df = fs / nfft as f64;
    let kf = frequency / df;
    let k = kf.round();
    if (kf - k).abs() > 1e-6 || k < 0.0 || k as usize > nfft / 2 {
        let lower = (kf.floor().max(0.0)) * df;
        let upper = (kf.ceil().min((nfft / 2) as f64)) * df;
        return Err(Error::invalid(format!(
            "frequency {frequency} Hz is not on the transform bin grid (spacing {df} Hz); nearest bins are {lower} and {upper} Hz"
        )));
    }
    Ok(k as usize)
}

/// Computes complex pressure phasors of every channel at the selected
/// frequencies. `freq_selection` must be strictly increasing and lie on the
/// bin grid of the zero-padded transform.
pub fn rir_to_spectra(dataset: &RirDataset, freq_selection: &[f64]) -> Result<SpectralStack> {
    if freq_selection.is_empty() {
        return Err(Error::invalid("no frequencies selected"));
    }
    if freq_selection.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("frequency selection must be strictly increasing"));
    }
    let nfft = transform_length(dataset.num_samples());
    let bins: Result<Vec<usize>> =
        freq_selection.iter().map(|&f| bin_index(f, nfft, dataset.fs)).collect();
    let bins = bins?;

    let m = dataset.len();
    let spectra: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|ch| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (t, &v) in dataset.impulse_responses.row(ch).iter().enumerate() {
                buf[t] = Complex64::new(v, 0.0);
            }
            fft_in_place(&mut buf, false);
            // e^{-jωt} convention: phasor is the conjugate DFT coefficient.
            bins.iter().map(|&k| buf[k].conj()).collect()
        })
        .collect();

    let fields: Result<Vec<PressureField>> = freq_selection
        .iter()
        .enumerate()
        .map(|(fi, &f)| {
            let values = ndarray::Array1::from_vec((0..m).map(|ch| spectra[ch][fi]).collect());
            PressureField::new(values, dataset.positions.clone(), f)
        })
        .collect();
    Ok(SpectralStack { frequencies: freq_selection.to_vec(), fields: fields?, nfft, fs: dataset.fs })
}

/// Inverse of [`rir_to_spectra`] over the full bin set: requires one field
/// per bin `0 ..= nfft/2`, enforces conjugate symmetry (DC and Nyquist real)
/// and returns real signals truncated to `n_time` samples.
pub fn spectra_to_rir(stack: &SpectralStack, n_time: usize) -> Result<RirDataset> {
    let nfft = stack.nfft;
    if stack.frequencies.len() != nfft / 2 + 1 {
        return Err(Error::invalid(format!(
            "need all {} bins to invert, got {}",
            nfft / 2 + 1,
            stack.frequencies.len()
        )));
    }
    if n_time > nfft {
        return Err(Error::invalid(format!("n_time {n_time} exceeds transform length {nfft}")));
    }
    let m = stack.fields[0].len();
    for f in &stack.fields {
        if f.len() != m {
            return Err(Error::invalid("spectral stack has inconsistent position sets"));
        }
    }
    let positions = stack.fields[0].positions.clone();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|ch| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (k, field) in stack.fields.iter().enumerate() {
                // Undo the phasor conjugation back to DFT coefficients.
                let mut v = field.values[ch].conj();
                if k == 0 || k == nfft / 2 {
                    v = Complex64::new(v.re, 0.0);
                }
                buf[k] = v;
                if k != 0 && k != nfft / 2 {
                    buf[nfft - k] = v.conj();
                }
            }
            fft_in_place(&mut buf, true);
            let scale = 1.0 / nfft as f64;
            debug_assert!(
                buf.iter().map(|v| v.im.abs()).fold(0.0, f64::max) * scale < 1e-10,
                "inverse transform should be real"
            );
            buf[..n_time].iter().map(|v| v.re * scale).collect()
        })
        .collect();
    let mut out = Array2::zeros((m, n_time));
    for (ch, row) in rows.into_iter().enumerate() {
        for (t, v) in row.into_iter().enumerate() {
            out[[ch, t]] = v;
        }
    }
    RirDataset::new(positions, out, stack.fs)
}

/// Status of one frequency bin in [`reconstruct_rir`].
#[derive(Debug, Clone, PartialEq)]
pub enum BinStatus {
    Reconstructed,
    /// Above the configured frequency limit; zeroed.
    OutOfBand,
    /// Solver failed; zeroed and flagged.
    Failed(String),
}

/// Per-bin reconstruction settings.
#[derive(Debug, Clone)]
pub struct RirReconstructionConfig {
    /// Bins above this frequency are zeroed (default 4 kHz).
    pub f_max: f64,
}

impl Default for RirReconstructionConfig {
    fn default() -> Self {
        RirReconstructionConfig { f_max: 4000.0 }
    }
}

/// Reconstructs RIRs at `target_positions` from measured RIRs: every
/// in-band bin is reconstructed independently through `reconstructor`, and
/// the time signals are assembled by the inverse transform with conjugate
/// symmetry (DC and Nyquist real). Failed bins are zeroed and flagged.
pub fn reconstruct_rir(
    measured: &RirDataset,
    reconstructor: &dyn FieldReconstructor,
    target_positions: &[Position3],
    config: &RirReconstructionConfig,
) -> Result<(RirDataset, Vec<BinStatus>)> {
    if target_positions.is_empty() {
        return Err(Error::invalid("no target positions"));
    }
    let t = measured.num_samples();
    let nfft = transform_length(t);
    let all_freqs = all_bin_frequencies(t, measured.fs);
    let stack = rir_to_spectra(measured, &all_freqs)?;

    let results: Vec<(Vec<Complex64>, BinStatus)> = stack
        .fields
        .par_iter()
        .map(|bin_field| {
            let f = bin_field.frequency;
            if f > config.f_max {
                return (vec![Complex64::new(0.0, 0.0); target_positions.len()], BinStatus::OutOfBand);
            }
            match reconstructor.reconstruct(bin_field, target_positions) {
                Ok(est) => (est.values.to_vec(), BinStatus::Reconstructed),
                Err(e) => {
                    (vec![Complex64::new(0.0, 0.0); target_positions.len()], BinStatus::Failed(e.to_string()))
                }
            }
        })
        .collect();

    let statuses: Vec<BinStatus> = results.iter().map(|(_, s)| s.clone()).collect();
    let fields: Result<Vec<PressureField>> = results
        .into_iter()
        .zip(&all_freqs)
        .map(|((values, _), &f)| {
            PressureField::new(ndarray::Array1::from_vec(values), target_positions.to_vec(), f)
        })
        .collect();
    let est_stack =
        SpectralStack { frequencies: all_freqs, fields: fields?, nfft, fs: measured.fs };
    let rirs = spectra_to_rir(&est_stack, t)?;
    Ok((rirs, statuses))
}

/// Presentation helper: scales an RIR to a maximum amplitude of 1 and turns
/// an FRF into dB relative to its maximum (reference 1 -> 0 dB).
pub fn normalize_for_display(rir: &[f64], frf: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let peak = rir.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    if peak == 0.0 {
        return Err(Error::invalid("cannot normalize a zero RIR"));
    }
    let fmax = frf.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if fmax == 0.0 {
        return Err(Error::invalid("cannot normalize a zero FRF"));
    }
    let rir_out = rir.iter().map(|v| v / peak).collect();
    let frf_out = frf.iter().map(|v| 20.0 * (v.norm() / fmax).log10()).collect();
    Ok((rir_out, frf_out))
}

/// Sample format for WAV export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Pcm32,
    Float32,
}

/// Writes the dataset as a multichannel little-endian WAV file (one channel
/// per measurement position). Samples are interleaved; PCM formats clip at
/// full scale.
pub fn write_wav(path: &std::path::Path, dataset: &RirDataset, format: WavFormat) -> Result<()> {
    use std::io::Write;
    let channels = dataset.len() as u32;
    let t = dataset.num_samples();
    let fs = dataset.fs.round() as u32;
    let (bits, fmt_tag): (u16, u16) = match format {
        WavFormat::Pcm16 => (16, 1),
        WavFormat::Pcm32 => (32, 1),
        WavFormat::Float32 => (32, 3),
    };
    let block_align = channels as u16 * bits / 8;
    let byte_rate = fs * block_align as u32;
    let data_len = (t as u32) * block_align as u32;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&fmt_tag.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&fs.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for ti in 0..t {
        for ch in 0..dataset.len() {
            let v = dataset.impulse_responses[[ch, ti]];
            match format {
                WavFormat::Pcm16 => {
                    let s = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                    out.extend_from_slice(&s.to_le_bytes());
                }
                WavFormat::Pcm32 => {
                    let s = (v.clamp(-1.0, 1.0) * 2147483647.0).round() as i32;
                    out.extend_from_slice(&s.to_le_bytes());
                }
                WavFormat::Float32 => {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn impulse_dataset(m: usize, t: usize, fs: f64) -> RirDataset {
        let positions: Vec<Position3> =
            (0..m).map(|i| Position3::new(i as f64 * 0.05, 0.0, 0.0)).collect();
        let mut rirs = Array2::zeros((m, t));
        for ch in 0..m {
            rirs[[ch, 0]] = 1.0;
        }
        RirDataset::new(positions, rirs, fs).unwrap()
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let ds = impulse_dataset(2, 64, 8000.0);
        let freqs = all_bin_frequencies(64, 8000.0);
        let stack = rir_to_spectra(&ds, &freqs).unwrap();
        for field in &stack.fields {
            for v in field.values.iter() {
                assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
                assert!(v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_energy_confined_to_its_bin() {
        let t = 128;
        let fs = 8000.0;
        let nfft = transform_length(t);
        assert_eq!(nfft, 128);
        let bin = 16;
        let f0 = bin as f64 * fs / nfft as f64;
        let positions = vec![Position3::new(0.0, 0.0, 0.0)];
        let mut rirs = Array2::zeros((1, t));
        for ti in 0..t {
            rirs[[0, ti]] = (2.0 * PI * f0 * ti as f64 / fs).cos();
        }
        let ds = RirDataset::new(positions, rirs, fs).unwrap();
        let freqs = all_bin_frequencies(t, fs);
        let stack = rir_to_spectra(&ds, &freqs).unwrap();
        for (k, field) in stack.fields.iter().enumerate() {
            let mag = field.values[0].norm();
            if k == bin {
                assert_relative_eq!(mag, t as f64 / 2.0, epsilon = 1e-9);
            } else {
                assert!(mag < 1e-10, "bin {k} magnitude {mag}");
            }
        }
    }

    #[test]
    fn off_grid_frequency_is_rejected_with_neighbors() {
        let ds = impulse_dataset(1, 64, 8000.0);
        let err = rir_to_spectra(&ds, &[131.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not on the transform bin grid"), "{msg}");
        assert!(msg.contains("125"), "{msg}");
    }

    #[test]
    fn round_trip_is_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = 3;
        let t = 100; // not a power of two: exercises zero padding
        let positions: Vec<Position3> =
            (0..m).map(|i| Position3::new(0.1 * i as f64, 0.0, 0.0)).collect();
        let mut rirs = Array2::zeros((m, t));
        for ch in 0..m {
            for ti in 0..t {
                rirs[[ch, ti]] = rng.gen_range(-1.0..1.0);
            }
        }
        let ds = RirDataset::new(positions, rirs, 8000.0).unwrap();
        let freqs = all_bin_frequencies(t, ds.fs);
        let stack = rir_to_spectra(&ds, &freqs).unwrap();
        let back = spectra_to_rir(&stack, t).unwrap();
        for ch in 0..m {
            for ti in 0..t {
                assert!(
                    (back.impulse_responses[[ch, ti]] - ds.impulse_responses[[ch, ti]]).abs()
                        < 1e-10
                );
            }
        }
    }

    #[test]
    fn resample_identity_and_ratio() {
        let ds = impulse_dataset(2, 441, 44100.0);
        let same = resample(&ds, 44100.0).unwrap();
        for ch in 0..2 {
            for t in 0..441 {
                assert!(
                    (same.impulse_responses[[ch, t]] - ds.impulse_responses[[ch, t]]).abs()
                        < 1e-10
                );
            }
        }
        let down = resample(&ds, 8000.0).unwrap();
        assert_eq!(down.fs, 8000.0);
        assert_eq!(down.num_samples(), 80); // 441 * 8000 / 44100 = 80
    }

    #[test]
    fn resample_preserves_sine_amplitude() {
        // 1 kHz sine, periodic in the window (4800 samples at 48 kHz = 100
        // cycles), resampled to 8 kHz.
        let fs = 48000.0;
        let t = 4800;
        let f0 = 1000.0;
        let positions = vec![Position3::new(0.0, 0.0, 0.0)];
        let mut rirs = Array2::zeros((1, t));
        for ti in 0..t {
            rirs[[0, ti]] = (2.0 * PI * f0 * ti as f64 / fs).sin();
        }
        let ds = RirDataset::new(positions, rirs, fs).unwrap();
        let down = resample(&ds, 8000.0).unwrap();
        assert_eq!(down.num_samples(), 800);
        let peak = down
            .impulse_responses
            .row(0)
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn normalize_for_display_contract() {
        let rir = vec![0.1, -0.5, 0.25];
        let frf = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)];
        let (nr, nf) = normalize_for_display(&rir, &frf).unwrap();
        assert_relative_eq!(nr.iter().map(|v| v.abs()).fold(0.0f64, f64::max), 1.0);
        assert_relative_eq!(nf[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(nf[1], 20.0 * (0.5f64).log10(), epsilon = 1e-12);
        // Scale invariance of the output.
        let doubled: Vec<f64> = rir.iter().map(|v| v * 2.0).collect();
        let (nr2, _) = normalize_for_display(&doubled, &frf).unwrap();
        for (a, b) in nr.iter().zip(&nr2) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert!(normalize_for_display(&[0.0], &frf).is_err());
    }

    #[test]
    fn wav_writer_emits_valid_header() {
        let ds = impulse_dataset(2, 16, 8000.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.wav");
        write_wav(&path, &ds, WavFormat::Float32).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        assert_eq!(u16::from_le_bytes([bytes[22], bytes[23]]), 2); // channels
        assert_eq!(u32::from_le_bytes([bytes[24], bytes[25], bytes[26], bytes[27]]), 8000);
        assert_eq!(bytes.len(), 44 + 16 * 2 * 4);
        // First interleaved frame: impulse on both channels.
        let v0 = f32::from_le_bytes([bytes[44], bytes[45], bytes[46], bytes[47]]);
        assert_eq!(v0, 1.0);
    }
}
