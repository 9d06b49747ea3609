//! Reconstruction quality metrics and sweep protocols.
//!
//! `NMSE = 10 log10(‖p − p̂‖² / ‖p‖²)`, the scale-invariant spatial
//! similarity `SS = |p^H p̂|² / ((p^H p)(p̂^H p̂))`, and Pearson correlation
//! for time-domain responses. Sweeps evaluate a reconstructor across
//! frequencies at a fixed microphone mask, or across microphone counts at a
//! fixed frequency.

use ndarray::Array1;
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Position3, PressureField};
use crate::rir::RirDataset;
use crate::seeding::derive_seed;
use crate::synth::apply_mask;

type Complex64 = Complex<f64>;

/// Reports below this are clamped: a perfect match maps to −300 dB instead
/// of −∞ so reports stay finite and sortable.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Normalized mean square error in dB.
pub fn nmse(reference: &Array1<Complex64>, estimate: &Array1<Complex64>) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "length mismatch: reference {} vs estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let denom: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if denom <= 0.0 {
        return Err(Error::invalid("nmse reference has zero norm"));
    }
    let num: f64 = reference.iter().zip(estimate.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let db = 10.0 * (num / denom).log10();
    Ok(db.max(NMSE_FLOOR_DB))
}

/// Spatial similarity (modal assurance criterion), in [0, 1] and invariant
/// to complex scaling of either argument.
pub fn spatial_similarity(reference: &Array1<Complex64>, estimate: &Array1<Complex64>) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "length mismatch: reference {} vs estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let pp: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    let qq: f64 = estimate.iter().map(|v| v.norm_sqr()).sum();
    if pp <= 0.0 || qq <= 0.0 {
        return Err(Error::invalid("spatial similarity is undefined for a zero vector"));
    }
    let cross: Complex64 =
        reference.iter().zip(estimate.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(cross.norm_sqr() / (pp * qq))
}

/// Pearson correlation coefficient of two real signals.
pub fn pearson_correlation(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() || reference.len() < 2 {
        return Err(Error::invalid("pearson correlation needs equal lengths >= 2"));
    }
    let n = reference.len() as f64;
    let mx = reference.iter().sum::<f64>() / n;
    let my = estimate.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in reference.iter().zip(estimate) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant signal has no correlation".to_string(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Per-channel Pearson correlation between matched RIR sets, averaged within
/// distance bins of width `bin_width` around `center`. Positions at distance
/// `d` fall in bin `⌊d / bin_width⌋`; empty bins are omitted.
///
/// Returns `(bin center distance, mean correlation)` pairs sorted by
/// distance.
pub fn distance_binned_correlation(
    rir_ref: &RirDataset,
    rir_est: &RirDataset,
    center: Position3,
    bin_width: f64,
) -> Result<Vec<(f64, f64)>> {
    if rir_ref.len() != rir_est.len() {
        return Err(Error::invalid("RIR sets must have matching channel counts"));
    }
    if !(bin_width > 0.0) {
        return Err(Error::invalid("bin width must be positive"));
    }
    for (a, b) in rir_ref.positions.iter().zip(&rir_est.positions) {
        if a.distance(b) > 1e-9 {
            return Err(Error::invalid("RIR sets must share their position sets"));
        }
    }
    let mut bins: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for (ch, pos) in rir_ref.positions.iter().enumerate() {
        let rho = pearson_correlation(
            rir_ref.impulse_responses.row(ch).as_slice().expect("contiguous"),
            rir_est.impulse_responses.row(ch).as_slice().expect("contiguous"),
        )?;
        let bin = (pos.distance(&center) / bin_width).floor() as usize;
        let e = bins.entry(bin).or_insert((0.0, 0));
        e.0 += rho;
        e.1 += 1;
    }
    Ok(bins
        .into_iter()
        .map(|(bin, (sum, count))| ((bin as f64 + 0.5) * bin_width, sum / count as f64))
        .collect())
}

/// One sweep point's quality summary.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub frequency: f64,
    pub mic_count: usize,
    pub method: String,
    pub nmse_db: f64,
    pub spatial_similarity: f64,
    pub mean_pearson: Option<f64>,
    pub seed: Option<u64>,
}

/// Anything that can estimate a field at target positions from sparse
/// measurements (the measurement field carries its frequency).
pub trait FieldReconstructor: Sync {
    fn method_tag(&self) -> String;
    fn reconstruct(
        &self,
        measurements: &PressureField,
        targets: &[Position3],
    ) -> Result<PressureField>;
}

/// Evaluates `reconstructor` across `frequencies` with a fixed measurement
/// mask. `reference` provides the ground-truth field over the full position
/// set at each frequency; metrics are computed against that full set.
pub fn frequency_sweep(
    reconstructor: &dyn FieldReconstructor,
    reference: &dyn Fn(f64) -> Result<PressureField>,
    frequencies: &[f64],
    fixed_mask: &[usize],
) -> Result<Vec<MetricsReport>> {
    let mut reports = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        let full = reference(f)?;
        let measured = apply_mask(&full, fixed_mask)?;
        let estimate = reconstructor.reconstruct(&measured, &full.positions)?;
        reports.push(MetricsReport {
            frequency: f,
            mic_count: fixed_mask.len(),
            method: reconstructor.method_tag(),
            nmse_db: nmse(&full.values, &estimate.values)?,
            spatial_similarity: spatial_similarity(&full.values, &estimate.values)?,
            mean_pearson: None,
            seed: None,
        });
    }
    Ok(reports)
}

/// Evaluates `reconstructor` at one frequency while sweeping the number of
/// microphones; each count draws a seeded random mask without replacement.
pub fn mic_count_sweep(
    reconstructor: &dyn FieldReconstructor,
    reference: &PressureField,
    counts: &[usize],
    seed: u64,
) -> Result<Vec<MetricsReport>> {
    let m = reference.len();
    let mut reports = Vec::with_capacity(counts.len());
    for &count in counts {
        if count == 0 || count > m {
            return Err(Error::invalid(format!("mic count {count} outside [1, {m}]")));
        }
        let mask_seed = derive_seed(seed, &[count as u64]);
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
        order.shuffle(&mut rng);
        let mut mask: Vec<usize> = order.into_iter().take(count).collect();
        mask.sort_unstable();
        let measured = apply_mask(reference, &mask)?;
        let estimate = reconstructor.reconstruct(&measured, &reference.positions)?;
        reports.push(MetricsReport {
            frequency: reference.frequency,
            mic_count: count,
            method: reconstructor.method_tag(),
            nmse_db: nmse(&reference.values, &estimate.values)?,
            spatial_similarity: spatial_similarity(&reference.values, &estimate.values)?,
            mean_pearson: None,
            seed: Some(mask_seed),
        });
    }
    Ok(reports)
}

/// Serializes reports as CSV with a mandatory header row, '.' decimal
/// separator and no locale.
pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("frequency_hz,mic_count,method,nmse_db,spatial_similarity,mean_pearson,seed\n");
    for r in reports {
        let pearson = r.mean_pearson.map(|v| format!("{v}")).unwrap_or_default();
        let seed = r.seed.map(|v| format!("{v}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.frequency, r.mic_count, r.method, r.nmse_db, r.spatial_similarity, pearson, seed
        ));
    }
    out
}
