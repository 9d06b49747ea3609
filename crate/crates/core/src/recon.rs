//! Reconstruction front-ends: each wraps a solver behind
//! [`FieldReconstructor`] so sweeps, the RIR pipeline and the CLI can
//! dispatch on a method tag. Dictionaries are built on demand from the
//! measurement frequency with a fixed direction seed, so inference is
//! reproducible.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    build_dictionary, sample_directions, wavenumber, Dictionary, Position3, PressureField,
    SamplingScheme, DEFAULT_SPEED_OF_SOUND,
};
use crate::gan::net::Generator;
use crate::invert::{reconstruct as invert_reconstruct, InversionConfig};
use crate::linalg::matvec_adjoint;
use crate::metrics::FieldReconstructor;
use crate::solve::{
    cross_validate_lambda, default_lambda_grid, lasso_solve, project_field, tikhonov_solve,
    RegularizationSpec, DEFAULT_CV_FOLDS,
};

/// Shared dictionary-construction settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconContext {
    pub speed_of_sound: f64,
    pub num_directions: usize,
    pub direction_scheme: SamplingScheme,
    /// Fixed seed: inference dictionaries are reproducible.
    pub direction_seed: u64,
}

impl Default for ReconContext {
    fn default() -> Self {
        ReconContext {
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            num_directions: 4096,
            direction_scheme: SamplingScheme::UniformRandom,
            direction_seed: 0,
        }
    }
}

impl ReconContext {
    /// Fit/target dictionary pair sharing one direction set at the
    /// measurement frequency's wavenumber.
    pub fn dictionaries(
        &self,
        measurements: &PressureField,
        targets: &[Position3],
    ) -> Result<(Dictionary, Dictionary)> {
        let k = wavenumber(measurements.frequency, self.speed_of_sound)?;
        let dirs = Arc::new(sample_directions(
            self.num_directions,
            self.direction_scheme,
            self.direction_seed,
        )?);
        let fit = build_dictionary(&measurements.positions, dirs.clone(), k)?;
        let target = build_dictionary(targets, dirs, k)?;
        Ok((fit, target))
    }
}

/// How the regularization weight is chosen per reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    /// `λ = factor · ‖H^H p‖_∞` (scales with the data).
    Relative(f64),
    /// 10-fold cross-validation over the default log grid.
    CrossValidated { folds: usize, seed: u64 },
}

impl LambdaChoice {
    pub fn cross_validated() -> Self {
        LambdaChoice::CrossValidated { folds: DEFAULT_CV_FOLDS, seed: 0 }
    }

    fn resolve(&self, dictionary: &Dictionary, pressure: &PressureField) -> Result<f64> {
        match self {
            LambdaChoice::Fixed(v) => Ok(*v),
            LambdaChoice::Relative(factor) => {
                let hp = matvec_adjoint(&dictionary.entries, &pressure.values);
                let scale = hp.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
                Ok(factor * scale)
            }
            LambdaChoice::CrossValidated { folds, seed } => {
                let grid = default_lambda_grid(dictionary, pressure);
                let (best, _) = cross_validate_lambda(dictionary, pressure, &grid, *folds, *seed)?;
                Ok(best)
            }
        }
    }
}

/// Closed-form Tikhonov reconstruction.
pub struct TikhonovReconstructor {
    pub context: ReconContext,
    pub lambda: LambdaChoice,
}

impl FieldReconstructor for TikhonovReconstructor {
    fn method_tag(&self) -> String {
        "tikhonov".to_string()
    }

    fn reconstruct(
        &self,
        measurements: &PressureField,
        targets: &[Position3],
    ) -> Result<PressureField> {
        let (fit, target) = self.context.dictionaries(measurements, targets)?;
        let lambda = self.lambda.resolve(&fit, measurements)?;
        let coeffs = tikhonov_solve(&fit, measurements, &RegularizationSpec::l2(lambda))?;
        let mut field = project_field(&target, &coeffs)?;
        field.frequency = measurements.frequency;
        Ok(field)
    }
}

/// ℓ1 (sparse) reconstruction by proximal gradient iteration.
pub struct LassoReconstructor {
    pub context: ReconContext,
    pub lambda: LambdaChoice,
    pub max_iters: usize,
    pub tol: f64,
}

impl FieldReconstructor for LassoReconstructor {
    fn method_tag(&self) -> String {
        "lasso".to_string()
    }

    fn reconstruct(
        &self,
        measurements: &PressureField,
        targets: &[Position3],
    ) -> Result<PressureField> {
        if matches!(self.lambda, LambdaChoice::CrossValidated { .. }) {
            return Err(Error::invalid(
                "cross-validated lambda selection is implemented for the Tikhonov path only",
            ));
        }
        let (fit, target) = self.context.dictionaries(measurements, targets)?;
        let lambda = self.lambda.resolve(&fit, measurements)?;
        let result =
            lasso_solve(&fit, measurements, &RegularizationSpec::l1(lambda), self.max_iters, self.tol)?;
        let mut field = project_field(&target, &result.coefficients)?;
        field.frequency = measurements.frequency;
        Ok(field)
    }
}

/// Two-stage latent inversion against a trained generator.
pub struct GenerativeReconstructor {
    pub context: ReconContext,
    pub generator: Generator<f64>,
    pub config: InversionConfig,
}

impl GenerativeReconstructor {
    pub fn new(generator: Generator<f64>, config: InversionConfig) -> Self {
        let mut context = ReconContext::default();
        context.num_directions = generator.arch.output_coeffs();
        GenerativeReconstructor { context, generator, config }
    }
}

impl FieldReconstructor for GenerativeReconstructor {
    fn method_tag(&self) -> String {
        "gan".to_string()
    }

    fn reconstruct(
        &self,
        measurements: &PressureField,
        targets: &[Position3],
    ) -> Result<PressureField> {
        if self.context.num_directions != self.generator.arch.output_coeffs() {
            return Err(Error::invalid(format!(
                "dictionary size {} must match generator output {}",
                self.context.num_directions,
                self.generator.arch.output_coeffs()
            )));
        }
        let (fit, target) = self.context.dictionaries(measurements, targets)?;
        let (field, _) =
            invert_reconstruct(&self.generator, &fit, &target, measurements, &self.config)?;
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use crate::metrics::{mic_count_sweep, nmse};
    use crate::synth::{apply_mask, random_wave_field, RandomWaveConfig};

    fn reference_field(nx: usize, frequency: f64) -> PressureField {
        let grid =
            Grid2D::axis_aligned(Position3::new(-0.2, -0.2, 0.0), 0.05, nx, nx).unwrap();
        let mut cfg = RandomWaveConfig::new(grid);
        cfg.waves_per_field = 32;
        cfg.snr_db = f64::INFINITY;
        random_wave_field(&cfg, frequency, 42).unwrap()
    }

    #[test]
    fn tikhonov_reconstructor_interpolates_well() {
        let full = reference_field(9, 500.0);
        let mask: Vec<usize> = (0..81).step_by(2).collect(); // 41 mics
        let measured = apply_mask(&full, &mask).unwrap();
        let recon = TikhonovReconstructor {
            context: ReconContext {
                num_directions: 256,
                direction_seed: 7,
                ..Default::default()
            },
            lambda: LambdaChoice::Relative(1e-6),
        };
        let est = recon.reconstruct(&measured, &full.positions).unwrap();
        assert_eq!(est.frequency, 500.0);
        let err = nmse(&full.values, &est.values).unwrap();
        assert!(err < -10.0, "NMSE {err} dB");
    }

    #[test]
    fn sweeps_use_the_trait() {
        let full = reference_field(7, 550.0);
        let recon = TikhonovReconstructor {
            context: ReconContext {
                num_directions: 128,
                direction_seed: 3,
                ..Default::default()
            },
            lambda: LambdaChoice::Relative(1e-4),
        };
        let reports = mic_count_sweep(&recon, &full, &[20, 30, 49], 11).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[2].mic_count, 49);
        assert_eq!(reports[0].method, "tikhonov");
        // Full-mask reconstruction is at least as good as the sparsest one.
        assert!(reports[2].nmse_db <= reports[0].nmse_db + 1e-9);
    }

    #[test]
    fn lasso_reconstructor_runs() {
        let full = reference_field(5, 700.0);
        let mask: Vec<usize> = (0..25).collect();
        let measured = apply_mask(&full, &mask).unwrap();
        let recon = LassoReconstructor {
            context: ReconContext {
                num_directions: 64,
                direction_seed: 5,
                ..Default::default()
            },
            lambda: LambdaChoice::Relative(1e-4),
            max_iters: 500,
            tol: 1e-10,
        };
        let est = recon.reconstruct(&measured, &full.positions).unwrap();
        let err = nmse(&full.values, &est.values).unwrap();
        assert!(err < -5.0, "NMSE {err} dB");
    }
}
