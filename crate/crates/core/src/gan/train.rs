//! Adversarial training of the plane-wave generator on synthetic
//! random-wave fields.
//!
//! Each iteration draws a fresh batch of random-wave fields with matching
//! per-sample dictionaries, forms fakes `v = H_g · G(z)` reshaped to
//! 2-channel planar maps, updates the discriminator on the RaGAN objective,
//! then updates the generator through the differentiable chain including
//! `H_g`. Training runs in single precision; all data generation happens in
//! double precision and is cast at the boundary.
//!
//! Every random draw derives its seed from the config seed, the iteration
//! and the batch index, so runs are reproducible and batch generation can be
//! parallelized without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sample_directions, wavenumber, DirectionSet, Grid2D, SamplingScheme};
use crate::gan::loss::ragan_with_grads;
use crate::gan::mmd::mmd;
use crate::gan::net::{DiscArch, Discriminator, GenArch, GenCache, GenGrads, Generator};
use crate::io::{ArrayData, Container};
use crate::nn::{AdamParams, AdamState, FeatureBatch, Scalar, SnMode};
use crate::seeding::derive_seed;
use crate::synth::{random_wave_field, RandomWaveConfig};

const TAG_Z: u64 = 1;
const TAG_FREQ: u64 = 2;
const TAG_FIELD: u64 = 3;
const TAG_DIRS: u64 = 4;
const TAG_MMD_REF: u64 = 5;
const TAG_MMD_GEN: u64 = 6;

/// Hyperparameters of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta_d: f64,
    pub eta_g: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Evaluate MMD every this many iterations (0 disables).
    pub mmd_interval: usize,
    /// Samples per side in each MMD evaluation.
    pub mmd_batch: usize,
    pub wave: RandomWaveConfig,
    pub gen_arch: GenArch,
    pub disc_arch: DiscArch,
}

impl TrainConfig {
    /// Paper-scale defaults on the standard aperture: η = 2·10⁻⁴, batch 32,
    /// full architectures. The iteration count is the caller's choice.
    pub fn full(iterations: usize, seed: u64) -> Result<Self> {
        Ok(TrainConfig {
            eta_d: 2e-4,
            eta_g: 2e-4,
            batch_size: 32,
            iterations,
            seed,
            mmd_interval: 100,
            mmd_batch: 256,
            wave: RandomWaveConfig::default_aperture()?,
            gen_arch: GenArch::full(),
            disc_arch: DiscArch::full(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.wave.validate()?;
        self.gen_arch.validate()?;
        self.disc_arch.validate()?;
        if !(self.eta_d > 0.0) || !(self.eta_g > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.wave.dictionary_size != self.gen_arch.output_coeffs() {
            return Err(Error::invalid(format!(
                "dictionary size {} must match generator output {}",
                self.wave.dictionary_size,
                self.gen_arch.output_coeffs()
            )));
        }
        let grid = &self.wave.grid;
        if grid.nx() != self.disc_arch.input_spatial || grid.ny() != self.disc_arch.input_spatial {
            return Err(Error::invalid(format!(
                "grid {}×{} must match discriminator input {0}×{0}",
                grid.nx(),
                grid.ny()
            )));
        }
        if self.mmd_interval > 0 && self.mmd_batch < 2 {
            return Err(Error::invalid("mmd_batch must be >= 2"));
        }
        Ok(())
    }
}

/// One training dictionary stored transposed (directions × positions) in
/// real/imaginary planes, so projection and its adjoint stream contiguous
/// rows.
#[derive(Debug, Clone)]
pub struct TrainDict<S> {
    pub n_atoms: usize,
    pub m_points: usize,
    ht_re: Vec<S>,
    ht_im: Vec<S>,
}

impl<S: Scalar> TrainDict<S> {
    /// Builds `H[m, n] = exp(j k d_n · r_m)` over a grid. Phases factorize
    /// along the lattice axes, `e(ix, iy) = E0 · Ax^ix · Ay^iy`, so each row
    /// is an outer product of two short power tables; the inner loop is
    /// dependency-free and vectorizes.
    pub fn build(grid: &Grid2D, k: f64, directions: &DirectionSet) -> Self {
        let m = grid.len();
        let n = directions.len();
        let (nx, ny) = (grid.nx(), grid.ny());
        let (u, v) = grid.axes();
        let origin = grid.origin();
        let s = grid.spacing();
        let mut ht_re = vec![S::ZERO; n * m];
        let mut ht_im = vec![S::ZERO; n * m];
        let mut px_re = vec![0.0f64; nx];
        let mut px_im = vec![0.0f64; nx];
        for (row, d) in directions.directions().iter().enumerate() {
            let phase0 = k * origin.dot3(*d);
            let dpx = k * s * (d[0] * u[0] + d[1] * u[1] + d[2] * u[2]);
            let dpy = k * s * (d[0] * v[0] + d[1] * v[1] + d[2] * v[2]);
            let (ax_im, ax_re) = dpx.sin_cos();
            let (ay_im, ay_re) = dpy.sin_cos();
            let (e0_im, e0_re) = phase0.sin_cos();
            // Power table along x.
            let (mut pr, mut pi) = (1.0f64, 0.0f64);
            for ix in 0..nx {
                px_re[ix] = pr;
                px_im[ix] = pi;
                let nr = pr * ax_re - pi * ax_im;
                pi = pr * ax_im + pi * ax_re;
                pr = nr;
            }
            let re = &mut ht_re[row * m..(row + 1) * m];
            let im = &mut ht_im[row * m..(row + 1) * m];
            let (mut rf_re, mut rf_im) = (e0_re, e0_im);
            for iy in 0..ny {
                let base = iy * nx;
                let re_row = &mut re[base..base + nx];
                let im_row = &mut im[base..base + nx];
                for (((dst_re, dst_im), &pxr), &pxi) in
                    re_row.iter_mut().zip(im_row.iter_mut()).zip(&px_re).zip(&px_im)
                {
                    *dst_re = S::from_f64(rf_re * pxr - rf_im * pxi);
                    *dst_im = S::from_f64(rf_re * pxi + rf_im * pxr);
                }
                let nr = rf_re * ay_re - rf_im * ay_im;
                rf_im = rf_re * ay_im + rf_im * ay_re;
                rf_re = nr;
            }
        }
        TrainDict { n_atoms: n, m_points: m, ht_re, ht_im }
    }

    /// `field = H q` for one coefficient vector.
    pub fn project(&self, q_re: &[S], q_im: &[S], f_re: &mut [S], f_im: &mut [S]) {
        assert_eq!(q_re.len(), self.n_atoms);
        assert_eq!(f_re.len(), self.m_points);
        for v in f_re.iter_mut() {
            *v = S::ZERO;
        }
        for v in f_im.iter_mut() {
            *v = S::ZERO;
        }
        for nn in 0..self.n_atoms {
            let (qr, qi) = (q_re[nn], q_im[nn]);
            let hr = &self.ht_re[nn * self.m_points..(nn + 1) * self.m_points];
            let hi = &self.ht_im[nn * self.m_points..(nn + 1) * self.m_points];
            for m in 0..self.m_points {
                f_re[m] += qr * hr[m] - qi * hi[m];
                f_im[m] += qr * hi[m] + qi * hr[m];
            }
        }
    }

    /// `grad_q = H^H g`, the adjoint of [`TrainDict::project`].
    pub fn adjoint(&self, g_re: &[S], g_im: &[S], q_re: &mut [S], q_im: &mut [S]) {
        assert_eq!(g_re.len(), self.m_points);
        assert_eq!(q_re.len(), self.n_atoms);
        for nn in 0..self.n_atoms {
            let hr = &self.ht_re[nn * self.m_points..(nn + 1) * self.m_points];
            let hi = &self.ht_im[nn * self.m_points..(nn + 1) * self.m_points];
            let mut acc_re = S::ZERO;
            let mut acc_im = S::ZERO;
            for m in 0..self.m_points {
                acc_re += hr[m] * g_re[m] + hi[m] * g_im[m];
                acc_im += hr[m] * g_im[m] - hi[m] * g_re[m];
            }
            q_re[nn] = acc_re;
            q_im[nn] = acc_im;
        }
    }
}

/// One training batch: real fields as a 2-channel map batch plus the
/// per-sample dictionaries at matching wavenumbers.
pub struct TrainBatch<S> {
    pub real: FeatureBatch<S>,
    pub dicts: Vec<TrainDict<S>>,
    pub frequencies: Vec<f64>,
}

/// Generates the batch for one iteration; per-item seeds derive from
/// `(seed, iteration, index)`.
pub fn build_train_batch<S: Scalar>(
    cfg: &TrainConfig,
    iteration: usize,
    batch_size: usize,
) -> Result<TrainBatch<S>> {
    let it = iteration as u64;
    let (lo, hi) = cfg.wave.freq_range;
    let mut freq_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[TAG_FREQ, it]));
    let frequencies: Vec<f64> = (0..batch_size).map(|_| freq_rng.gen_range(lo..=hi)).collect();
    let grid = &cfg.wave.grid;
    let m = grid.len();
    let items: Result<Vec<(Vec<num_complex::Complex<f64>>, TrainDict<S>)>> = frequencies
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let field =
                random_wave_field(&cfg.wave, f, derive_seed(cfg.seed, &[TAG_FIELD, it, i as u64]))?;
            let dirs = sample_directions(
                cfg.wave.dictionary_size,
                SamplingScheme::UniformRandom,
                derive_seed(cfg.seed, &[TAG_DIRS, it, i as u64]),
            )?;
            let k = wavenumber(f, cfg.wave.speed_of_sound)?;
            let dict = TrainDict::build(grid, k, &dirs);
            Ok((field.values.to_vec(), dict))
        })
        .collect();
    let items = items?;
    let mut real = FeatureBatch::zeros(2, batch_size, grid.ny(), grid.nx());
    let mut dicts = Vec::with_capacity(batch_size);
    for (b, (values, dict)) in items.into_iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            real.data[b * m + i] = S::from_f64(v.re);
            real.data[(batch_size + b) * m + i] = S::from_f64(v.im);
        }
        dicts.push(dict);
    }
    Ok(TrainBatch { real, dicts, frequencies })
}

/// Draws a latent batch `z ~ N(0, I)` as a `(latent × B)` 1×1 map.
pub fn sample_latents<S: Scalar>(latent_dim: usize, batch: usize, seed: u64) -> FeatureBatch<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = FeatureBatch::zeros(latent_dim, batch, 1, 1);
    // Drawn sample-major so one latent vector is contiguous in draw order.
    for b in 0..batch {
        for c in 0..latent_dim {
            let v: f64 = StandardNormal.sample(&mut rng);
            z.data[c * batch + b] = S::from_f64(v);
        }
    }
    z
}

/// Generator fakes for one batch: coefficients, their projected fields, and
/// the forward cache for the later backward pass.
pub struct FakeBatch<S> {
    pub coeffs: FeatureBatch<S>,
    pub fields: FeatureBatch<S>,
    pub cache: GenCache<S>,
}

/// Runs the generator and projects each sample's coefficients through its
/// dictionary: `v_b = H_b G(z)_b` arranged as 2-channel planar maps.
pub fn generator_fakes<S: Scalar>(
    gen: &Generator<S>,
    dicts: &[TrainDict<S>],
    z: &FeatureBatch<S>,
    grid_h: usize,
    grid_w: usize,
) -> FakeBatch<S> {
    let batch = z.batch;
    assert_eq!(dicts.len(), batch);
    let (coeffs, cache) = gen.forward_batch(z);
    let n = coeffs.spatial();
    let m = grid_h * grid_w;
    let per_sample: Vec<(Vec<S>, Vec<S>)> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let q_re = &coeffs.data[b * n..(b + 1) * n];
            let q_im = &coeffs.data[(batch + b) * n..(batch + b + 1) * n];
            let mut f_re = vec![S::ZERO; m];
            let mut f_im = vec![S::ZERO; m];
            dicts[b].project(q_re, q_im, &mut f_re, &mut f_im);
            (f_re, f_im)
        })
        .collect();
    let mut fields = FeatureBatch::zeros(2, batch, grid_h, grid_w);
    for (b, (f_re, f_im)) in per_sample.into_iter().enumerate() {
        fields.data[b * m..(b + 1) * m].copy_from_slice(&f_re);
        fields.data[(batch + b) * m..(batch + b + 1) * m].copy_from_slice(&f_im);
    }
    FakeBatch { coeffs, fields, cache }
}

/// Adjoint of the fake construction: maps field gradients back to
/// coefficient gradients per sample.
pub fn fake_field_grad_to_coeffs<S: Scalar>(
    dicts: &[TrainDict<S>],
    grad_fields: &FeatureBatch<S>,
    n_coeffs: usize,
    coeff_spatial: usize,
) -> FeatureBatch<S> {
    let batch = grad_fields.batch;
    let m = grad_fields.spatial();
    let per_sample: Vec<(Vec<S>, Vec<S>)> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let g_re = &grad_fields.data[b * m..(b + 1) * m];
            let g_im = &grad_fields.data[(batch + b) * m..(batch + b + 1) * m];
            let mut q_re = vec![S::ZERO; n_coeffs];
            let mut q_im = vec![S::ZERO; n_coeffs];
            dicts[b].adjoint(g_re, g_im, &mut q_re, &mut q_im);
            (q_re, q_im)
        })
        .collect();
    let mut out = FeatureBatch::zeros(2, batch, coeff_spatial, coeff_spatial);
    for (b, (q_re, q_im)) in per_sample.into_iter().enumerate() {
        out.data[b * n_coeffs..(b + 1) * n_coeffs].copy_from_slice(&q_re);
        out.data[(batch + b) * n_coeffs..(batch + b + 1) * n_coeffs].copy_from_slice(&q_im);
    }
    out
}

fn concat_batches<S: Scalar>(a: &FeatureBatch<S>, b: &FeatureBatch<S>) -> FeatureBatch<S> {
    assert_eq!(a.channels, b.channels);
    assert_eq!(a.spatial(), b.spatial());
    let m = a.spatial();
    let batch = a.batch + b.batch;
    let mut out = FeatureBatch::zeros(a.channels, batch, a.height, a.width);
    for c in 0..a.channels {
        out.data[c * batch * m..c * batch * m + a.batch * m]
            .copy_from_slice(&a.data[c * a.batch * m..(c + 1) * a.batch * m]);
        out.data[c * batch * m + a.batch * m..(c + 1) * batch * m]
            .copy_from_slice(&b.data[c * b.batch * m..(c + 1) * b.batch * m]);
    }
    out
}

fn split_grad_fake<S: Scalar>(grad: &FeatureBatch<S>, n_real: usize) -> FeatureBatch<S> {
    let m = grad.spatial();
    let batch = grad.batch;
    let n_fake = batch - n_real;
    let mut out = FeatureBatch::zeros(grad.channels, n_fake, grad.height, grad.width);
    for c in 0..grad.channels {
        out.data[c * n_fake * m..(c + 1) * n_fake * m].copy_from_slice(
            &grad.data[c * batch * m + n_real * m..(c + 1) * batch * m],
        );
    }
    out
}

/// The generator objective `J_G` and its parameter gradients for a given
/// batch, through the full differentiable chain
/// `z → G → H_g → D → RaGAN`. With `SnMode::Frozen` this is a deterministic
/// differentiable function of the generator weights, which is what the
/// finite-difference gradient checks probe.
pub fn generator_loss_and_grads<S: Scalar>(
    gen: &Generator<S>,
    disc: &mut Discriminator<S>,
    dicts: &[TrainDict<S>],
    real: &FeatureBatch<S>,
    z: &FeatureBatch<S>,
    mode: SnMode,
) -> Result<(f64, GenGrads<S>)> {
    let batch = real.batch;
    let fake = generator_fakes(gen, dicts, z, real.height, real.width);
    let x = concat_batches(real, &fake.fields);
    let (logits, dcache) = disc.forward_batch(&x, mode);
    let real_logits: Vec<f64> = logits[..batch].iter().map(|v| v.to_f64()).collect();
    let fake_logits: Vec<f64> = logits[batch..].iter().map(|v| v.to_f64()).collect();
    let rg = ragan_with_grads(&real_logits, &fake_logits)?;
    let mut grad_logits = vec![S::ZERO; logits.len()];
    for (i, g) in rg.d_jg_fake.iter().enumerate() {
        grad_logits[batch + i] = S::from_f64(*g);
    }
    let (_, grad_input) = disc.backward_batch(&dcache, &grad_logits);
    let grad_fake_fields = split_grad_fake(&grad_input, batch);
    let n = gen.arch.output_coeffs();
    let s = gen.arch.spatial_sizes().last().copied().unwrap();
    let grad_coeffs = fake_field_grad_to_coeffs(dicts, &grad_fake_fields, n, s);
    let (ggrads, _) = gen.backward_batch(&fake.cache, &grad_coeffs);
    Ok((rg.j_g, ggrads))
}

/// Per-tensor Adam over a whole network.
struct NetOptimizer<S> {
    states: Vec<AdamState<S>>,
    hp: AdamParams,
}

impl<S: Scalar> NetOptimizer<S> {
    fn new(tensors: &[&mut Vec<S>], hp: AdamParams) -> Self {
        NetOptimizer { states: tensors.iter().map(|t| AdamState::new(t.len())).collect(), hp }
    }

    fn step(&mut self, tensors: Vec<&mut Vec<S>>, grads: Vec<&[S]>) {
        assert_eq!(tensors.len(), self.states.len());
        assert_eq!(grads.len(), self.states.len());
        for ((t, g), st) in tensors.into_iter().zip(grads).zip(&mut self.states) {
            st.step(t, g, &self.hp);
        }
    }
}

/// Loss values of one iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub j_d: f64,
    pub j_g: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub iterations: Vec<IterRecord>,
    /// `(iteration, unbiased MMD²)` at each evaluation point.
    pub mmd: Vec<(usize, f64)>,
}

pub struct TrainOutput {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub trace: TrainTrace,
    /// Set when training stopped early on a non-finite loss; the trace up to
    /// that point is preserved.
    pub diverged_at: Option<usize>,
}

/// Flattens one field (re/im planes) for the MMD.
fn flatten_field_f64(values: &[num_complex::Complex<f64>]) -> Vec<f64> {
    let mut v = Vec::with_capacity(values.len() * 2);
    v.extend(values.iter().map(|c| c.re));
    v.extend(values.iter().map(|c| c.im));
    v
}

/// Unbiased MMD² between fresh random-wave fields and generator samples at
/// the current weights. Generation is chunked to bound dictionary memory.
pub fn evaluate_mmd(gen: &Generator<f32>, cfg: &TrainConfig, iteration: usize) -> Result<f64> {
    let it = iteration as u64;
    let (lo, hi) = cfg.wave.freq_range;
    let n_samples = cfg.mmd_batch;
    // Reference set.
    let reference: Result<Vec<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.seed,
                &[TAG_MMD_REF, it, i as u64, 0],
            ));
            let f = rng.gen_range(lo..=hi);
            let field =
                random_wave_field(&cfg.wave, f, derive_seed(cfg.seed, &[TAG_MMD_REF, it, i as u64, 1]))?;
            Ok(flatten_field_f64(field.values.as_slice().unwrap()))
        })
        .collect();
    let reference = reference?;

    // Generated set, in training-batch-sized chunks.
    let chunk = cfg.batch_size.max(1);
    let grid = &cfg.wave.grid;
    let m = grid.len();
    let mut generated: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    let mut produced = 0usize;
    let mut chunk_idx = 0u64;
    while produced < n_samples {
        let b = chunk.min(n_samples - produced);
        let mut freq_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            &[TAG_MMD_GEN, it, chunk_idx, 0],
        ));
        let freqs: Vec<f64> = (0..b).map(|_| freq_rng.gen_range(lo..=hi)).collect();
        let dicts: Result<Vec<TrainDict<f32>>> = freqs
            .par_iter()
            .enumerate()
            .map(|(i, &f)| {
                let dirs = sample_directions(
                    cfg.wave.dictionary_size,
                    SamplingScheme::UniformRandom,
                    derive_seed(cfg.seed, &[TAG_MMD_GEN, it, chunk_idx, 1, i as u64]),
                )?;
                let k = wavenumber(f, cfg.wave.speed_of_sound)?;
                Ok(TrainDict::build(grid, k, &dirs))
            })
            .collect();
        let dicts = dicts?;
        let z = sample_latents::<f32>(
            cfg.gen_arch.latent_dim,
            b,
            derive_seed(cfg.seed, &[TAG_MMD_GEN, it, chunk_idx, 2]),
        );
        let fake = generator_fakes(gen, &dicts, &z, grid.ny(), grid.nx());
        for s in 0..b {
            let mut v = Vec::with_capacity(2 * m);
            v.extend(fake.fields.data[s * m..(s + 1) * m].iter().map(|x| *x as f64));
            v.extend(fake.fields.data[(b + s) * m..(b + s + 1) * m].iter().map(|x| *x as f64));
            generated.push(v);
        }
        produced += b;
        chunk_idx += 1;
    }
    mmd(&reference, &generated)
}

/// Trains the GAN per the configured protocol. Alternates one discriminator
/// and one generator Adam step per iteration on shared fakes; records losses
/// every iteration and MMD at the configured interval. Returns the trained
/// networks and the trace; a non-finite loss aborts early with the trace
/// preserved and `diverged_at` set.
pub fn train_gan(cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut gen = Generator::<f32>::new(cfg.gen_arch.clone(), derive_seed(cfg.seed, &[10]))?;
    let mut disc = Discriminator::<f32>::new(cfg.disc_arch.clone(), derive_seed(cfg.seed, &[11]))?;
    let mut g_opt = NetOptimizer::new(&gen.param_tensors_mut(), AdamParams::gan(cfg.eta_g));
    let mut d_opt = NetOptimizer::new(&disc.param_tensors_mut(), AdamParams::gan(cfg.eta_d));

    let grid_h = cfg.wave.grid.ny();
    let grid_w = cfg.wave.grid.nx();
    let n = cfg.gen_arch.output_coeffs();
    let s_out = *cfg.gen_arch.spatial_sizes().last().unwrap();

    let mut trace = TrainTrace::default();
    let mut diverged_at = None;

    for iteration in 1..=cfg.iterations {
        let batch = build_train_batch::<f32>(cfg, iteration, cfg.batch_size)?;
        let z = sample_latents::<f32>(
            cfg.gen_arch.latent_dim,
            cfg.batch_size,
            derive_seed(cfg.seed, &[TAG_Z, iteration as u64]),
        );
        let fake = generator_fakes(&gen, &batch.dicts, &z, grid_h, grid_w);
        let x = concat_batches(&batch.real, &fake.fields);

        // Discriminator step (fakes detached).
        let (logits, dcache) = disc.forward_batch(&x, SnMode::Train);
        let real_logits: Vec<f64> = logits[..cfg.batch_size].iter().map(|v| v.to_f64()).collect();
        let fake_logits: Vec<f64> = logits[cfg.batch_size..].iter().map(|v| v.to_f64()).collect();
        let rg = ragan_with_grads(&real_logits, &fake_logits)?;
        let j_d = rg.j_d;
        let mut grad_logits = vec![0f32; logits.len()];
        for (i, g) in rg.d_jd_real.iter().enumerate() {
            grad_logits[i] = *g as f32;
        }
        for (i, g) in rg.d_jd_fake.iter().enumerate() {
            grad_logits[cfg.batch_size + i] = *g as f32;
        }
        let (dgrads, _) = disc.backward_batch(&dcache, &grad_logits);
        d_opt.step(disc.param_tensors_mut(), dgrads.tensors());

        // Generator step against the updated discriminator; the cached
        // generator activations are still valid (G has not changed).
        let (logits2, dcache2) = disc.forward_batch(&x, SnMode::Train);
        let real2: Vec<f64> = logits2[..cfg.batch_size].iter().map(|v| v.to_f64()).collect();
        let fake2: Vec<f64> = logits2[cfg.batch_size..].iter().map(|v| v.to_f64()).collect();
        let rg2 = ragan_with_grads(&real2, &fake2)?;
        let j_g = rg2.j_g;
        let mut grad_logits2 = vec![0f32; logits2.len()];
        for (i, g) in rg2.d_jg_fake.iter().enumerate() {
            grad_logits2[cfg.batch_size + i] = *g as f32;
        }
        let (_, grad_input) = disc.backward_batch(&dcache2, &grad_logits2);
        let grad_fake_fields = split_grad_fake(&grad_input, cfg.batch_size);
        let grad_coeffs = fake_field_grad_to_coeffs(&batch.dicts, &grad_fake_fields, n, s_out);
        let (ggrads, _) = gen.backward_batch(&fake.cache, &grad_coeffs);
        g_opt.step(gen.param_tensors_mut(), ggrads.tensors());

        trace.iterations.push(IterRecord { iteration, j_d, j_g });
        if !j_d.is_finite() || !j_g.is_finite() {
            diverged_at = Some(iteration);
            break;
        }
        if cfg.mmd_interval > 0 && iteration % cfg.mmd_interval == 0 {
            let v = evaluate_mmd(&gen, cfg, iteration)?;
            trace.mmd.push((iteration, v));
        }
    }

    Ok(TrainOutput { generator: gen, discriminator: disc, trace, diverged_at })
}

const CHECKPOINT_KIND: &str = "plane-wave-gan";

/// Serializes networks, spectral-norm state, and run metadata into a
/// container file. Round trips are bit-exact.
pub fn save_checkpoint(
    path: &std::path::Path,
    gen: &Generator<f32>,
    disc: &Discriminator<f32>,
    cfg: &TrainConfig,
    iteration: usize,
) -> Result<()> {
    let mut c = Container::new();
    let g_names = gen.param_names();
    let mut g_copy = gen.clone();
    for (name, tensor) in g_names.iter().zip(g_copy.param_tensors_mut()) {
        c.push(name.clone(), vec![tensor.len()], ArrayData::F32(tensor.clone()))?;
    }
    let d_names = disc.param_names();
    let mut d_copy = disc.clone();
    for (name, tensor) in d_names.iter().zip(d_copy.param_tensors_mut()) {
        c.push(name.clone(), vec![tensor.len()], ArrayData::F32(tensor.clone()))?;
    }
    for (i, sn) in disc.sn.iter().enumerate() {
        c.push(format!("d.conv{i}.sn_u"), vec![sn.u.len()], ArrayData::F32(sn.u.clone()))?;
        c.push(format!("d.conv{i}.sn_v"), vec![sn.v.len()], ArrayData::F32(sn.v.clone()))?;
    }
    c.set_metadata("kind", CHECKPOINT_KIND);
    c.set_metadata("iteration", iteration.to_string());
    c.set_metadata("seed", cfg.seed.to_string());
    c.set_metadata("gen_arch", serde_json::to_string(&cfg.gen_arch)?);
    c.set_metadata("disc_arch", serde_json::to_string(&cfg.disc_arch)?);
    c.set_metadata("train_config", serde_json::to_string(cfg)?);
    c.write(path)
}

pub struct Checkpoint {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub iteration: usize,
    pub seed: u64,
    pub config: Option<TrainConfig>,
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    let c = Container::read(path)?;
    if c.metadata.get("kind").map(String::as_str) != Some(CHECKPOINT_KIND) {
        return Err(Error::Format("not a plane-wave GAN checkpoint".to_string()));
    }
    let gen_arch: GenArch = serde_json::from_str(
        c.metadata.get("gen_arch").ok_or_else(|| Error::Format("missing gen_arch".into()))?,
    )?;
    let disc_arch: DiscArch = serde_json::from_str(
        c.metadata.get("disc_arch").ok_or_else(|| Error::Format("missing disc_arch".into()))?,
    )?;
    let mut gen = Generator::<f32>::new(gen_arch, 0)?;
    {
        let names = gen.param_names();
        for (name, tensor) in names.iter().zip(gen.param_tensors_mut()) {
            let (_, data) = c.get_f32(name)?;
            if data.len() != tensor.len() {
                return Err(Error::Format(format!(
                    "tensor '{name}': expected {} values, found {}",
                    tensor.len(),
                    data.len()
                )));
            }
            tensor.copy_from_slice(data);
        }
    }
    let mut disc = Discriminator::<f32>::new(disc_arch, 0)?;
    {
        let names = disc.param_names();
        for (name, tensor) in names.iter().zip(disc.param_tensors_mut()) {
            let (_, data) = c.get_f32(name)?;
            if data.len() != tensor.len() {
                return Err(Error::Format(format!(
                    "tensor '{name}': expected {} values, found {}",
                    tensor.len(),
                    data.len()
                )));
            }
            tensor.copy_from_slice(data);
        }
    }
    for (i, sn) in disc.sn.iter_mut().enumerate() {
        let (_, u) = c.get_f32(&format!("d.conv{i}.sn_u"))?;
        let (_, v) = c.get_f32(&format!("d.conv{i}.sn_v"))?;
        sn.u.copy_from_slice(u);
        sn.v.copy_from_slice(v);
    }
    let iteration = c
        .metadata
        .get("iteration")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("missing iteration".into()))?;
    let seed = c
        .metadata
        .get("seed")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("missing seed".into()))?;
    let config = c
        .metadata
        .get("train_config")
        .and_then(|s| serde_json::from_str(s).ok());
    Ok(Checkpoint { generator: gen, discriminator: disc, iteration, seed, config })
}
