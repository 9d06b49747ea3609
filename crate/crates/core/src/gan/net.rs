//! The plane-wave GAN architecture: a transposed-convolution generator
//! mapping a latent vector to complex plane-wave coefficients (two output
//! channels = real/imaginary parts), and a spectrally-normalized
//! convolutional discriminator scoring 2-channel planar sound fields.
//!
//! Forward passes hard-assert the expected spatial size chain; a mismatch is
//! an architecture bug, not a recoverable error.

use ndarray::Array1;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CoefficientVector;
use crate::nn::{
    leaky_relu_backward, leaky_relu_inplace, relu_backward, relu_inplace, Conv2dSame,
    ConvTranspose2d, FeatureBatch, InstanceNorm, Linear, Scalar, SnMode, SpectralNorm,
};
use crate::seeding::derive_seed;

type Complex64 = Complex<f64>;

/// Weight-initialization standard deviation (DCGAN convention).
const INIT_STD: f64 = 0.02;

/// Generator architecture: kernel-4 transposed convolutions, the first with
/// stride 1 from a 1×1 latent map, the rest stride 2/padding 1 (each doubles
/// the spatial size). Instance norm + ReLU on all but the last layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenArch {
    pub latent_dim: usize,
    /// Output channels per layer; the last entry must be 2 (re/im).
    pub channels: Vec<usize>,
    /// Spatial size after the first layer.
    pub base_spatial: usize,
}

impl GenArch {
    /// The full-size architecture: 128 → 4×4×1024 → 8×8×512 → 16×16×256 →
    /// 32×32×128 → 64×64×2, reshaped to 4096 complex coefficients.
    pub fn full() -> Self {
        GenArch { latent_dim: 128, channels: vec![1024, 512, 256, 128, 2], base_spatial: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.channels.len() < 2 || self.base_spatial == 0 {
            return Err(Error::invalid("degenerate generator architecture"));
        }
        if *self.channels.last().unwrap() != 2 {
            return Err(Error::invalid("generator must end in 2 channels (re, im)"));
        }
        Ok(())
    }

    /// Spatial size after each layer.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        (0..self.channels.len()).map(|i| self.base_spatial << i).collect()
    }

    /// Number of complex coefficients produced.
    pub fn output_coeffs(&self) -> usize {
        let s = self.base_spatial << (self.channels.len() - 1);
        s * s
    }
}

#[derive(Debug, Clone)]
pub struct Generator<S> {
    pub arch: GenArch,
    pub layers: Vec<ConvTranspose2d<S>>,
    pub norms: Vec<InstanceNorm<S>>,
}

/// Per-layer forward intermediates needed for backprop.
pub struct GenCache<S> {
    /// Input to each conv layer (post-activation of the previous one);
    /// `xs[0]` is the latent batch.
    xs: Vec<FeatureBatch<S>>,
    ct: Vec<crate::nn::conv::ConvTCache>,
    ins: Vec<crate::nn::norm::InCache<S>>,
}

/// Gradients for every generator tensor, in `param_tensors` order.
#[derive(Debug, Clone)]
pub struct GenGrads<S> {
    pub conv_weights: Vec<Vec<S>>,
    pub final_bias: Vec<S>,
    pub gammas: Vec<Vec<S>>,
    pub betas: Vec<Vec<S>>,
}

impl<S: Scalar> GenGrads<S> {
    pub fn zeros(gen: &Generator<S>) -> Self {
        GenGrads {
            conv_weights: gen.layers.iter().map(|l| vec![S::ZERO; l.weight.len()]).collect(),
            final_bias: vec![S::ZERO; 2],
            gammas: gen.norms.iter().map(|n| vec![S::ZERO; n.gamma.len()]).collect(),
            betas: gen.norms.iter().map(|n| vec![S::ZERO; n.beta.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GenGrads<S>) {
        let add = |a: &mut Vec<S>, b: &Vec<S>| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        };
        for (a, b) in self.conv_weights.iter_mut().zip(&other.conv_weights) {
            add(a, b);
        }
        add(&mut self.final_bias, &other.final_bias);
        for (a, b) in self.gammas.iter_mut().zip(&other.gammas) {
            add(a, b);
        }
        for (a, b) in self.betas.iter_mut().zip(&other.betas) {
            add(a, b);
        }
    }

    /// Tensor views in the same order as [`Generator::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::new();
        for w in &self.conv_weights {
            out.push(w);
        }
        out.push(&self.final_bias);
        for g in &self.gammas {
            out.push(g);
        }
        for b in &self.betas {
            out.push(b);
        }
        out
    }
}

impl<S: Scalar> Generator<S> {
    /// Fresh network with N(0, 0.02) weights, derived deterministically from
    /// `seed`.
    pub fn new(arch: GenArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut layers = Vec::with_capacity(arch.channels.len());
        let mut norms = Vec::with_capacity(arch.channels.len() - 1);
        let mut in_ch = arch.latent_dim;
        for (i, &out_ch) in arch.channels.iter().enumerate() {
            let last = i + 1 == arch.channels.len();
            // First layer: kernel = base_spatial, stride 1, no padding, so a
            // 1×1 latent map becomes base_spatial². Later layers double the
            // size (kernel 4, stride 2, padding 1).
            let (kernel, stride, padding) =
                if i == 0 { (arch.base_spatial, 1, 0) } else { (4, 2, 1) };
            let mut layer = ConvTranspose2d::new(in_ch, out_ch, kernel, stride, padding, last);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[20, i as u64]));
            for w in &mut layer.weight {
                *w = S::from_f64(normal.sample(&mut rng));
            }
            layers.push(layer);
            if !last {
                norms.push(InstanceNorm::new(out_ch));
            }
            in_ch = out_ch;
        }
        Ok(Generator { arch, layers, norms })
    }

    /// Batched forward. `z` is a `(latent_dim × B)` column batch entering as
    /// a 1×1 feature map; the output is the final 2-channel map whose
    /// spatial row-major flattening is the coefficient order.
    pub fn forward_batch(&self, z: &FeatureBatch<S>) -> (FeatureBatch<S>, GenCache<S>) {
        assert_eq!(z.channels, self.arch.latent_dim, "latent size");
        assert_eq!((z.height, z.width), (1, 1), "latent enters as a 1×1 map");
        let sizes = self.arch.spatial_sizes();
        let mut xs = Vec::with_capacity(self.layers.len());
        let mut ct = Vec::with_capacity(self.layers.len());
        let mut ins = Vec::with_capacity(self.norms.len());
        let mut x = z.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (mut y, cache) = layer.forward(&x);
            assert_eq!(y.height, sizes[i], "generator spatial chain at layer {i}");
            assert_eq!(y.width, sizes[i]);
            xs.push(x);
            ct.push(cache);
            if i + 1 < self.layers.len() {
                let (mut h, ic) = self.norms[i].forward(&y);
                relu_inplace(&mut h.data);
                ins.push(ic);
                x = h;
            } else {
                x = y;
            }
        }
        (x, GenCache { xs, ct, ins })
    }

    /// Backward from a gradient w.r.t. the output map. Returns parameter
    /// gradients and the gradient w.r.t. the latent batch.
    pub fn backward_batch(
        &self,
        cache: &GenCache<S>,
        grad_out: &FeatureBatch<S>,
    ) -> (GenGrads<S>, FeatureBatch<S>) {
        let n_layers = self.layers.len();
        let mut grads = GenGrads::zeros(self);
        let mut g = grad_out.clone();
        for i in (0..n_layers).rev() {
            if i + 1 < n_layers {
                // Undo ReLU then instance norm. The ReLU mask is the input
                // that was fed to layer i+1.
                relu_backward(&cache.xs[i + 1].data, &mut g.data);
                let (ingrads, gnext) = self.norms[i].backward(&cache.ins[i], &g);
                grads.gammas[i] = ingrads.gamma;
                grads.betas[i] = ingrads.beta;
                g = gnext;
            }
            let (cg, gin) = self.layers[i].backward(&cache.ct[i], &cache.xs[i], &g);
            grads.conv_weights[i] = cg.weight;
            if i + 1 == n_layers {
                grads.final_bias = cg.bias.expect("final layer has bias");
            }
            g = gin;
        }
        (grads, g)
    }

    /// Gradient w.r.t. the latent batch only; skips all parameter gradients
    /// (latent-space optimization against fixed weights).
    pub fn backward_latent_only(
        &self,
        cache: &GenCache<S>,
        grad_out: &FeatureBatch<S>,
    ) -> FeatureBatch<S> {
        let n_layers = self.layers.len();
        let mut g = grad_out.clone();
        for i in (0..n_layers).rev() {
            if i + 1 < n_layers {
                relu_backward(&cache.xs[i + 1].data, &mut g.data);
                let (_, gnext) = self.norms[i].backward(&cache.ins[i], &g);
                g = gnext;
            }
            g = self.layers[i].backward_input(&cache.ct[i], &g);
        }
        g
    }

    /// Mutable parameter tensors in a fixed order (matching
    /// [`GenGrads::tensors`]): conv weights, final bias, IN gammas, IN betas.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut out: Vec<&mut Vec<S>> = Vec::new();
        let mut final_bias = None;
        let n_layers = self.layers.len();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push(&mut l.weight);
            if i + 1 == n_layers {
                final_bias = l.bias.as_mut();
            }
        }
        out.push(final_bias.expect("final layer has bias"));
        let mut gammas = Vec::with_capacity(self.norms.len());
        let mut betas = Vec::with_capacity(self.norms.len());
        for n in &mut self.norms {
            let InstanceNorm { gamma, beta, .. } = n;
            gammas.push(gamma);
            betas.push(beta);
        }
        out.extend(gammas);
        out.extend(betas);
        out
    }

    /// Named parameter tensors for checkpointing, in `param_tensors` order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            (0..self.layers.len()).map(|i| format!("g.conv{i}.weight")).collect();
        names.push(format!("g.conv{}.bias", self.layers.len() - 1));
        for i in 0..self.norms.len() {
            names.push(format!("g.in{i}.gamma"));
        }
        for i in 0..self.norms.len() {
            names.push(format!("g.in{i}.beta"));
        }
        names
    }

    /// Converts the weights to double precision (for inversion and
    /// diagnostics outside training).
    pub fn widen(&self) -> Generator<f64> {
        Generator {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| ConvTranspose2d {
                    in_channels: l.in_channels,
                    out_channels: l.out_channels,
                    kernel: l.kernel,
                    stride: l.stride,
                    padding: l.padding,
                    weight: l.weight.iter().map(|v| v.to_f64()).collect(),
                    bias: l.bias.as_ref().map(|b| b.iter().map(|v| v.to_f64()).collect()),
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| InstanceNorm {
                    channels: n.channels,
                    eps: n.eps,
                    gamma: n.gamma.iter().map(|v| v.to_f64()).collect(),
                    beta: n.beta.iter().map(|v| v.to_f64()).collect(),
                })
                .collect(),
        }
    }
}

/// Extracts sample `b` of the generator's 2-channel output map as complex
/// coefficients (channel 0 real, channel 1 imaginary, spatial row-major).
pub fn output_to_coefficients<S: Scalar>(out: &FeatureBatch<S>, b: usize) -> Vec<Complex64> {
    let n = out.spatial();
    let re = &out.data[b * n..(b + 1) * n];
    let im = &out.data[(out.batch + b) * n..(out.batch + b + 1) * n];
    re.iter().zip(im).map(|(r, i)| Complex64::new(r.to_f64(), i.to_f64())).collect()
}

/// Single-latent generator evaluation: maps a latent vector to plane-wave
/// coefficients (unbound to any direction set until projected).
pub fn generator_forward(gen: &Generator<f64>, z: &[f64]) -> Result<CoefficientVector> {
    if z.len() != gen.arch.latent_dim {
        return Err(Error::invalid(format!(
            "latent length {} does not match architecture ({})",
            z.len(),
            gen.arch.latent_dim
        )));
    }
    let zb = FeatureBatch { channels: z.len(), batch: 1, height: 1, width: 1, data: z.to_vec() };
    let (out, _) = gen.forward_batch(&zb);
    Ok(CoefficientVector::unbound(Array1::from_vec(output_to_coefficients(&out, 0))))
}

/// Discriminator architecture: kernel-4 SAME convolutions with the given
/// strides, LeakyReLU activations, spectral norm on every conv, then two
/// fully connected layers (hidden width `fc_hidden`, scalar logit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscArch {
    pub input_channels: usize,
    pub input_spatial: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub fc_hidden: usize,
    pub lrelu_slope: f64,
}

impl DiscArch {
    /// The full-size architecture on 21×21×2 fields:
    /// spatial chain 21 → 21 → 11 → 6 → 3 → 2 → 1, then FC 512 → 100 → 1.
    pub fn full() -> Self {
        DiscArch {
            input_channels: 2,
            input_spatial: 21,
            channels: vec![32, 32, 64, 128, 256, 512],
            strides: vec![1, 2, 2, 2, 2, 2],
            fc_hidden: 100,
            lrelu_slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.strides.len() || self.channels.is_empty() {
            return Err(Error::invalid("discriminator channels/strides mismatch"));
        }
        if self.fc_hidden == 0 || self.input_channels == 0 || self.input_spatial == 0 {
            return Err(Error::invalid("degenerate discriminator architecture"));
        }
        Ok(())
    }

    /// Spatial size after each conv layer (SAME padding: `ceil(in/stride)`).
    pub fn spatial_chain(&self) -> Vec<usize> {
        let mut s = self.input_spatial;
        self.strides
            .iter()
            .map(|&st| {
                s = crate::nn::conv::same_output_size(s, st);
                s
            })
            .collect()
    }

    /// Flattened feature count entering the first FC layer.
    pub fn final_features(&self) -> usize {
        let s = *self.spatial_chain().last().unwrap();
        self.channels.last().unwrap() * s * s
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator<S> {
    pub arch: DiscArch,
    pub convs: Vec<Conv2dSame<S>>,
    pub sn: Vec<SpectralNorm<S>>,
    pub fc1: Linear<S>,
    pub fc2: Linear<S>,
}

pub struct DiscCache<S> {
    /// Input to each conv layer; `xs[0]` is the field batch.
    xs: Vec<FeatureBatch<S>>,
    conv_caches: Vec<crate::nn::conv::ConvCache<S>>,
    /// Spectrally normalized weights used in this forward pass.
    w_bars: Vec<Vec<S>>,
    sigmas: Vec<S>,
    /// Post-activation of the last conv, regrouped to `(features × B)`.
    fc_input: Vec<S>,
    /// Post-activation of fc1.
    fc1_act: Vec<S>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct DiscGrads<S> {
    pub conv_weights: Vec<Vec<S>>,
    pub conv_biases: Vec<Vec<S>>,
    pub fc1_weight: Vec<S>,
    pub fc1_bias: Vec<S>,
    pub fc2_weight: Vec<S>,
    pub fc2_bias: Vec<S>,
}

impl<S: Scalar> DiscGrads<S> {
    pub fn zeros(d: &Discriminator<S>) -> Self {
        DiscGrads {
            conv_weights: d.convs.iter().map(|c| vec![S::ZERO; c.weight.len()]).collect(),
            conv_biases: d.convs.iter().map(|c| vec![S::ZERO; c.bias.len()]).collect(),
            fc1_weight: vec![S::ZERO; d.fc1.weight.len()],
            fc1_bias: vec![S::ZERO; d.fc1.bias.len()],
            fc2_weight: vec![S::ZERO; d.fc2.weight.len()],
            fc2_bias: vec![S::ZERO; d.fc2.bias.len()],
        }
    }

    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::new();
        for w in &self.conv_weights {
            out.push(w);
        }
        for b in &self.conv_biases {
            out.push(b);
        }
        out.push(&self.fc1_weight);
        out.push(&self.fc1_bias);
        out.push(&self.fc2_weight);
        out.push(&self.fc2_bias);
        out
    }
}

impl<S: Scalar> Discriminator<S> {
    pub fn new(arch: DiscArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut convs = Vec::with_capacity(arch.channels.len());
        let mut sn = Vec::with_capacity(arch.channels.len());
        let mut in_ch = arch.input_channels;
        for (i, (&out_ch, &stride)) in arch.channels.iter().zip(&arch.strides).enumerate() {
            let mut conv = Conv2dSame::new(in_ch, out_ch, 4, stride);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[30, i as u64]));
            for w in &mut conv.weight {
                *w = S::from_f64(normal.sample(&mut rng));
            }
            sn.push(SpectralNorm::new(
                conv.weight_rows(),
                conv.weight_cols(),
                derive_seed(seed, &[31, i as u64]),
            ));
            convs.push(conv);
            in_ch = out_ch;
        }
        let features = arch.final_features();
        let mut fc1 = Linear::new(features, arch.fc_hidden);
        let mut fc2 = Linear::new(arch.fc_hidden, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[32]));
        for w in &mut fc1.weight {
            *w = S::from_f64(normal.sample(&mut rng));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[33]));
        for w in &mut fc2.weight {
            *w = S::from_f64(normal.sample(&mut rng));
        }
        Ok(Discriminator { arch, convs, sn, fc1, fc2 })
    }

    /// Batched forward returning one logit per sample. `mode` controls the
    /// spectral-norm power iteration (train: 1 step, eval: 5 on a copy,
    /// frozen: none).
    pub fn forward_batch(&mut self, x: &FeatureBatch<S>, mode: SnMode) -> (Vec<S>, DiscCache<S>) {
        assert_eq!(x.channels, self.arch.input_channels, "discriminator input channels");
        assert_eq!(x.height, self.arch.input_spatial, "discriminator input spatial");
        assert_eq!(x.width, self.arch.input_spatial);
        let chain = self.arch.spatial_chain();
        let batch = x.batch;
        let slope = self.arch.lrelu_slope;
        let mut xs = Vec::with_capacity(self.convs.len());
        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut w_bars = Vec::with_capacity(self.convs.len());
        let mut sigmas = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            let (w_bar, sigma) =
                self.sn[i].normalize(&conv.weight, conv.weight_rows(), conv.weight_cols(), mode);
            let (mut y, cache) = conv.forward(&cur, &w_bar);
            assert_eq!(y.height, chain[i], "discriminator spatial chain at layer {i}");
            leaky_relu_inplace(&mut y.data, slope);
            xs.push(cur);
            conv_caches.push(cache);
            w_bars.push(w_bar);
            sigmas.push(sigma);
            cur = y;
        }
        // (C_last, B, s, s) regroups to (features × B): feature = (c, y, x).
        let s = *chain.last().unwrap();
        let c_last = *self.arch.channels.last().unwrap();
        let features = c_last * s * s;
        let mut fc_input = vec![S::ZERO; features * batch];
        for c in 0..c_last {
            for b in 0..batch {
                for p in 0..s * s {
                    fc_input[(c * s * s + p) * batch + b] = cur.data[(c * batch + b) * s * s + p];
                }
            }
        }
        let mut h = self.fc1.forward(&fc_input, batch);
        leaky_relu_inplace(&mut h, slope);
        let fc1_act = h.clone();
        let logits = self.fc2.forward(&h, batch);
        (logits, DiscCache { xs, conv_caches, w_bars, sigmas, fc_input, fc1_act, batch })
    }

    /// Backward from per-sample logit gradients. Returns parameter gradients
    /// (w.r.t. the raw conv weights, through the spectral-norm chain rule)
    /// and the gradient w.r.t. the input field batch.
    pub fn backward_batch(
        &self,
        cache: &DiscCache<S>,
        grad_logits: &[S],
    ) -> (DiscGrads<S>, FeatureBatch<S>) {
        let batch = cache.batch;
        assert_eq!(grad_logits.len(), batch);
        let slope = self.arch.lrelu_slope;
        let mut grads = DiscGrads::zeros(self);

        let (fc2_grads, mut gh) = self.fc2.backward(&cache.fc1_act, batch, grad_logits);
        grads.fc2_weight = fc2_grads.weight;
        grads.fc2_bias = fc2_grads.bias;
        leaky_relu_backward(&cache.fc1_act, &mut gh, slope);
        let (fc1_grads, gflat) = self.fc1.backward(&cache.fc_input, batch, &gh);
        grads.fc1_weight = fc1_grads.weight;
        grads.fc1_bias = fc1_grads.bias;

        // Mask through the last conv's LeakyReLU, then un-flatten back to
        // (C_last, B, s, s).
        let chain = self.arch.spatial_chain();
        let s = *chain.last().unwrap();
        let c_last = *self.arch.channels.last().unwrap();
        let mut gflat = gflat;
        leaky_relu_backward(&cache.fc_input, &mut gflat, slope);
        let mut g = FeatureBatch::zeros(c_last, batch, s, s);
        for c in 0..c_last {
            for b in 0..batch {
                for p in 0..s * s {
                    g.data[(c * batch + b) * s * s + p] = gflat[(c * s * s + p) * batch + b];
                }
            }
        }
        for i in (0..self.convs.len()).rev() {
            if i + 1 < self.convs.len() {
                // The next layer's cached input is this conv's
                // post-activation: use it as the LeakyReLU mask.
                leaky_relu_backward(&cache.xs[i + 1].data, &mut g.data, slope);
            }
            let (cg, gin) = self.convs[i].backward(&cache.conv_caches[i], &g, &cache.w_bars[i]);
            grads.conv_weights[i] = self.sn[i].weight_grad(
                cache.sigmas[i],
                &cache.w_bars[i],
                &cg.weight,
                self.convs[i].weight_rows(),
                self.convs[i].weight_cols(),
            );
            grads.conv_biases[i] = cg.bias;
            g = gin;
        }
        (grads, g)
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut weights = Vec::with_capacity(self.convs.len());
        let mut biases = Vec::with_capacity(self.convs.len());
        for c in &mut self.convs {
            let Conv2dSame { weight, bias, .. } = c;
            weights.push(weight);
            biases.push(bias);
        }
        let mut out: Vec<&mut Vec<S>> = Vec::new();
        out.extend(weights);
        out.extend(biases);
        out.push(&mut self.fc1.weight);
        out.push(&mut self.fc1.bias);
        out.push(&mut self.fc2.weight);
        out.push(&mut self.fc2.bias);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            (0..self.convs.len()).map(|i| format!("d.conv{i}.weight")).collect();
        names.extend((0..self.convs.len()).map(|i| format!("d.conv{i}.bias")));
        names.push("d.fc1.weight".into());
        names.push("d.fc1.bias".into());
        names.push("d.fc2.weight".into());
        names.push("d.fc2.bias".into());
        names
    }
}

/// Single-field discriminator evaluation (eval-mode spectral norm).
pub fn discriminator_forward(disc: &mut Discriminator<f64>, field: &FeatureBatch<f64>) -> Result<f64> {
    if field.channels != disc.arch.input_channels
        || field.height != disc.arch.input_spatial
        || field.width != disc.arch.input_spatial
        || field.batch != 1
    {
        return Err(Error::invalid(format!(
            "discriminator expects a single {c}×{s}×{s} field, got {fc}×{fh}×{fw} (batch {fb})",
            c = disc.arch.input_channels,
            s = disc.arch.input_spatial,
            fc = field.channels,
            fh = field.height,
            fw = field.width,
            fb = field.batch,
        )));
    }
    let (logits, _) = disc.forward_batch(field, SnMode::Eval);
    Ok(logits[0].to_f64())
}
