//! Strided convolution with TensorFlow-style SAME padding and transposed
//! convolution, both lowered to GEMM over the whole batch.

use rayon::prelude::*;

use super::{gemm, FeatureBatch, Scalar};

/// SAME-padding output size: `ceil(in / stride)`.
pub fn same_output_size(input: usize, stride: usize) -> usize {
    input.div_ceil(stride)
}

/// SAME padding split: total `max((out−1)·s + k − in, 0)`, the extra pixel
/// goes to the end (TensorFlow convention).
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = same_output_size(input, stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (total / 2, total - total / 2)
}

/// 2-D convolution, square kernel, SAME padding.
///
/// Weight layout: `(C_out × C_in·K·K)` row-major, i.e. `(c_out, c_in, ky,
/// kx)` flattened.
#[derive(Debug, Clone)]
pub struct Conv2dSame<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

/// Forward cache: the im2col matrix `(C_in·K² × B·H_out·W_out)` plus sizes.
#[derive(Debug)]
pub struct ConvCache<S> {
    cols: Vec<S>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    batch: usize,
}

/// Weight/bias gradients of a convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Conv2dSame<S> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Conv2dSame {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![S::ZERO; out_channels * in_channels * kernel * kernel],
            bias: vec![S::ZERO; out_channels],
        }
    }

    pub fn weight_rows(&self) -> usize {
        self.out_channels
    }

    pub fn weight_cols(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn im2col(&self, x: &FeatureBatch<S>) -> (Vec<S>, usize, usize) {
        let k = self.kernel;
        let s = self.stride;
        let out_h = same_output_size(x.height, s);
        let out_w = same_output_size(x.width, s);
        let (pad_top, _) = same_padding(x.height, k, s);
        let (pad_left, _) = same_padding(x.width, k, s);
        let rows = self.in_channels * k * k;
        let ncols = x.batch * out_h * out_w;
        let mut cols = vec![S::ZERO; rows * ncols];
        let hw_out = out_h * out_w;
        // Parallel over rows: each row is a contiguous slice of the matrix.
        cols.par_chunks_mut(ncols).enumerate().for_each(|(row, dst)| {
            let kx = row % k;
            let ky = (row / k) % k;
            let ci = row / (k * k);
            for b in 0..x.batch {
                let base = dst[b * hw_out..(b + 1) * hw_out].as_mut_ptr();
                for oy in 0..out_h {
                    let iy = (oy * s + ky) as isize - pad_top as isize;
                    if iy < 0 || iy >= x.height as isize {
                        continue;
                    }
                    let src_row = ((ci * x.batch + b) * x.height + iy as usize) * x.width;
                    for ox in 0..out_w {
                        let ix = (ox * s + kx) as isize - pad_left as isize;
                        if ix < 0 || ix >= x.width as isize {
                            continue;
                        }
                        unsafe {
                            *base.add(oy * out_w + ox) = x.data[src_row + ix as usize];
                        }
                    }
                }
            }
        });
        (cols, out_h, out_w)
    }

    /// Forward pass through the given weight slice (raw or
    /// spectrally-normalized).
    pub fn forward(&self, x: &FeatureBatch<S>, weight: &[S]) -> (FeatureBatch<S>, ConvCache<S>) {
        assert_eq!(x.channels, self.in_channels, "conv input channels");
        assert_eq!(weight.len(), self.weight.len());
        let (cols, out_h, out_w) = self.im2col(x);
        let ncols = x.batch * out_h * out_w;
        let mut out = FeatureBatch::zeros(self.out_channels, x.batch, out_h, out_w);
        gemm(
            self.out_channels,
            self.weight_cols(),
            ncols,
            1.0,
            weight,
            false,
            &cols,
            false,
            0.0,
            &mut out.data,
        );
        for co in 0..self.out_channels {
            let bias = self.bias[co];
            for v in &mut out.data[co * ncols..(co + 1) * ncols] {
                *v += bias;
            }
        }
        (out, ConvCache { cols, in_h: x.height, in_w: x.width, out_h, out_w, batch: x.batch })
    }

    /// Backward pass; returns the gradients w.r.t. the weight slice used in
    /// forward, the bias, and the layer input.
    pub fn backward(
        &self,
        cache: &ConvCache<S>,
        grad_out: &FeatureBatch<S>,
        weight: &[S],
    ) -> (ConvGrads<S>, FeatureBatch<S>) {
        let k = self.kernel;
        let s = self.stride;
        let ncols = cache.batch * cache.out_h * cache.out_w;
        assert_eq!(grad_out.channels, self.out_channels);
        assert_eq!(grad_out.cols(), ncols);

        // grad_W = grad_out · cols^T
        let mut grad_weight = vec![S::ZERO; self.weight.len()];
        gemm(
            self.out_channels,
            ncols,
            self.weight_cols(),
            1.0,
            &grad_out.data,
            false,
            &cache.cols,
            true,
            0.0,
            &mut grad_weight,
        );
        let mut grad_bias = vec![S::ZERO; self.out_channels];
        for co in 0..self.out_channels {
            let mut acc = S::ZERO;
            for v in &grad_out.data[co * ncols..(co + 1) * ncols] {
                acc += *v;
            }
            grad_bias[co] = acc;
        }

        // grad_cols = W^T · grad_out, then scatter back (col2im).
        let mut grad_cols = vec![S::ZERO; self.weight_cols() * ncols];
        gemm(
            self.weight_cols(),
            self.out_channels,
            ncols,
            1.0,
            weight,
            true,
            &grad_out.data,
            false,
            0.0,
            &mut grad_cols,
        );
        let mut grad_in = FeatureBatch::zeros(self.in_channels, cache.batch, cache.in_h, cache.in_w);
        let (pad_top, _) = same_padding(cache.in_h, k, s);
        let (pad_left, _) = same_padding(cache.in_w, k, s);
        let hw_out = cache.out_h * cache.out_w;
        let batch = cache.batch;
        let (in_h, in_w) = (cache.in_h, cache.in_w);
        let (out_h, out_w) = (cache.out_h, cache.out_w);
        // Parallel over input channels: each writes a disjoint slice.
        grad_in.data.par_chunks_mut(batch * in_h * in_w).enumerate().for_each(|(ci, dst)| {
            for kk in 0..k * k {
                let row = ci * k * k + kk;
                let ky = kk / k;
                let kx = kk % k;
                let src = &grad_cols[row * ncols..(row + 1) * ncols];
                for b in 0..batch {
                    for oy in 0..out_h {
                        let iy = (oy * s + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= in_h as isize {
                            continue;
                        }
                        for ox in 0..out_w {
                            let ix = (ox * s + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= in_w as isize {
                                continue;
                            }
                            dst[(b * in_h + iy as usize) * in_w + ix as usize] +=
                                src[b * hw_out + oy * out_w + ox];
                        }
                    }
                }
            }
        });
        (ConvGrads { weight: grad_weight, bias: grad_bias }, grad_in)
    }
}

/// 2-D transposed convolution, square kernel, symmetric cropping `padding`
/// (torch convention: output size `(in−1)·stride − 2·padding + kernel`).
///
/// Weight layout: `(C_in × C_out·K·K)` row-major, i.e. `(c_in, c_out, ky,
/// kx)` flattened.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<S>,
    pub bias: Option<Vec<S>>,
}

/// Forward cache (sizes only; the backward pass re-reads the layer input).
#[derive(Debug)]
pub struct ConvTCache {
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct ConvTGrads<S> {
    pub weight: Vec<S>,
    pub bias: Option<Vec<S>>,
}

impl<S: Scalar> ConvTranspose2d<S> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        with_bias: bool,
    ) -> Self {
        ConvTranspose2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: vec![S::ZERO; in_channels * out_channels * kernel * kernel],
            bias: if with_bias { Some(vec![S::ZERO; out_channels]) } else { None },
        }
    }

    pub fn output_size(&self, input: usize) -> usize {
        (input - 1) * self.stride + self.kernel - 2 * self.padding
    }

    pub fn weight_rows(&self) -> usize {
        self.in_channels
    }

    pub fn weight_cols(&self) -> usize {
        self.out_channels * self.kernel * self.kernel
    }

    pub fn forward(&self, x: &FeatureBatch<S>) -> (FeatureBatch<S>, ConvTCache) {
        assert_eq!(x.channels, self.in_channels, "conv-transpose input channels");
        let k = self.kernel;
        let s = self.stride;
        let p = self.padding;
        let out_h = self.output_size(x.height);
        let out_w = self.output_size(x.width);
        let ncols = x.cols();

        // cols = W^T · X : (C_out·K² × B·HW_in)
        let mut cols = vec![S::ZERO; self.weight_cols() * ncols];
        gemm(
            self.weight_cols(),
            self.in_channels,
            ncols,
            1.0,
            &self.weight,
            true,
            &x.data,
            false,
            0.0,
            &mut cols,
        );

        let mut out = FeatureBatch::zeros(self.out_channels, x.batch, out_h, out_w);
        let hw_in = x.spatial();
        let batch = x.batch;
        let (in_h, in_w) = (x.height, x.width);
        // Scatter-add, parallel over output channels (disjoint output).
        out.data.par_chunks_mut(batch * out_h * out_w).enumerate().for_each(|(co, dst)| {
            for kk in 0..k * k {
                let row = co * k * k + kk;
                let ky = kk / k;
                let kx = kk % k;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for b in 0..batch {
                    for iy in 0..in_h {
                        let oy = (iy * s + ky) as isize - p as isize;
                        if oy < 0 || oy >= out_h as isize {
                            continue;
                        }
                        for ix in 0..in_w {
                            let ox = (ix * s + kx) as isize - p as isize;
                            if ox < 0 || ox >= out_w as isize {
                                continue;
                            }
                            dst[(b * out_h + oy as usize) * out_w + ox as usize] +=
                                src[b * hw_in + iy * in_w + ix];
                        }
                    }
                }
            }
        });
        if let Some(bias) = &self.bias {
            let hw = batch * out_h * out_w;
            for co in 0..self.out_channels {
                let bv = bias[co];
                for v in &mut out.data[co * hw..(co + 1) * hw] {
                    *v += bv;
                }
            }
        }
        (out, ConvTCache { in_h: x.height, in_w: x.width, out_h, out_w, batch: x.batch })
    }

    fn gather_grad_cols(&self, cache: &ConvTCache, grad_out: &FeatureBatch<S>) -> Vec<S> {
        let k = self.kernel;
        let s = self.stride;
        let p = self.padding;
        let ncols = cache.batch * cache.in_h * cache.in_w;
        // grad_cols[(co,ky,kx), (b,iy,ix)] = grad_out[co, b, iy·s+ky−p, ix·s+kx−p]
        let mut grad_cols = vec![S::ZERO; self.weight_cols() * ncols];
        let hw_in = cache.in_h * cache.in_w;
        let (out_h, out_w) = (cache.out_h, cache.out_w);
        let (in_h, in_w) = (cache.in_h, cache.in_w);
        let batch = cache.batch;
        grad_cols.par_chunks_mut(ncols).enumerate().for_each(|(row, dst)| {
            let kx = row % k;
            let ky = (row / k) % k;
            let co = row / (k * k);
            for b in 0..batch {
                for iy in 0..in_h {
                    let oy = (iy * s + ky) as isize - p as isize;
                    if oy < 0 || oy >= out_h as isize {
                        continue;
                    }
                    let src_row = ((co * batch + b) * out_h + oy as usize) * out_w;
                    for ix in 0..in_w {
                        let ox = (ix * s + kx) as isize - p as isize;
                        if ox < 0 || ox >= out_w as isize {
                            continue;
                        }
                        dst[b * hw_in + iy * in_w + ix] = grad_out.data[src_row + ox as usize];
                    }
                }
            }
        });
        grad_cols
    }

    /// Gradient w.r.t. the input only (skips the weight/bias gradients; used
    /// by latent-space optimization where the network is fixed).
    pub fn backward_input(&self, cache: &ConvTCache, grad_out: &FeatureBatch<S>) -> FeatureBatch<S> {
        assert_eq!(grad_out.channels, self.out_channels);
        assert_eq!(grad_out.height, cache.out_h);
        let ncols = cache.batch * cache.in_h * cache.in_w;
        let grad_cols = self.gather_grad_cols(cache, grad_out);
        let mut grad_in = FeatureBatch::zeros(self.in_channels, cache.batch, cache.in_h, cache.in_w);
        gemm(
            self.in_channels,
            self.weight_cols(),
            ncols,
            1.0,
            &self.weight,
            false,
            &grad_cols,
            false,
            0.0,
            &mut grad_in.data,
        );
        grad_in
    }

    /// Backward pass. Needs the forward input `x` for the weight gradient.
    pub fn backward(
        &self,
        cache: &ConvTCache,
        x: &FeatureBatch<S>,
        grad_out: &FeatureBatch<S>,
    ) -> (ConvTGrads<S>, FeatureBatch<S>) {
        let ncols = cache.batch * cache.in_h * cache.in_w;
        assert_eq!(grad_out.channels, self.out_channels);
        assert_eq!(grad_out.height, cache.out_h);
        let (out_h, out_w) = (cache.out_h, cache.out_w);
        let (in_h, in_w) = (cache.in_h, cache.in_w);
        let batch = cache.batch;
        let grad_cols = self.gather_grad_cols(cache, grad_out);

        // grad_W = X · grad_cols^T : (C_in × C_out·K²)
        let mut grad_weight = vec![S::ZERO; self.weight.len()];
        gemm(
            self.in_channels,
            ncols,
            self.weight_cols(),
            1.0,
            &x.data,
            false,
            &grad_cols,
            true,
            0.0,
            &mut grad_weight,
        );
        let grad_bias = self.bias.as_ref().map(|_| {
            let hw = batch * out_h * out_w;
            (0..self.out_channels)
                .map(|co| {
                    let mut acc = S::ZERO;
                    for v in &grad_out.data[co * hw..(co + 1) * hw] {
                        acc += *v;
                    }
                    acc
                })
                .collect()
        });

        // grad_X = W · grad_cols : (C_in × B·HW_in)
        let mut grad_in = FeatureBatch::zeros(self.in_channels, batch, in_h, in_w);
        gemm(
            self.in_channels,
            self.weight_cols(),
            ncols,
            1.0,
            &self.weight,
            false,
            &grad_cols,
            false,
            0.0,
            &mut grad_in.data,
        );
        (ConvTGrads { weight: grad_weight, bias: grad_bias }, grad_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_grad;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fill_random(v: &mut [f64], rng: &mut ChaCha8Rng) {
        for x in v {
            *x = rng.gen_range(-1.0..1.0);
        }
    }

    #[test]
    fn same_size_chain_matches_table() {
        // The discriminator spatial chain: 21 →(s1) 21 →(s2) 11 → 6 → 3 → 2 → 1.
        let mut size = 21;
        size = same_output_size(size, 1);
        assert_eq!(size, 21);
        let expect = [11, 6, 3, 2, 1];
        for e in expect {
            size = same_output_size(size, 2);
            assert_eq!(size, e);
        }
    }

    #[test]
    fn conv_transpose_doubles_spatial() {
        let ct = ConvTranspose2d::<f64>::new(3, 2, 4, 2, 1, false);
        assert_eq!(ct.output_size(4), 8);
        assert_eq!(ct.output_size(32), 64);
        let ct0 = ConvTranspose2d::<f64>::new(3, 2, 4, 1, 0, false);
        assert_eq!(ct0.output_size(1), 4);
    }

    #[test]
    fn conv_forward_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2dSame::<f64>::new(2, 3, 4, 2);
        fill_random(&mut conv.weight, &mut rng);
        fill_random(&mut conv.bias, &mut rng);
        let mut x = FeatureBatch::<f64>::zeros(2, 2, 5, 5);
        fill_random(&mut x.data, &mut rng);
        let w = conv.weight.clone();
        let (y, _) = conv.forward(&x, &w);
        assert_eq!((y.height, y.width), (3, 3));
        // Naive reference.
        let (pt, _) = same_padding(5, 4, 2);
        let (pl, _) = same_padding(5, 4, 2);
        for co in 0..3 {
            for b in 0..2 {
                for oy in 0..3 {
                    for ox in 0..3 {
                        let mut acc = conv.bias[co];
                        for ci in 0..2 {
                            for ky in 0..4 {
                                for kx in 0..4 {
                                    let iy = (oy * 2 + ky) as isize - pt as isize;
                                    let ix = (ox * 2 + kx) as isize - pl as isize;
                                    if iy < 0 || iy >= 5 || ix < 0 || ix >= 5 {
                                        continue;
                                    }
                                    let wv = conv.weight[co * 32 + ci * 16 + ky * 4 + kx];
                                    acc += wv * x.get(ci, b, iy as usize, ix as usize);
                                }
                            }
                        }
                        assert!((y.get(co, b, oy, ox) - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn conv_transpose_forward_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ct = ConvTranspose2d::<f64>::new(3, 2, 4, 2, 1, true);
        fill_random(&mut ct.weight, &mut rng);
        fill_random(ct.bias.as_mut().unwrap(), &mut rng);
        let mut x = FeatureBatch::<f64>::zeros(3, 2, 3, 3);
        fill_random(&mut x.data, &mut rng);
        let (y, _) = ct.forward(&x);
        assert_eq!((y.height, y.width), (6, 6));
        for co in 0..2 {
            for b in 0..2 {
                for oy in 0..6 {
                    for ox in 0..6 {
                        let mut acc = ct.bias.as_ref().unwrap()[co];
                        for ci in 0..3 {
                            for ky in 0..4 {
                                for kx in 0..4 {
                                    // oy = iy*2 + ky − 1  =>  iy = (oy + 1 − ky)/2
                                    let num_y = oy as isize + 1 - ky as isize;
                                    let num_x = ox as isize + 1 - kx as isize;
                                    if num_y < 0 || num_x < 0 || num_y % 2 != 0 || num_x % 2 != 0 {
                                        continue;
                                    }
                                    let (iy, ix) = ((num_y / 2) as usize, (num_x / 2) as usize);
                                    if iy >= 3 || ix >= 3 {
                                        continue;
                                    }
                                    let wv = ct.weight[ci * 32 + co * 16 + ky * 4 + kx];
                                    acc += wv * x.get(ci, b, iy, ix);
                                }
                            }
                        }
                        assert!((y.get(co, b, oy, ox) - acc).abs() < 1e-12, "co={co} oy={oy} ox={ox}");
                    }
                }
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut conv = Conv2dSame::<f64>::new(2, 2, 3, 2);
        fill_random(&mut conv.weight, &mut rng);
        fill_random(&mut conv.bias, &mut rng);
        let mut x = FeatureBatch::<f64>::zeros(2, 1, 5, 5);
        fill_random(&mut x.data, &mut rng);
        // Loss: weighted sum of outputs (weights fixed).
        let loss_w: Vec<f64> = {
            let (y, _) = conv.forward(&x, &conv.weight.clone());
            (0..y.data.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect()
        };
        let loss = |c: &Conv2dSame<f64>, xin: &FeatureBatch<f64>| -> f64 {
            let (y, _) = c.forward(xin, &c.weight.clone());
            y.data.iter().zip(&loss_w).map(|(a, b)| a * b).sum()
        };
        // Analytic grads.
        let w = conv.weight.clone();
        let (y, cache) = conv.forward(&x, &w);
        let grad_out = FeatureBatch {
            channels: y.channels,
            batch: y.batch,
            height: y.height,
            width: y.width,
            data: loss_w.clone(),
        };
        let (grads, grad_in) = conv.backward(&cache, &grad_out, &w);

        // FD on a few weight entries.
        let idxs = [0usize, 5, 17, 31];
        let mut f = |wv: &[f64]| {
            let mut c2 = conv.clone();
            c2.weight = wv.to_vec();
            loss(&c2, &x)
        };
        let fd = finite_diff_grad(&mut f, &conv.weight, &idxs, 1e-6);
        for (i, &idx) in idxs.iter().enumerate() {
            assert!(
                (grads.weight[idx] - fd[i]).abs() < 1e-6 * (1.0 + fd[i].abs()),
                "weight {idx}: {} vs {}",
                grads.weight[idx],
                fd[i]
            );
        }
        // FD on inputs.
        let xi = [0usize, 7, 24, 49];
        let mut fx = |xv: &[f64]| {
            let x2 = FeatureBatch { data: xv.to_vec(), ..x.clone() };
            loss(&conv, &x2)
        };
        let fdx = finite_diff_grad(&mut fx, &x.data, &xi, 1e-6);
        for (i, &idx) in xi.iter().enumerate() {
            assert!(
                (grad_in.data[idx] - fdx[i]).abs() < 1e-6 * (1.0 + fdx[i].abs()),
                "input {idx}: {} vs {}",
                grad_in.data[idx],
                fdx[i]
            );
        }
        // Bias gradient: sum over outputs of each channel.
        let hw = y.batch * y.height * y.width;
        for co in 0..2 {
            let expect: f64 = loss_w[co * hw..(co + 1) * hw].iter().sum();
            assert!((grads.bias[co] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn conv_transpose_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ct = ConvTranspose2d::<f64>::new(3, 2, 4, 2, 1, true);
        fill_random(&mut ct.weight, &mut rng);
        fill_random(ct.bias.as_mut().unwrap(), &mut rng);
        let mut x = FeatureBatch::<f64>::zeros(3, 2, 3, 3);
        fill_random(&mut x.data, &mut rng);
        let loss_w: Vec<f64> =
            (0..2 * 2 * 6 * 6).map(|i| ((i * 29 % 13) as f64 - 6.0) * 0.07).collect();
        let loss = |c: &ConvTranspose2d<f64>, xin: &FeatureBatch<f64>| -> f64 {
            let (y, _) = c.forward(xin);
            y.data.iter().zip(&loss_w).map(|(a, b)| a * b).sum()
        };
        let (y, cache) = ct.forward(&x);
        let grad_out = FeatureBatch {
            channels: y.channels,
            batch: y.batch,
            height: y.height,
            width: y.width,
            data: loss_w.clone(),
        };
        let (grads, grad_in) = ct.backward(&cache, &x, &grad_out);

        let idxs = [0usize, 13, 50, 95];
        let mut f = |wv: &[f64]| {
            let mut c2 = ct.clone();
            c2.weight = wv.to_vec();
            loss(&c2, &x)
        };
        let fd = finite_diff_grad(&mut f, &ct.weight, &idxs, 1e-6);
        for (i, &idx) in idxs.iter().enumerate() {
            assert!(
                (grads.weight[idx] - fd[i]).abs() < 1e-6 * (1.0 + fd[i].abs()),
                "weight {idx}: {} vs {}",
                grads.weight[idx],
                fd[i]
            );
        }
        let xi = [0usize, 11, 26, 53];
        let mut fx = |xv: &[f64]| {
            let x2 = FeatureBatch { data: xv.to_vec(), ..x.clone() };
            loss(&ct, &x2)
        };
        let fdx = finite_diff_grad(&mut fx, &x.data, &xi, 1e-6);
        for (i, &idx) in xi.iter().enumerate() {
            assert!(
                (grad_in.data[idx] - fdx[i]).abs() < 1e-6 * (1.0 + fdx[i].abs()),
                "input {idx}: {} vs {}",
                grad_in.data[idx],
                fdx[i]
            );
        }
        let hw = 2 * 6 * 6;
        for co in 0..2 {
            let expect: f64 = loss_w[co * hw..(co + 1) * hw].iter().sum();
            assert!((grads.bias.as_ref().unwrap()[co] - expect).abs() < 1e-10);
        }
    }
}
