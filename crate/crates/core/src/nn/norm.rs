//! Instance normalization with learned affine parameters: each (sample,
//! channel) feature map is standardized over its spatial extent.

use super::{FeatureBatch, Scalar};

#[derive(Debug, Clone)]
pub struct InstanceNorm<S> {
    pub channels: usize,
    pub eps: f64,
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

/// Cache: standardized activations and the inverse std per (channel, batch)
/// group.
#[derive(Debug)]
pub struct InCache<S> {
    xhat: Vec<S>,
    inv_std: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct InGrads<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> InstanceNorm<S> {
    pub fn new(channels: usize) -> Self {
        InstanceNorm { channels, eps: 1e-5, gamma: vec![S::ONE; channels], beta: vec![S::ZERO; channels] }
    }

    pub fn forward(&self, x: &FeatureBatch<S>) -> (FeatureBatch<S>, InCache<S>) {
        assert_eq!(x.channels, self.channels);
        let spatial = x.spatial();
        let groups = x.channels * x.batch;
        let mut out = x.clone();
        let mut xhat = vec![S::ZERO; x.data.len()];
        let mut inv_std = vec![S::ZERO; groups];
        let inv_n = S::from_f64(1.0 / spatial as f64);
        let eps = S::from_f64(self.eps);
        for g in 0..groups {
            let c = g / x.batch;
            let slice = &x.data[g * spatial..(g + 1) * spatial];
            let mut mean = S::ZERO;
            for v in slice {
                mean += *v;
            }
            mean *= inv_n;
            let mut var = S::ZERO;
            for v in slice {
                let d = *v - mean;
                var += d * d;
            }
            var *= inv_n;
            let istd = S::ONE / (var + eps).sqrt();
            inv_std[g] = istd;
            let (gamma, beta) = (self.gamma[c], self.beta[c]);
            let xh = &mut xhat[g * spatial..(g + 1) * spatial];
            let dst = &mut out.data[g * spatial..(g + 1) * spatial];
            for i in 0..spatial {
                let h = (slice[i] - mean) * istd;
                xh[i] = h;
                dst[i] = gamma * h + beta;
            }
        }
        (out, InCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        cache: &InCache<S>,
        grad_out: &FeatureBatch<S>,
    ) -> (InGrads<S>, FeatureBatch<S>) {
        let spatial = grad_out.spatial();
        let groups = grad_out.channels * grad_out.batch;
        let mut dgamma = vec![S::ZERO; self.channels];
        let mut dbeta = vec![S::ZERO; self.channels];
        let mut grad_in = grad_out.clone();
        let inv_n = S::from_f64(1.0 / spatial as f64);
        for g in 0..groups {
            let c = g / grad_out.batch;
            let go = &grad_out.data[g * spatial..(g + 1) * spatial];
            let xh = &cache.xhat[g * spatial..(g + 1) * spatial];
            let mut sum_g = S::ZERO;
            let mut sum_gx = S::ZERO;
            for i in 0..spatial {
                sum_g += go[i];
                sum_gx += go[i] * xh[i];
            }
            dbeta[c] += sum_g;
            dgamma[c] += sum_gx;
            let mean_g = sum_g * inv_n;
            let mean_gx = sum_gx * inv_n;
            let scale = self.gamma[c] * cache.inv_std[g];
            let gi = &mut grad_in.data[g * spatial..(g + 1) * spatial];
            for i in 0..spatial {
                gi[i] = scale * (go[i] - mean_g - xh[i] * mean_gx);
            }
        }
        (InGrads { gamma: dgamma, beta: dbeta }, grad_in)
    }
}
