//! Fully connected layer on column-batched activations.

use super::{gemm, Scalar};

/// `y = W x + b` applied to a `(F_in × B)` activation matrix.
/// Weight layout: `(F_out × F_in)` row-major.
#[derive(Debug, Clone)]
pub struct Linear<S> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Linear {
            in_features,
            out_features,
            weight: vec![S::ZERO; out_features * in_features],
            bias: vec![S::ZERO; out_features],
        }
    }

    /// `x` is `(F_in × B)` row-major; returns `(F_out × B)`.
    pub fn forward(&self, x: &[S], batch: usize) -> Vec<S> {
        assert_eq!(x.len(), self.in_features * batch);
        let mut out = vec![S::ZERO; self.out_features * batch];
        gemm(self.out_features, self.in_features, batch, 1.0, &self.weight, false, x, false, 0.0, &mut out);
        for o in 0..self.out_features {
            let b = self.bias[o];
            for v in &mut out[o * batch..(o + 1) * batch] {
                *v += b;
            }
        }
        out
    }

    /// Returns gradients and the gradient w.r.t. `x`.
    pub fn backward(&self, x: &[S], batch: usize, grad_out: &[S]) -> (LinearGrads<S>, Vec<S>) {
        assert_eq!(grad_out.len(), self.out_features * batch);
        let mut grad_weight = vec![S::ZERO; self.weight.len()];
        gemm(self.out_features, batch, self.in_features, 1.0, grad_out, false, x, true, 0.0, &mut grad_weight);
        let grad_bias: Vec<S> = (0..self.out_features)
            .map(|o| {
                let mut acc = S::ZERO;
                for v in &grad_out[o * batch..(o + 1) * batch] {
                    acc += *v;
                }
                acc
            })
            .collect();
        let mut grad_in = vec![S::ZERO; self.in_features * batch];
        gemm(self.in_features, self.out_features, batch, 1.0, &self.weight, true, grad_out, false, 0.0, &mut grad_in);
        (LinearGrads { weight: grad_weight, bias: grad_bias }, grad_in)
    }
}
