//! Spectral normalization: divide a weight matrix by its leading singular
//! value, estimated by power iteration with persistent vectors, enforcing a
//! Lipschitz constant of 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scalar;

/// How many power iterations a normalization performs and whether the
/// persistent state is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnMode {
    /// One iteration, state updated (per training step).
    Train,
    /// Five iterations on a scratch copy; the stored state is untouched.
    Eval,
    /// No iterations: use the stored vectors as-is. Makes the normalized
    /// weight a deterministic, differentiable function of the raw weight
    /// (used in gradient checks).
    Frozen,
}

/// Persistent power-iteration state for one weight matrix, reshaped to
/// `(rows × cols)` = (out-features × everything else).
#[derive(Debug, Clone)]
pub struct SpectralNorm<S> {
    pub u: Vec<S>,
    pub v: Vec<S>,
}

fn normalize_vec<S: Scalar>(v: &mut [S]) -> S {
    let mut acc = S::ZERO;
    for x in v.iter() {
        acc += *x * *x;
    }
    let n = acc.sqrt();
    if n.to_f64() > 0.0 {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
    n
}

impl<S: Scalar> SpectralNorm<S> {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<S> = (0..rows).map(|_| S::from_f64(rng.gen_range(-1.0..1.0))).collect();
        let mut v: Vec<S> = (0..cols).map(|_| S::from_f64(rng.gen_range(-1.0..1.0))).collect();
        normalize_vec(&mut u);
        normalize_vec(&mut v);
        SpectralNorm { u, v }
    }

    fn iterate(w: &[S], rows: usize, cols: usize, u: &mut Vec<S>, v: &mut Vec<S>, iters: usize) {
        for _ in 0..iters {
            // v = normalize(W^T u)
            for j in 0..cols {
                v[j] = S::ZERO;
            }
            for i in 0..rows {
                let ui = u[i];
                let row = &w[i * cols..(i + 1) * cols];
                for (j, wv) in row.iter().enumerate() {
                    v[j] += *wv * ui;
                }
            }
            normalize_vec(v);
            // u = normalize(W v)
            for i in 0..rows {
                let row = &w[i * cols..(i + 1) * cols];
                let mut acc = S::ZERO;
                for (j, wv) in row.iter().enumerate() {
                    acc += *wv * v[j];
                }
                u[i] = acc;
            }
            normalize_vec(u);
        }
    }

    fn sigma(w: &[S], rows: usize, cols: usize, u: &[S], v: &[S]) -> S {
        let mut acc = S::ZERO;
        for i in 0..rows {
            let row = &w[i * cols..(i + 1) * cols];
            let mut rv = S::ZERO;
            for (j, wv) in row.iter().enumerate() {
                rv += *wv * v[j];
            }
            acc += u[i] * rv;
        }
        acc
    }

    /// Returns the normalized weight `W / σ̂` and the estimate `σ̂`.
    /// A zero weight matrix is returned unchanged with σ̂ = 0 and the state
    /// untouched.
    pub fn normalize(&mut self, w: &[S], rows: usize, cols: usize, mode: SnMode) -> (Vec<S>, S) {
        assert_eq!(w.len(), rows * cols);
        if w.iter().all(|x| x.to_f64() == 0.0) {
            return (w.to_vec(), S::ZERO);
        }
        let sigma = match mode {
            SnMode::Train => {
                let (mut u, mut v) = (std::mem::take(&mut self.u), std::mem::take(&mut self.v));
                Self::iterate(w, rows, cols, &mut u, &mut v, 1);
                let s = Self::sigma(w, rows, cols, &u, &v);
                self.u = u;
                self.v = v;
                s
            }
            SnMode::Eval => {
                let mut u = self.u.clone();
                let mut v = self.v.clone();
                Self::iterate(w, rows, cols, &mut u, &mut v, 5);
                Self::sigma(w, rows, cols, &u, &v)
            }
            SnMode::Frozen => Self::sigma(w, rows, cols, &self.u, &self.v),
        };
        if sigma.to_f64() == 0.0 {
            return (w.to_vec(), S::ZERO);
        }
        let inv = S::ONE / sigma;
        (w.iter().map(|x| *x * inv).collect(), sigma)
    }

    /// Chain rule through `W̄ = W / σ(W)` with `σ = u^T W v` (u, v treated as
    /// constants, the standard stop-gradient convention):
    /// `dL/dW = (1/σ)(G − ⟨G, W̄⟩ u v^T)` where `G = dL/dW̄`.
    pub fn weight_grad(
        &self,
        sigma: S,
        w_bar: &[S],
        grad_wbar: &[S],
        rows: usize,
        cols: usize,
    ) -> Vec<S> {
        if sigma.to_f64() == 0.0 {
            return grad_wbar.to_vec();
        }
        let mut dot = S::ZERO;
        for (g, wb) in grad_wbar.iter().zip(w_bar) {
            dot += *g * *wb;
        }
        let inv = S::ONE / sigma;
        let mut out = vec![S::ZERO; grad_wbar.len()];
        for i in 0..rows {
            let ui = self.u[i];
            for j in 0..cols {
                out[i * cols + j] = inv * (grad_wbar[i * cols + j] - dot * ui * self.v[j]);
            }
        }
        out
    }
}
