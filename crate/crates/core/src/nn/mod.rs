//! Minimal neural-network primitives for the fixed architectures in
//! [`crate::gan`]: strided convolutions with TensorFlow-style SAME padding,
//! transposed convolutions, instance normalization, spectral normalization,
//! fully connected layers and Adam.
//!
//! Everything is generic over [`Scalar`] (`f32` for training, `f64` for
//! gradient checks and inversion-time forward passes) and lowers to
//! row-major GEMM calls. Feature maps are stored channel-major across the
//! whole batch (`C × (B·H·W)`), so one GEMM per layer covers the batch.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub mod conv;
pub mod linear;
pub mod norm;
pub mod spectral;

pub use conv::{Conv2dSame, ConvTranspose2d};
pub use linear::Linear;
pub use norm::InstanceNorm;
pub use spectral::{SnMode, SpectralNorm};

/// Floating-point scalar with a GEMM kernel.
pub trait Scalar:
    'static
    + Copy
    + Send
    + Sync
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    /// `C = alpha·A·B + beta·C` with explicit strides (matrixmultiply ABI).
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `c(m×n) = alpha·op(a)·op(b) + beta·c`, all row-major. `ta`/`tb` transpose
/// their operand: a transposed operand is stored as its (k×m)/(n×k)
/// untransposed layout.
#[allow(clippy::too_many_arguments)]
pub fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[S],
    ta: bool,
    b: &[S],
    tb: bool,
    beta: f64,
    c: &mut [S],
) {
    assert_eq!(a.len(), m * k, "A size");
    assert_eq!(b.len(), k * n, "B size");
    assert_eq!(c.len(), m * n, "C size");
    let (rsa, csa) = if ta { (1isize, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1isize, k as isize) } else { (n as isize, 1) };
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::from_f64(alpha),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            S::from_f64(beta),
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// A batch of feature maps in channel-major layout:
/// `data[((c·B + b)·H + y)·W + x]`, i.e. a `C × (B·H·W)` row-major matrix.
#[derive(Debug, Clone)]
pub struct FeatureBatch<S> {
    pub channels: usize,
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> FeatureBatch<S> {
    pub fn zeros(channels: usize, batch: usize, height: usize, width: usize) -> Self {
        FeatureBatch { channels, batch, height, width, data: vec![S::ZERO; channels * batch * height * width] }
    }

    /// Columns of the matrix view: `B·H·W`.
    pub fn cols(&self) -> usize {
        self.batch * self.height * self.width
    }

    pub fn spatial(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, c: usize, b: usize, y: usize, x: usize) -> usize {
        ((c * self.batch + b) * self.height + y) * self.width + x
    }

    pub fn get(&self, c: usize, b: usize, y: usize, x: usize) -> S {
        self.data[self.index(c, b, y, x)]
    }
}

/// ReLU in place; the output doubles as the backward mask.
pub fn relu_inplace<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::ZERO {
            *v = S::ZERO;
        }
    }
}

/// Gradient through ReLU given its *output* (`y > 0 ⟺ pre-activation > 0`).
pub fn relu_backward<S: Scalar>(output: &[S], grad: &mut [S]) {
    for (g, y) in grad.iter_mut().zip(output) {
        if !(*y > S::ZERO) {
            *g = S::ZERO;
        }
    }
}

/// LeakyReLU in place.
pub fn leaky_relu_inplace<S: Scalar>(x: &mut [S], slope: f64) {
    let a = S::from_f64(slope);
    for v in x {
        if *v < S::ZERO {
            *v *= a;
        }
    }
}

/// Gradient through LeakyReLU given its output (slope > 0 keeps signs).
pub fn leaky_relu_backward<S: Scalar>(output: &[S], grad: &mut [S], slope: f64) {
    let a = S::from_f64(slope);
    for (g, y) in grad.iter_mut().zip(output) {
        if !(*y > S::ZERO) {
            *g *= a;
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn new(lr: f64) -> Self {
        AdamParams { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// DCGAN convention used for adversarial training.
    pub fn gan(lr: f64) -> Self {
        AdamParams { lr, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-tensor Adam state.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: usize,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![S::ZERO; len], v: vec![S::ZERO; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [S], grads: &[S], hp: &AdamParams) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1 = S::from_f64(hp.beta1);
        let b2 = S::from_f64(hp.beta2);
        let one_m_b1 = S::from_f64(1.0 - hp.beta1);
        let one_m_b2 = S::from_f64(1.0 - hp.beta2);
        let corr1 = S::from_f64(1.0 / (1.0 - hp.beta1.powi(self.t as i32)));
        let corr2 = S::from_f64(1.0 / (1.0 - hp.beta2.powi(self.t as i32)));
        let lr = S::from_f64(hp.lr);
        let eps = S::from_f64(hp.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + one_m_b1 * g;
            self.v[i] = b2 * self.v[i] + one_m_b2 * g * g;
            let mhat = self.m[i] * corr1;
            let vhat = self.v[i] * corr2;
            params[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Central-difference gradient of a scalar function, for tests.
#[cfg(test)]
pub(crate) fn finite_diff_grad(
    f: &mut dyn FnMut(&[f64]) -> f64,
    point: &[f64],
    indices: &[usize],
    eps: f64,
) -> Vec<f64> {
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x);
        x[i] = orig - eps;
        let fm = f(&x);
        x[i] = orig;
        out.push((fp - fm) / (2.0 * eps));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gemm_matches_naive() {
        let a = vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = vec![7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = vec![0.0f64; 4];
        gemm(2, 3, 2, 1.0, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);

        // Transposed A: store A^T (3x2) and ask for op(A) (2x3).
        let at = vec![1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut c2 = vec![0.0f64; 4];
        gemm(2, 3, 2, 1.0, &at, true, &b, false, 0.0, &mut c2);
        assert_eq!(c2, c);

        // Transposed B.
        let bt = vec![7.0f64, 9.0, 11.0, 8.0, 10.0, 12.0];
        let mut c3 = vec![0.0f64; 4];
        gemm(2, 3, 2, 1.0, &a, false, &bt, true, 0.0, &mut c3);
        assert_eq!(c3, c);

        // Accumulation with alpha/beta.
        let mut c4 = c.clone();
        gemm(2, 3, 2, 2.0, &a, false, &b, false, 1.0, &mut c4);
        assert_eq!(c4, vec![174.0, 192.0, 417.0, 462.0]);
    }

    #[test]
    fn activations_and_grads() {
        let mut x = vec![-2.0f64, -0.5, 0.0, 0.5, 2.0];
        let mut lx = x.clone();
        relu_inplace(&mut x);
        assert_eq!(x, vec![0.0, 0.0, 0.0, 0.5, 2.0]);
        leaky_relu_inplace(&mut lx, 0.2);
        assert_relative_eq!(lx[0], -0.4);
        assert_relative_eq!(lx[1], -0.1);
        assert_eq!(lx[3], 0.5);

        let mut g = vec![1.0f64; 5];
        relu_backward(&x, &mut g);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 1.0, 1.0]);
        let mut g2 = vec![1.0f64; 5];
        leaky_relu_backward(&lx, &mut g2, 0.2);
        assert_eq!(g2, vec![0.2, 0.2, 0.2, 1.0, 1.0]);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        // With bias correction, the very first Adam step moves each
        // parameter by exactly lr·sign(g) (up to eps).
        let hp = AdamParams::new(0.01);
        let mut st = AdamState::<f64>::new(2);
        let mut p = vec![1.0, -2.0];
        st.step(&mut p, &[0.3, -4.0], &hp);
        assert_relative_eq!(p[0], 1.0 - 0.01, epsilon = 1e-6);
        assert_relative_eq!(p[1], -2.0 + 0.01, epsilon = 1e-6);
    }

    #[test]
    fn feature_batch_layout() {
        let mut fb = FeatureBatch::<f64>::zeros(2, 3, 4, 5);
        assert_eq!(fb.data.len(), 2 * 3 * 4 * 5);
        let idx = fb.index(1, 2, 3, 4);
        fb.data[idx] = 7.0;
        assert_eq!(fb.get(1, 2, 3, 4), 7.0);
        assert_eq!(idx, ((1 * 3 + 2) * 4 + 3) * 5 + 4);
    }
}
