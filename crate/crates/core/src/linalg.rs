//! Dense complex linear algebra used by the solvers: Hermitian Cholesky
//! factorization, matrix-vector products, Gram matrices and a power-iteration
//! spectral-norm estimate.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};

type Complex64 = Complex<f64>;

/// `y = H x`.
pub fn matvec(h: &Array2<Complex64>, x: &Array1<Complex64>) -> Array1<Complex64> {
    assert_eq!(h.ncols(), x.len());
    let xs = x.as_slice().expect("contiguous");
    let rows: Vec<Complex64> = h
        .outer_iter()
        .map(|row| {
            let rs = row.as_slice().expect("contiguous");
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in rs.iter().zip(xs) {
                acc += a * b;
            }
            acc
        })
        .collect();
    Array1::from_vec(rows)
}

/// `y = H^H x` (Hermitian transpose product).
pub fn matvec_adjoint(h: &Array2<Complex64>, x: &Array1<Complex64>) -> Array1<Complex64> {
    assert_eq!(h.nrows(), x.len());
    let n = h.ncols();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (m, row) in h.outer_iter().enumerate() {
        let rs = row.as_slice().expect("contiguous");
        let xm = x[m];
        for (o, a) in out.iter_mut().zip(rs) {
            *o += a.conj() * xm;
        }
    }
    Array1::from_vec(out)
}

/// `H^H H`, the N×N Gram matrix. Rows are computed in parallel.
pub fn gram(h: &Array2<Complex64>) -> Array2<Complex64> {
    let (m, n) = h.dim();
    let hs = h.as_slice().expect("contiguous");
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            for r in 0..m {
                let hr = &hs[r * n..(r + 1) * n];
                let ci = hr[i].conj();
                for (j, out) in row.iter_mut().enumerate() {
                    *out += ci * hr[j];
                }
            }
            row
        })
        .collect();
    let mut g = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            g[[i, j]] = v;
        }
    }
    g
}

/// `H H^H`, the M×M dual Gram matrix. Rows are computed in parallel.
pub fn gram_dual(h: &Array2<Complex64>) -> Array2<Complex64> {
    let (m, n) = h.dim();
    let hs = h.as_slice().expect("contiguous");
    let rows: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let hi = &hs[i * n..(i + 1) * n];
            let mut row = vec![Complex64::new(0.0, 0.0); m];
            for (j, out) in row.iter_mut().enumerate() {
                let hj = &hs[j * n..(j + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in hi.iter().zip(hj) {
                    acc += a * b.conj();
                }
                *out = acc;
            }
            row
        })
        .collect();
    let mut g = Array2::zeros((m, m));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            g[[i, j]] = v;
        }
    }
    g
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix,
/// `A = L L^H`.
#[derive(Debug)]
pub struct CholeskyFactor {
    l: Array2<Complex64>,
}

/// Factorizes a Hermitian positive definite matrix. Fails with an
/// ill-conditioned error (carrying a condition estimate from the pivot
/// ratio) when a pivot is not safely positive.
pub fn cholesky_hermitian(a: &Array2<Complex64>) -> Result<CholeskyFactor> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut l = Array2::<Complex64>::zeros((n, n));
    let max_diag = (0..n).map(|i| a[[i, i]].re.abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for k in 0..j {
            d -= l[[j, k]].norm_sqr();
        }
        if !(d > max_diag * 1e-15) || !d.is_finite() {
            let cond_estimate = if d > 0.0 { max_diag / d } else { f64::INFINITY };
            return Err(Error::IllConditioned { cond_estimate });
        }
        let djj = d.sqrt();
        l[[j, j]] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    /// Solves `A x = b` given `A = L L^H`.
    pub fn solve(&self, b: &Array1<Complex64>) -> Array1<Complex64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        // Forward: L y = b
        let mut y = b.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]].re;
        }
        // Backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]].conj() * y[k];
            }
            y[i] = s / self.l[[i, i]].re;
        }
        y
    }
}

/// Largest singular value of `H`, estimated by power iteration on `H^H H`.
/// Deterministic: the start vector is fixed.
pub fn sigma_max(h: &Array2<Complex64>, iters: usize) -> f64 {
    let n = h.ncols();
    let mut v = Array1::from_vec(
        (0..n)
            .map(|i| Complex64::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.73).cos()))
            .collect(),
    );
    let mut norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    v.mapv_inplace(|z| z / norm);
    let mut sigma = 0.0;
    for _ in 0..iters {
        let hv = matvec(h, &v);
        let w = matvec_adjoint(h, &hv);
        norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma = norm.sqrt();
        v = w / Complex64::new(norm, 0.0);
    }
    sigma
}
