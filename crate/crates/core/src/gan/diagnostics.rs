//! Empirical diagnostics for generative compressive sensing: the weight
//! distribution condition (WDC) and the range-restricted isometry condition
//! (RRIC). Both return the measured discrepancy for concrete inputs; they
//! are observability tools, not certificates.

use ndarray::Array2;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::Dictionary;
use crate::gan::net::{generator_forward, Generator};
use crate::seeding::derive_seed;

type Complex64 = Complex<f64>;

/// `(1/N_w) · W₊ₐᵀ W₊ᵦ` where `W₊ₓ` keeps the rows of `W` with positive
/// inner product against `x` (others zeroed).
fn halfspace_gram(w: &Array2<f64>, a: &[f64], b: &[f64]) -> Array2<f64> {
    let (n_w, k_w) = w.dim();
    let mut out = Array2::zeros((k_w, k_w));
    for i in 0..n_w {
        let row = w.row(i);
        let rs = row.as_slice().expect("contiguous");
        let da: f64 = rs.iter().zip(a).map(|(x, y)| x * y).sum();
        let db: f64 = rs.iter().zip(b).map(|(x, y)| x * y).sum();
        if da > 0.0 && db > 0.0 {
            for p in 0..k_w {
                for q in 0..k_w {
                    out[[p, q]] += rs[p] * rs[q];
                }
            }
        }
    }
    out.mapv_inplace(|v| v / n_w as f64);
    out
}

/// Spectral norm of a small dense real matrix by power iteration on `MᵀM`.
fn spectral_norm(m: &Array2<f64>) -> f64 {
    let (rows, cols) = m.dim();
    let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + (i as f64 * 0.41).sin()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut sigma = 0.0;
    for _ in 0..100 {
        let mut mv = vec![0.0; rows];
        for i in 0..rows {
            let row = m.row(i);
            let rs = row.as_slice().expect("contiguous");
            mv[i] = rs.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let mut w = vec![0.0; cols];
        for i in 0..rows {
            let row = m.row(i);
            let rs = row.as_slice().expect("contiguous");
            for (j, x) in rs.iter().enumerate() {
                w[j] += x * mv[i];
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        sigma = n.sqrt();
        v = w.into_iter().map(|x| x / n).collect();
    }
    sigma
}

/// Weight distribution condition discrepancy: the spectral-norm distance
/// between the empirical half-space Gram matrix `(1/N_w) W₊ₐᵀ W₊ᵦ` and a
/// Monte Carlo estimate of its expectation over i.i.d. standard Gaussian
/// matrices of the same shape. Only the signs of `W·a`, `W·b` select rows,
/// so the result is invariant to positive rescaling of `a` and `b`.
pub fn wdc_discrepancy(
    weight: &Array2<f64>,
    a: &[f64],
    b: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (n_w, k_w) = weight.dim();
    if a.len() != k_w || b.len() != k_w {
        return Err(Error::invalid(format!(
            "direction vectors must have length {k_w}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().all(|&x| x == 0.0) || b.iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("WDC direction vectors must be nonzero"));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("need at least one Monte Carlo sample"));
    }
    let empirical = halfspace_gram(weight, a, b);
    let mut expectation = Array2::<f64>::zeros((k_w, k_w));
    for s in 0..mc_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
        let w = Array2::from_shape_fn((n_w, k_w), |_| StandardNormal.sample(&mut rng));
        expectation += &halfspace_gram(&w, a, b);
    }
    expectation.mapv_inplace(|v| v / mc_samples as f64);
    Ok(spectral_norm(&(&empirical - &expectation)))
}

fn real_inner(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a * b.conj()).re).sum()
}

/// Range-restricted isometry discrepancy of a dictionary with respect to a
/// generator: for the quadruple `(z1, z2, z3, z4)` it returns
///
/// ```text
/// |⟨H Δ₁₂, H Δ₃₄⟩ − ⟨Δ₁₂, Δ₃₄⟩|  /  (‖Δ₁₂‖ ‖Δ₃₄‖)
/// ```
///
/// with `Δᵢⱼ = G(zᵢ) − G(zⱼ)` and the real part of the Hermitian inner
/// product (complex vectors viewed as real pairs).
pub fn rric_discrepancy(
    dictionary: &Dictionary,
    generator: &Generator<f64>,
    z1: &[f64],
    z2: &[f64],
    z3: &[f64],
    z4: &[f64],
) -> Result<f64> {
    if dictionary.num_atoms() != generator.arch.output_coeffs() {
        return Err(Error::invalid(format!(
            "dictionary atoms {} do not match generator output {}",
            dictionary.num_atoms(),
            generator.arch.output_coeffs()
        )));
    }
    let g = |z: &[f64]| -> Result<Vec<Complex64>> {
        Ok(generator_forward(generator, z)?.values.to_vec())
    };
    let (g1, g2, g3, g4) = (g(z1)?, g(z2)?, g(z3)?, g(z4)?);
    let d12: Vec<Complex64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
    let d34: Vec<Complex64> = g3.iter().zip(&g4).map(|(a, b)| a - b).collect();
    let n12 = d12.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let n34 = d34.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n12 == 0.0 || n34 == 0.0 {
        return Err(Error::DegenerateInput(
            "generator outputs coincide; the RRIC ratio is undefined".into(),
        ));
    }
    let h = &dictionary.entries;
    let hd12 = crate::linalg::matvec(h, &ndarray::Array1::from_vec(d12.clone()));
    let hd34 = crate::linalg::matvec(h, &ndarray::Array1::from_vec(d34.clone()));
    let lhs = real_inner(hd12.as_slice().unwrap(), hd34.as_slice().unwrap());
    let rhs = real_inner(&d12, &d34);
    Ok((lhs - rhs).abs() / (n12 * n34))
}
