//! Relativistic average GAN losses.
//!
//! Scores are made relativistic against the opposing batch mean,
//! `D_ra(u, v) = sigmoid(C(u) − E_v[C(v)])`, and both players minimize a
//! cross-entropy objective:
//!
//! ```text
//! J_D = −E_u[log D_ra(u, v)] − E_v[log(1 − D_ra(v, u))]
//! J_G = −E_v[log D_ra(v, u)] − E_u[log(1 − D_ra(u, v))]
//! ```
//!
//! Batch means stand in for the expectations. Log arguments are clamped
//! below at 1e-12.

use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Discriminator and generator losses for one batch of logits.
pub fn ragan_losses(real_logits: &[f64], fake_logits: &[f64]) -> Result<(f64, f64)> {
    let g = ragan_with_grads(real_logits, fake_logits)?;
    Ok((g.j_d, g.j_g))
}

/// Losses plus their gradients w.r.t. the logits.
#[derive(Debug, Clone)]
pub struct RaganGrads {
    pub j_d: f64,
    pub j_g: f64,
    pub d_jd_real: Vec<f64>,
    pub d_jd_fake: Vec<f64>,
    pub d_jg_fake: Vec<f64>,
}

pub fn ragan_with_grads(real_logits: &[f64], fake_logits: &[f64]) -> Result<RaganGrads> {
    if real_logits.is_empty() || fake_logits.is_empty() {
        return Err(Error::invalid("RaGAN losses need nonempty real and fake batches"));
    }
    let bu = real_logits.len() as f64;
    let bv = fake_logits.len() as f64;
    let mean_real = real_logits.iter().sum::<f64>() / bu;
    let mean_fake = fake_logits.iter().sum::<f64>() / bv;

    // a_i = C(u_i) − mean C(v);  b_j = C(v_j) − mean C(u)
    let sig_a: Vec<f64> = real_logits.iter().map(|&u| sigmoid(u - mean_fake)).collect();
    let sig_b: Vec<f64> = fake_logits.iter().map(|&v| sigmoid(v - mean_real)).collect();
    let mean_sig_a = sig_a.iter().sum::<f64>() / bu;
    let mean_sig_b = sig_b.iter().sum::<f64>() / bv;
    let mean_one_m_sig_a = 1.0 - mean_sig_a;

    let j_d = -sig_a.iter().map(|&s| s.max(LOG_FLOOR).ln()).sum::<f64>() / bu
        - sig_b.iter().map(|&s| (1.0 - s).max(LOG_FLOOR).ln()).sum::<f64>() / bv;
    let j_g = -sig_b.iter().map(|&s| s.max(LOG_FLOOR).ln()).sum::<f64>() / bv
        - sig_a.iter().map(|&s| (1.0 - s).max(LOG_FLOOR).ln()).sum::<f64>() / bu;

    // d log σ(a)/da = 1 − σ(a);   d log(1 − σ(b))/db = −σ(b)
    let d_jd_real: Vec<f64> =
        sig_a.iter().map(|&s| -((1.0 - s) + mean_sig_b) / bu).collect();
    let d_jd_fake: Vec<f64> =
        sig_b.iter().map(|&s| (s + mean_one_m_sig_a) / bv).collect();
    let d_jg_fake: Vec<f64> =
        sig_b.iter().map(|&s| -((1.0 - s) + mean_sig_a) / bv).collect();

    Ok(RaganGrads { j_d, j_g, d_jd_real, d_jd_fake, d_jg_fake })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_equilibrium_evaluates_at_half() {
        // Identical logits: both relativistic scores sit at sigmoid(0)=0.5,
        // so every loss term is −ln(1/2).
        let logits = [0.3, 0.3, 0.3];
        let (jd, jg) = ragan_losses(&logits, &logits).unwrap();
        let expect = 2.0 * std::f64::consts::LN_2;
        assert_relative_eq!(jd, expect, epsilon = 1e-12);
        assert_relative_eq!(jg, expect, epsilon = 1e-12);
    }

    #[test]
    fn confident_discriminator_near_optimum() {
        // u = 10, v = −10: D_ra(u, v) = sigmoid(20) ≈ 1 → J_D ≈ 0.
        let (jd, jg) = ragan_losses(&[10.0], &[-10.0]).unwrap();
        assert!(jd < 1e-8, "jd {jd}");
        assert!(jg > 10.0, "jg {jg}"); // generator far from its optimum
    }

    #[test]
    fn shift_invariance() {
        let real = [0.4, -1.2, 2.2, 0.1];
        let fake = [-0.3, 0.8, -1.7];
        let (jd, jg) = ragan_losses(&real, &fake).unwrap();
        for shift in [-5.0, 3.3, 120.0] {
            let r2: Vec<f64> = real.iter().map(|v| v + shift).collect();
            let f2: Vec<f64> = fake.iter().map(|v| v + shift).collect();
            let (jd2, jg2) = ragan_losses(&r2, &f2).unwrap();
            assert!((jd - jd2).abs() < 1e-10, "jd shift {shift}: {jd} vs {jd2}");
            assert!((jg - jg2).abs() < 1e-10, "jg shift {shift}: {jg} vs {jg2}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let real = vec![0.5, -0.7, 1.3];
        let fake = vec![-0.2, 0.9];
        let g = ragan_with_grads(&real, &fake).unwrap();
        let eps = 1e-6;
        for i in 0..real.len() {
            let mut rp = real.clone();
            rp[i] += eps;
            let mut rm = real.clone();
            rm[i] -= eps;
            let fd_jd = (ragan_losses(&rp, &fake).unwrap().0
                - ragan_losses(&rm, &fake).unwrap().0)
                / (2.0 * eps);
            assert!(
                (g.d_jd_real[i] - fd_jd).abs() < 1e-8,
                "d_jd_real[{i}]: {} vs {}",
                g.d_jd_real[i],
                fd_jd
            );
        }
        for j in 0..fake.len() {
            let mut fp = fake.clone();
            fp[j] += eps;
            let mut fm = fake.clone();
            fm[j] -= eps;
            let (jd_p, jg_p) = ragan_losses(&real, &fp).unwrap();
            let (jd_m, jg_m) = ragan_losses(&real, &fm).unwrap();
            let fd_jd = (jd_p - jd_m) / (2.0 * eps);
            let fd_jg = (jg_p - jg_m) / (2.0 * eps);
            assert!(
                (g.d_jd_fake[j] - fd_jd).abs() < 1e-8,
                "d_jd_fake[{j}]: {} vs {}",
                g.d_jd_fake[j],
                fd_jd
            );
            assert!(
                (g.d_jg_fake[j] - fd_jg).abs() < 1e-8,
                "d_jg_fake[{j}]: {} vs {}",
                g.d_jg_fake[j],
                fd_jg
            );
        }
    }

    #[test]
    fn rejects_empty_batches() {
        assert!(ragan_losses(&[], &[1.0]).is_err());
        assert!(ragan_losses(&[1.0], &[]).is_err());
    }
}
