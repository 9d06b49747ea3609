//! Maximum mean discrepancy with an RBF kernel,
//! `k(x, y) = exp(−γ ‖x − y‖²)`, for monitoring how closely generated
//! fields match the training distribution. γ comes from the median
//! heuristic on the reference set: `γ = 1 / median²(pairwise distances)`.

use crate::error::{Error, Result};

/// `γ = 1 / median(‖x_i − x_j‖)²` over the reference samples.
pub fn median_heuristic_gamma(reference: &[Vec<f64>]) -> Result<f64> {
    if reference.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least two samples"));
    }
    let mut dists = Vec::with_capacity(reference.len() * (reference.len() - 1) / 2);
    for i in 0..reference.len() {
        for j in (i + 1)..reference.len() {
            let d: f64 = reference[i]
                .iter()
                .zip(&reference[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dists.push(d);
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = if dists.len() % 2 == 1 {
        dists[dists.len() / 2]
    } else {
        0.5 * (dists[dists.len() / 2 - 1] + dists[dists.len() / 2])
    };
    if !(median > 0.0) || !median.is_finite() {
        return Err(Error::DegenerateInput("median pairwise distance is zero or non-finite".into()));
    }
    Ok(1.0 / (median * median))
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Unbiased squared-MMD estimate between two sample sets with a fixed
/// kernel bandwidth. Both sets need at least two samples.
pub fn mmd_unbiased(p: &[Vec<f64>], q: &[Vec<f64>], gamma: f64) -> Result<f64> {
    let m = p.len();
    let n = q.len();
    if m < 2 || n < 2 {
        return Err(Error::invalid("the unbiased MMD estimator needs >= 2 samples per set"));
    }
    let dim = p[0].len();
    if p.iter().chain(q.iter()).any(|v| v.len() != dim) {
        return Err(Error::invalid("MMD samples must share a flattened length"));
    }
    let mut kxx = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                kxx += rbf(&p[i], &p[j], gamma);
            }
        }
    }
    kxx /= (m * (m - 1)) as f64;
    let mut kyy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                kyy += rbf(&q[i], &q[j], gamma);
            }
        }
    }
    kyy /= (n * (n - 1)) as f64;
    let mut kxy = 0.0;
    for pi in p {
        for qj in q {
            kxy += rbf(pi, qj, gamma);
        }
    }
    kxy /= (m * n) as f64;
    Ok(kxx + kyy - 2.0 * kxy)
}

/// Unbiased squared MMD with the bandwidth picked from the reference set
/// `p` by the median heuristic.
pub fn mmd(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    let gamma = median_heuristic_gamma(p)?;
    mmd_unbiased(p, q, gamma)
}
