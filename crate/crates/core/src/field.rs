//! Core geometric and spectral types: positions, grids, direction sampling,
//! wavenumbers, and plane-wave dictionary construction.
//!
//! A dictionary column is the plane-wave atom `exp(j k d_n · r)` evaluated at
//! the measurement positions; the matrix maps plane-wave coefficients to
//! pressures, `p = H x`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

/// Speed of sound in air at 20 °C, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// A point in 3-D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot3(&self, v: [f64; 3]) -> f64 {
        self.x * v[0] + self.y * v[1] + self.z * v[2]
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// A regular planar measurement grid. Positions are enumerated row-major,
/// `index = iy * nx + ix`, with the x-axis index varying fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid2D {
    origin: Position3,
    spacing: f64,
    nx: usize,
    ny: usize,
    normal: [f64; 3],
    axis_u: [f64; 3],
    axis_v: [f64; 3],
}

impl Grid2D {
    /// Builds a grid in the plane through `origin` with the given unit
    /// `normal`. The in-plane axes are derived deterministically from the
    /// normal; for a `+z` normal they are `+x` and `+y`.
    pub fn new(origin: Position3, spacing: f64, nx: usize, ny: usize, normal: [f64; 3]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid must have nx, ny >= 1"));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        let n = norm3(normal);
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("grid normal must be a unit vector, norm was {n}")));
        }
        let normal = normalize3(normal);
        let ez = [0.0, 0.0, 1.0];
        let (axis_u, axis_v) = if norm3(cross(ez, normal)) < 1e-9 {
            // Plane normal along ±z: use the canonical x/y axes.
            let u = [1.0, 0.0, 0.0];
            (u, cross(normal, u))
        } else {
            let u = normalize3(cross(ez, normal));
            (u, cross(normal, u))
        };
        Ok(Grid2D { origin, spacing, nx, ny, normal, axis_u, axis_v })
    }

    /// Grid in the z = origin.z plane with axes +x, +y.
    pub fn axis_aligned(origin: Position3, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        Grid2D::new(origin, spacing, nx, ny, [0.0, 0.0, 1.0])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Position3 {
        self.origin
    }

    pub fn normal(&self) -> [f64; 3] {
        self.normal
    }

    pub fn axes(&self) -> ([f64; 3], [f64; 3]) {
        (self.axis_u, self.axis_v)
    }

    pub fn position(&self, ix: usize, iy: usize) -> Position3 {
        let s = self.spacing;
        Position3::new(
            self.origin.x + (ix as f64 * self.axis_u[0] + iy as f64 * self.axis_v[0]) * s,
            self.origin.y + (ix as f64 * self.axis_u[1] + iy as f64 * self.axis_v[1]) * s,
            self.origin.z + (ix as f64 * self.axis_u[2] + iy as f64 * self.axis_v[2]) * s,
        )
    }

    /// All nx·ny positions in row-major order.
    pub fn positions(&self) -> Vec<Position3> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(self.position(ix, iy));
            }
        }
        out
    }

    /// Radius of the circumscribed circle around the aperture, measured from
    /// its center. Used for Vekua wave-count estimates.
    pub fn circumradius(&self) -> f64 {
        let half_diag = ((self.nx - 1) as f64).hypot((self.ny - 1) as f64) * self.spacing / 2.0;
        half_diag
    }
}

/// How plane-wave directions are drawn from the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingScheme {
    /// I.i.d. uniform points on S² (Marsaglia's method).
    UniformRandom,
    /// Deterministic Fibonacci (golden-angle) lattice; ignores the seed.
    Fibonacci,
    /// Caller-supplied vectors (oracles, known-atom test fields).
    Explicit,
}

/// A set of unit direction vectors with its sampling provenance.
///
/// Two sets with the same `(scheme, seed, len)` are identical by construction,
/// which is how dictionary compatibility is checked.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    directions: Vec<[f64; 3]>,
    scheme: SamplingScheme,
    seed: u64,
}

impl DirectionSet {
    /// Wraps caller-supplied unit vectors as an `Explicit` direction set.
    pub fn from_vectors(directions: Vec<[f64; 3]>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("direction set must be nonempty"));
        }
        for d in &directions {
            let n = norm3(*d);
            if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("direction norm {n} is not 1 within 1e-12")));
            }
        }
        Ok(DirectionSet { directions, scheme: SamplingScheme::Explicit, seed: 0 })
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Provenance equality: same scheme, seed and count generate the same
    /// vectors bit for bit. Explicit sets compare their vector data.
    pub fn same_sampling(&self, other: &DirectionSet) -> bool {
        if self.scheme != other.scheme || self.len() != other.len() {
            return false;
        }
        match self.scheme {
            SamplingScheme::Explicit => self.directions == other.directions,
            _ => self.seed == other.seed,
        }
    }
}

/// Draws `n` unit direction vectors.
///
/// `UniformRandom` draws i.i.d. uniform points on the sphere and is
/// bit-reproducible given the seed; `Fibonacci` is deterministic given `n`.
pub fn sample_directions(n: usize, scheme: SamplingScheme, seed: u64) -> Result<DirectionSet> {
    if n == 0 {
        return Err(Error::invalid("direction count must be >= 1"));
    }
    if scheme == SamplingScheme::Explicit {
        return Err(Error::invalid("explicit direction sets are built with DirectionSet::from_vectors"));
    }
    let directions = match scheme {
        SamplingScheme::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    let z: f64 = rng.gen_range(-1.0..=1.0);
                    let theta: f64 = rng.gen_range(0.0..2.0 * PI);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    normalize3([r * theta.cos(), r * theta.sin(), z])
                })
                .collect()
        }
        SamplingScheme::Fibonacci => {
            let golden_angle = PI * (3.0 - 5.0_f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let theta = golden_angle * i as f64;
                    normalize3([r * theta.cos(), r * theta.sin(), z])
                })
                .collect()
        }
        SamplingScheme::Explicit => unreachable!("rejected above"),
    };
    Ok(DirectionSet { directions, scheme, seed })
}

/// Angular wavenumber `2πf / c` in rad/m.
pub fn wavenumber(frequency_hz: f64, speed_of_sound: f64) -> Result<f64> {
    if !speed_of_sound.is_finite() || speed_of_sound <= 0.0 {
        return Err(Error::invalid(format!(
            "speed of sound must be positive and finite, got {speed_of_sound}"
        )));
    }
    if !frequency_hz.is_finite() || frequency_hz < 0.0 {
        return Err(Error::invalid(format!("frequency must be >= 0, got {frequency_hz}")));
    }
    Ok(2.0 * PI * frequency_hz / speed_of_sound)
}

/// Number of plane waves sufficient to represent a field in a domain of
/// radius `radius` at wavenumber `k`, per the Vekua estimate
/// `(⌈k·radius⌉ + 1)²`.
pub fn vekua_wave_count(k: f64, radius: f64) -> Result<usize> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::invalid(format!("wavenumber must be >= 0, got {k}")));
    }
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::invalid(format!("radius must be >= 0, got {radius}")));
    }
    let n = (k * radius).ceil() + 1.0;
    Ok((n * n) as usize)
}

/// Complex pressure samples at known positions for one frequency.
#[derive(Debug, Clone)]
pub struct PressureField {
    pub values: Array1<Complex64>,
    pub positions: Vec<Position3>,
    pub frequency: f64,
}

impl PressureField {
    pub fn new(values: Array1<Complex64>, positions: Vec<Position3>, frequency: f64) -> Result<Self> {
        if values.len() != positions.len() {
            return Err(Error::invalid(format!(
                "pressure value count {} does not match position count {}",
                values.len(),
                positions.len()
            )));
        }
        if !frequency.is_finite() || frequency < 0.0 {
            return Err(Error::invalid(format!("frequency must be >= 0, got {frequency}")));
        }
        Ok(PressureField { values, positions, frequency })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Plane-wave coefficients, optionally bound to the direction set they were
/// fitted on. Generator outputs are unbound until projected.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    pub values: Array1<Complex64>,
    pub directions: Option<Arc<DirectionSet>>,
}

impl CoefficientVector {
    pub fn bound(values: Array1<Complex64>, directions: Arc<DirectionSet>) -> Result<Self> {
        if values.len() != directions.len() {
            return Err(Error::invalid(format!(
                "coefficient count {} does not match direction count {}",
                values.len(),
                directions.len()
            )));
        }
        Ok(CoefficientVector { values, directions: Some(directions) })
    }

    pub fn unbound(values: Array1<Complex64>) -> Self {
        CoefficientVector { values, directions: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
}

/// The M×N plane-wave transfer matrix `H[m, n] = exp(j k d_n · r_m)`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub entries: Array2<Complex64>,
    pub k: f64,
    pub positions: Vec<Position3>,
    pub directions: Arc<DirectionSet>,
}

impl Dictionary {
    pub fn num_measurements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.entries.ncols()
    }

    /// True when both dictionaries were built on the same direction sampling
    /// and wavenumber, so coefficients transfer between them.
    pub fn compatible_with(&self, other: &Dictionary) -> bool {
        self.k == other.k && self.directions.same_sampling(&other.directions)
    }
}

/// Builds the plane-wave dictionary at the given positions and wavenumber.
/// Rows are computed independently (parallelized); the result does not depend
/// on the parallelism.
pub fn build_dictionary(
    positions: &[Position3],
    directions: Arc<DirectionSet>,
    k: f64,
) -> Result<Dictionary> {
    if positions.is_empty() {
        return Err(Error::invalid("dictionary needs at least one position"));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(Error::invalid(format!("wavenumber must be >= 0, got {k}")));
    }
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("dictionary positions must be finite"));
    }
    let n = directions.len();
    let dirs = directions.directions();
    let rows: Vec<Vec<Complex64>> = positions
        .par_iter()
        .map(|r| {
            let mut row = Vec::with_capacity(n);
            for d in dirs {
                let phase = k * r.dot3(*d);
                let (s, c) = phase.sin_cos();
                row.push(Complex64::new(c, s));
            }
            row
        })
        .collect();
    let mut entries = Array2::zeros((positions.len(), n));
    for (m, row) in rows.into_iter().enumerate() {
        for (nn, v) in row.into_iter().enumerate() {
            entries[[m, nn]] = v;
        }
    }
    Ok(Dictionary { entries, k, positions: positions.to_vec(), directions })
}

/// Evaluates `exp(j k d · r)` over all grid positions (row-major) using a
/// phase recurrence along the lattice axes. Exact up to ~1e-14; used by the
/// synthetic field generator and the training fast path where per-entry
/// `sin_cos` would dominate the runtime.
pub(crate) fn grid_wave(grid: &Grid2D, k: f64, d: [f64; 3], out: &mut [Complex64]) {
    debug_assert_eq!(out.len(), grid.len());
    let (u, v) = grid.axes();
    let s = grid.spacing();
    let phase0 = k * grid.origin().dot3(d);
    let dpx = k * s * (d[0] * u[0] + d[1] * u[1] + d[2] * u[2]);
    let dpy = k * s * (d[0] * v[0] + d[1] * v[1] + d[2] * v[2]);
    let e0 = Complex64::new(phase0.cos(), phase0.sin());
    let ax = Complex64::new(dpx.cos(), dpx.sin());
    let ay = Complex64::new(dpy.cos(), dpy.sin());
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut row_start = e0;
    for iy in 0..ny {
        let mut e = row_start;
        let base = iy * nx;
        for ix in 0..nx {
            out[base + ix] = e;
            e *= ax;
        }
        row_start *= ay;
        // Re-normalize to keep |e| = 1 against multiplicative drift.
        let n = row_start.norm();
        if n > 0.0 {
            row_start /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wavenumber_values() {
        assert_eq!(wavenumber(0.0, 343.0).unwrap(), 0.0);
        assert_relative_eq!(wavenumber(4000.0, 343.0).unwrap(), 2.0 * PI * 4000.0 / 343.0, epsilon = 1e-12);
        assert_relative_eq!(wavenumber(4000.0, 343.0).unwrap(), 73.273, epsilon = 0.001);
        assert_relative_eq!(wavenumber(500.0, 343.0).unwrap(), 9.1592, epsilon = 0.0001);
    }

    #[test]
    fn wavenumber_linearity() {
        for f in [10.0, 137.0, 999.5, 3999.0] {
            let a = wavenumber(f, 343.0).unwrap();
            let b = wavenumber(2.0 * f, 343.0).unwrap();
            assert_relative_eq!(b, 2.0 * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn wavenumber_rejects_bad_speed() {
        assert!(wavenumber(100.0, 0.0).is_err());
        assert!(wavenumber(100.0, -1.0).is_err());
        assert!(wavenumber(100.0, f64::NAN).is_err());
        assert!(wavenumber(-1.0, 343.0).is_err());
    }

    #[test]
    fn vekua_examples() {
        assert_eq!(vekua_wave_count(0.0, 1.0).unwrap(), 1);
        // k*radius = 3.2 -> (4 + 1)^2
        assert_eq!(vekua_wave_count(3.2, 1.0).unwrap(), 25);
        // radius 0.7 m at 4 kHz, c = 343 m/s
        let k = wavenumber(4000.0, 343.0).unwrap();
        assert_eq!(vekua_wave_count(k, 0.7).unwrap(), 2809);
        assert!(vekua_wave_count(-1.0, 1.0).is_err());
        assert!(vekua_wave_count(1.0, -1.0).is_err());
    }

    #[test]
    fn directions_are_unit_and_reproducible() {
        for scheme in [SamplingScheme::UniformRandom, SamplingScheme::Fibonacci] {
            let a = sample_directions(500, scheme, 42).unwrap();
            let b = sample_directions(500, scheme, 42).unwrap();
            for (da, db) in a.directions().iter().zip(b.directions()) {
                assert_eq!(da, db);
                assert!((norm3(*da) - 1.0).abs() < 1e-12);
            }
        }
        assert!(sample_directions(0, SamplingScheme::UniformRandom, 0).is_err());
    }

    #[test]
    fn uniform_directions_average_out() {
        // Monte Carlo bound: the mean of 4096 uniform sphere points has norm
        // well below 0.05 with overwhelming probability.
        let set = sample_directions(4096, SamplingScheme::UniformRandom, 7).unwrap();
        let mut mean = [0.0; 3];
        for d in set.directions() {
            mean[0] += d[0];
            mean[1] += d[1];
            mean[2] += d[2];
        }
        for m in &mut mean {
            *m /= 4096.0;
        }
        assert!(norm3(mean) < 0.05, "mean norm {}", norm3(mean));
    }

    #[test]
    fn dictionary_row_at_origin_is_ones() {
        let dirs = Arc::new(sample_directions(64, SamplingScheme::UniformRandom, 1).unwrap());
        let positions = vec![Position3::new(0.0, 0.0, 0.0), Position3::new(0.3, -0.2, 0.1)];
        let dict = build_dictionary(&positions, dirs, 9.16).unwrap();
        for n in 0..64 {
            assert_relative_eq!(dict.entries[[0, n]].re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(dict.entries[[0, n]].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dictionary_entries_unit_modulus() {
        let dirs = Arc::new(sample_directions(128, SamplingScheme::Fibonacci, 0).unwrap());
        let positions: Vec<Position3> =
            (0..40).map(|i| Position3::new(i as f64 * 0.03, (i % 5) as f64 * 0.07, -0.4)).collect();
        let dict = build_dictionary(&positions, dirs, 73.26).unwrap();
        for v in dict.entries.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_single_entry_is_minus_one() {
        // r = (1,0,0), d = (1,0,0), k = pi -> exp(j*pi) = -1
        let dirs = Arc::new(DirectionSet {
            directions: vec![[1.0, 0.0, 0.0]],
            scheme: SamplingScheme::Fibonacci,
            seed: 0,
        });
        let dict = build_dictionary(&[Position3::new(1.0, 0.0, 0.0)], dirs, PI).unwrap();
        assert_relative_eq!(dict.entries[[0, 0]].re, -1.0, epsilon = 1e-12);
        assert!(dict.entries[[0, 0]].im.abs() < 1e-12);
    }

    #[test]
    fn dictionary_translation_covariance() {
        let dirs = Arc::new(sample_directions(32, SamplingScheme::UniformRandom, 3).unwrap());
        let k = 12.5;
        let positions: Vec<Position3> =
            (0..10).map(|i| Position3::new(i as f64 * 0.05, 0.02 * i as f64, 0.0)).collect();
        let delta = [0.11, -0.07, 0.23];
        let shifted: Vec<Position3> = positions
            .iter()
            .map(|p| Position3::new(p.x + delta[0], p.y + delta[1], p.z + delta[2]))
            .collect();
        let d0 = build_dictionary(&positions, dirs.clone(), k).unwrap();
        let d1 = build_dictionary(&shifted, dirs.clone(), k).unwrap();
        for m in 0..positions.len() {
            for n in 0..32 {
                let dn = dirs.directions()[n];
                let phase = k * (dn[0] * delta[0] + dn[1] * delta[1] + dn[2] * delta[2]);
                let factor = Complex64::new(phase.cos(), phase.sin());
                let expect = d0.entries[[m, n]] * factor;
                assert_relative_eq!(d1.entries[[m, n]].re, expect.re, epsilon = 1e-10);
                assert_relative_eq!(d1.entries[[m, n]].im, expect.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn grid_positions_row_major() {
        let g = Grid2D::axis_aligned(Position3::new(-0.5, -0.5, 0.0), 0.05, 21, 21).unwrap();
        assert_eq!(g.len(), 441);
        let ps = g.positions();
        assert_relative_eq!(ps[0].x, -0.5);
        assert_relative_eq!(ps[1].x, -0.45);
        assert_relative_eq!(ps[1].y, -0.5);
        assert_relative_eq!(ps[21].y, -0.45);
        assert_relative_eq!(ps[440].x, 0.5);
        assert_relative_eq!(ps[440].y, 0.5);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        let o = Position3::new(0.0, 0.0, 0.0);
        assert!(Grid2D::axis_aligned(o, 0.0, 3, 3).is_err());
        assert!(Grid2D::axis_aligned(o, -0.1, 3, 3).is_err());
        assert!(Grid2D::new(o, 0.05, 0, 3, [0.0, 0.0, 1.0]).is_err());
        assert!(Grid2D::new(o, 0.05, 3, 3, [0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn grid_wave_matches_direct_evaluation() {
        let g = Grid2D::new(
            Position3::new(0.2, -0.1, 0.4),
            0.05,
            13,
            9,
            normalize3([0.3, -0.5, 0.81]),
        )
        .unwrap();
        let d = normalize3([0.2, 0.9, -0.4]);
        let k = 36.6;
        let mut fast = vec![Complex64::new(0.0, 0.0); g.len()];
        grid_wave(&g, k, d, &mut fast);
        for (i, r) in g.positions().iter().enumerate() {
            let phase = k * r.dot3(d);
            let direct = Complex64::new(phase.cos(), phase.sin());
            assert!((fast[i] - direct).norm() < 1e-12, "mismatch at {i}");
        }
    }

    #[test]
    fn pressure_field_validates_lengths() {
        let vals = Array1::from_vec(vec![Complex64::new(1.0, 0.0)]);
        assert!(PressureField::new(vals.clone(), vec![], 100.0).is_err());
        let ok = PressureField::new(vals, vec![Position3::new(0.0, 0.0, 0.0)], 100.0).unwrap();
        assert_eq!(ok.len(), 1);
    }
}
