//! Portable container format and dataset adapters.
//!
//! A container file is a UTF-8 JSON manifest (schema version, array names,
//! dtypes, shapes, byte offsets, metadata) followed by raw little-endian
//! array payloads:
//!
//! ```text
//! [b"SFC1"] [u64 LE manifest length] [manifest JSON] [payload bytes]
//! ```
//!
//! Complex arrays ("c128") are interleaved (real, imaginary) f64 pairs.
//! Round trips are bit-exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Position3;
use crate::rir::RirDataset;

type Complex64 = Complex<f64>;

const MAGIC: &[u8; 4] = b"SFC1";
const SCHEMA_VERSION: u32 = 1;

/// Typed array payload.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C128(Vec<Complex64>),
    I64(Vec<i64>),
    U8(Vec<u8>),
}

impl ArrayData {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F32(_) => "f32",
            ArrayData::F64(_) => "f64",
            ArrayData::C128(_) => "c128",
            ArrayData::I64(_) => "i64",
            ArrayData::U8(_) => "u8",
        }
    }

    fn elem_count(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
            ArrayData::C128(v) => v.len(),
            ArrayData::I64(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    fn byte_len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len() * 4,
            ArrayData::F64(v) => v.len() * 8,
            ArrayData::C128(v) => v.len() * 16,
            ArrayData::I64(v) => v.len() * 8,
            ArrayData::U8(v) => v.len(),
        }
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::C128(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
            ArrayData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::U8(v) => out.extend_from_slice(v),
        }
    }

    fn read_from(dtype: &str, bytes: &[u8], name: &str) -> Result<ArrayData> {
        let chunk_err = |size: usize| {
            Error::Format(format!(
                "array '{name}': payload length {} is not a multiple of element size {size}",
                bytes.len()
            ))
        };
        match dtype {
            "f32" => {
                if bytes.len() % 4 != 0 {
                    return Err(chunk_err(4));
                }
                Ok(ArrayData::F32(
                    bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
                ))
            }
            "f64" => {
                if bytes.len() % 8 != 0 {
                    return Err(chunk_err(8));
                }
                Ok(ArrayData::F64(
                    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
                ))
            }
            "c128" => {
                if bytes.len() % 16 != 0 {
                    return Err(chunk_err(16));
                }
                Ok(ArrayData::C128(
                    bytes
                        .chunks_exact(16)
                        .map(|c| {
                            Complex64::new(
                                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                                f64::from_le_bytes(c[8..16].try_into().unwrap()),
                            )
                        })
                        .collect(),
                ))
            }
            "i64" => {
                if bytes.len() % 8 != 0 {
                    return Err(chunk_err(8));
                }
                Ok(ArrayData::I64(
                    bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect(),
                ))
            }
            "u8" => Ok(ArrayData::U8(bytes.to_vec())),
            other => Err(Error::Format(format!("array '{name}': unknown dtype '{other}'"))),
        }
    }
}

/// A named, shaped array in a container.
#[derive(Debug, Clone)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

#[derive(Serialize, Deserialize)]
struct ManifestArray {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    nbytes: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    endianness: String,
    arrays: Vec<ManifestArray>,
    metadata: BTreeMap<String, String>,
}

/// An in-memory container: ordered named arrays plus a string metadata map.
#[derive(Debug, Default, Clone)]
pub struct Container {
    pub arrays: Vec<NamedArray>,
    pub metadata: BTreeMap<String, String>,
}

impl Container {
    pub fn new() -> Self {
        Container::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: ArrayData) -> Result<()> {
        let name = name.into();
        if self.arrays.iter().any(|a| a.name == name) {
            return Err(Error::invalid(format!("duplicate array name '{name}'")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.elem_count() {
            return Err(Error::invalid(format!(
                "array '{name}': shape {shape:?} implies {expected} elements, data has {}",
                data.elem_count()
            )));
        }
        self.arrays.push(NamedArray { name, shape, data });
        Ok(())
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Format(format!("missing array '{name}'")))
    }

    pub fn get_f64(&self, name: &str) -> Result<(&[usize], &[f64])> {
        let a = self.get(name)?;
        match &a.data {
            ArrayData::F64(v) => Ok((&a.shape, v)),
            other => Err(Error::Format(format!(
                "array '{name}': expected dtype f64, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn get_f32(&self, name: &str) -> Result<(&[usize], &[f32])> {
        let a = self.get(name)?;
        match &a.data {
            ArrayData::F32(v) => Ok((&a.shape, v)),
            other => Err(Error::Format(format!(
                "array '{name}': expected dtype f32, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn get_c128(&self, name: &str) -> Result<(&[usize], &[Complex64])> {
        let a = self.get(name)?;
        match &a.data {
            ArrayData::C128(v) => Ok((&a.shape, v)),
            other => Err(Error::Format(format!(
                "array '{name}': expected dtype c128, found {}",
                other.dtype()
            ))),
        }
    }

    pub fn get_i64(&self, name: &str) -> Result<(&[usize], &[i64])> {
        let a = self.get(name)?;
        match &a.data {
            ArrayData::I64(v) => Ok((&a.shape, v)),
            other => Err(Error::Format(format!(
                "array '{name}': expected dtype i64, found {}",
                other.dtype()
            ))),
        }
    }

    /// Scalar convenience: a shape-[] or shape-[1] f64 array.
    pub fn get_scalar(&self, name: &str) -> Result<f64> {
        let (shape, v) = self.get_f64(name)?;
        if v.len() != 1 {
            return Err(Error::Format(format!(
                "array '{name}': expected a scalar, found shape {shape:?}"
            )));
        }
        Ok(v[0])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut arrays = Vec::with_capacity(self.arrays.len());
        for a in &self.arrays {
            let offset = payload.len() as u64;
            a.data.write_to(&mut payload);
            arrays.push(ManifestArray {
                name: a.name.clone(),
                dtype: a.data.dtype().to_string(),
                shape: a.shape.clone(),
                offset,
                nbytes: a.data.byte_len() as u64,
            });
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            endianness: "little".to_string(),
            arrays,
            metadata: self.metadata.clone(),
        };
        let manifest_json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(12 + manifest_json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest_json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Container> {
        if bytes.len() < 12 || &bytes[0..4] != MAGIC {
            return Err(Error::Format("not a container file (bad magic)".to_string()));
        }
        let mlen = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        if 12 + mlen > bytes.len() {
            return Err(Error::Format(format!(
                "manifest length {mlen} exceeds file size {}",
                bytes.len()
            )));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[12..12 + mlen])?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        if manifest.endianness != "little" {
            return Err(Error::Format(format!("unsupported endianness '{}'", manifest.endianness)));
        }
        let payload = &bytes[12 + mlen..];
        let mut arrays = Vec::with_capacity(manifest.arrays.len());
        for ma in &manifest.arrays {
            let start = ma.offset as usize;
            let end = start + ma.nbytes as usize;
            if end > payload.len() {
                return Err(Error::Format(format!(
                    "array '{}': declared range [{start}, {end}) exceeds payload length {}",
                    ma.name,
                    payload.len()
                )));
            }
            let data = ArrayData::read_from(&ma.dtype, &payload[start..end], &ma.name)?;
            let expected: usize = ma.shape.iter().product();
            if expected != data.elem_count() {
                return Err(Error::Format(format!(
                    "array '{}': shape {:?} implies {expected} elements, payload holds {}",
                    ma.name,
                    ma.shape,
                    data.elem_count()
                )));
            }
            arrays.push(NamedArray { name: ma.name.clone(), shape: ma.shape.clone(), data });
        }
        Ok(Container { arrays, metadata: manifest.metadata })
    }

    pub fn read(path: &Path) -> Result<Container> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Container::from_bytes(&bytes)
    }
}

fn positions_from_array(shape: &[usize], data: &[f64], name: &str) -> Result<Vec<Position3>> {
    if shape.len() != 2 || shape[1] != 3 {
        return Err(Error::Format(format!(
            "array '{name}': expected shape M×3, found {shape:?}"
        )));
    }
    Ok(data.chunks_exact(3).map(|c| Position3::new(c[0], c[1], c[2])).collect())
}

fn rirs_from_array(shape: &[usize], data: &[f64], m: usize, name: &str) -> Result<Array2<f64>> {
    if shape.len() != 2 || shape[0] != m {
        return Err(Error::Format(format!(
            "array '{name}': expected shape {m}×T, found {shape:?}"
        )));
    }
    Ok(Array2::from_shape_vec((shape[0], shape[1]), data.to_vec()).expect("validated shape"))
}

/// Regular-lattice structure detected in a position set.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedGrid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

/// Best-effort detection of an axis-aligned planar lattice (constant z,
/// uniformly spaced unique x and y values covering all nx·ny combinations).
pub fn detect_grid(positions: &[Position3]) -> Option<DetectedGrid> {
    if positions.is_empty() {
        return None;
    }
    let tol = 1e-6;
    let z0 = positions[0].z;
    if positions.iter().any(|p| (p.z - z0).abs() > tol) {
        return None;
    }
    let mut xs: Vec<f64> = positions.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = positions.iter().map(|p| p.y).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < tol);
    ys.dedup_by(|a, b| (*a - *b).abs() < tol);
    let (nx, ny) = (xs.len(), ys.len());
    if nx * ny != positions.len() {
        return None;
    }
    let spacing = if nx > 1 {
        xs[1] - xs[0]
    } else if ny > 1 {
        ys[1] - ys[0]
    } else {
        return Some(DetectedGrid { nx: 1, ny: 1, spacing: 0.0 });
    };
    let uniform = |v: &[f64]| v.windows(2).all(|w| ((w[1] - w[0]) - spacing).abs() < tol);
    if !uniform(&xs) || !uniform(&ys) {
        return None;
    }
    Some(DetectedGrid { nx, ny, spacing })
}

/// Loads a planar grid RIR dataset: arrays `positions` (M×3), `rirs` (M×T)
/// and scalar `fs`. Returns the dataset and the detected lattice structure,
/// if any.
pub fn load_grid_dataset(path: &Path) -> Result<(RirDataset, Option<DetectedGrid>)> {
    let c = Container::read(path)?;
    let (pshape, pdata) = c.get_f64("positions")?;
    let positions = positions_from_array(pshape, pdata, "positions")?;
    let (rshape, rdata) = c.get_f64("rirs")?;
    let rirs = rirs_from_array(rshape, rdata, positions.len(), "rirs")?;
    let fs = c.get_scalar("fs")?;
    let grid = detect_grid(&positions);
    Ok((RirDataset::new(positions, rirs, fs)?, grid))
}

/// Writes a planar grid RIR dataset in the layout `load_grid_dataset`
/// expects.
pub fn save_grid_dataset(path: &Path, dataset: &RirDataset) -> Result<()> {
    let mut c = Container::new();
    let m = dataset.len();
    let mut pos = Vec::with_capacity(m * 3);
    for p in &dataset.positions {
        pos.extend_from_slice(&[p.x, p.y, p.z]);
    }
    c.push("positions", vec![m, 3], ArrayData::F64(pos))?;
    c.push(
        "rirs",
        vec![m, dataset.num_samples()],
        ArrayData::F64(dataset.impulse_responses.iter().cloned().collect()),
    )?;
    c.push("fs", vec![], ArrayData::F64(vec![dataset.fs]))?;
    c.write(path)
}

/// A spherical-array dataset split into its fitting and reconstruction sets.
#[derive(Debug)]
pub struct SphericalDataset {
    /// Sphere microphones plus anchor points, in file order.
    pub fitting: RirDataset,
    /// The reconstruction plane.
    pub reconstruction: RirDataset,
    /// Geometry/count validation notes (real rigs drift; these warn, never
    /// fail).
    pub warnings: Vec<String>,
}

/// Loads a spherical-array dataset: arrays `sphere_positions`/`sphere_rirs`,
/// optional `anchor_positions`/`anchor_rirs`, and
/// `plane_positions`/`plane_rirs` with scalar `fs`.
///
/// The expected layout is 97 sphere microphones of radius 0.5 m plus 5
/// anchors (the fitting set) and a 703-point plane of radius 0.7 m (the
/// reconstruction set); deviations are reported as warnings with a 1 cm
/// radius tolerance.
pub fn load_spherical_dataset(path: &Path) -> Result<SphericalDataset> {
    let c = Container::read(path)?;
    let mut warnings = Vec::new();

    let (pshape, pdata) = c.get_f64("sphere_positions")?;
    let sphere_positions = positions_from_array(pshape, pdata, "sphere_positions")?;
    let (rshape, rdata) = c.get_f64("sphere_rirs")?;
    let sphere_rirs = rirs_from_array(rshape, rdata, sphere_positions.len(), "sphere_rirs")?;

    let (anchor_positions, anchor_rirs) = if c.get("anchor_positions").is_ok() {
        let (ashape, adata) = c.get_f64("anchor_positions")?;
        let ap = positions_from_array(ashape, adata, "anchor_positions")?;
        let (arshape, ardata) = c.get_f64("anchor_rirs")?;
        let ar = rirs_from_array(arshape, ardata, ap.len(), "anchor_rirs")?;
        (ap, Some(ar))
    } else {
        (Vec::new(), None)
    };

    let (qshape, qdata) = c.get_f64("plane_positions")?;
    let plane_positions = positions_from_array(qshape, qdata, "plane_positions")?;
    let (sshape, sdata) = c.get_f64("plane_rirs")?;
    let plane_rirs = rirs_from_array(sshape, sdata, plane_positions.len(), "plane_rirs")?;

    let fs = c.get_scalar("fs")?;

    if sphere_positions.len() != 97 {
        warnings.push(format!("expected 97 sphere microphones, found {}", sphere_positions.len()));
    }
    if !anchor_positions.is_empty() && anchor_positions.len() != 5 {
        warnings.push(format!("expected 5 anchor points, found {}", anchor_positions.len()));
    }
    if plane_positions.len() != 703 {
        warnings.push(format!("expected 703 plane points, found {}", plane_positions.len()));
    }

    let centroid = |ps: &[Position3]| {
        let n = ps.len().max(1) as f64;
        Position3::new(
            ps.iter().map(|p| p.x).sum::<f64>() / n,
            ps.iter().map(|p| p.y).sum::<f64>() / n,
            ps.iter().map(|p| p.z).sum::<f64>() / n,
        )
    };
    let sc = centroid(&sphere_positions);
    let max_sphere_dev = sphere_positions
        .iter()
        .map(|p| (p.distance(&sc) - 0.5).abs())
        .fold(0.0f64, f64::max);
    if max_sphere_dev > 0.01 {
        warnings.push(format!(
            "sphere radius deviates from 0.5 m by up to {max_sphere_dev:.4} m"
        ));
    }
    let pc = centroid(&plane_positions);
    let max_plane_radius = plane_positions.iter().map(|p| p.distance(&pc)).fold(0.0f64, f64::max);
    if (max_plane_radius - 0.7).abs() > 0.01 {
        warnings.push(format!(
            "plane radius {max_plane_radius:.4} m differs from 0.7 m by more than 1 cm"
        ));
    }

    let t = sphere_rirs.ncols();
    if plane_rirs.ncols() != t || anchor_rirs.as_ref().map(|a| a.ncols() != t).unwrap_or(false) {
        return Err(Error::Format("all RIR groups must share the time length".to_string()));
    }

    let mut fit_positions = sphere_positions;
    let mut fit_rows: Vec<f64> = sphere_rirs.iter().cloned().collect();
    if let Some(ar) = anchor_rirs {
        fit_positions.extend(anchor_positions);
        fit_rows.extend(ar.iter().cloned());
    }
    let fit_rirs = Array2::from_shape_vec((fit_positions.len(), t), fit_rows)
        .map_err(|e| Error::Format(format!("fitting RIR assembly: {e}")))?;

    Ok(SphericalDataset {
        fitting: RirDataset::new(fit_positions, fit_rirs, fs)?,
        reconstruction: RirDataset::new(plane_positions, plane_rirs, fs)?,
        warnings,
    })
}

/// Uniform random subset of `count` channels without replacement. Kept
/// indices are returned sorted ascending, so channel order is preserved.
pub fn decimate_dataset(
    dataset: &RirDataset,
    count: usize,
    seed: u64,
) -> Result<(RirDataset, Vec<usize>)> {
    let m = dataset.len();
    if count == 0 || count > m {
        return Err(Error::invalid(format!("decimation count {count} outside [1, {m}]")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut kept: Vec<usize> = order.into_iter().take(count).collect();
    kept.sort_unstable();
    let positions: Vec<Position3> = kept.iter().map(|&i| dataset.positions[i]).collect();
    let t = dataset.num_samples();
    let mut rirs = Array2::zeros((count, t));
    for (row, &i) in kept.iter().enumerate() {
        for ti in 0..t {
            rirs[[row, ti]] = dataset.impulse_responses[[i, ti]];
        }
    }
    Ok((RirDataset::new(positions, rirs, dataset.fs)?, kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip_bit_exact() {
        let mut c = Container::new();
        c.push("a", vec![2, 2], ArrayData::F64(vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5e300]))
            .unwrap();
        c.push("b", vec![3], ArrayData::F32(vec![0.1, f32::NAN, -7.0])).unwrap();
        c.push(
            "c",
            vec![2],
            ArrayData::C128(vec![Complex64::new(1.0, -2.0), Complex64::new(0.0, 1e-300)]),
        )
        .unwrap();
        c.push("d", vec![2], ArrayData::I64(vec![i64::MIN, i64::MAX])).unwrap();
        c.push("e", vec![4], ArrayData::U8(vec![0, 255, 17, 3])).unwrap();
        c.set_metadata("purpose", "test");
        let bytes = c.to_bytes().unwrap();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back.metadata.get("purpose").unwrap(), "test");
        assert_eq!(back.arrays.len(), 5);
        for (orig, read) in c.arrays.iter().zip(&back.arrays) {
            assert_eq!(orig.name, read.name);
            assert_eq!(orig.shape, read.shape);
            // Bit-exact: compare serialized bytes (handles NaN).
            let mut ob = Vec::new();
            let mut rb = Vec::new();
            orig.data.write_to(&mut ob);
            read.data.write_to(&mut rb);
            assert_eq!(ob, rb);
        }
        // Round trip of the whole file is byte-identical.
        assert_eq!(bytes, back.to_bytes().unwrap());
    }

    #[test]
    fn container_rejects_corruption() {
        let mut c = Container::new();
        c.push("x", vec![4], ArrayData::F64(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let mut bytes = c.to_bytes().unwrap();
        // Truncate the payload: declared range now exceeds it.
        bytes.truncate(bytes.len() - 8);
        let err = Container::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exceeds payload length"), "{msg}");
        // Bad magic.
        let err2 = Container::from_bytes(b"NOPE").unwrap_err();
        assert!(err2.to_string().contains("magic"));
    }

    #[test]
    fn container_rejects_shape_mismatch() {
        let mut c = Container::new();
        assert!(c.push("x", vec![3], ArrayData::F64(vec![1.0])).is_err());
        c.push("x", vec![1], ArrayData::F64(vec![1.0])).unwrap();
        assert!(c.push("x", vec![1], ArrayData::F64(vec![2.0])).is_err());
    }

    #[test]
    fn grid_dataset_round_trip_and_detection() {
        use crate::field::{Grid2D, Position3};
        let grid = Grid2D::axis_aligned(Position3::new(-0.5, -0.5, 0.0), 0.05, 21, 21).unwrap();
        let positions = grid.positions();
        let m = positions.len();
        let mut rirs = Array2::zeros((m, 32));
        for ch in 0..m {
            rirs[[ch, ch % 32]] = 1.0;
        }
        let ds = RirDataset::new(positions, rirs, 8000.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.sfc");
        save_grid_dataset(&path, &ds).unwrap();
        let (loaded, detected) = load_grid_dataset(&path).unwrap();
        assert_eq!(loaded.len(), 441);
        assert_eq!(loaded.fs, 8000.0);
        let g = detected.expect("21x21 lattice should be detected");
        assert_eq!((g.nx, g.ny), (21, 21));
        assert!((g.spacing - 0.05).abs() < 1e-9);
        // Channel order preserved bit-exactly.
        assert_eq!(loaded.impulse_responses, ds.impulse_responses);
    }

    #[test]
    fn single_channel_dataset_loads() {
        let ds = RirDataset::new(
            vec![Position3::new(0.0, 0.0, 0.0)],
            Array2::from_shape_vec((1, 4), vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            8000.0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("single.sfc");
        save_grid_dataset(&path, &ds).unwrap();
        let (loaded, detected) = load_grid_dataset(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(detected, Some(DetectedGrid { nx: 1, ny: 1, spacing: 0.0 }));
    }

    fn make_spherical_container(n_sphere: usize, n_anchor: usize, n_plane: usize) -> Container {
        use std::f64::consts::PI;
        let mut c = Container::new();
        let t = 8;
        // Antipodal pairs (plus a pole point when odd) keep the centroid
        // near the origin so the radius validation sees a clean rig.
        let mut sp = Vec::new();
        let pairs = n_sphere / 2;
        for i in 0..pairs {
            let theta = PI * (i as f64 + 0.5) / pairs as f64;
            let phi = 2.0 * PI * i as f64 * 0.618;
            let p = [
                0.5 * theta.sin() * phi.cos(),
                0.5 * theta.sin() * phi.sin(),
                0.5 * theta.cos(),
            ];
            sp.extend_from_slice(&p);
            sp.extend_from_slice(&[-p[0], -p[1], -p[2]]);
        }
        if n_sphere % 2 == 1 {
            sp.extend_from_slice(&[0.0, 0.0, 0.5]);
        }
        c.push("sphere_positions", vec![n_sphere, 3], ArrayData::F64(sp)).unwrap();
        c.push("sphere_rirs", vec![n_sphere, t], ArrayData::F64(vec![0.25; n_sphere * t])).unwrap();
        if n_anchor > 0 {
            let mut ap = Vec::new();
            for i in 0..n_anchor {
                ap.extend_from_slice(&[0.01 * i as f64, 0.0, 0.0]);
            }
            c.push("anchor_positions", vec![n_anchor, 3], ArrayData::F64(ap)).unwrap();
            c.push("anchor_rirs", vec![n_anchor, t], ArrayData::F64(vec![0.5; n_anchor * t]))
                .unwrap();
        }
        let mut pp = Vec::new();
        for i in 0..n_plane {
            let r = 0.7 * ((i + 1) as f64 / n_plane as f64);
            let phi = 2.0 * PI * i as f64 * 0.618;
            pp.extend_from_slice(&[r * phi.cos(), r * phi.sin(), 0.0]);
        }
        c.push("plane_positions", vec![n_plane, 3], ArrayData::F64(pp)).unwrap();
        c.push("plane_rirs", vec![n_plane, t], ArrayData::F64(vec![0.125; n_plane * t])).unwrap();
        c.push("fs", vec![], ArrayData::F64(vec![8000.0])).unwrap();
        c
    }

    #[test]
    fn spherical_dataset_splits_and_warns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.sfc");
        make_spherical_container(97, 5, 703).write(&path).unwrap();
        let ds = load_spherical_dataset(&path).unwrap();
        assert_eq!(ds.fitting.len(), 102);
        assert_eq!(ds.reconstruction.len(), 703);
        assert!(ds.warnings.is_empty(), "unexpected warnings: {:?}", ds.warnings);

        // Off-spec counts warn but do not fail.
        let path2 = dir.path().join("sphere2.sfc");
        make_spherical_container(40, 0, 100).write(&path2).unwrap();
        let ds2 = load_spherical_dataset(&path2).unwrap();
        assert_eq!(ds2.fitting.len(), 40);
        assert!(!ds2.warnings.is_empty());
    }

    #[test]
    fn decimation_is_seeded_and_order_preserving() {
        let positions: Vec<Position3> =
            (0..20).map(|i| Position3::new(i as f64, 0.0, 0.0)).collect();
        let mut rirs = Array2::zeros((20, 4));
        for ch in 0..20 {
            rirs[[ch, 0]] = ch as f64;
        }
        let ds = RirDataset::new(positions, rirs, 8000.0).unwrap();
        let (sub, kept) = decimate_dataset(&ds, 7, 3).unwrap();
        let (_, kept2) = decimate_dataset(&ds, 7, 3).unwrap();
        assert_eq!(kept, kept2);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        for (row, &i) in kept.iter().enumerate() {
            assert_eq!(sub.impulse_responses[[row, 0]], i as f64);
        }
        // Full decimation preserves everything in order.
        let (full, all) = decimate_dataset(&ds, 20, 9).unwrap();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert_eq!(full.impulse_responses, ds.impulse_responses);
        assert!(decimate_dataset(&ds, 21, 0).is_err());
        assert!(decimate_dataset(&ds, 0, 0).is_err());
    }
}
