//! Binary persistence of the offline data.
//!
//! Each array is a separate file: magic `CROM`, version byte, dtype byte
//! (1 = f64, 2 = i64, both little-endian), `ndim` and the shape as u64 LE,
//! then the row-major payload. A `manifest.toml` ties the set to the hash of
//! the producing config.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deim::{DeimKind, DeimOperator, UnionPattern};
use crate::error::{io_err, Error, Result};
use crate::geometry::ParameterPoint;
use crate::pod::PodBasis;
use crate::rom::RomOffline;

pub const MAGIC: &[u8; 4] = b"CROM";
pub const FORMAT_VERSION: u8 = 1;
const DTYPE_F64: u8 = 1;
const DTYPE_I64: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    I64(Vec<i64>),
}

/// N-dimensional row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

impl Array {
    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data: ArrayData::F64(data) }
    }

    pub fn i64(shape: Vec<usize>, data: Vec<i64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data: ArrayData::I64(data) }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self::f64(vec![m.nrows(), m.ncols()], row_major(m))
    }

    pub fn from_indices(v: &[usize]) -> Self {
        Self::i64(vec![v.len()], v.iter().map(|&x| x as i64).collect())
    }

    fn as_f64(&self, path: &Path) -> Result<&[f64]> {
        match &self.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::I64(_) => Err(artifact(path, "expected f64 data")),
        }
    }

    fn as_i64(&self, path: &Path) -> Result<&[i64]> {
        match &self.data {
            ArrayData::I64(v) => Ok(v),
            ArrayData::F64(_) => Err(artifact(path, "expected i64 data")),
        }
    }

    fn expect_ndim(&self, ndim: usize, path: &Path) -> Result<()> {
        if self.shape.len() == ndim {
            Ok(())
        } else {
            Err(artifact(path, &format!("expected {ndim} dimensions, found {}", self.shape.len())))
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn artifact(path: &Path, what: &str) -> Error {
    Error::Artifact { path: path.to_path_buf(), what: what.to_string() }
}

pub fn write_array(path: &Path, array: &Array) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    buf.push(match array.data {
        ArrayData::F64(_) => DTYPE_F64,
        ArrayData::I64(_) => DTYPE_I64,
    });
    buf.extend_from_slice(&(array.shape.len() as u64).to_le_bytes());
    for &d in &array.shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match &array.data {
        ArrayData::F64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        ArrayData::I64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
    }
    let mut file = fs::File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    file.write_all(&buf).map_err(io_err(format!("writing {}", path.display())))
}

pub fn read_array(path: &Path) -> Result<Array> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(format!("reading {}", path.display())))?;
    let mut cursor = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let slice = bytes.get(cursor..cursor + n).ok_or_else(|| artifact(path, "truncated file"))?;
        cursor += n;
        Ok(slice)
    };
    if take(4)? != MAGIC {
        return Err(artifact(path, "bad magic"));
    }
    let version = take(1)?[0];
    if version != FORMAT_VERSION {
        return Err(artifact(path, &format!("unsupported format version {version}")));
    }
    let dtype = take(1)?[0];
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let ndim = u64_at(take(8)?) as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(u64_at(take(8)?) as usize);
    }
    let len: usize = shape.iter().product();
    let payload = take(len * 8)?;
    let chunks = payload.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("8 bytes"));
    let data = match dtype {
        DTYPE_F64 => ArrayData::F64(chunks.map(f64::from_le_bytes).collect()),
        DTYPE_I64 => ArrayData::I64(chunks.map(i64::from_le_bytes).collect()),
        other => return Err(artifact(path, &format!("unknown dtype code {other}"))),
    };
    if take(1).is_ok() {
        return Err(artifact(path, "trailing bytes"));
    }
    Ok(Array { shape, data })
}

/// Wall times of the offline stages in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineTimings {
    pub snapshots: f64,
    pub pod: f64,
    pub deim: f64,
    pub reduced: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u8,
    pub crate_version: String,
    pub config_hash: String,
    pub dofs: usize,
    pub n_max: usize,
    pub n_keep: usize,
    pub epsilon_pod: f64,
    pub l_a: usize,
    pub l_f: usize,
    pub pattern_size: usize,
    pub timings: OfflineTimings,
}

/// Result of the offline phase.
#[derive(Debug, Clone)]
pub struct OfflineArtifacts {
    pub config_hash: String,
    pub train_params: Vec<ParameterPoint>,
    pub pod: PodBasis,
    pub rom: RomOffline,
    pub timings: OfflineTimings,
}

impl OfflineArtifacts {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash.clone(),
            dofs: self.pod.modes.nrows(),
            n_max: self.pod.n_max,
            n_keep: self.pod.retained(),
            epsilon_pod: self.pod.epsilon_pod,
            l_a: self.rom.deim_a.len(),
            l_f: self.rom.deim_f.len(),
            pattern_size: self.rom.pattern.len(),
            timings: self.timings.clone(),
        }
    }
}

const MANIFEST: &str = "manifest.toml";

fn file(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.crom"))
}

fn save_deim(dir: &Path, prefix: &str, op: &DeimOperator) -> Result<()> {
    write_array(&file(dir, &format!("{prefix}_basis")), &Array::from_matrix(&op.basis))?;
    write_array(&file(dir, &format!("{prefix}_indices")), &Array::from_indices(&op.indices))?;
    write_array(
        &file(dir, &format!("{prefix}_singular_values")),
        &Array::f64(vec![op.singular_values.len()], op.singular_values.clone()),
    )
}

pub fn save_artifacts(artifacts: &OfflineArtifacts, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let rom = &artifacts.rom;
    write_array(&file(dir, "modes"), &Array::from_matrix(&artifacts.pod.modes))?;
    write_array(&file(dir, "sigma"), &Array::f64(vec![artifacts.pod.sigma.len()], artifacts.pod.sigma.clone()))?;
    let params: Vec<f64> = artifacts.train_params.iter().flat_map(|p| [p.r, p.theta]).collect();
    write_array(&file(dir, "train_params"), &Array::f64(vec![artifacts.train_params.len(), 2], params))?;
    let pattern: Vec<i64> = rom.pattern.entries().iter().flat_map(|&(i, j)| [i as i64, j as i64]).collect();
    write_array(&file(dir, "pattern"), &Array::i64(vec![rom.pattern.len(), 2], pattern))?;
    save_deim(dir, "deim_a", &rom.deim_a)?;
    save_deim(dir, "deim_f", &rom.deim_f)?;
    let k = rom.n_keep();
    let blocks: Vec<f64> = rom.reduced_a.iter().flat_map(row_major).collect();
    write_array(&file(dir, "reduced_a"), &Array::f64(vec![rom.reduced_a.len(), k, k], blocks))?;
    let vecs: Vec<f64> = rom.reduced_f.iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
    write_array(&file(dir, "reduced_f"), &Array::f64(vec![rom.reduced_f.len(), k], vecs))?;
    let manifest = toml::to_string(&artifacts.manifest()).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(io_err(format!("writing {}", path.display())))
}

fn load_matrix(dir: &Path, name: &str) -> Result<DMatrix<f64>> {
    let path = file(dir, name);
    let a = read_array(&path)?;
    a.expect_ndim(2, &path)?;
    Ok(DMatrix::from_row_slice(a.shape[0], a.shape[1], a.as_f64(&path)?))
}

fn load_vec(dir: &Path, name: &str) -> Result<Vec<f64>> {
    let path = file(dir, name);
    let a = read_array(&path)?;
    a.expect_ndim(1, &path)?;
    Ok(a.as_f64(&path)?.to_vec())
}

fn load_indices(dir: &Path, name: &str) -> Result<Vec<usize>> {
    let path = file(dir, name);
    let a = read_array(&path)?;
    a.expect_ndim(1, &path)?;
    Ok(a.as_i64(&path)?.iter().map(|&x| x as usize).collect())
}

fn load_deim(dir: &Path, prefix: &str, kind: DeimKind) -> Result<DeimOperator> {
    DeimOperator::from_parts(
        kind,
        load_matrix(dir, &format!("{prefix}_basis"))?,
        load_indices(dir, &format!("{prefix}_indices"))?,
        load_vec(dir, &format!("{prefix}_singular_values"))?,
    )
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(format!("reading {}", path.display())))?;
    toml::from_str(&text).map_err(|e| artifact(&path, &e.to_string()))
}

/// Loads artifacts, refusing them if they were produced by a different config.
pub fn load_artifacts(dir: &Path, expected_hash: &str) -> Result<OfflineArtifacts> {
    let manifest = read_manifest(dir)?;
    if manifest.config_hash != expected_hash {
        return Err(Error::StaleArtifacts { expected: expected_hash.to_string(), found: manifest.config_hash });
    }
    let modes = load_matrix(dir, "modes")?;
    let sigma = load_vec(dir, "sigma")?;
    let params = load_matrix(dir, "train_params")?;
    let train_params = params.row_iter().map(|r| ParameterPoint { r: r[0], theta: r[1] }).collect();

    let path = file(dir, "pattern");
    let raw = read_array(&path)?;
    raw.expect_ndim(2, &path)?;
    let entries = raw.as_i64(&path)?.chunks_exact(2).map(|c| (c[0] as usize, c[1] as usize)).collect();
    let pattern = UnionPattern::from_entries(modes.nrows(), entries);

    let deim_a = load_deim(dir, "deim_a", DeimKind::Matrix)?;
    let deim_f = load_deim(dir, "deim_f", DeimKind::Vector)?;

    let path = file(dir, "reduced_a");
    let raw = read_array(&path)?;
    raw.expect_ndim(3, &path)?;
    let (l, k) = (raw.shape[0], raw.shape[1]);
    let data = raw.as_f64(&path)?;
    let reduced_a = (0..l).map(|j| DMatrix::from_row_slice(k, k, &data[j * k * k..(j + 1) * k * k])).collect();
    let rf = load_matrix(dir, "reduced_f")?;
    let reduced_f = rf.row_iter().map(|r| DVector::from_iterator(r.len(), r.iter().copied())).collect();

    let pod = PodBasis { modes: modes.clone(), sigma, epsilon_pod: manifest.epsilon_pod, n_max: manifest.n_max };
    let rom = RomOffline::from_parts(modes, pattern, deim_a, deim_f, reduced_a, reduced_f);
    Ok(OfflineArtifacts { config_hash: manifest.config_hash, train_params, pod, rom, timings: manifest.timings })
}
