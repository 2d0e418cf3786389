//! On-disk cache of [`SpectralData`], keyed by `(N, ξ, α)`.
//!
//! Files are named `spectrum_N{N}_xi{ξ}_alpha{α}.bin`, where `ξ` and `α` are
//! written with Rust's shortest round-trip formatting, so two keys match only
//! when the parameters are bit-identical. Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "ALMGSPC1"
//! N        u64
//! xi       f64
//! alpha    f64
//! energies (N+1) x f64, ascending
//! parity   (N+1) x u8, 0 = even, 1 = odd
//! sector   (N+1) x u64, position inside the parity sector
//! vectors  (N+1)^2 x f64, column-major (one eigenvector after another)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};
use crate::spectra::{diagonalize, SpectralData};

const MAGIC: &[u8; 8] = b"ALMGSPC1";

#[derive(Clone, Debug)]
pub struct SpectralCache {
    dir: PathBuf,
}

impl SpectralCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SpectralCache { dir: dir.into() }
    }

    pub fn path_for(&self, params: &ModelParams) -> PathBuf {
        self.dir.join(format!("spectrum_N{}_xi{}_alpha{}.bin", params.n(), params.xi(), params.alpha()))
    }

    /// Cached decomposition, or `None` when no file exists for this key.
    pub fn load(&self, params: &ModelParams) -> Result<Option<SpectralData>> {
        let path = self.path_for(params);
        match fs::read(&path) {
            Ok(bytes) => decode(&path, &bytes, params).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn store(&self, spec: &SpectralData) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(&spec.params);
        let tmp = path.with_extension("bin.tmp");
        fs::write(&tmp, encode(spec)).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load_or_compute(&self, params: &ModelParams) -> Result<SpectralData> {
        if let Some(spec) = self.load(params)? {
            return Ok(spec);
        }
        let spec = diagonalize(params)?;
        self.store(&spec)?;
        Ok(spec)
    }
}

fn encode(spec: &SpectralData) -> Vec<u8> {
    let d = spec.dim();
    let mut out = Vec::with_capacity(32 + d * 17 + d * d * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(spec.n() as u64).to_le_bytes());
    out.extend_from_slice(&spec.params.xi().to_le_bytes());
    out.extend_from_slice(&spec.params.alpha().to_le_bytes());
    spec.energies.iter().for_each(|e| out.extend_from_slice(&e.to_le_bytes()));
    spec.parities.iter().for_each(|p| out.push(p.offset() as u8));
    spec.sector_index.iter().for_each(|j| out.extend_from_slice(&(*j as u64).to_le_bytes()));
    for col in 0..d {
        spec.vectors.column(col).iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn decode(path: &Path, bytes: &[u8], params: &ModelParams) -> Result<SpectralData> {
    let bad = |reason: &str| Error::CacheFormat { path: path.to_path_buf(), reason: reason.to_string() };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(MAGIC.as_slice()) {
        return Err(bad("bad magic"));
    }
    let n = r.u64().ok_or_else(|| bad("truncated header"))? as usize;
    let xi = r.f64().ok_or_else(|| bad("truncated header"))?;
    let alpha = r.f64().ok_or_else(|| bad("truncated header"))?;
    if n != params.n() || xi.to_bits() != params.xi().to_bits() || alpha.to_bits() != params.alpha().to_bits() {
        return Err(bad("header does not match the requested parameters"));
    }
    let d = n + 1;
    let truncated = || bad("truncated body");
    let energies = (0..d).map(|_| r.f64()).collect::<Option<Vec<_>>>().ok_or_else(truncated)?;
    let parities = r
        .take(d)
        .ok_or_else(truncated)?
        .iter()
        .map(|b| match b {
            0 => Ok(Parity::Even),
            1 => Ok(Parity::Odd),
            _ => Err(bad("invalid parity byte")),
        })
        .collect::<Result<Vec<_>>>()?;
    let sector_index = (0..d).map(|_| r.u64().map(|j| j as usize)).collect::<Option<Vec<_>>>().ok_or_else(truncated)?;
    let mut vectors = Array2::zeros((d, d));
    for col in 0..d {
        for row in 0..d {
            vectors[[row, col]] = r.f64().ok_or_else(truncated)?;
        }
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    SpectralData::from_parts(*params, energies, parities, sector_index, vectors)
}
