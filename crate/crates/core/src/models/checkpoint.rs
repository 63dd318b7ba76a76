//! `CMDL` checkpoint files.
//!
//! ```text
//! "CMDL" | version u16 | reserved u16 | spec hash u64 | rescale f64
//! input shape 3 x u32 | spec string (u32 len + utf8) | dsp config json (u32 len + utf8)
//! tensor count u32 | per tensor: name (u16 len + utf8), shape rank u8 + dims u32, CMEL matrix
//! ```
//!
//! All integers little-endian. Matrices use the `dsp::cache` layout with the
//! tensor shape collapsed to `(dim0, rest)`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dsp::{cache, DspConfig};
use crate::error::{Error, Result};
use crate::models::{ConvNet, ConvNetSpec};

pub const MAGIC: &[u8; 4] = b"CMDL";
pub const VERSION: u16 = 1;

/// A trained network bundled with everything inference needs to featurise
/// audio exactly as in training.
#[derive(Debug, Clone)]
pub struct ConvCheckpoint {
    pub net: ConvNet<f32>,
    pub rescale: f64,
    pub dsp: DspConfig,
}

fn bad(m: impl Into<String>) -> Error {
    Error::Checkpoint(m.into())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|_| bad("truncated checkpoint"))?;
    Ok(b)
}

fn take_str<R: Read>(r: &mut R, len: usize) -> Result<String> {
    if len > 1 << 20 {
        return Err(bad(format!("implausible string length {len}")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(|_| bad("truncated checkpoint"))?;
    String::from_utf8(b).map_err(|_| bad("non-utf8 string"))
}

impl ConvCheckpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        self.write(&mut w).expect("in-memory write");
        w
    }

    fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&self.net.spec.hash().to_le_bytes())?;
        w.write_all(&self.rescale.to_le_bytes())?;
        let (c, h, wd) = self.net.input_shape;
        for d in [c, h, wd] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        put_str(w, &self.net.spec.to_string())?;
        put_str(w, &serde_json::to_string(&self.dsp).map_err(std::io::Error::other)?)?;
        let params = self.net.params();
        w.write_all(&(params.len() as u32).to_le_bytes())?;
        for (name, t) in params {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[t.shape.len() as u8])?;
            for &d in &t.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let m = Array2::from_shape_vec(t.matrix_dims(), t.values.clone()).expect("tensor shape");
            cache::write_matrix(w, &m)?;
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let r = &mut &bytes[..];
        if &take::<4, _>(r)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes(take(r)?);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let _reserved = take::<2, _>(r)?;
        let hash = u64::from_le_bytes(take(r)?);
        let rescale = f64::from_le_bytes(take(r)?);
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u32::from_le_bytes(take(r)?) as usize;
        }
        let len = u32::from_le_bytes(take(r)?) as usize;
        let spec: ConvNetSpec = take_str(r, len)?.parse()?;
        if spec.hash() != hash {
            return Err(bad(format!("spec hash mismatch for '{spec}'")));
        }
        let len = u32::from_le_bytes(take(r)?) as usize;
        let dsp: DspConfig = serde_json::from_str(&take_str(r, len)?)?;
        let mut net = ConvNet::<f32>::zeros(&spec, (dims[0], dims[1], dims[2]))?;
        let names: Vec<(String, Vec<usize>)> = net.params().into_iter().map(|(n, t)| (n, t.shape.clone())).collect();
        let n_tensors = u32::from_le_bytes(take(r)?) as usize;
        if n_tensors != names.len() {
            return Err(bad(format!("expected {} tensors, found {n_tensors}", names.len())));
        }
        for ((want_name, want_shape), slot) in names.iter().zip(net.params_mut()) {
            let len = u16::from_le_bytes(take(r)?) as usize;
            let name = take_str(r, len)?;
            if &name != want_name {
                return Err(bad(format!("expected tensor {want_name}, found {name}")));
            }
            let rank = take::<1, _>(r)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(take(r)?) as usize);
            }
            if &shape != want_shape {
                return Err(bad(format!("{name}: shape {shape:?}, expected {want_shape:?}")));
            }
            let m = cache::read_matrix(r)?;
            slot.values = m.into_iter().collect();
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        if !(rescale.is_finite() && rescale > 0.0) {
            return Err(Error::NonPositiveScale(rescale));
        }
        Ok(Self { net, rescale, dsp })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}
