//! Binary checkpoint encoding.
//!
//! Layout: 8-byte magic, `u32` version, then sections written by the caller.
//! A parameter set is encoded as its layer count and widths (`u32`), the Adam
//! step (`u64`), and the parameter, first-moment and second-moment vectors as
//! little-endian `f64`.

use super::{param_count, Mlp, ParamSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"TWPHCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub struct Encoder<W: Write> {
    inner: W,
}

impl<W: Write> Encoder<W> {
    /// Writes the header.
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(&MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        Ok(Self { inner })
    }

    pub fn u32(&mut self, x: u32) -> io::Result<()> {
        self.inner.write_all(&x.to_le_bytes())
    }

    pub fn u64(&mut self, x: u64) -> io::Result<()> {
        self.inner.write_all(&x.to_le_bytes())
    }

    pub fn f64(&mut self, x: f64) -> io::Result<()> {
        self.inner.write_all(&x.to_le_bytes())
    }

    /// Length-prefixed vector.
    pub fn f64s(&mut self, xs: &[f64]) -> io::Result<()> {
        self.u64(xs.len() as u64)?;
        for &x in xs {
            self.f64(x)?;
        }
        Ok(())
    }

    pub fn param_set(&mut self, ps: &ParamSet) -> io::Result<()> {
        let shape = ps.net.shape();
        self.u32(shape.len() as u32)?;
        for &w in shape {
            self.u32(w as u32)?;
        }
        self.u64(ps.step)?;
        self.f64s(ps.net.params())?;
        self.f64s(&ps.m)?;
        self.f64s(&ps.v)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct Decoder<R: Read> {
    inner: R,
}

impl<R: Read> Decoder<R> {
    /// Reads and checks the header.
    pub fn new(mut inner: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        inner.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut dec = Self { inner };
        let version = dec.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        Ok(dec)
    }

    pub fn u32(&mut self) -> Result<u32, CheckpointError> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64, CheckpointError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64, CheckpointError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u64()? as usize;
        if n > 1 << 32 {
            return Err(CheckpointError::Corrupt(format!("vector length {n}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn param_set(&mut self) -> Result<ParamSet, CheckpointError> {
        let layers = self.u32()? as usize;
        if layers > 64 {
            return Err(CheckpointError::Corrupt(format!("{layers} layers")));
        }
        let shape: Vec<usize> = (0..layers)
            .map(|_| self.u32().map(|w| w as usize))
            .collect::<Result<_, _>>()?;
        let step = self.u64()?;
        let params = self.f64s()?;
        let m = self.f64s()?;
        let v = self.f64s()?;
        let n = param_count(&shape);
        if m.len() != n || v.len() != n {
            return Err(CheckpointError::Corrupt("moment length".into()));
        }
        let net = Mlp::from_params(&shape, params)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        Ok(ParamSet { net, m, v, step })
    }

    /// Fails unless the whole input was consumed.
    pub fn finish(mut self) -> Result<(), CheckpointError> {
        let mut rest = [0u8; 1];
        match self.inner.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(CheckpointError::Corrupt("trailing bytes".into())),
        }
    }
}

/// Saves a list of parameter sets.
pub fn save_params(path: &Path, sets: &[ParamSet]) -> Result<(), CheckpointError> {
    let mut enc = Encoder::new(BufWriter::new(File::create(path)?))?;
    enc.u32(sets.len() as u32)?;
    for ps in sets {
        enc.param_set(ps)?;
    }
    enc.finish()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<Vec<ParamSet>, CheckpointError> {
    let mut dec = Decoder::new(BufReader::new(File::open(path)?))?;
    let n = dec.u32()? as usize;
    let sets = (0..n)
        .map(|_| dec.param_set())
        .collect::<Result<Vec<_>, _>>()?;
    dec.finish()?;
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_mlp, AdamConfig, DEFAULT_SHAPE};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut a = ParamSet::new(init_mlp(1, &DEFAULT_SHAPE).unwrap());
        let g: Vec<f64> = (0..a.net.len()).map(|i| (i as f64).sin()).collect();
        a.adam_step(&g, 1e-3, AdamConfig::default()).unwrap();
        let b = ParamSet::new(init_mlp(2, &[3, 7, 3]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_params(&path, &[a.clone(), b.clone()]).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(matches!(load_params(&path), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_params(&path, &[ParamSet::new(init_mlp(1, &[3, 4, 3]).unwrap())]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_params(&path).is_err());
    }
}
