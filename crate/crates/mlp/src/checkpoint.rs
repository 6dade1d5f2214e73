//! Binary model checkpoint.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! "FERM"  u32 version (2)
//! u32 layer count, then per layer u32 outputs, u32 inputs
//! f64 dropout, u32 dropout_after
//! u8 standardization flag, then inputs f64 means and inputs f64 stds when set
//! u64 master seed, u32 length + UTF-8 config hash
//! per layer: weights (outputs x inputs, row-major f32), bias (outputs f32)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{Dense, Mlp, Standardization};

pub const MAGIC: [u8; 4] = *b"FERM";
pub const VERSION: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Mlp<f32>,
    pub master_seed: u64,
    pub config_hash: String,
}

fn write_f32s<W: Write>(w: &mut W, values: impl Iterator<Item = f32>) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(1 << 16);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 1 << 16 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = &self.model;
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(m.layers.len() as u32).to_le_bytes())?;
        for l in &m.layers {
            w.write_all(&(l.outputs() as u32).to_le_bytes())?;
            w.write_all(&(l.inputs() as u32).to_le_bytes())?;
        }
        w.write_all(&m.dropout.to_le_bytes())?;
        w.write_all(&(m.dropout_after as u32).to_le_bytes())?;
        match &m.standardization {
            Some(s) => {
                w.write_all(&[1])?;
                for v in s.mean.iter().chain(&s.std) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            None => w.write_all(&[0])?,
        }
        w.write_all(&self.master_seed.to_le_bytes())?;
        w.write_all(&(self.config_hash.len() as u32).to_le_bytes())?;
        w.write_all(self.config_hash.as_bytes())?;
        for l in &m.layers {
            // Iterating a standard-layout array visits it in row-major order.
            write_f32s(&mut w, l.weight.iter().copied())?;
            write_f32s(&mut w, l.bias.iter().copied())?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if magic != MAGIC {
            return Err("not a model checkpoint".into());
        }
        let mut rd = Reader(r);
        let version = rd.u32()?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let n = rd.u32()? as usize;
        if n == 0 || n > 64 {
            return Err(format!("implausible layer count {n}"));
        }
        let mut shapes = Vec::with_capacity(n);
        for _ in 0..n {
            shapes.push((rd.u32()? as usize, rd.u32()? as usize));
        }
        for w in shapes.windows(2) {
            if w[0].0 != w[1].1 {
                return Err("layer shapes do not chain".into());
            }
        }
        let dropout = rd.f64()?;
        let dropout_after = rd.u32()? as usize;
        let standardization = match rd.u8()? {
            0 => None,
            1 => {
                let inputs = shapes[0].1;
                let mean = (0..inputs).map(|_| rd.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
                let std = (0..inputs).map(|_| rd.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
                if !std.iter().all(|s| s.is_finite() && *s > 0.0) || !mean.iter().all(|m| m.is_finite()) {
                    return Err("invalid standardization".into());
                }
                Some(Standardization { mean, std })
            }
            f => return Err(format!("bad standardization flag {f}")),
        };
        let master_seed = rd.u64()?;
        let len = rd.u32()? as usize;
        let config_hash = String::from_utf8(rd.bytes(len)?).map_err(|e| e.to_string())?;
        let mut layers = Vec::with_capacity(n);
        for &(out, inp) in &shapes {
            let weight = Array2::from_shape_vec((out, inp), rd.f32s(out * inp)?).map_err(|e| e.to_string())?;
            let bias = Array1::from(rd.f32s(out)?);
            layers.push(Dense { weight, bias });
        }
        let mut trailing = [0u8; 1];
        if rd.0.read(&mut trailing).map_err(|e| e.to_string())? != 0 {
            return Err("trailing bytes after parameters".into());
        }
        let model = Mlp { layers, dropout, dropout_after, standardization };
        if !model.is_finite() {
            return Err("non-finite parameter".into());
        }
        Ok(Self { model, master_seed, config_hash })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Self::read(BufReader::new(file)).map_err(|reason| Error::Checkpoint { path: path.to_path_buf(), reason })
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> std::result::Result<Vec<u8>, String> {
        let mut b = vec![0u8; n];
        self.0.read_exact(&mut b).map_err(|e| format!("truncated checkpoint: {e}"))?;
        Ok(b)
    }

    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| format!("truncated checkpoint: {e}"))?;
        Ok(b)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        Ok(self
            .bytes(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}
