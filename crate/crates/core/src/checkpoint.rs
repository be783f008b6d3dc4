//! Versioned little-endian binary archive of named tensors.
//!
//! Layout: `b"MPHCKPT\0"`, `u32` version, `u32` entry count, then per entry
//! `u32` name length, UTF-8 name, `u32` rank, rank × `u64` dims, and the
//! `f64` payload. Floats are stored as raw bits so round trips are exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Layer, MlpParams};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"MPHCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    entries: Vec<(String, Tensor)>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.entries.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry `{name}`")))
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn push_mlp(&mut self, prefix: &str, p: &MlpParams) {
        for (i, l) in p.layers().iter().enumerate() {
            self.push(format!("{prefix}.{i}.w"), l.weight.clone());
            self.push(format!("{prefix}.{i}.b"), l.bias.clone());
        }
    }

    pub fn get_mlp(&self, prefix: &str) -> Result<MlpParams> {
        let mut layers = Vec::new();
        while let (Ok(w), Ok(b)) = (
            self.get(&format!("{prefix}.{}.w", layers.len())),
            self.get(&format!("{prefix}.{}.b", layers.len())),
        ) {
            layers.push(Layer {
                weight: w.clone(),
                bias: b.clone(),
            });
        }
        MlpParams::from_layers(layers)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, t) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let count: usize = shape.iter().product();
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_bits(u64::from_le_bytes(b)));
            }
            entries.push((name, Tensor::new(shape, data)?));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mlp_round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..20) {
            let p = init_params(&[3, hidden, 2], seed).unwrap();
            let mut a = Archive::new();
            a.push_mlp("net", &p);
            let mut buf = Vec::new();
            a.write_to(&mut buf).unwrap();
            let back = Archive::read_from(buf.as_slice()).unwrap();
            prop_assert_eq!(back.get_mlp("net").unwrap(), p);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOTACKPT\x01\0\0\0\0\0\0\0".to_vec();
        assert!(matches!(Archive::read_from(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
