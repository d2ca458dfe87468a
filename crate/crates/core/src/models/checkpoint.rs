//! Versioned binary checkpoints: magic, format version, a JSON header with
//! the model name, config, metadata and tensor shapes, then every tensor's
//! data as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use gembed_tensor::Tensor;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GEMBCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: String,
    pub config: TrainConfig,
    /// Model-specific extras, e.g. the timestamps of per-timestamp encoders.
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: String,
    config: TrainConfig,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

impl Checkpoint {
    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        let header = Header {
            model: self.model.clone(),
            config: self.config.clone(),
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorEntry { name: name.clone(), shape: t.shape().to_vec() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut write = || -> std::io::Result<()> {
            out.write_all(MAGIC)?;
            out.write_all(&FORMAT_VERSION.to_le_bytes())?;
            out.write_all(&(json.len() as u64).to_le_bytes())?;
            out.write_all(&json)?;
            for (_, t) in &self.tensors {
                for v in t.data() {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            Ok(())
        };
        write().map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn read(mut input: impl Read) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| bad("truncated checkpoint".into()))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file".into()));
        }
        let mut v = [0u8; 4];
        input.read_exact(&mut v).map_err(|_| bad("truncated checkpoint".into()))?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(bad(format!("checkpoint format {version}, expected {FORMAT_VERSION}")));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len).map_err(|_| bad("truncated checkpoint".into()))?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        input.read_exact(&mut json).map_err(|_| bad("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let mut bytes = vec![0u8; n * 8];
            input
                .read_exact(&mut bytes)
                .map_err(|_| bad(format!("truncated data for {}", entry.name)))?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let mut t = Tensor::new(data, entry.shape)?;
            t.set_requires_grad(true);
            tensors.push((entry.name, t));
        }
        Ok(Self { model: header.model, config: header.config, meta: header.meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
    }

    /// Tensors in stored order, checking their names against `expected`.
    pub fn take_tensors(&self, prefix: &str, expected: &[&str]) -> Result<Vec<Tensor>> {
        let matching: Vec<&(String, Tensor)> = self
            .tensors
            .iter()
            .filter(|(n, _)| n.strip_prefix(prefix).is_some_and(|rest| expected.contains(&rest)))
            .collect();
        if matching.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors under '{prefix}', found {}",
                expected.len(),
                matching.len()
            )));
        }
        for ((name, _), want) in matching.iter().map(|p| (&p.0, &p.1)).zip(expected) {
            if name.strip_prefix(prefix) != Some(*want) {
                return Err(Error::Checkpoint(format!("tensor '{name}' out of order, expected '{prefix}{want}'")));
            }
        }
        Ok(matching.into_iter().map(|(_, t)| t.clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = Checkpoint {
            model: "demo".into(),
            config: TrainConfig::default(),
            meta: serde_json::json!({"trained_at": [0, 2]}),
            tensors: vec![
                ("a.w".into(), Tensor::matrix(2, 2, vec![0.1, -0.0, 1e-300, f64::MIN_POSITIVE]).unwrap().trainable()),
                ("a.b".into(), Tensor::vector(vec![1.0 / 3.0]).trainable()),
            ],
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::read(&buf[..]).unwrap();
        assert_eq!(back, ck);
        let bits = |c: &Checkpoint| c.tensors.iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ck));
        assert_eq!(back.take_tensors("a.", &["w", "b"]).unwrap().len(), 2);
        assert!(back.take_tensors("a.", &["b", "w"]).is_err());
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(Checkpoint::read(&b"nonsense-bytes"[..]).is_err());
        let ck = Checkpoint {
            model: "m".into(),
            config: TrainConfig::default(),
            meta: serde_json::Value::Null,
            tensors: vec![("x".into(), Tensor::vector(vec![1.0, 2.0]))],
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        assert!(Checkpoint::read(&buf[..buf.len() - 3]).is_err());
    }
}
