//! Reader and writer for the `VSTW` weight interchange file.
//!
//! Layout (little-endian): magic `VSTW`, version `u32`, tensor count `u32`,
//! then per tensor: name length `u16`, UTF-8 name, dtype tag `u8`
//! (0 = f32), rank `u8`, `rank` dims as `u32`, row-major f32 payload.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, VistaError};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"VSTW";
pub const WEIGHTS_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Tensors keyed by name, in file order.
pub type TensorMap = BTreeMap<String, Tensor>;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, tensor: &str, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(VistaError::Weights {
                tensor: tensor.to_string(),
                message: format!(
                    "truncated {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, tensor: &str, what: &str) -> Result<u8> {
        Ok(self.take(1, tensor, what)?[0])
    }

    fn u16(&mut self, tensor: &str, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, tensor, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, tensor: &str, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, tensor, what)?.try_into().unwrap()))
    }
}

pub fn parse_weights(bytes: &[u8]) -> Result<TensorMap> {
    let header = "<header>";
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, header, "magic")? != WEIGHTS_MAGIC {
        return Err(VistaError::Weights {
            tensor: header.into(),
            message: "not a VSTW weight file".into(),
        });
    }
    let version = cur.u32(header, "version")?;
    if version != WEIGHTS_VERSION {
        return Err(VistaError::Weights {
            tensor: header.into(),
            message: format!("unsupported format version {version}"),
        });
    }
    let count = cur.u32(header, "tensor count")?;
    let mut out = TensorMap::new();
    for index in 0..count {
        let placeholder = format!("#{index}");
        let name_len = cur.u16(&placeholder, "name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, &placeholder, "name")?)
            .map_err(|_| VistaError::Weights {
                tensor: placeholder.clone(),
                message: "name is not valid UTF-8".into(),
            })?
            .to_string();
        let dtype = cur.u8(&name, "dtype")?;
        if dtype != DTYPE_F32 {
            return Err(VistaError::Weights {
                tensor: name,
                message: format!("unsupported dtype tag {dtype}"),
            });
        }
        let rank = cur.u8(&name, "rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32(&name, "dims")? as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = cur.take(numel * 4, &name, "payload")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.insert(name.clone(), Tensor { dims, data }).is_some() {
            return Err(VistaError::Weights {
                tensor: name,
                message: "duplicate tensor".into(),
            });
        }
    }
    if cur.pos != bytes.len() {
        return Err(VistaError::Weights {
            tensor: "<trailer>".into(),
            message: format!("{} unexpected trailing bytes", bytes.len() - cur.pos),
        });
    }
    Ok(out)
}

pub fn encode_weights(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(DTYPE_F32);
        buf.push(t.dims.len() as u8);
        for &d in &t.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn write_weights(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| VistaError::io(path, e))?;
    f.write_all(&encode_weights(tensors)).map_err(|e| VistaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<(String, Tensor)> {
        vec![
            ("a.weight".into(), Tensor { dims: vec![2, 3], data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] }),
            ("a.bias".into(), Tensor { dims: vec![2], data: vec![-1.0, 0.5] }),
        ]
    }

    #[test]
    fn round_trip() {
        let bytes = encode_weights(&sample());
        let map = parse_weights(&bytes).unwrap();
        assert_eq!(map["a.weight"], sample()[0].1);
        assert_eq!(map["a.bias"], sample()[1].1);
    }

    #[test]
    fn truncation_names_tensor() {
        let bytes = encode_weights(&sample());
        let err = parse_weights(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            VistaError::Weights { tensor, message } => {
                assert_eq!(tensor, "a.bias");
                assert!(message.contains("payload"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_weights(&sample());
        bytes[0] = b'X';
        assert!(parse_weights(&bytes).unwrap_err().to_string().contains("not a VSTW"));
    }
}
