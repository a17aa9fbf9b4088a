//! Bank file layout (little-endian): magic `VSTB`, version `u32`, `D` `u32`,
//! `K_B` `u64`, seed `u64`, 32-byte config digest, then `K_B * D` `f32`
//! values row-major.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, VistaError};

pub const BANK_MAGIC: &[u8; 4] = b"VSTB";
pub const BANK_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    dim: usize,
    vectors: Vec<f32>,
    config_digest: [u8; 32],
    seed: u64,
}

impl MemoryBank {
    pub fn new(dim: usize, vectors: Vec<f32>, config_digest: [u8; 32], seed: u64) -> Self {
        assert!(dim > 0 && vectors.len().is_multiple_of(dim), "bank buffer not a multiple of dim");
        MemoryBank {
            dim,
            vectors,
            config_digest,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn config_digest(&self) -> &[u8; 32] {
        &self.config_digest
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_digest(mut self, digest: [u8; 32]) -> Self {
        self.config_digest = digest;
        self
    }

    /// The first `k` rows, which for a greedy coreset equals the coreset of size `k`.
    pub fn prefix(&self, k: usize) -> MemoryBank {
        MemoryBank {
            dim: self.dim,
            vectors: self.vectors[..k * self.dim].to_vec(),
            config_digest: self.config_digest,
            seed: self.seed,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.vectors.len() * 4);
        buf.extend_from_slice(BANK_MAGIC);
        buf.extend_from_slice(&BANK_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.config_digest);
        for v in &self.vectors {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, message: String| VistaError::BankFormat {
            offset: offset as u64,
            message,
        };
        if bytes.len() < 4 || &bytes[..4] != BANK_MAGIC {
            return Err(fail(0, "not a VISTA bank".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != BANK_VERSION {
            return Err(fail(4, format!("unsupported bank version {version}")));
        }
        let dim = u32_at(8) as usize;
        if dim == 0 {
            return Err(fail(8, "dimension is zero".into()));
        }
        let count = u64_at(12);
        let seed = u64_at(20);
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&bytes[28..60]);
        let payload = &bytes[HEADER_LEN..];
        let expected = (count as u128) * (dim as u128) * 4;
        if payload.len() as u128 != expected {
            return Err(fail(
                HEADER_LEN,
                format!(
                    "truncated payload: header declares {count} x {dim} values ({expected} bytes), found {} bytes",
                    payload.len()
                ),
            ));
        }
        let vectors = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(MemoryBank::new(dim, vectors, digest, seed))
    }
}

pub fn save_bank(bank: &MemoryBank, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| VistaError::io(path, e))?;
    f.write_all(&bank.to_bytes()).map_err(|e| VistaError::io(path, e))
}

pub fn load_bank(path: &Path) -> Result<MemoryBank> {
    let bytes = std::fs::read(path).map_err(|e| VistaError::io(path, e))?;
    MemoryBank::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MemoryBank {
        let mut digest = [0u8; 32];
        digest.iter_mut().enumerate().for_each(|(i, b)| *b = i as u8 * 3);
        MemoryBank::new(3, vec![1.0, -0.0, f32::MIN_POSITIVE, 7.5, 1e30, -2.25], digest, 99)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.vstb");
        let bank = sample();
        save_bank(&bank, &path).unwrap();
        let back = load_bank(&path).unwrap();
        let bits = |b: &MemoryBank| b.vectors().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&bank));
        assert_eq!(back.config_digest(), bank.config_digest());
        assert_eq!(back.seed(), 99);
        assert_eq!(back.dim(), 3);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = sample().to_bytes();
        bytes[..4].copy_from_slice(b"NOPE");
        let err = MemoryBank::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("not a VISTA bank"), "{err}");
        assert!(err.contains("byte 0"), "{err}");
    }

    #[test]
    fn declared_size_mismatch() {
        let mut bytes = sample().to_bytes();
        bytes[8..12].copy_from_slice(&4u32.to_le_bytes());
        let err = MemoryBank::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("truncated payload") && err.contains("byte 60"), "{err}");
        let bytes = sample().to_bytes();
        assert!(MemoryBank::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(MemoryBank::from_bytes(&bytes[..30]).is_err());
    }
}
