//! Spectrogram cache files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "VSSPEC01"
//! version u32      1
//! n       u32      resize target the producer was configured with
//! rows    u32
//! cols    u32
//! dtype   u32      0 = float32 little-endian
//! hash    32 bytes SHA-256 of the source bytes + front-end parameters
//! data    rows * cols * 4 bytes, row-major float32
//! ```
//!
//! The hash lets `featurize` skip entries whose source and parameters are
//! unchanged.

use super::{DspConfig, Spectrogram, SpectrogramScale};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"VSSPEC01";
pub const VERSION: u32 = 1;
const DTYPE_F32_LE: u32 = 0;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a spectrogram cache file (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    BadVersion(u32),
    #[error("unsupported cache dtype {0}")]
    BadDtype(u32),
    #[error("cache file truncated: expected {expected} data bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// A decoded cache file.
pub struct CacheEntry {
    pub spec: Spectrogram,
    pub n: u32,
    pub src_hash: [u8; 32],
}

/// Hash of the raw source bytes together with every front-end parameter
/// that affects the stored spectrogram.
pub fn content_hash(source_bytes: &[u8], cfg: &DspConfig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(source_bytes);
    h.update(cfg.sample_rate.to_le_bytes());
    h.update(cfg.window_secs.to_le_bytes());
    h.update((cfg.resize_to as u64).to_le_bytes());
    h.update((cfg.fft_size as u64).to_le_bytes());
    h.update((cfg.hop as u64).to_le_bytes());
    h.update(match cfg.scale {
        SpectrogramScale::Linear => [0u8],
        SpectrogramScale::Mel => [1u8],
    });
    h.update((cfg.mel_bands as u64).to_le_bytes());
    h.update(cfg.db_floor.to_le_bytes());
    h.update(cfg.onset.threshold_k.to_le_bytes());
    h.update(cfg.onset.min_separation.to_le_bytes());
    h.finalize().into()
}

pub fn write_cache(
    path: &Path,
    spec: &Spectrogram,
    n: u32,
    src_hash: &[u8; 32],
) -> Result<(), CacheError> {
    let mut buf = Vec::with_capacity(60 + spec.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&(spec.rows as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.cols as u32).to_le_bytes());
    buf.extend_from_slice(&DTYPE_F32_LE.to_le_bytes());
    buf.extend_from_slice(src_hash);
    for &v in &spec.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<CacheEntry, CacheError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[0..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    if bytes.len() < 60 {
        return Err(CacheError::Truncated { expected: 60, found: bytes.len() });
    }
    let u32_at = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version = u32_at(8);
    if version != VERSION {
        return Err(CacheError::BadVersion(version));
    }
    let n = u32_at(12);
    let rows = u32_at(16) as usize;
    let cols = u32_at(20) as usize;
    let dtype = u32_at(24);
    if dtype != DTYPE_F32_LE {
        return Err(CacheError::BadDtype(dtype));
    }
    let mut src_hash = [0u8; 32];
    src_hash.copy_from_slice(&bytes[28..60]);

    let expected = rows * cols * 4;
    let payload = &bytes[60..];
    if payload.len() < expected {
        return Err(CacheError::Truncated { expected, found: payload.len() });
    }
    let data = payload[..expected]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(CacheEntry { spec: Spectrogram { rows, cols, data }, n, src_hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_spec() -> Spectrogram {
        Spectrogram { rows: 3, cols: 4, data: (0..12).map(|i| i as f32 * -1.5).collect() }
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.spec");
        let spec = sample_spec();
        let hash = [7u8; 32];
        write_cache(&path, &spec, 96, &hash).unwrap();
        let entry = read_cache(&path).unwrap();
        assert_eq!(entry.spec, spec);
        assert_eq!(entry.n, 96);
        assert_eq!(entry.src_hash, hash);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.spec");
        std::fs::write(&path, b"definitely not a cache file, just padding....????!!!!....").unwrap();
        assert!(matches!(read_cache(&path), Err(CacheError::BadMagic)));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.spec");
        write_cache(&path, &sample_spec(), 96, &[0u8; 32]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_cache(&path), Err(CacheError::Truncated { .. })));
    }

    #[test]
    fn hash_tracks_params_and_bytes() {
        let cfg = DspConfig::default();
        let h1 = content_hash(b"abc", &cfg);
        assert_eq!(h1, content_hash(b"abc", &cfg));
        assert_ne!(h1, content_hash(b"abd", &cfg));
        let mut other = cfg.clone();
        other.resize_to = 64;
        assert_ne!(h1, content_hash(b"abc", &other));
    }
}
