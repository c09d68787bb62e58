//! Binary signature cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "RFMHSIG\0"
//! version  u32      1
//! num_perm u32
//! seed     u64
//! count    u64
//! count x { id_len u32, id bytes (UTF-8), num_perm x u64 }
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MinHashError, MinHashSignature};

const MAGIC: &[u8; 8] = b"RFMHSIG\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureCache {
    pub num_perm: usize,
    pub seed: u64,
    pub entries: Vec<(String, MinHashSignature)>,
}

fn cache_err(e: impl ToString) -> MinHashError {
    MinHashError::Cache(e.to_string())
}

pub fn write_signature_cache(path: impl AsRef<Path>, cache: &SignatureCache) -> Result<(), MinHashError> {
    let write = || -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path.as_ref())?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(cache.num_perm as u32).to_le_bytes())?;
        out.write_all(&cache.seed.to_le_bytes())?;
        out.write_all(&(cache.entries.len() as u64).to_le_bytes())?;
        for (id, sig) in &cache.entries {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
            for v in &sig.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    };
    if let Some(bad) = cache.entries.iter().find(|(_, s)| s.num_perm() != cache.num_perm) {
        return Err(MinHashError::LengthMismatch(cache.num_perm, bad.1.num_perm()));
    }
    write().map_err(cache_err)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_signature_cache(path: impl AsRef<Path>) -> Result<SignatureCache, MinHashError> {
    let mut r = BufReader::new(File::open(path.as_ref()).map_err(cache_err)?);
    let mut magic = [0; 8];
    r.read_exact(&mut magic).map_err(cache_err)?;
    if &magic != MAGIC {
        return Err(cache_err("bad magic"));
    }
    let version = read_u32(&mut r).map_err(cache_err)?;
    if version != VERSION {
        return Err(cache_err(format!("unsupported version {version}")));
    }
    let num_perm = read_u32(&mut r).map_err(cache_err)? as usize;
    let seed = read_u64(&mut r).map_err(cache_err)?;
    let count = read_u64(&mut r).map_err(cache_err)?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r).map_err(cache_err)? as usize;
        let mut id = vec![0; len];
        r.read_exact(&mut id).map_err(cache_err)?;
        let id = String::from_utf8(id).map_err(cache_err)?;
        let values = (0..num_perm).map(|_| read_u64(&mut r)).collect::<io::Result<Vec<_>>>().map_err(cache_err)?;
        entries.push((id, MinHashSignature { values }));
    }
    Ok(SignatureCache { num_perm, seed, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minhash::MinHasher;

    #[test]
    fn cache_round_trip_and_layout() {
        let h = MinHasher::new(8, 99);
        let cache = SignatureCache {
            num_perm: 8,
            seed: 99,
            entries: vec![("a".into(), h.signature_of_text("one two three", 5)), ("bé".into(), h.signature_of_text("", 5))],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sigs.bin");
        write_signature_cache(&path, &cache).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 99);
        assert_eq!(bytes.len(), 32 + (4 + 1 + 64) + (4 + 3 + 64));
        assert_eq!(read_signature_cache(&path).unwrap(), cache);
    }

    #[test]
    fn truncated_cache_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"RFMHSIG\0\x01\0\0\0").unwrap();
        assert!(read_signature_cache(&path).is_err());
    }
}
