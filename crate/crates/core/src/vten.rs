//! VTEN tensor files.
//!
//! Layout: `"VTEN"`, u32 version (1), u32 rank, u32 dims[rank], then
//! `product(dims)` little-endian f32 values in row-major order.

use std::fs;
use std::path::Path;

use crate::codec::{put_f32s, put_u32, Reader};
use crate::error::{Error, Result};
use crate::tensor::{Tensor, Video};

pub const MAGIC: &[u8; 4] = b"VTEN";
pub const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, t.rank() as u32);
    for &d in t.dims() {
        put_u32(&mut out, d as u32);
    }
    put_f32s(&mut out, t.values());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(bytes, "VTEN");
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion { format: "VTEN", version });
    }
    let dims = r.shape(MAX_RANK, "header")?;
    let count = dims.iter().product();
    let values = r.f32s(count, "values")?;
    r.finish()?;
    Tensor::new(dims, values)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    decode(&fs::read(path)?)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    fs::write(path, encode(t))?;
    Ok(())
}

/// Read a rank-4 `[l, h, w, ch]` video.
pub fn read_video(path: impl AsRef<Path>) -> Result<Video> {
    Video::new(read_tensor(path)?)
}

pub fn write_video(path: impl AsRef<Path>, v: &Video) -> Result<()> {
    write_tensor(path, v.tensor())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_exact() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -0.5]).unwrap();
        let bytes = encode(&t);
        let mut expected = b"VTEN".to_vec();
        for w in [1u32, 2, 1, 2] {
            expected.extend_from_slice(&w.to_le_bytes());
        }
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_bad_input() {
        let t = Tensor::new(vec![3], vec![0.0, 1.0, 2.0]).unwrap();
        let good = encode(&t);

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bad), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::UnsupportedVersion { version: 2, .. })));

        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Truncated { .. })));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode(&bad), Err(Error::Malformed { .. })));

        // A huge declared dim must fail before allocating.
        let mut bad = b"VTEN".to_vec();
        for w in [1u32, 2, u32::MAX, u32::MAX] {
            bad.extend_from_slice(&w.to_le_bytes());
        }
        assert!(decode(&bad).is_err());

        let mut nan = encode(&Tensor::new(vec![1], vec![0.0]).unwrap());
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(Error::InvalidTensor(_))));
    }
}
