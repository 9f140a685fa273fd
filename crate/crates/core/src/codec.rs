//! Little-endian cursor shared by the binary decoders.

use crate::error::{Error, Result};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], format: &'static str) -> Self {
        Self { buf, pos: 0, format }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated {
                format: self.format,
                context: format!("{context}: need {n} bytes at offset {}, have {}", self.pos, self.remaining()),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            let mut found = [0u8; 4];
            found.copy_from_slice(got);
            return Err(Error::BadMagic { format: self.format, found });
        }
        Ok(())
    }

    pub fn u8(&mut self, context: &str) -> Result<u8> {
        Ok(self.take(1, context)?[0])
    }

    pub fn u32(&mut self, context: &str) -> Result<u32> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn string(&mut self, context: &str) -> Result<String> {
        let n = self.u32(context)? as usize;
        let bytes = self.take(n, context)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.malformed(format!("{context}: invalid UTF-8")))
    }

    /// `count` little-endian f32 values widened to f64.
    pub fn f32s(&mut self, count: usize, context: &str) -> Result<Vec<f64>> {
        let nbytes = count
            .checked_mul(4)
            .ok_or_else(|| self.malformed(format!("{context}: element count overflows")))?;
        let bytes = self.take(nbytes, context)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    /// `rank` followed by `rank` dims; the element count must fit in what is left.
    pub fn shape(&mut self, max_rank: usize, context: &str) -> Result<Vec<usize>> {
        let rank = self.u32(context)? as usize;
        if rank == 0 || rank > max_rank {
            return Err(self.malformed(format!("{context}: rank {rank} not in 1..={max_rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = self.u32(context)? as usize;
            if d == 0 {
                return Err(self.malformed(format!("{context}: zero dimension")));
            }
            count = count
                .checked_mul(d)
                .ok_or_else(|| self.malformed(format!("{context}: element count overflows")))?;
            dims.push(d);
        }
        if count.saturating_mul(4) > self.remaining() {
            return Err(Error::Truncated {
                format: self.format,
                context: format!("{context}: dims {dims:?} need {} bytes, have {}", count.saturating_mul(4), self.remaining()),
            });
        }
        Ok(dims)
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.malformed(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    pub fn malformed(&self, detail: String) -> Error {
        Error::Malformed { format: self.format, detail }
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}
