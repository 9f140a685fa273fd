//! Plain (`P2`) and binary (`P5`) PGM frames, and directories of them as videos.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Video};

const FORMAT: &str = "PGM";

fn malformed(detail: impl Into<String>) -> Error {
    Error::Malformed { format: FORMAT, detail: detail.into() }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Truncated { format: FORMAT, context: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(format!("{what} out of range")))
    }
}

/// Decode a PGM image into a `[h, w, 1]` frame scaled into `[0, 1]`.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 {
        return Err(Error::Truncated { format: FORMAT, context: "magic".into() });
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        _ => {
            let mut found = [0u8; 4];
            found[..2].copy_from_slice(&bytes[..2]);
            return Err(Error::BadMagic { format: FORMAT, found });
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed("zero-sized image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(format!("maxval {maxval} not in 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| malformed("pixel count overflows"))?;
    let scale = maxval as f64;
    let mut values = Vec::new();
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(Error::Truncated { format: FORMAT, context: "raster separator".into() });
        }
        let raster = &bytes[h.pos + 1..];
        let bpp = if maxval > 255 { 2 } else { 1 };
        let need = count.checked_mul(bpp).ok_or_else(|| malformed("raster size overflows"))?;
        if raster.len() < need {
            return Err(Error::Truncated {
                format: FORMAT,
                context: format!("raster needs {need} bytes, have {}", raster.len()),
            });
        }
        values.reserve(count);
        for i in 0..count {
            let raw = if bpp == 2 {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
            } else {
                raster[i] as usize
            };
            if raw > maxval {
                return Err(malformed(format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push(raw as f64 / scale);
        }
    } else {
        for _ in 0..count {
            let raw = h.number("sample")?;
            if raw > maxval {
                return Err(malformed(format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push(raw as f64 / scale);
        }
    }
    Tensor::new(vec![height, width, 1], values)
}

/// Encode a single-channel frame as binary 8-bit PGM.
pub fn encode(frame: &Tensor) -> Result<Vec<u8>> {
    let dims = frame.dims();
    if dims.len() != 3 || dims[2] != 1 {
        return Err(Error::ShapeMismatch(format!("PGM needs [h, w, 1], got {dims:?}")));
    }
    let mut out = format!("P5\n{} {}\n255\n", dims[1], dims[0]).into_bytes();
    out.extend(frame.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

/// Read every `*.pgm` in `dir`, sorted by file name, as the frames of a video.
pub fn read_video_dir(dir: impl AsRef<Path>) -> Result<Video> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    let frames = paths
        .iter()
        .map(|p| decode(&fs::read(p)?))
        .collect::<Result<Vec<_>>>()?;
    Video::from_frames(&frames)
}
