//! Binary 16-bit greyscale PGM (`P5`, maxval 65535).

use std::path::Path;

use crate::error::{Error, PgmError, Result};
use crate::fsutil;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAXVAL: u32 = 65535;

fn plane_dims<T: Scalar>(image: &Tensor<T>) -> Result<(usize, usize)> {
    match *image.shape() {
        [h, w] | [1, h, w] => Ok((h, w)),
        _ => Err(Error::Input(format!("PGM needs a [H, W] or [1, H, W] image, got {:?}", image.shape()))),
    }
}

/// Encodes intensities in `[0, 1]` as `round(x · 65535)`, big-endian samples.
pub fn encode_pgm<T: Scalar>(image: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w) = plane_dims(image)?;
    let mut out = format!("P5\n{w} {h}\n{MAXVAL}\n").into_bytes();
    out.reserve(2 * h * w);
    for &v in image.data() {
        let x = v.as_f64();
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Input(format!("PGM intensity {x} outside [0, 1]")));
        }
        let q = (x * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a 16-bit `P5` image into a `[H, W]` tensor with values in `[0, 1]`.
pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let w = cur.number("width")?;
    let h = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(PgmError::MalformedHeader(format!("zero dimension {w}×{h}")));
    }
    if maxval != MAXVAL {
        return Err(PgmError::UnsupportedDepth(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PgmError::Truncated),
    }
    let (h, w) = (h as usize, w as usize);
    let payload = &bytes[cur.pos..];
    if payload.len() < 2 * h * w {
        return Err(PgmError::Truncated);
    }
    let scale = 1.0 / MAXVAL as f64;
    let data = payload[..2 * h * w]
        .chunks_exact(2)
        .map(|b| T::lit(u16::from_be_bytes([b[0], b[1]]) as f64 * scale))
        .collect();
    Ok(Tensor::new(vec![h, w], data).expect("dimensions checked"))
}

pub fn save_pgm<T: Scalar>(path: &Path, image: &Tensor<T>) -> Result<()> {
    fsutil::write_atomic(path, &encode_pgm(image)?)
}

pub fn load_pgm<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    Ok(decode_pgm(&fsutil::read(path)?)?)
}
