//! Minimal Netpbm greyscale (`P2` / `P5`) reader for the `transform`
//! subcommand. Samples are scaled by `1 / maxval` into `[0, 1]`.

use std::path::Path;

use orpt_core::ImagePlane;

use crate::error::{OrptError, Result};

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| OrptError::format(self.path, start as u64, "expected a decimal number"))
    }
}

pub fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<ImagePlane> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(OrptError::format(path, 0, "not a P2/P5 greymap")),
    };
    let mut c = Cursor { path, bytes, pos: 2 };
    let (w, h) = (c.number()?, c.number()?);
    let maxval = c.number()?;
    if w != h || w == 0 {
        return Err(OrptError::format(path, 2, format!("image must be square, got {w}x{h}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(OrptError::format(path, c.pos as u64, format!("bad maxval {maxval}")));
    }
    let n = w * h;
    let scale = 1.0 / maxval as f64;
    let mut px = Vec::with_capacity(n);
    if binary {
        c.pos += 1;
        let width = if maxval > 255 { 2 } else { 1 };
        let data = bytes
            .get(c.pos..c.pos + n * width)
            .ok_or_else(|| OrptError::format(path, bytes.len() as u64, "truncated pixel data"))?;
        for s in data.chunks_exact(width) {
            let v = if width == 2 { u16::from_be_bytes([s[0], s[1]]) as usize } else { s[0] as usize };
            px.push(v as f64 * scale);
        }
    } else {
        for _ in 0..n {
            let at = c.pos;
            let v = c.number()?;
            if v > maxval {
                return Err(OrptError::format(path, at as u64, format!("sample {v} exceeds maxval")));
            }
            px.push(v as f64 * scale);
        }
    }
    Ok(ImagePlane::new(w, px)?)
}

pub fn read_pgm(path: &Path) -> Result<ImagePlane> {
    let bytes = std::fs::read(path).map_err(|e| OrptError::io(path, e))?;
    parse_pgm(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_binary() {
        let p = Path::new("x");
        let a = parse_pgm(p, b"P2\n# c\n2 2\n255\n0 255\n51 102\n").unwrap();
        assert_eq!(a.pixels(), &[0.0, 1.0, 0.2, 0.4]);
        let b = parse_pgm(p, b"P5 2 2 255\n\x00\xff\x33\x66").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new("x");
        for bad in [&b"P6 1 1 255\n\x00"[..], b"P5 2 1 255\n\x00\x00", b"P5 2 2 255\n\x00", b"P2 1 1 9\n10\n"] {
            assert!(matches!(parse_pgm(p, bad), Err(OrptError::Format { .. })));
        }
    }
}
