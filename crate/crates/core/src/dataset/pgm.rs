//! 8-bit PGM raster codec, binary (P5) and ASCII (P2).
//!
//! Pixels are divided by the file's maxval, so loaded intensities live in
//! [0, 1]. Only 8-bit files (maxval ≤ 255) are accepted.

use super::Image;

/// Byte cursor over a PGM header: whitespace separates tokens and `#`
/// starts a comment running to end of line.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.bytes[start..self.pos]).ok()
        }
    }

    fn next_usize(&mut self, what: &str) -> Result<usize, String> {
        self.next()
            .ok_or_else(|| format!("missing {what}"))?
            .parse::<usize>()
            .map_err(|_| format!("{what} is not a nonnegative integer"))
    }
}

/// Parses a P2 or P5 PGM from raw bytes.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image, String> {
    let mut tokens = Tokens::new(bytes);
    let magic = tokens.next().ok_or("empty file")?;
    if magic != "P2" && magic != "P5" {
        return Err(format!("unsupported magic {magic:?}; only P2/P5 PGM is handled"));
    }
    let width = tokens.next_usize("width")?;
    let height = tokens.next_usize("height")?;
    let maxval = tokens.next_usize("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported; only 8-bit (1..=255) is handled"));
    }
    if width == 0 || height == 0 {
        return Err(format!("degenerate dimensions {width}x{height}"));
    }
    let count = width * height;
    let scale = maxval as f64;
    let data = if magic == "P5" {
        // Exactly one whitespace byte separates the maxval from the
        // binary payload.
        let start = tokens.pos + 1;
        if tokens.pos >= bytes.len() || !bytes[tokens.pos].is_ascii_whitespace() {
            return Err("missing whitespace between header and binary data".into());
        }
        let raw = bytes
            .get(start..start + count)
            .ok_or_else(|| format!("binary payload shorter than {count} pixels"))?;
        raw.iter().map(|&b| b as f64 / scale).collect::<Vec<f64>>()
    } else {
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let v = tokens.next_usize(&format!("pixel {i}"))?;
            if v > maxval {
                return Err(format!("pixel {i} value {v} exceeds maxval {maxval}"));
            }
            data.push(v as f64 / scale);
        }
        data
    };
    Image::new(width, height, data).map_err(|e| e.to_string())
}

/// Serializes an image as binary P5 at maxval 255; intensities are clamped
/// to [0, 1] and rounded.
pub fn format_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(
        image
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}
