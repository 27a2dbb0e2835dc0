//! Grayscale image IO: binary and ASCII PGM (maxval 255), plus 8-bit PNG.
//!
//! Intensities are read as reals in `0..=255`. Writers clamp to that range and round
//! half away from zero.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::edges::EdgeMap;
use crate::error::{Error, Result};
use crate::model::{CoefficientField, Image};
use crate::scalar::Scalar;

/// Largest accepted pixel count.
const MAX_PIXELS: usize = 1 << 28;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads a PGM (P2 or P5) or, by extension, a PNG converted to 8-bit luma.
pub fn read_image<T: Scalar>(path: &Path) -> Result<Image<T>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if is_png(path) {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| format_err(path, e.to_string()))?
            .to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img
            .into_raw()
            .into_iter()
            .map(|b| T::of(b as f64))
            .collect();
        return Array2::from_shape_vec((h, w), data).map_err(|e| format_err(path, e.to_string()));
    }
    decode_pgm(&bytes).map_err(|reason| format_err(path, reason))
}

struct Header<'a> {
    rest: &'a [u8],
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        loop {
            while let Some((&c, tail)) = self.rest.split_first() {
                if c.is_ascii_whitespace() {
                    self.rest = tail;
                } else {
                    break;
                }
            }
            if self.rest.first() == Some(&b'#') {
                let end = self
                    .rest
                    .iter()
                    .position(|&c| c == b'\n')
                    .unwrap_or(self.rest.len());
                self.rest = &self.rest[end..];
            } else {
                return;
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let len = self.rest.iter().take_while(|c| c.is_ascii_digit()).count();
        if len == 0 {
            return Err(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.rest[..len]).expect("ascii digits");
        self.rest = &self.rest[len..];
        text.parse().map_err(|_| format!("{what} out of range"))
    }
}

/// Parses PGM bytes; the error is a human-readable reason.
pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> std::result::Result<Image<T>, String> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err("missing P2/P5 magic number".into()),
    };
    let mut hdr = Header { rest: &bytes[2..] };
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, only 255 is accepted"));
    }
    let count = width
        .checked_mul(height)
        .filter(|&c| c <= MAX_PIXELS)
        .ok_or_else(|| format!("dimensions {width}x{height} too large"))?;
    if count == 0 {
        return Err("image has no pixels".into());
    }
    let data: Vec<T> = if binary {
        // exactly one whitespace byte separates the header from the raster
        match hdr.rest.split_first() {
            Some((c, raster)) if c.is_ascii_whitespace() => {
                if raster.len() < count {
                    return Err(format!(
                        "raster truncated: {} of {count} bytes",
                        raster.len()
                    ));
                }
                raster[..count].iter().map(|&b| T::of(b as f64)).collect()
            }
            _ => return Err("missing whitespace after header".into()),
        }
    } else {
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let v = hdr
                .number("pixel value")
                .map_err(|e| format!("{e} at index {i}"))?;
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval"));
            }
            values.push(T::of(v as f64));
        }
        values
    };
    Array2::from_shape_vec((height, width), data).map_err(|e| e.to_string())
}

fn quantize<T: Scalar>(v: T) -> u8 {
    let f = v.to_f64_lossy();
    if f.is_nan() {
        return 0;
    }
    f.clamp(0.0, 255.0).round() as u8
}

/// Binary PGM bytes for `img`.
pub fn encode_pgm<T: Scalar>(img: &Image<T>) -> Vec<u8> {
    let (h, w) = img.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.iter().map(|&v| quantize(v)));
    out
}

/// ASCII PGM text for `img`.
pub fn encode_pgm_ascii<T: Scalar>(img: &Image<T>) -> String {
    let (h, w) = img.dim();
    let mut out = format!("P2\n{w} {h}\n255\n");
    for row in img.axis_iter(Axis(0)) {
        let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Writes binary PGM, or PNG when the extension says so.
pub fn write_image<T: Scalar>(path: &Path, img: &Image<T>) -> Result<()> {
    if is_png(path) {
        let (h, w) = img.dim();
        let raw: Vec<u8> = img.iter().map(|&v| quantize(v)).collect();
        let buf = image::GrayImage::from_raw(w as u32, h as u32, raw)
            .ok_or_else(|| format_err(path, "dimensions exceed PNG limits"))?;
        return buf
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| format_err(path, e.to_string()));
    }
    fs::write(path, encode_pgm(img)).map_err(io_err(path))
}

/// Edge pixels white (255), the rest black.
pub fn write_mask(path: &Path, edges: &EdgeMap) -> Result<()> {
    let img = edges.mask.mapv(|b| if b { 255.0 } else { 0.0 });
    write_image(path, &img)
}

/// `|x_kl|` tiled in a `(K+1) x (K+1)` grid (row `k`, column `l`), min-max scaled
/// jointly to `0..=255`.
pub fn mosaic<T: Scalar>(x: &CoefficientField<T>) -> Image<f64> {
    let order = x.degree() + 1;
    let (m, n) = x.dim();
    let abs = x.maps().mapv(|v| v.to_f64_lossy().abs());
    let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = Array2::zeros((order * m, order * n));
    for k in 0..order {
        for l in 0..order {
            let map = abs.index_axis(Axis(0), k * order + l);
            let mut tile = out.slice_mut(ndarray::s![k * m..(k + 1) * m, l * n..(l + 1) * n]);
            tile.zip_mut_with(&map, |t, &v| {
                *t = if span > 0.0 {
                    255.0 * (v - lo) / span
                } else {
                    0.0
                };
            });
        }
    }
    out
}

pub fn write_mosaic<T: Scalar>(path: &Path, x: &CoefficientField<T>) -> Result<()> {
    write_image(path, &mosaic(x))
}
