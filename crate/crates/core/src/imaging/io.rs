use std::fs;
use std::io::BufWriter;
use std::path::Path;

use super::{Image, DEFAULT_PEAK};
use crate::error::{Error, Result};

/// Loads an 8-bit binary PGM (P5) or a PNG. Color PNGs are converted by
/// luminance (0.299 R + 0.587 G + 0.114 B).
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{}: not a binary PGM or PNG",
            path.display()
        )))
    }
}

/// Writes an 8-bit image. Values are clamped to [0, peak], rescaled to
/// [0, 255] and rounded half away from zero. A `.png` extension selects PNG,
/// everything else is written as binary PGM.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels = quantize(img);
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            BufWriter::new(file),
            img.width() as u32,
            img.height() as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Malformed(format!("png encode: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::Malformed(format!("png encode: {e}")))?;
        writer
            .finish()
            .map_err(|e| Error::Malformed(format!("png encode: {e}")))?;
        Ok(())
    } else {
        let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        out.extend_from_slice(&pixels);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn quantize(img: &Image) -> Vec<u8> {
    let scale = 255.0 / img.peak();
    img.data()
        .iter()
        .map(|&v| (v.clamp(0.0, img.peak()) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = read_header_uint(bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed(format!("pgm maxval {maxval}")));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "16-bit PGM (maxval {maxval})"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Malformed("pgm header not terminated".into()));
    }
    pos += 1;
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage("zero-size image".into()));
    }
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Malformed(format!(
            "pgm raster truncated: need {n} bytes, have {}",
            bytes.len() - pos
        )));
    }
    let scale = DEFAULT_PEAK / maxval as f64;
    let data = bytes[pos..pos + n]
        .iter()
        .map(|&b| b as f64 * scale)
        .collect();
    Image::new(height, width, data, DEFAULT_PEAK)
}

fn read_header_uint(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Malformed("pgm header truncated".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Malformed("pgm header field is not a number".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Malformed("pgm header number out of range".into()))
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Malformed(format!("png decode: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!("{depth:?}-bit PNG")));
    }
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| Error::Malformed("png too large".into()))?
    ];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Malformed(format!("png decode: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidImage("zero-size image".into()));
    }
    let buf = &buf[..info.buffer_size()];
    let luma = |r: u8, g: u8, b: u8| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    let data: Vec<f64> = match color {
        png::ColorType::Grayscale => buf.iter().map(|&b| b as f64).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0] as f64).collect(),
        png::ColorType::Rgb => buf
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("indexed PNG".into()));
        }
    };
    Image::new(h, w, data, DEFAULT_PEAK)
}
