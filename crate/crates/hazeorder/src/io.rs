//! Image and depth-map file I/O: 8-bit PNG and binary PPM/PGM for images,
//! 16-bit gray PNG and PFM for depth maps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};
use crate::image::{PlanarImage, ScalarMap};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, e.to_string())
}

/// Reads an 8-bit PNG (gray/RGB, alpha stripped) or binary PPM/PGM image.
pub fn read_image(path: &Path) -> Result<PlanarImage> {
    let reader = ImageReader::open(path).map_err(|e| io_err(path, e))?;
    let img = reader.decode().map_err(|e| io_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => PlanarImage::from_bytes(buf.as_raw(), w, h, 1),
        DynamicImage::ImageLumaA8(buf) => {
            let raw: Vec<u8> = buf.as_raw().chunks_exact(2).map(|p| p[0]).collect();
            PlanarImage::from_bytes(&raw, w, h, 1)
        }
        DynamicImage::ImageRgb8(buf) => PlanarImage::from_bytes(buf.as_raw(), w, h, 3),
        DynamicImage::ImageRgba8(buf) => {
            let raw: Vec<u8> = buf
                .as_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect();
            PlanarImage::from_bytes(&raw, w, h, 3)
        }
        other => Err(io_err(
            path,
            format!("unsupported pixel format {:?} (need 8-bit gray or RGB)", other.color()),
        )),
    }
}

/// Writes an image as 8-bit PNG or PPM/PGM depending on the extension.
pub fn write_image(path: &Path, img: &PlanarImage) -> Result<()> {
    let bytes = img.to_bytes();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = if img.channels() == 1 {
        image::GrayImage::from_raw(w, h, bytes)
            .expect("buffer sized to image")
            .save(path)
    } else {
        image::RgbImage::from_raw(w, h, bytes)
            .expect("buffer sized to image")
            .save(path)
    };
    result.map_err(|e| io_err(path, e))
}

/// Reads a depth map: 16-bit gray PNG scaled by `depth_scale / 65535`, or a
/// grayscale PFM holding raw depth values.
pub fn read_depth(path: &Path, depth_scale: f64) -> Result<ScalarMap> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
        return read_pfm(path);
    }
    let reader = ImageReader::open(path).map_err(|e| io_err(path, e))?;
    let img = reader.decode().map_err(|e| io_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let data = buf
                .as_raw()
                .iter()
                .map(|&v| v as f64 / 65535.0 * depth_scale)
                .collect();
            ScalarMap::new(w, h, data)
        }
        DynamicImage::ImageLuma8(buf) => {
            let data = buf
                .as_raw()
                .iter()
                .map(|&v| v as f64 / 255.0 * depth_scale)
                .collect();
            ScalarMap::new(w, h, data)
        }
        other => Err(io_err(
            path,
            format!("unsupported depth format {:?} (need 16-bit gray PNG or PFM)", other.color()),
        )),
    }
}

/// Reads a grayscale PFM (raw 32-bit floats, rows stored bottom-to-top).
/// Negative samples are rejected; depth must be nonnegative.
pub fn read_pfm(path: &Path) -> Result<ScalarMap> {
    let mut file = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut content = Vec::new();
    file.read_to_end(&mut content).map_err(|e| io_err(path, e))?;

    // header: "Pf" <w> <h> <scale>, whitespace separated
    let mut pos = 0;
    let mut token = |content: &[u8]| -> Result<String> {
        while pos < content.len() && content[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < content.len() && !content[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(io_err(path, "truncated PFM header"));
        }
        // consume the single whitespace terminating the token
        if pos < content.len() {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&content[start..pos - 1]).into_owned())
    };
    let magic = token(&content)?;
    if magic != "Pf" {
        return Err(io_err(path, format!("not a grayscale PFM (magic '{magic}')")));
    }
    let w: usize = token(&content)?.parse().map_err(|e| io_err(path, format!("bad width: {e}")))?;
    let h: usize = token(&content)?.parse().map_err(|e| io_err(path, format!("bad height: {e}")))?;
    let scale: f64 = token(&content)?.parse().map_err(|e| io_err(path, format!("bad scale: {e}")))?;
    let little_endian = scale < 0.0;

    let body = &content[pos..];
    if body.len() < w * h * 4 {
        return Err(io_err(path, "truncated PFM data"));
    }
    let mut data = vec![0.0f64; w * h];
    for y in 0..h {
        // PFM rows run bottom-to-top
        let out_row = h - 1 - y;
        for x in 0..w {
            let off = (y * w + x) * 4;
            let raw: [u8; 4] = body[off..off + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if !v.is_finite() || v < 0.0 {
                return Err(io_err(path, format!("invalid depth sample {v}")));
            }
            data[out_row * w + x] = v as f64;
        }
    }
    ScalarMap::new(w, h, data)
}

/// Writes a grayscale little-endian PFM.
pub fn write_pfm(path: &Path, map: &ScalarMap) -> Result<()> {
    let mut file = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    write!(file, "Pf\n{} {}\n-1.0\n", map.width(), map.height()).map_err(|e| io_err(path, e))?;
    let (w, h) = (map.width(), map.height());
    for y in (0..h).rev() {
        for x in 0..w {
            let v = map.get(x, y) as f32;
            file.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    file.flush().map_err(|e| io_err(path, e))
}

/// Renders a scalar map as an 8-bit gray image by linear min-max stretch.
pub fn render_map(map: &ScalarMap) -> PlanarImage {
    let stretched = crate::pipeline::normalize(map);
    PlanarImage::new(map.width(), map.height(), 1, stretched.data().to_vec())
        .expect("normalized map is in [0,1]")
}
