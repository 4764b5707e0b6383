//! Image and ROI file formats: binary PGM (P5), CSV grids, JSON vertex lists.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{Image2D, RoiPolygon};

fn malformed(path: &Path, msg: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Parses a binary PGM. 8-bit when maxval < 256, otherwise 16-bit big-endian.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image2D, String> {
    let mut pos = 0usize;
    let mut next_token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if next_token()? != "P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let mut num = |what: &str| -> std::result::Result<usize, String> {
        next_token()?.parse::<usize>().map_err(|_| format!("bad {what}"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let needed = width * height * bpp;
    if bytes.len() < data_start + needed {
        return Err("truncated raster".into());
    }
    let raster = &bytes[data_start..data_start + needed];
    let data = if bpp == 1 {
        raster.iter().map(|&b| b as f64).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    Image2D::new(width, height, data).map_err(|e| e.to_string())
}

/// Encodes as 16-bit P5; intensities are rounded and clamped to `[0, 65535]`.
pub fn encode_pgm16(img: &Image2D) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 2);
    for &v in img.data() {
        let q = v.round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn read_pgm(path: &Path) -> Result<Image2D> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes).map_err(|m| malformed(path, m))
}

pub fn write_pgm16(path: &Path, img: &Image2D) -> Result<()> {
    fs::write(path, encode_pgm16(img))?;
    Ok(())
}

/// Grid of reals, one image row per line, comma separated.
pub fn read_csv_grid(path: &Path) -> Result<Image2D> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(malformed(
                    path,
                    format!("line {} has {} values, expected {w}", lineno + 1, row.len()),
                ))
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    Image2D::new(width.unwrap_or(0), height, data).map_err(|e| malformed(path, e.to_string()))
}

/// Reads `.pgm` files as PGM and anything else as a CSV grid.
pub fn read_image(path: &Path) -> Result<Image2D> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => read_pgm(path),
        _ => read_csv_grid(path),
    }
}

/// ROI as a JSON array of `[x, y]` vertex pairs.
pub fn read_roi_json(path: &Path) -> Result<RoiPolygon> {
    let text = fs::read_to_string(path)?;
    let vertices: Vec<[f64; 2]> = serde_json::from_str(&text)?;
    RoiPolygon::new(vertices)
}

pub fn write_roi_json(path: &Path, poly: &RoiPolygon) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer(&mut f, poly.vertices())?;
    f.write_all(b"\n")?;
    Ok(())
}
