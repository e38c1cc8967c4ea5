//! Image files and dataset layout.
//!
//! Writers emit binary Netpbm with a minimal header (`P6\n{w} {h}\n255\n`,
//! `P5\n{w} {h}\n255\n` or `P5\n{w} {h}\n65535\n` followed by row-major
//! samples, 16-bit samples big-endian). Readers accept any Netpbm variant.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Plane, RgbImage};

/// Stored value of a 16-bit disparity sample is `round(d * 256)`.
pub const DISPARITY_SCALE: f64 = 256.0;

pub const DISPARITY_SIDECAR: &str =
    "16-bit grayscale, disparity = value / 256, value 0 = no estimate\n";

pub fn view_file(k: usize) -> String {
    format!("view_{k}.ppm")
}

pub fn prior_file(k: usize) -> String {
    format!("prior_{k}.pgm")
}

pub fn mask_file(k: usize) -> String {
    format!("mask_{k}.pgm")
}

fn write_bytes(path: &Path, header: String, body: &[u8]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f.write_all(header.as_bytes()).map_err(io)?;
    f.write_all(body).map_err(io)?;
    f.flush().map_err(io)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let body: Vec<u8> = img.as_slice().iter().flatten().copied().collect();
    write_bytes(path, format!("P6\n{} {}\n255\n", img.width(), img.height()), &body)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_bytes(path, format!("P5\n{} {}\n255\n", img.width(), img.height()), img.as_slice())
}

pub fn write_pgm16(path: &Path, img: &Plane<u16>) -> Result<()> {
    let body: Vec<u8> = img.as_slice().iter().flat_map(|v| v.to_be_bytes()).collect();
    write_bytes(path, format!("P5\n{} {}\n65535\n", img.width(), img.height()), &body)
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_owned()));
    }
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Plane::from_vec(w, h, data))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Plane::from_vec(w, h, img.into_raw()))
}

pub fn read_gray16(path: &Path) -> Result<Plane<u16>> {
    let img = open(path)?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Plane::from_vec(w, h, img.into_raw()))
}

/// 8-bit prior image to static probabilities (`value / 255`).
pub fn read_prior(path: &Path) -> Result<Plane<f32>> {
    Ok(read_gray(path)?.map(|&v| v as f32 / 255.0))
}

pub fn prior_to_gray(p: &Plane<f32>) -> GrayImage {
    p.map(|&v| (v as f64 * 255.0).round().clamp(0.0, 255.0) as u8)
}

pub fn encode_disparity(d: &Plane<f64>) -> Plane<u16> {
    d.map(|&v| {
        if v.is_finite() && v > 0.0 {
            (v * DISPARITY_SCALE).round().clamp(1.0, 65535.0) as u16
        } else {
            0
        }
    })
}

pub fn decode_disparity(p: &Plane<u16>) -> Plane<f64> {
    p.map(|&v| if v == 0 { f64::NAN } else { v as f64 / DISPARITY_SCALE })
}

/// Writes `<stem>.pgm` and the `<stem>.txt` scale note.
pub fn write_disparity(dir: &Path, stem: &str, d: &Plane<f64>) -> Result<()> {
    write_pgm16(&dir.join(format!("{stem}.pgm")), &encode_disparity(d))?;
    write_text(&dir.join(format!("{stem}.txt")), DISPARITY_SIDECAR)
}

pub fn read_disparity(path: &Path) -> Result<Plane<f64>> {
    Ok(decode_disparity(&read_gray16(path)?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_owned()));
    }
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(path.to_owned())
}
