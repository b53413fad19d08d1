//! Raster file formats.
//!
//! * 16-bit grayscale PNG for images, with a small binary sidecar
//!   (`<file>.meta`, little-endian) recording the affine mapping from stored
//!   integers back to real gray levels: `gl = offset + scale * stored`.
//!   Already-quantized images store with the identity mapping; everything else
//!   is min/max normalized into the 16-bit range.
//! * binary PGM (P5, maxval 65535) as an alternative image container, with the
//!   same sidecar.
//! * 8-bit PNG for masks (0/255) and region-label maps (codes 0..=5).
//! * `.gl64` raw dumps (magic + dims + little-endian f64 samples) for lossless
//!   debug intermediates.

use crate::error::{Error, Result};
use crate::imaging::{RadiometricImage, RegionMask};
use crate::thermal::RegionMap;
use image::{ImageBuffer, Luma};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

const SIDECAR_MAGIC: &[u8; 4] = b"IRGL";
const SIDECAR_VERSION: u32 = 1;
const GL64_MAGIC: &[u8; 6] = b"IRGL64";

/// Affine mapping from stored integer samples to real gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayLevelMapping {
    pub offset: f64,
    pub scale: f64,
}

impl GrayLevelMapping {
    pub const IDENTITY: GrayLevelMapping = GrayLevelMapping {
        offset: 0.0,
        scale: 1.0,
    };

    fn apply(&self, stored: u16) -> f64 {
        self.offset + self.scale * stored as f64
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    PathBuf::from(os)
}

fn write_sidecar(path: &Path, mapping: GrayLevelMapping) -> Result<()> {
    let mut buf = Vec::with_capacity(24);
    buf.extend_from_slice(SIDECAR_MAGIC);
    buf.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    buf.extend_from_slice(&mapping.offset.to_le_bytes());
    buf.extend_from_slice(&mapping.scale.to_le_bytes());
    fs::write(sidecar_path(path), buf)?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<Option<GrayLevelMapping>> {
    let sc = sidecar_path(path);
    if !sc.exists() {
        return Ok(None);
    }
    let data = fs::read(&sc)?;
    if data.len() != 24 || &data[0..4] != SIDECAR_MAGIC {
        return Err(Error::ValueError(format!(
            "malformed sidecar {}",
            sc.display()
        )));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != SIDECAR_VERSION {
        return Err(Error::ValueError(format!(
            "unsupported sidecar version {version}"
        )));
    }
    let offset = f64::from_le_bytes(data[8..16].try_into().unwrap());
    let scale = f64::from_le_bytes(data[16..24].try_into().unwrap());
    Ok(Some(GrayLevelMapping { offset, scale }))
}

/// Pick the storage mapping: identity when every sample is already an integer
/// in [0, 65535], min/max normalization otherwise.
fn choose_mapping(img: &RadiometricImage) -> (GrayLevelMapping, Vec<u16>) {
    let all_integral = img
        .samples()
        .iter()
        .all(|&v| v >= 0.0 && v <= 65535.0 && v.fract() == 0.0);
    if all_integral {
        let stored = img.samples().iter().map(|&v| v as u16).collect();
        return (GrayLevelMapping::IDENTITY, stored);
    }
    let min = img.samples().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img
        .samples()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = if max > min { (max - min) / 65535.0 } else { 0.0 };
    let stored = img
        .samples()
        .iter()
        .map(|&v| {
            if scale == 0.0 {
                0u16
            } else {
                ((v - min) / scale).round().clamp(0.0, 65535.0) as u16
            }
        })
        .collect();
    (
        GrayLevelMapping {
            offset: min,
            scale,
        },
        stored,
    )
}

/// Write a 16-bit grayscale PNG plus its gray-level sidecar.
pub fn save_image_png16(img: &RadiometricImage, path: &Path) -> Result<()> {
    let (mapping, stored) = choose_mapping(img);
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width(), img.height(), stored)
            .expect("dimensions match the buffer by construction");
    buf.save(path)?;
    write_sidecar(path, mapping)
}

/// Read a 16-bit grayscale PNG, applying the sidecar mapping when present.
pub fn load_image_png16(path: &Path) -> Result<RadiometricImage> {
    let decoded = image::open(path)?.into_luma16();
    let (w, h) = decoded.dimensions();
    let mapping = read_sidecar(path)?.unwrap_or(GrayLevelMapping::IDENTITY);
    let samples = decoded.into_raw().into_iter().map(|v| mapping.apply(v)).collect();
    RadiometricImage::new(w, h, samples)
}

/// Write a binary PGM (P5, maxval 65535, big-endian samples) plus sidecar.
pub fn save_image_pgm(img: &RadiometricImage, path: &Path) -> Result<()> {
    let (mapping, stored) = choose_mapping(img);
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    for v in stored {
        w.write_all(&v.to_be_bytes())?;
    }
    w.flush()?;
    write_sidecar(path, mapping)
}

/// Read a binary PGM (8- or 16-bit), applying the sidecar mapping when present.
pub fn load_image_pgm(path: &Path) -> Result<RadiometricImage> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut pos = 0usize;

    fn next_token(data: &[u8], pos: &mut usize) -> Result<String> {
        // skip whitespace and '#' comment lines
        loop {
            while *pos < data.len() && data[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < data.len() && data[*pos] == b'#' {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::ValueError("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
    }

    let magic = next_token(&data, &mut pos)?;
    if magic != "P5" {
        return Err(Error::ValueError(format!(
            "not a binary PGM (magic {magic})"
        )));
    }
    let width: u32 = next_token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::ValueError("bad PGM width".into()))?;
    let height: u32 = next_token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::ValueError("bad PGM height".into()))?;
    let maxval: u32 = next_token(&data, &mut pos)?
        .parse()
        .map_err(|_| Error::ValueError("bad PGM maxval".into()))?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::ValueError(format!("bad PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let n = width as usize * height as usize;
    let mut raw = Vec::with_capacity(n);
    if maxval < 256 {
        if data.len() < pos + n {
            return Err(Error::ValueError("truncated PGM data".into()));
        }
        raw.extend(data[pos..pos + n].iter().map(|&b| b as u16));
    } else {
        if data.len() < pos + 2 * n {
            return Err(Error::ValueError("truncated PGM data".into()));
        }
        for i in 0..n {
            raw.push(u16::from_be_bytes([data[pos + 2 * i], data[pos + 2 * i + 1]]));
        }
    }
    let mapping = read_sidecar(path)?.unwrap_or(GrayLevelMapping::IDENTITY);
    let samples = raw.into_iter().map(|v| mapping.apply(v)).collect();
    RadiometricImage::new(width, height, samples)
}

/// Write a mask as an 8-bit PNG (255 inside, 0 outside).
pub fn save_mask_png(mask: &RegionMask, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width(), mask.height(), pixels)
            .expect("dimensions match the buffer by construction");
    buf.save(path)?;
    Ok(())
}

/// Read a mask from an 8-bit PNG; any nonzero pixel is inside.
pub fn load_mask_png(path: &Path) -> Result<RegionMask> {
    let decoded = image::open(path)?.into_luma8();
    let (w, h) = decoded.dimensions();
    let bits = decoded.into_raw().into_iter().map(|v| v > 0).collect();
    RegionMask::from_bits(w, h, bits)
}

/// Write a region-label map as an 8-bit PNG carrying the raw codes
/// (0 = none, 1 = engine, 2 = body, 3 = exhaust, 4 = windows, 5 = running gear).
pub fn save_region_map_png(map: &RegionMap, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(map.width(), map.height(), map.codes().to_vec())
            .expect("dimensions match the buffer by construction");
    buf.save(path)?;
    Ok(())
}

/// Read a region-label map written by [`save_region_map_png`].
pub fn load_region_map_png(path: &Path) -> Result<RegionMap> {
    let decoded = image::open(path)?.into_luma8();
    let (w, h) = decoded.dimensions();
    RegionMap::new(w, h, decoded.into_raw())
}

/// Lossless raw dump: magic, LE dimensions, LE f64 samples.
pub fn save_raw_gl64(img: &RadiometricImage, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(GL64_MAGIC)?;
    w.write_all(&img.width().to_le_bytes())?;
    w.write_all(&img.height().to_le_bytes())?;
    for &v in img.samples() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a raw dump written by [`save_raw_gl64`].
pub fn load_raw_gl64(path: &Path) -> Result<RadiometricImage> {
    let data = fs::read(path)?;
    if data.len() < 14 || &data[0..6] != GL64_MAGIC {
        return Err(Error::ValueError(format!(
            "not a gl64 raw image: {}",
            path.display()
        )));
    }
    let width = u32::from_le_bytes(data[6..10].try_into().unwrap());
    let height = u32::from_le_bytes(data[10..14].try_into().unwrap());
    let n = width as usize * height as usize;
    if data.len() != 14 + 8 * n {
        return Err(Error::ValueError("truncated gl64 raw image".into()));
    }
    let samples = (0..n)
        .map(|i| f64::from_le_bytes(data[14 + 8 * i..22 + 8 * i].try_into().unwrap()))
        .collect();
    RadiometricImage::new(width, height, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use tempfile::tempdir;

    fn random_image(seed: u64, w: u32, h: u32) -> RadiometricImage {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        RadiometricImage::new(
            w,
            h,
            (0..w as usize * h as usize)
                .map(|_| -50.0 + 300.0 * rng.random::<f64>())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn png_quantized_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("q.png");
        let img = RadiometricImage::new(3, 2, vec![0.0, 1.0, 2.0, 100.0, 65535.0, 7.0]).unwrap();
        save_image_png16(&img, &path).unwrap();
        let back = load_image_png16(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn png_real_valued_round_trips_within_step() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.png");
        let img = random_image(3, 17, 9);
        save_image_png16(&img, &path).unwrap();
        let back = load_image_png16(&path).unwrap();
        let min = img.samples().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = img.samples().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let step = (max - min) / 65535.0;
        for (&a, &b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 0.5 * step + 1e-12);
        }
    }

    #[test]
    fn pgm_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = random_image(11, 13, 8);
        save_image_pgm(&img, &path).unwrap();
        let back = load_image_pgm(&path).unwrap();
        let min = img.samples().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = img.samples().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let step = (max - min) / 65535.0;
        for (&a, &b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 0.5 * step + 1e-12);
        }
    }

    #[test]
    fn mask_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = RegionMask::from_fn(11, 7, |x, y| (x * y) % 3 == 1);
        save_mask_png(&mask, &path).unwrap();
        assert_eq!(load_mask_png(&path).unwrap(), mask);
    }

    #[test]
    fn region_map_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.png");
        let map = RegionMap::new(6, 2, vec![0, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1, 0]).unwrap();
        save_region_map_png(&map, &path).unwrap();
        assert_eq!(load_region_map_png(&path).unwrap(), map);
    }

    #[test]
    fn gl64_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.gl64");
        let img = random_image(21, 9, 14);
        save_raw_gl64(&img, &path).unwrap();
        let back = load_raw_gl64(&path).unwrap();
        for (&a, &b) in img.samples().iter().zip(back.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
