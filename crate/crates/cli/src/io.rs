//! Image, band-manifest and mask files.
//!
//! `.png`, `.ppm`, `.pgm` and `.pnm` files are read as 8-bit RGB (or one
//! grayscale band). A `.bands` manifest lists one grayscale file per spectral
//! band, one path per line, relative to the manifest; blank lines and `#`
//! comments are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, RgbImage};
use nocs_core::{Channel, Mask};

use crate::error::CliError;

/// 8-bit planar image with one or more bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiBand {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<Vec<u8>>,
}

impl MultiBand {
    pub fn channel(&self, index: usize) -> Channel {
        Channel::from_u8(self.width, self.height, &self.bands[index]).expect("band matches frame")
    }

    pub fn check_band(&self, index: usize) -> Result<(), CliError> {
        if self.bands.len() < 2 {
            return Err(CliError::Validation(format!(
                "image has {} band(s); at least one reference band besides the distorted one is needed",
                self.bands.len()
            )));
        }
        if index >= self.bands.len() {
            return Err(CliError::Validation(format!(
                "channel {index} out of range for {} bands",
                self.bands.len()
            )));
        }
        Ok(())
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

pub fn is_image_path(path: &Path) -> bool {
    matches!(extension(path).as_str(), "png" | "ppm" | "pgm" | "pnm" | "bands")
}

fn open_image(path: &Path) -> Result<DynamicImage, CliError> {
    image::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_gray(path: &Path) -> Result<GrayImage, CliError> {
    Ok(open_image(path)?.to_luma8())
}

fn split_rgb(img: &RgbImage) -> Vec<Vec<u8>> {
    (0..3).map(|k| img.pixels().map(|p| p.0[k]).collect()).collect()
}

pub fn load_image(path: &Path) -> Result<MultiBand, CliError> {
    if extension(path) == "bands" {
        return load_manifest(path);
    }
    let img = open_image(path)?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let bands = match img.color() {
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16 => vec![img.to_luma8().into_raw()],
        _ => split_rgb(&img.to_rgb8()),
    };
    Ok(MultiBand { width, height, bands })
}

fn manifest_entries(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

fn load_manifest(path: &Path) -> Result<MultiBand, CliError> {
    let entries = manifest_entries(path)?;
    if entries.is_empty() {
        return Err(CliError::Input(format!("{}: manifest lists no bands", path.display())));
    }
    let mut bands = Vec::with_capacity(entries.len());
    let mut dims = None;
    for entry in &entries {
        let g = load_gray(entry)?;
        let d = (g.width() as usize, g.height() as usize);
        if *dims.get_or_insert(d) != d {
            return Err(CliError::Validation(format!(
                "{}: band size {}x{} differs from the first band",
                entry.display(),
                d.0,
                d.1
            )));
        }
        bands.push(g.into_raw());
    }
    let (width, height) = dims.expect("at least one band");
    Ok(MultiBand { width, height, bands })
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn save_image(path: &Path, img: &MultiBand) -> Result<(), CliError> {
    let (w, h) = (img.width as u32, img.height as u32);
    if extension(path) == "bands" {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("band");
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut manifest = String::new();
        for (i, band) in img.bands.iter().enumerate() {
            let name = format!("{stem}_band{i}.png");
            GrayImage::from_raw(w, h, band.clone())
                .expect("band matches frame")
                .save(dir.join(&name))
                .map_err(|e| write_err(&dir.join(&name), e))?;
            manifest.push_str(&name);
            manifest.push('\n');
        }
        return fs::write(path, manifest).map_err(|e| write_err(path, e));
    }
    match img.bands.len() {
        1 => GrayImage::from_raw(w, h, img.bands[0].clone())
            .expect("band matches frame")
            .save(path)
            .map_err(|e| write_err(path, e)),
        3 => {
            let mut rgb = Vec::with_capacity(img.width * img.height * 3);
            for i in 0..img.width * img.height {
                rgb.extend(img.bands.iter().map(|b| b[i]));
            }
            RgbImage::from_raw(w, h, rgb)
                .expect("bands match frame")
                .save(path)
                .map_err(|e| write_err(path, e))
        }
        n => Err(CliError::Validation(format!(
            "{n} bands cannot be stored in {}; use a .bands manifest",
            path.display()
        ))),
    }
}

/// Masks are 8-bit grayscale: 0 = masked, 255 = valid. Any other value is rejected.
pub fn load_mask(path: &Path) -> Result<Mask, CliError> {
    let g = load_gray(path)?;
    let (w, h) = (g.width() as usize, g.height() as usize);
    let mut flags = Vec::with_capacity(w * h);
    for (i, &v) in g.as_raw().iter().enumerate() {
        match v {
            0 => flags.push(false),
            255 => flags.push(true),
            _ => {
                return Err(CliError::Validation(format!(
                    "{}: mask value {v} at pixel {i}; only 0 and 255 are allowed",
                    path.display()
                )))
            }
        }
    }
    Mask::new(w, h, flags).map_err(CliError::from)
}

pub fn save_mask(path: &Path, mask: &Mask) -> Result<(), CliError> {
    let raw = mask.flags().iter().map(|&f| if f { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("mask matches frame")
        .save(path)
        .map_err(|e| write_err(path, e))
}

/// Clamp to [0, 255], then round half to even.
pub fn quantize(channel: &Channel) -> Vec<u8> {
    channel
        .values()
        .iter()
        .map(|v| v.clamp(0.0, 255.0).round_ties_even() as u8)
        .collect()
}
