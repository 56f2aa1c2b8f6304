//! Seeded test masks: block losses, bar losses, mixtures and random unmasking.
//!
//! All randomness comes from a ChaCha8 stream seeded with `seed_from_u64`
//! (rand_core's PCG32 seed expansion). Integers in `[0, n)` are drawn as the
//! high 64 bits of `next_u64() * n`. Together with the placement rules below
//! this makes a mask a pure function of its [`MaskSpec`], identified by
//! [`ALGORITHM_ID`].

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{NocsError, Result};
use crate::image_model::Mask;

pub const ALGORITHM_ID: &str = "nocs-mask/v1 chacha8-seed_from_u64 widemul";

pub const DEFAULT_DENSITY: f64 = 0.15;
/// Element size at the 1200-pixel reference resolution.
pub const REFERENCE_ELEMENT_SIZE: usize = 12;
const REFERENCE_RESOLUTION: f64 = 1200.0;
/// Consecutive rejected placements after which `rect_loss` gives up on a region.
const MAX_REJECTIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskPattern {
    /// Isolated rectangles, separated by at least one valid pixel, masking the channel.
    RectLoss,
    /// Horizontal bars masking the channel.
    HbarLoss,
    /// Rectangles, horizontal bars and vertical bars.
    MixedLoss,
    /// Channel starts fully masked; random rectangles unmask it.
    RandomUnmask,
    /// 2×2 layout: rect (top-left), hbar (top-right), mixed (bottom-left), random unmask (bottom-right).
    FourQuadrant,
}

impl MaskPattern {
    pub fn name(self) -> &'static str {
        match self {
            MaskPattern::RectLoss => "rect_loss",
            MaskPattern::HbarLoss => "hbar_loss",
            MaskPattern::MixedLoss => "mixed_loss",
            MaskPattern::RandomUnmask => "random_unmask",
            MaskPattern::FourQuadrant => "four_quadrant",
        }
    }
}

impl fmt::Display for MaskPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskPattern {
    type Err = NocsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rect_loss" => MaskPattern::RectLoss,
            "hbar_loss" => MaskPattern::HbarLoss,
            "mixed_loss" => MaskPattern::MixedLoss,
            "random_unmask" => MaskPattern::RandomUnmask,
            "four_quadrant" => MaskPattern::FourQuadrant,
            other => return Err(NocsError::InvalidMaskSpec(format!("unknown pattern {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub width: usize,
    pub height: usize,
    pub pattern: MaskPattern,
    /// Requested share of masked pixels, in (0, 1).
    pub density: f64,
    /// Rectangle edge / bar thickness in pixels.
    pub element_size: usize,
    pub seed: u64,
}

impl MaskSpec {
    /// Default density and resolution-scaled element size.
    pub fn new(width: usize, height: usize, pattern: MaskPattern, seed: u64) -> Self {
        Self {
            width,
            height,
            pattern,
            density: DEFAULT_DENSITY,
            element_size: Self::default_element_size(width, height),
            seed,
        }
    }

    /// 12 pixels at 1200×1200, scaled with the shorter side, at least 1.
    pub fn default_element_size(width: usize, height: usize) -> usize {
        let side = width.min(height) as f64;
        ((REFERENCE_ELEMENT_SIZE as f64 * side / REFERENCE_RESOLUTION).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(NocsError::InvalidMaskSpec(format!(
                "empty frame {}x{}",
                self.width, self.height
            )));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(NocsError::InvalidMaskSpec(format!(
                "density {} not in (0, 1)",
                self.density
            )));
        }
        if self.element_size == 0 {
            return Err(NocsError::InvalidMaskSpec("element size must be at least 1".into()));
        }
        Ok(())
    }
}

struct MaskRng(ChaCha8Rng);

impl MaskRng {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform-ish integer in `[0, n)`; `n` must be positive.
    fn below(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Integer in `[lo, hi]`.
    fn between(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Region {
    row: usize,
    col: usize,
    height: usize,
    width: usize,
}

impl Region {
    fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Row-major validity grid the generators draw into.
struct Canvas {
    width: usize,
    flags: Vec<bool>,
}

impl Canvas {
    /// Sets a rectangle (region-relative) and returns how many flags changed.
    fn fill(&mut self, region: Region, top: usize, left: usize, h: usize, w: usize, valid: bool) -> usize {
        let mut changed = 0;
        for r in region.row + top..region.row + top + h {
            for f in &mut self.flags[r * self.width + region.col + left..][..w] {
                if *f != valid {
                    *f = valid;
                    changed += 1;
                }
            }
        }
        changed
    }

    fn all_valid(&self, region: Region, top: usize, left: usize, h: usize, w: usize) -> bool {
        (region.row + top..region.row + top + h)
            .all(|r| self.flags[r * self.width + region.col + left..][..w].iter().all(|&f| f))
    }
}

/// Places a `h×w` element uniformly inside the region, clipping it to fit.
fn place(rng: &mut MaskRng, region: Region, h: usize, w: usize) -> (usize, usize, usize, usize) {
    let h = h.min(region.height);
    let w = w.min(region.width);
    let top = rng.below(region.height - h + 1);
    let left = rng.below(region.width - w + 1);
    (top, left, h, w)
}

fn target_count(density: f64, area: usize) -> usize {
    (density * area as f64).round() as usize
}

fn rect_loss(canvas: &mut Canvas, rng: &mut MaskRng, region: Region, density: f64, e: usize) {
    let target = target_count(density, region.area());
    let mut masked = 0;
    let mut rejected = 0;
    while masked < target && rejected < MAX_REJECTIONS {
        let (h, w) = (rng.between(e, 2 * e), rng.between(e, 2 * e));
        let (top, left, h, w) = place(rng, region, h, w);
        // one-pixel valid border keeps every rectangle its own component
        let (t0, l0) = (top.saturating_sub(1), left.saturating_sub(1));
        let t1 = (top + h + 1).min(region.height);
        let l1 = (left + w + 1).min(region.width);
        if canvas.all_valid(region, t0, l0, t1 - t0, l1 - l0) {
            masked += canvas.fill(region, top, left, h, w, false);
            rejected = 0;
        } else {
            rejected += 1;
        }
    }
}

fn bar_dims(rng: &mut MaskRng, e: usize, horizontal: bool) -> (usize, usize) {
    let length = rng.between(3 * e, 8 * e);
    if horizontal {
        (e, length)
    } else {
        (length, e)
    }
}

fn hbar_loss(canvas: &mut Canvas, rng: &mut MaskRng, region: Region, density: f64, e: usize) {
    let target = target_count(density, region.area());
    let mut masked = 0;
    let mut budget = 100 * region.area();
    while masked < target && budget > 0 {
        let (h, w) = bar_dims(rng, e, true);
        let (top, left, h, w) = place(rng, region, h, w);
        masked += canvas.fill(region, top, left, h, w, false);
        budget -= 1;
    }
}

fn mixed_loss(canvas: &mut Canvas, rng: &mut MaskRng, region: Region, density: f64, e: usize) {
    let target = target_count(density, region.area());
    let mut masked = 0;
    let mut budget = 100 * region.area();
    while masked < target && budget > 0 {
        let (h, w) = match rng.below(3) {
            0 => (rng.between(e, 2 * e), rng.between(e, 2 * e)),
            1 => bar_dims(rng, e, true),
            _ => bar_dims(rng, e, false),
        };
        let (top, left, h, w) = place(rng, region, h, w);
        masked += canvas.fill(region, top, left, h, w, false);
        budget -= 1;
    }
}

fn random_unmask(canvas: &mut Canvas, rng: &mut MaskRng, region: Region, density: f64, e: usize) {
    canvas.fill(region, 0, 0, region.height, region.width, false);
    let target = region.area() - target_count(density, region.area());
    let mut valid = 0;
    let mut budget = 100 * region.area();
    while valid < target && budget > 0 {
        let (h, w) = (rng.between(e, 3 * e), rng.between(e, 3 * e));
        let (top, left, h, w) = place(rng, region, h, w);
        valid += canvas.fill(region, top, left, h, w, true);
        budget -= 1;
    }
}

fn draw(canvas: &mut Canvas, rng: &mut MaskRng, pattern: MaskPattern, region: Region, spec: &MaskSpec) {
    if region.area() == 0 {
        return;
    }
    let (d, e) = (spec.density, spec.element_size);
    match pattern {
        MaskPattern::RectLoss => rect_loss(canvas, rng, region, d, e),
        MaskPattern::HbarLoss => hbar_loss(canvas, rng, region, d, e),
        MaskPattern::MixedLoss => mixed_loss(canvas, rng, region, d, e),
        MaskPattern::RandomUnmask => random_unmask(canvas, rng, region, d, e),
        MaskPattern::FourQuadrant => {
            let (h0, w0) = (region.height / 2, region.width / 2);
            let quadrants = [
                (MaskPattern::RectLoss, 0, 0, h0, w0),
                (MaskPattern::HbarLoss, 0, w0, h0, region.width - w0),
                (MaskPattern::MixedLoss, h0, 0, region.height - h0, w0),
                (MaskPattern::RandomUnmask, h0, w0, region.height - h0, region.width - w0),
            ];
            for (p, r, c, h, w) in quadrants {
                let sub = Region {
                    row: region.row + r,
                    col: region.col + c,
                    height: h,
                    width: w,
                };
                draw(canvas, rng, p, sub, spec);
            }
        }
    }
}

/// Generates the mask described by `spec`. Same spec, same mask.
pub fn generate_mask(spec: &MaskSpec) -> Result<Mask> {
    spec.validate()?;
    let mut canvas = Canvas {
        width: spec.width,
        flags: vec![true; spec.width * spec.height],
    };
    let mut rng = MaskRng::new(spec.seed);
    let full = Region {
        row: 0,
        col: 0,
        height: spec.height,
        width: spec.width,
    };
    draw(&mut canvas, &mut rng, spec.pattern, full, spec);
    if !canvas.flags.iter().any(|&f| f) {
        return Err(NocsError::InvalidMaskSpec("generated mask has no valid pixel".into()));
    }
    Mask::new(spec.width, spec.height, canvas.flags)
}
