//! PSNR and SSIM over full 8-bit-range channels.

use crate::error::{NocsError, Result};
use crate::image_model::Channel;

const PEAK: f64 = 255.0;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn same_dims(a: &Channel, b: &Channel) -> Result<()> {
    b.same_shape(a.width(), a.height())
}

pub fn mse(reference: &Channel, test: &Channel) -> Result<f64> {
    same_dims(reference, test)?;
    let sum: f64 = reference
        .values()
        .iter()
        .zip(test.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `10·log10(255² / MSE)` in dB; `+inf` for identical channels.
pub fn psnr(reference: &Channel, test: &Channel) -> Result<f64> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (PEAK * PEAK / e).log10())
    }
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let center = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - center;
        *v = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian filter restricted to positions where the window fits.
fn filter_valid(values: &[f64], width: usize, height: usize, kernel: &[f64; WINDOW]) -> Vec<f64> {
    let ow = width - WINDOW + 1;
    let oh = height - WINDOW + 1;
    let mut horizontal = vec![0.0; ow * height];
    for r in 0..height {
        let row = &values[r * width..][..width];
        for c in 0..ow {
            horizontal[r * ow + c] = kernel.iter().zip(&row[c..c + WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * horizontal[(r + i) * ow + c])
                .sum();
        }
    }
    out
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03,
/// L = 255, averaged over every position where the window fits.
pub fn ssim(reference: &Channel, test: &Channel) -> Result<f64> {
    same_dims(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < WINDOW || h < WINDOW {
        return Err(NocsError::InvalidParams(format!(
            "SSIM needs at least {WINDOW}x{WINDOW} pixels, got {w}x{h}"
        )));
    }
    let kernel = gaussian_kernel();
    let x = reference.values();
    let y = test.values();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, w, h, &kernel);
    let mu_y = filter_valid(y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    /// `+inf` when the channels are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compute(reference: &Channel, test: &Channel) -> Result<Self> {
        Ok(Self {
            psnr_db: psnr(reference, test)?,
            ssim: ssim(reference, test)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Deterministic pseudo-random 8-bit image shared with the SSIM reference values below.
    fn hashed(width: usize, height: usize, salt: u64) -> Channel {
        Channel::from_fn(width, height, |r, c| {
            let mut v = (r as u64) * 73_856_093 ^ (c as u64) * 19_349_663 ^ salt * 83_492_791;
            v ^= v >> 13;
            v = v.wrapping_mul(0x5bd1_e995);
            v ^= v >> 15;
            (v % 256) as f64
        })
    }

    #[test]
    fn psnr_identity_and_extremes() {
        let a = hashed(16, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let zeros = Channel::filled(8, 8, 0.0);
        let full = Channel::filled(8, 8, 255.0);
        assert_eq!(psnr(&zeros, &full).unwrap(), 0.0);
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let a = hashed(20, 15, 1);
        let b = hashed(20, 15, 2);
        let mut sum = 0.0;
        for r in 0..15 {
            for c in 0..20 {
                sum += (a.get(r, c) - b.get(r, c)).powi(2);
            }
        }
        let expected = 10.0 * (255.0f64 * 255.0 / (sum / 300.0)).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn psnr_known_mse() {
        let a = Channel::filled(4, 4, 100.0);
        let b = Channel::filled(4, 4, 110.0);
        assert_eq!(format!("{:.2}", psnr(&a, &b).unwrap()), "28.13");
    }

    #[test]
    fn ssim_identity_is_one() {
        let a = hashed(24, 19, 3);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_pair_is_luminance_term() {
        let a = Channel::filled(16, 16, 100.0);
        let b = Channel::filled(16, 16, 200.0);
        let c1 = (0.01f64 * 255.0).powi(2);
        let expected = (2.0 * 100.0 * 200.0 + c1) / (100.0f64.powi(2) + 200.0f64.powi(2) + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        // scikit-image 0.25 structural_similarity(gaussian_weights=True, sigma=1.5,
        // use_sample_covariance=False, data_range=255) on the hashed images.
        let cases = [((32, 32, 1, 2), SKIMAGE_32_1_2), ((40, 27, 5, 9), SKIMAGE_40_27_5_9)];
        for ((w, h, s1, s2), expected) in cases {
            let a = hashed(w, h, s1);
            let b = hashed(w, h, s2);
            let got = ssim(&a, &b).unwrap();
            assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
        }
        // a structured pair with SSIM far from zero
        let a = Channel::from_fn(30, 30, |r, c| ((r * 7 + c * 3) % 64) as f64 * 3.0);
        let b = Channel::from_fn(30, 30, |r, c| (((r * 7 + c * 3) % 64) as f64 * 3.0 + ((r + 2 * c) % 5) as f64 * 4.0).min(255.0));
        let got = ssim(&a, &b).unwrap();
        assert!((got - SKIMAGE_STRUCTURED).abs() < 1e-4, "{got}");
    }

    const SKIMAGE_32_1_2: f64 = 0.053671832640765985;
    const SKIMAGE_40_27_5_9: f64 = 0.008162018952658131;
    const SKIMAGE_STRUCTURED: f64 = 0.9878610906504001;

    #[test]
    fn ssim_errors() {
        let a = Channel::filled(10, 20, 1.0);
        assert!(ssim(&a, &a).is_err());
        let b = Channel::filled(20, 20, 1.0);
        let c = Channel::filled(20, 21, 1.0);
        assert!(matches!(ssim(&b, &c), Err(NocsError::DimensionMismatch { .. })));
        assert!(matches!(psnr(&b, &c), Err(NocsError::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn metrics_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = hashed(14, 13, s1);
            let b = hashed(14, 13, s2);
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn psnr_decreases_with_noise(base in 0u64..100, amp in 1.0f64..60.0) {
            let a = Channel::from_fn(16, 16, |r, c| 100.0 + ((r * 16 + c + base as usize) % 7) as f64);
            let noisy = |k: f64| Channel::from_fn(16, 16, |r, c| a.get(r, c) + if (r + c) % 2 == 0 { k } else { -k });
            prop_assert!(psnr(&a, &noisy(amp)).unwrap() > psnr(&a, &noisy(amp * 1.5)).unwrap());
        }
    }
}
