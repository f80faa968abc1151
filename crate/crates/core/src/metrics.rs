//! Image fidelity metrics and the purification score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::ImageRgb;

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_pair(reference: &ImageRgb, candidate: &ImageRgb) -> Result<()> {
    if reference.width != candidate.width || reference.height != candidate.height {
        return Err(Error::DimensionMismatch(
            reference.width,
            reference.height,
            candidate.width,
            candidate.height,
        ));
    }
    Ok(())
}

pub fn mse(reference: &ImageRgb, candidate: &ImageRgb) -> Result<f64> {
    check_pair(reference, candidate)?;
    let n = reference.data.len() as f64;
    Ok(reference
        .data
        .iter()
        .zip(&candidate.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// `10·log10(1/MSE)` for unit dynamic range, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &ImageRgb, candidate: &ImageRgb) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, candidate)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter over the valid region only.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let k = gaussian_kernel();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mu_a, ow, oh) = filter_valid(a, w, h, &k);
    let (mu_b, _, _) = filter_valid(b, w, h, &k);
    let (aa, _, _) = filter_valid(&prod(a, a), w, h, &k);
    let (bb, _, _) = filter_valid(&prod(b, b), w, h, &k);
    let (ab, _, _) = filter_valid(&prod(a, b), w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    total / (ow * oh) as f64
}

/// Mean SSIM (11×11 Gaussian window, σ = 1.5) over the valid region, averaged
/// over the three channels.
pub fn ssim(reference: &ImageRgb, candidate: &ImageRgb) -> Result<f64> {
    check_pair(reference, candidate)?;
    let (w, h) = (reference.width as usize, reference.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: reference.width,
            height: reference.height,
            window: SSIM_WINDOW as u32,
        });
    }
    let total: f64 = (0..3)
        .map(|c| ssim_plane(&reference.channel(c), &candidate.channel(c), w, h))
        .sum();
    Ok(total / 3.0)
}

/// PSNR figures (dB) before and after purification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreInputs {
    pub baseline_scene: f64,
    pub baseline_message: f64,
    pub purified_scene: f64,
    pub purified_message: f64,
}

/// Message PSNR drop minus scene PSNR drop.
pub fn score(inputs: &ScoreInputs) -> f64 {
    (inputs.baseline_message - inputs.purified_message) - (inputs.baseline_scene - inputs.purified_scene)
}
