//! Photometric loss terms over render outputs, masks, and targets.
//!
//! Norm convention: every term is a mean over its support (all pixels, the
//! mask, or its complement) so the lambda weights stay resolution-free.
//! Reductions use fixed-shape pairwise summation, making results
//! independent of any internal parallel chunking.

use serde::Serialize;

use crate::config::LossConfig;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image};
use crate::math::pairwise_sum;

fn check_mask(img: &Image, mask: &BinaryMask) -> Result<()> {
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs mask {}x{}",
            img.height, img.width, mask.height, mask.width
        )));
    }
    Ok(())
}

/// Mean absolute difference, optionally restricted to a mask.
///
/// Empty mask support yields 0 (the caller can detect it via
/// [`l1_loss_flagged`]).
pub fn l1_loss(a: &Image, b: &Image, mask: Option<&BinaryMask>) -> Result<f64> {
    Ok(l1_loss_flagged(a, b, mask)?.0)
}

/// As [`l1_loss`], also reporting whether the support was empty.
pub fn l1_loss_flagged(a: &Image, b: &Image, mask: Option<&BinaryMask>) -> Result<(f64, bool)> {
    a.require_same_shape(b)?;
    if let Some(m) = mask {
        check_mask(a, m)?;
    }
    let ch = a.channels;
    let mut terms = Vec::with_capacity(a.data.len());
    let mut support = 0usize;
    for p in 0..a.pixel_count() {
        let keep = mask.map_or(true, |m| m.bits[p]);
        if !keep {
            continue;
        }
        support += 1;
        for c in 0..ch {
            terms.push((a.data[p * ch + c] - b.data[p * ch + c]).abs());
        }
    }
    if support == 0 {
        return Ok((0.0, true));
    }
    Ok((pairwise_sum(&terms) / (support * ch) as f64, false))
}

/// Complement-mask variant used by the reconstruction term.
fn complement(mask: &BinaryMask) -> BinaryMask {
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: mask.bits.iter().map(|&b| !b).collect(),
    }
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let mut k: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - half) * (i as f64 - half)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-region separable convolution of one channel with a 2D Gaussian.
fn conv_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let kw = kernel.len();
    let ow = w - kw + 1;
    let oh = h - kw + 1;
    // Horizontal pass.
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += plane[r * w + c + i] * k;
            }
            tmp[r * ow + c] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += tmp[(r + i) * ow + c] * k;
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Local SSIM map of one channel pair (valid windows only).
fn ssim_map_channel(
    a: &[f64],
    b: &[f64],
    w: usize,
    h: usize,
    cfg: &LossConfig,
) -> (Vec<f64>, usize, usize) {
    let kernel = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
    let ow = w - cfg.ssim_window + 1;
    let oh = h - cfg.ssim_window + 1;
    let mu_a = conv_valid(a, w, h, &kernel);
    let mu_b = conv_valid(b, w, h, &kernel);
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let e_aa = conv_valid(&aa, w, h, &kernel);
    let e_bb = conv_valid(&bb, w, h, &kernel);
    let e_ab = conv_valid(&ab, w, h, &kernel);
    let mut map = vec![0.0; ow * oh];
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let vab = e_ab[i] - ma * mb;
        map[i] = ((2.0 * ma * mb + cfg.ssim_c1) * (2.0 * vab + cfg.ssim_c2))
            / ((ma * ma + mb * mb + cfg.ssim_c1) * (va + vb + cfg.ssim_c2));
    }
    (map, ow, oh)
}

/// Mean structural similarity with a Gaussian window; symmetric in (a, b).
pub fn ssim(a: &Image, b: &Image, cfg: &LossConfig) -> Result<f64> {
    ssim_masked(a, b, None, cfg)
}

/// SSIM averaged over windows whose center pixel passes the mask.
/// `None` averages every valid window.
pub fn ssim_masked(
    a: &Image,
    b: &Image,
    keep: Option<&BinaryMask>,
    cfg: &LossConfig,
) -> Result<f64> {
    a.require_same_shape(b)?;
    if a.width < cfg.ssim_window || a.height < cfg.ssim_window {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} smaller than ssim window {}",
            a.height, a.width, cfg.ssim_window
        )));
    }
    if let Some(m) = keep {
        check_mask(a, m)?;
    }
    let half = cfg.ssim_window / 2;
    let mut terms = Vec::new();
    for ch in 0..a.channels {
        let plane_a: Vec<f64> = (0..a.pixel_count())
            .map(|p| a.data[p * a.channels + ch])
            .collect();
        let plane_b: Vec<f64> = (0..b.pixel_count())
            .map(|p| b.data[p * b.channels + ch])
            .collect();
        let (map, ow, oh) = ssim_map_channel(&plane_a, &plane_b, a.width, a.height, cfg);
        for r in 0..oh {
            for c in 0..ow {
                // Window center in image coordinates.
                let keep_this = keep.map_or(true, |m| m.get(r + half, c + half));
                if keep_this {
                    terms.push(map[r * ow + c]);
                }
            }
        }
    }
    if terms.is_empty() {
        // Fully masked-out image: define the similarity term as perfect.
        return Ok(1.0);
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// Mean accumulated alpha over the mask support; drives floor alpha to zero.
pub fn floor_supp_loss(alpha: &Image, mask: &BinaryMask) -> Result<f64> {
    if alpha.channels != 1 {
        return Err(Error::ShapeMismatch("alpha must be single-channel".into()));
    }
    check_mask(alpha, mask)?;
    let mut terms = Vec::new();
    for p in 0..alpha.pixel_count() {
        if mask.bits[p] {
            terms.push(alpha.data[p]);
        }
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// Masked L1 between the background render and the target image.
pub fn floor_bg_loss(bg_render: &Image, gt: &Image, mask: &BinaryMask) -> Result<f64> {
    l1_loss(bg_render, gt, Some(mask))
}

/// Per-term breakdown of the total objective; terms already weighted.
#[derive(Clone, Debug, Serialize)]
pub struct LossBreakdown {
    /// Mean L1 over the mask complement.
    pub l1: f64,
    /// SSIM value over the mask complement (not yet 1 - ssim).
    pub ssim: f64,
    /// (1 - lambda_ssim) * l1 + lambda_ssim * (1 - ssim).
    pub recon: f64,
    pub floor_supp: f64,
    pub floor_bg: f64,
    pub weighted_supp: f64,
    pub weighted_bg: f64,
    pub total: f64,
    /// Set when a masked mean had empty support and was defined as 0.
    pub empty_support: bool,
}

/// Full objective: reconstruction over the mask complement plus the two
/// weighted floor terms. The breakdown satisfies
/// `total = recon + weighted_supp + weighted_bg` exactly.
pub fn total_loss(
    render: &crate::render::RenderOutput,
    bg_render: &Image,
    gt: &Image,
    mask: &BinaryMask,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    render.rgb.require_same_shape(gt)?;
    bg_render.require_same_shape(gt)?;
    check_mask(gt, mask)?;

    let keep = complement(mask);
    let (l1, empty_l1) = l1_loss_flagged(&render.rgb, gt, Some(&keep))?;
    let ssim_val = ssim_masked(&render.rgb, gt, Some(&keep), cfg)?;
    let recon = (1.0 - cfg.lambda_ssim) * l1 + cfg.lambda_ssim * (1.0 - ssim_val);

    let supp = floor_supp_loss(&render.alpha, mask)?;
    let (bg, empty_bg) = l1_loss_flagged(bg_render, gt, Some(mask))?;
    let weighted_supp = cfg.lambda_supp * supp;
    let weighted_bg = cfg.lambda_bg * bg;

    Ok(LossBreakdown {
        l1,
        ssim: ssim_val,
        recon,
        floor_supp: supp,
        floor_bg: bg,
        weighted_supp,
        weighted_bg,
        total: recon + weighted_supp + weighted_bg,
        empty_support: empty_l1 || empty_bg,
    })
}
