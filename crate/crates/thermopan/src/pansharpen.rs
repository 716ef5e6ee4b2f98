//! Pansharpening fusion: predicted visible low-frequency band plus
//! gain-weighted thermal high-frequency detail, with out-of-band
//! handling and the lambda-sweep validation harness.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frequency::{decompose, KernelSpec};
use crate::metrics::psnr;
use crate::raster::{ImageF32, PairedSample};

/// What to do with fused pixels that leave [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfBand {
    /// Clamp each pixel into [0,1]; saturates to black/white locally.
    #[default]
    Clip,
    /// One affine map over the whole image (all three channels jointly)
    /// squeezing the range back into [0,1]; identity when nothing is
    /// out of band.
    Renormalize,
}

/// Fusion settings: high-frequency gain and out-of-band policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub lambda: f32,
    pub out_of_band: OutOfBand,
}

impl FusionConfig {
    pub fn new(lambda: f32, out_of_band: OutOfBand) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a nonnegative finite gain, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            out_of_band,
        })
    }
}

impl Default for FusionConfig {
    /// Gain 3 with clipping, the default operating point.
    fn default() -> Self {
        Self {
            lambda: 3.0,
            out_of_band: OutOfBand::Clip,
        }
    }
}

fn check_fusion_shapes(lf_rgb: &ImageF32, hf_thermal: &ImageF32) -> Result<()> {
    if lf_rgb.channels() != 3 {
        return Err(Error::InvalidArgument(
            "fusion expects a 3-channel low-frequency image".into(),
        ));
    }
    if hf_thermal.channels() != 1 {
        return Err(Error::InvalidArgument(
            "fusion expects a single-channel thermal high-frequency band".into(),
        ));
    }
    if lf_rgb.height() != hf_thermal.height() || lf_rgb.width() != hf_thermal.width() {
        return Err(Error::ShapeMismatch(format!(
            "lf {}x{} vs hf {}x{}",
            lf_rgb.height(),
            lf_rgb.width(),
            hf_thermal.height(),
            hf_thermal.width()
        )));
    }
    Ok(())
}

/// The raw fused sum `lf + lambda * replicate3(hf)` with no out-of-band
/// handling; values may leave [0,1].
pub fn fuse_unbounded(lf_rgb: &ImageF32, hf_thermal: &ImageF32, lambda: f32) -> Result<ImageF32> {
    check_fusion_shapes(lf_rgb, hf_thermal)?;
    if lambda == 0.0 {
        return Ok(lf_rgb.clone());
    }
    let mut out = lf_rgb.clone();
    let hf = hf_thermal.data();
    for (i, px) in out.data_mut().chunks_exact_mut(3).enumerate() {
        let add = lambda * hf[i];
        px[0] += add;
        px[1] += add;
        px[2] += add;
    }
    Ok(out)
}

fn apply_out_of_band(mut img: ImageF32, mode: OutOfBand) -> ImageF32 {
    match mode {
        OutOfBand::Clip => {
            for v in img.data_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            img
        }
        OutOfBand::Renormalize => {
            let (lo, hi) = img.min_max();
            if lo >= 0.0 && hi <= 1.0 {
                return img;
            }
            // Map [min(lo,0), max(hi,1)] onto [0,1]: order-preserving and
            // an identity in the limit of an in-band image.
            let m = lo.min(0.0);
            let span = hi.max(1.0) - m;
            for v in img.data_mut() {
                *v = ((*v - m) / span).clamp(0.0, 1.0);
            }
            img
        }
    }
}

/// Fuse a 3-channel low-frequency image with a signed single-channel
/// thermal high-frequency band, then resolve out-of-band pixels per the
/// config. With lambda 0 this is bit-identical to the LF input.
pub fn fuse(lf_rgb: &ImageF32, hf_thermal: &ImageF32, cfg: &FusionConfig) -> Result<ImageF32> {
    let raw = fuse_unbounded(lf_rgb, hf_thermal, cfg.lambda)?;
    Ok(apply_out_of_band(raw, cfg.out_of_band))
}

/// Ground-truth fusion: blend the visible image's own LF band with the
/// thermal HF band. Run before any training to see what the fusion step
/// alone can achieve.
pub fn oracle_fuse(pair: &PairedSample, spec: &KernelSpec, cfg: &FusionConfig) -> Result<ImageF32> {
    if !pair.thermal.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let visible = decompose(&pair.visible, spec)?;
    let thermal = decompose(&pair.thermal.to_image(), spec)?;
    fuse(&visible.lf, &thermal.hf, cfg)
}

/// Whether sweep PSNR is measured on clipped or raw fused images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    #[default]
    Clipped,
    Unclipped,
}

/// Distribution of PSNR over a pair set for one gain value.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f32,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `lambda,min,q1,median,q3,max,mean` with 6 decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,min,q1,median,q3,max,mean\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.lambda, r.min, r.q1, r.median, r.q3, r.max, r.mean
            ));
        }
        out
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// PSNR distribution of [`oracle_fuse`] against the visible ground
/// truth, per gain value. Pairs are processed in stable id order so the
/// report is deterministic.
pub fn lambda_sweep(
    pairs: &[PairedSample],
    lambdas: &[f32],
    spec: &KernelSpec,
    mode: SweepMode,
) -> Result<SweepReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput(
            "lambda sweep needs at least one pair".into(),
        ));
    }
    if lambdas.is_empty() {
        return Err(Error::EmptyInput(
            "lambda sweep needs at least one gain value".into(),
        ));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].id.cmp(&pairs[b].id));

    // Per pair: decompose once, then score every gain value.
    let per_pair: Vec<Vec<f64>> = order
        .par_iter()
        .map(|&i| {
            let pair = &pairs[i];
            if !pair.thermal.is_normalized() {
                return Err(Error::NotNormalized);
            }
            let visible = decompose(&pair.visible, spec)?;
            let thermal = decompose(&pair.thermal.to_image(), spec)?;
            lambdas
                .iter()
                .map(|&lam| {
                    let fused = match mode {
                        SweepMode::Clipped => fuse(
                            &visible.lf,
                            &thermal.hf,
                            &FusionConfig::new(lam, OutOfBand::Clip)?,
                        )?,
                        SweepMode::Unclipped => fuse_unbounded(&visible.lf, &thermal.hf, lam)?,
                    };
                    psnr(&fused, &pair.visible)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lam)| {
            let mut vals: Vec<f64> = per_pair.iter().map(|v| v[k]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            SweepRow {
                lambda: lam,
                min: vals[0],
                q1: quantile(&vals, 0.25),
                median: quantile(&vals, 0.5),
                q3: quantile(&vals, 0.75),
                max: vals[vals.len() - 1],
                mean,
            }
        })
        .collect();
    Ok(SweepReport { rows })
}
