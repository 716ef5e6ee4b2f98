//! Thermal frame preprocessing: de-spiking, normalization, inversion.
//!
//! Default pipeline order is despike (raw counts) -> normalize -> invert.
//! Inversion makes cold regions bright, so the sky lands near one like it
//! does in daytime visible imagery.

use crate::error::{Error, Result};
use crate::frequency::reflect_index;
use crate::raster::ThermalFrame;

pub const DEFAULT_DESPIKE_WINDOW: usize = 5;
pub const DEFAULT_DESPIKE_K: f32 = 3.0;

/// Per-frame min-max scaling to [0,1]. Constant frames map to 0.5.
/// The raw extrema are recorded on the returned frame.
pub fn instance_normalize(frame: &ThermalFrame) -> ThermalFrame {
    let (lo, hi) = {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in frame.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    };
    let range = hi - lo;
    let data: Vec<f32> = if range > 0.0 {
        frame.data().iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.5; frame.data().len()]
    };
    ThermalFrame::with_state(
        frame.height(),
        frame.width(),
        data,
        frame.bit_depth(),
        true,
        lo,
        hi,
    )
}

/// Intensity inversion p -> 1 - p. Requires a normalized frame.
pub fn invert(frame: &ThermalFrame) -> Result<ThermalFrame> {
    if !frame.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let data: Vec<f32> = frame.data().iter().map(|&v| 1.0 - v).collect();
    let (lo, hi) = frame.raw_range();
    Ok(ThermalFrame::with_state(
        frame.height(),
        frame.width(),
        data,
        frame.bit_depth(),
        true,
        lo,
        hi,
    ))
}

/// Windowed median replacement of outlier pixels.
///
/// For each pixel, the window x window neighborhood (reflect padded) of
/// the *original* frame is examined; if |p - median| > k * std of the
/// window, the pixel is replaced with the median. Everything else is
/// copied bit-exactly, and the pass is not cascaded.
pub fn despike(frame: &ThermalFrame, window: usize, k: f32) -> Result<ThermalFrame> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "despike window must be odd and >= 3, got {window}"
        )));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "despike multiplier must be >= 0, got {k}"
        )));
    }
    let (h, w) = (frame.height(), frame.width());
    let r = (window / 2) as isize;
    let src = frame.data();
    let mut out = src.to_vec();
    let mut cells: Vec<f32> = Vec::with_capacity(window * window);
    for y in 0..h {
        for x in 0..w {
            cells.clear();
            for dy in -r..=r {
                let sy = reflect_index(y as isize + dy, h);
                for dx in -r..=r {
                    let sx = reflect_index(x as isize + dx, w);
                    cells.push(src[sy * w + sx]);
                }
            }
            cells.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = cells[cells.len() / 2];
            let n = cells.len() as f64;
            let mean: f64 = cells.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var: f64 = cells
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let std = var.sqrt() as f32;
            let p = src[y * w + x];
            if (p - median).abs() > k * std {
                out[y * w + x] = median;
            }
        }
    }
    let (lo, hi) = frame.raw_range();
    Ok(ThermalFrame::with_state(
        h,
        w,
        out,
        frame.bit_depth(),
        frame.is_normalized(),
        lo,
        hi,
    ))
}

/// Options for the standard preprocessing pipeline.
#[derive(Debug, Clone, Copy)]
pub struct PreprocessOptions {
    pub despike_window: usize,
    pub despike_k: f32,
    pub invert: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            despike_window: DEFAULT_DESPIKE_WINDOW,
            despike_k: DEFAULT_DESPIKE_K,
            invert: true,
        }
    }
}

/// despike (raw) -> instance normalize -> optional invert.
pub fn preprocess(frame: &ThermalFrame, opts: &PreprocessOptions) -> Result<ThermalFrame> {
    let despiked = despike(frame, opts.despike_window, opts.despike_k)?;
    let normalized = instance_normalize(&despiked);
    if opts.invert {
        invert(&normalized)
    } else {
        Ok(normalized)
    }
}
