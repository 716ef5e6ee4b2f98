//! Paired geometric augmentation: one random square crop, flips, and a
//! quarter-turn rotation applied identically to both modalities so
//! pixel alignment is preserved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{ImageF32, PairedSample, ThermalFrame};

#[derive(Debug, Clone, Copy)]
pub struct AugmentOptions {
    pub random_crop: bool,
    pub flip: bool,
    pub rotate: bool,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            random_crop: true,
            flip: true,
            rotate: true,
        }
    }
}

impl AugmentOptions {
    /// Everything off: deterministic centered crop only.
    pub fn disabled() -> Self {
        Self {
            random_crop: false,
            flip: false,
            rotate: false,
        }
    }
}

/// The resolved transform drawn for one augmentation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Transform {
    y0: usize,
    x0: usize,
    hflip: bool,
    vflip: bool,
    /// Quarter turns: -1 (ccw), 0, or 1 (cw).
    quarter_turns: i8,
}

fn draw_transform(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    crop: usize,
    opts: &AugmentOptions,
) -> Transform {
    let (y0, x0) = if opts.random_crop {
        (
            rng.random_range(0..=h - crop),
            rng.random_range(0..=w - crop),
        )
    } else {
        ((h - crop) / 2, (w - crop) / 2)
    };
    let (hflip, vflip) = if opts.flip {
        (rng.random_bool(0.5), rng.random_bool(0.5))
    } else {
        (false, false)
    };
    let quarter_turns = if opts.rotate {
        [-1i8, 0, 1][rng.random_range(0..3usize)]
    } else {
        0
    };
    Transform {
        y0,
        x0,
        hflip,
        vflip,
        quarter_turns,
    }
}

/// Apply the transform to one channel-interleaved plane.
fn apply_plane(src: &[f32], _h: usize, w: usize, c: usize, t: &Transform, crop: usize) -> Vec<f32> {
    let n = crop;
    let mut out = vec![0.0f32; n * n * c];
    for y in 0..n {
        for x in 0..n {
            // Undo the output-side ops to find the source pixel.
            let (mut sy, mut sx) = match t.quarter_turns {
                1 => (n - 1 - x, y),  // clockwise
                -1 => (x, n - 1 - y), // counter-clockwise
                _ => (y, x),
            };
            if t.vflip {
                sy = n - 1 - sy;
            }
            if t.hflip {
                sx = n - 1 - sx;
            }
            let src_idx = ((t.y0 + sy) * w + (t.x0 + sx)) * c;
            let dst_idx = (y * n + x) * c;
            out[dst_idx..dst_idx + c].copy_from_slice(&src[src_idx..src_idx + c]);
        }
    }
    out
}

/// Crop/flip/rotate a paired sample, deterministically in `seed`, with
/// the identical geometric transform on both modalities.
pub fn augment(
    sample: &PairedSample,
    crop: usize,
    seed: u64,
    opts: &AugmentOptions,
) -> Result<PairedSample> {
    let (h, w) = (sample.thermal.height(), sample.thermal.width());
    if crop == 0 || crop > h || crop > w {
        return Err(Error::InvalidArgument(format!(
            "crop {crop} does not fit inside {h}x{w}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = draw_transform(&mut rng, h, w, crop, opts);

    let tdata = apply_plane(sample.thermal.data(), h, w, 1, &t, crop);
    let (lo, hi) = sample.thermal.raw_range();
    let thermal = ThermalFrame::with_state(
        crop,
        crop,
        tdata,
        sample.thermal.bit_depth(),
        sample.thermal.is_normalized(),
        lo,
        hi,
    );
    let vdata = apply_plane(sample.visible.data(), h, w, 3, &t, crop);
    let visible = ImageF32::from_vec(crop, crop, 3, vdata)?;
    PairedSample::new(sample.id.clone(), thermal, visible)
}
