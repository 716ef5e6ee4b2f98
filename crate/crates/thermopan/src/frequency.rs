//! Gaussian kernels and low/high frequency decomposition.
//!
//! The low-frequency band is a reflect-padded Gaussian blur; the
//! high-frequency band is the signed residual `image - blur(image)`, so
//! the pair always reconstructs the source exactly up to f32 rounding.

use crate::error::{Error, Result};
use crate::raster::ImageF32;

/// Parametric description of a Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Side length in pixels; must be odd.
    pub size: usize,
    /// Standard deviation in pixels; must be positive.
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { size, sigma })
    }
}

impl Default for KernelSpec {
    /// 25x25, sigma 12: the pipeline default.
    fn default() -> Self {
        Self {
            size: 25,
            sigma: 12.0,
        }
    }
}

/// Realized, normalized Gaussian weights.
///
/// The 2-D grid factorizes into an outer product of the 1-D profile, so
/// both representations are kept: `weights` for direct convolution,
/// `factor` for the two-pass separable implementation.
#[derive(Debug, Clone)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
    factor: Vec<f64>,
}

impl Kernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Full 2-D weights, row-major, summing to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalized 1-D profile whose outer product equals `weights`.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Build the normalized Gaussian kernel for a spec.
pub fn gaussian_kernel(spec: &KernelSpec) -> Result<Kernel> {
    KernelSpec::new(spec.size, spec.sigma)?;
    let r = (spec.size / 2) as isize;
    let inv_two_sigma_sq = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let mut factor: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 * inv_two_sigma_sq).exp())
        .collect();
    let sum: f64 = factor.iter().sum();
    for v in &mut factor {
        *v /= sum;
    }
    let mut weights = Vec::with_capacity(spec.size * spec.size);
    for &fy in &factor {
        for &fx in &factor {
            weights.push(fy * fx);
        }
    }
    Ok(Kernel {
        size: spec.size,
        weights,
        factor,
    })
}

/// Reflect an out-of-range index back into [0, n) with edge repetition
/// (…, 1, 0 | 0, 1, …, n-1 | n-1, n-2, …). Handles arbitrary overshoot.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut i = i % period;
    if i < 0 {
        i += period;
    }
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// One horizontal pass of a 1-D kernel over a row-major f64 plane.
fn pass_rows(src: &[f64], h: usize, w: usize, factor: &[f64], dst: &mut [f64]) {
    let r = factor.len() / 2;
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut dst[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            if x >= r && x + r < w {
                let base = x - r;
                for (k, &f) in factor.iter().enumerate() {
                    acc += f * row[base + k];
                }
            } else {
                for (k, &f) in factor.iter().enumerate() {
                    let sx = reflect_index(x as isize + k as isize - r as isize, w);
                    acc += f * row[sx];
                }
            }
            *o = acc;
        }
    }
}

/// One vertical pass of a 1-D kernel over a row-major f64 plane.
fn pass_cols(src: &[f64], h: usize, w: usize, factor: &[f64], dst: &mut [f64]) {
    let r = factor.len() / 2;
    for y in 0..h {
        let out = &mut dst[y * w..(y + 1) * w];
        out.fill(0.0);
        for (k, &f) in factor.iter().enumerate() {
            let sy = reflect_index(y as isize + k as isize - r as isize, h);
            let row = &src[sy * w..(sy + 1) * w];
            for (o, &v) in out.iter_mut().zip(row.iter()) {
                *o += f * v;
            }
        }
    }
}

/// Separable reflect-padded blur of an f64 plane.
pub(crate) fn blur_plane(src: &[f64], h: usize, w: usize, factor: &[f64]) -> Vec<f64> {
    let mut tmp = vec![0.0; h * w];
    let mut out = vec![0.0; h * w];
    pass_rows(src, h, w, factor, &mut tmp);
    pass_cols(&tmp, h, w, factor, &mut out);
    out
}

/// Adjoint of `blur_plane` under the same reflect padding.
///
/// Transposes the gather into a scatter, so boundary contributions fold
/// back onto their reflected sources; in the interior this is plain
/// convolution with the (symmetric) kernel.
pub(crate) fn blur_plane_adjoint(grad: &[f64], h: usize, w: usize, factor: &[f64]) -> Vec<f64> {
    let r = factor.len() / 2;
    // Adjoint of the vertical pass.
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let g = &grad[y * w..(y + 1) * w];
        for (k, &f) in factor.iter().enumerate() {
            let sy = reflect_index(y as isize + k as isize - r as isize, h);
            let row = &mut tmp[sy * w..(sy + 1) * w];
            for (o, &v) in row.iter_mut().zip(g.iter()) {
                *o += f * v;
            }
        }
    }
    // Adjoint of the horizontal pass.
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let g = &tmp[y * w..(y + 1) * w];
        let row = &mut out[y * w..(y + 1) * w];
        for (x, &gv) in g.iter().enumerate() {
            if gv == 0.0 {
                continue;
            }
            for (k, &f) in factor.iter().enumerate() {
                let sx = reflect_index(x as isize + k as isize - r as isize, w);
                row[sx] += f * gv;
            }
        }
    }
    out
}

/// Same-size Gaussian convolution with reflect padding, channels
/// filtered independently. Uses the separable two-pass form.
pub fn convolve(img: &ImageF32, kernel: &Kernel) -> ImageF32 {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut out = ImageF32::new(h, w, c).expect("shape already validated");
    for ch in 0..c {
        let plane = img.channel_f64(ch);
        let blurred = blur_plane(&plane, h, w, kernel.factor());
        for y in 0..h {
            for x in 0..w {
                out.set(y, x, ch, blurred[y * w + x] as f32);
            }
        }
    }
    out
}

/// Direct 2-D convolution over the full kernel grid. Slower than
/// [`convolve`]; kept as the second route for equivalence checks.
pub fn convolve_direct(img: &ImageF32, kernel: &Kernel) -> ImageF32 {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let r = kernel.radius() as isize;
    let size = kernel.size();
    let weights = kernel.weights();
    let mut out = ImageF32::new(h, w, c).expect("shape already validated");
    for ch in 0..c {
        let plane = img.channel_f64(ch);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..size {
                    let sy = reflect_index(y as isize + ky as isize - r, h);
                    for kx in 0..size {
                        let sx = reflect_index(x as isize + kx as isize - r, w);
                        acc += weights[ky * size + kx] * plane[sy * w + sx];
                    }
                }
                out.set(y, x, ch, acc as f32);
            }
        }
    }
    out
}

/// Low/high frequency split with the exact-reconstruction guarantee
/// `lf + hf == source` (within f32 rounding).
#[derive(Debug, Clone)]
pub struct FrequencyPair {
    /// Gaussian-blurred band, same range as the source.
    pub lf: ImageF32,
    /// Signed residual band; may be negative.
    pub hf: ImageF32,
}

/// Split an image into its Gaussian low-frequency band and the signed
/// residual.
pub fn decompose(img: &ImageF32, spec: &KernelSpec) -> Result<FrequencyPair> {
    let kernel = gaussian_kernel(spec)?;
    let lf = convolve(img, &kernel);
    let mut hf = img.clone();
    for (h, l) in hf.data_mut().iter_mut().zip(lf.data().iter()) {
        *h -= l;
    }
    Ok(FrequencyPair { lf, hf })
}

/// Replicate a single-channel image into three identical channels.
pub fn replicate3(img: &ImageF32) -> Result<ImageF32> {
    if img.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "replicate3 expects a single-channel image, got {} channels",
            img.channels()
        )));
    }
    let mut data = Vec::with_capacity(img.data().len() * 3);
    for &v in img.data() {
        data.extend_from_slice(&[v, v, v]);
    }
    ImageF32::from_vec(img.height(), img.width(), 3, data)
}

/// Offset encoding used to store the signed HF band in 16-bit files:
/// stored = round((hf + 1) / 2 * 65535).
pub fn encode_hf_sample(hf: f32) -> u16 {
    let v = ((hf + 1.0) / 2.0 * 65535.0).round();
    v.clamp(0.0, 65535.0) as u16
}

/// Inverse of [`encode_hf_sample`].
pub fn decode_hf_sample(stored: u16) -> f32 {
    stored as f32 / 65535.0 * 2.0 - 1.0
}
