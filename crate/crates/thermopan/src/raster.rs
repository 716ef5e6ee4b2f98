//! Core raster types shared by every pipeline stage.
//!
//! `ImageF32` is the working currency: row-major, channel-interleaved
//! f32 samples. Pipeline images live in [0,1]; the one exception is the
//! signed high-frequency band produced by decomposition, which is kept
//! unclipped until fusion decides how to handle out-of-band values.

use crate::error::{Error, Result};

/// Bit depth of an image file or thermal sensor source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    /// Largest representable sample value at this depth.
    pub fn max_value(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }
}

/// H×W×C raster of f32 samples, C ∈ {1, 3}, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF32 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageF32 {
    /// Zero-filled image.
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::check_dims(height, width, channels)?;
        Ok(Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        })
    }

    /// Build from an existing interleaved buffer; rejects NaN/Inf samples.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        Self::check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "buffer has {} samples, expected {}x{}x{} = {}",
                data.len(),
                height,
                width,
                channels,
                height * width * channels
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image buffer contains NaN or Inf".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(
                "image dimensions must be nonzero".into(),
            ));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.idx(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let i = self.idx(y, x, c);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &ImageF32) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// One channel plane as f64, row-major.
    pub fn channel_f64(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        self.data
            .chunks_exact(self.channels)
            .map(|px| px[c] as f64)
            .collect()
    }

    /// (min, max) over all samples.
    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Elementwise map into a new image.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> ImageF32 {
        ImageF32 {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Single-channel raw thermal raster plus normalization metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFrame {
    height: usize,
    width: usize,
    data: Vec<f32>,
    bit_depth: BitDepth,
    normalized: bool,
    min_raw: f32,
    max_raw: f32,
}

impl ThermalFrame {
    /// Wrap raw sensor counts. Values must be finite and nonnegative.
    pub fn from_raw(
        height: usize,
        width: usize,
        data: Vec<f32>,
        bit_depth: BitDepth,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(
                "frame dimensions must be nonzero".into(),
            ));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "buffer has {} samples, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::NonFinite(
                "thermal buffer must be finite and nonnegative".into(),
            ));
        }
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Self {
            height,
            width,
            data,
            bit_depth,
            normalized: false,
            min_raw: lo,
            max_raw: hi,
        })
    }

    /// Internal constructor for preprocessing results.
    pub(crate) fn with_state(
        height: usize,
        width: usize,
        data: Vec<f32>,
        bit_depth: BitDepth,
        normalized: bool,
        min_raw: f32,
        max_raw: f32,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
            bit_depth,
            normalized,
            min_raw,
            max_raw,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Raw-domain extrema, recorded when the frame was built or normalized.
    pub fn raw_range(&self) -> (f32, f32) {
        (self.min_raw, self.max_raw)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// View the frame as a single-channel image, values as stored.
    pub fn to_image(&self) -> ImageF32 {
        ImageF32 {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.clone(),
        }
    }
}

/// A thermal frame and its visible ground truth, matched by id.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub id: String,
    pub thermal: ThermalFrame,
    pub visible: ImageF32,
}

impl PairedSample {
    pub fn new(id: impl Into<String>, thermal: ThermalFrame, visible: ImageF32) -> Result<Self> {
        if thermal.height() != visible.height() || thermal.width() != visible.width() {
            return Err(Error::ShapeMismatch(format!(
                "thermal {}x{} vs visible {}x{}",
                thermal.height(),
                thermal.width(),
                visible.height(),
                visible.width()
            )));
        }
        if visible.channels() != 3 {
            return Err(Error::InvalidArgument(
                "visible image must have 3 channels".into(),
            ));
        }
        Ok(Self {
            id: id.into(),
            thermal,
            visible,
        })
    }
}
