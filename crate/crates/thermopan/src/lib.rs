//! Thermal-to-visible colorization pipeline.
//!
//! A thermal frame is preprocessed (de-spiked, normalized, inverted),
//! a small convolutional encoder-decoder predicts a colorized image,
//! and the final output fuses the prediction's low-frequency band with
//! the thermal image's own high-frequency detail. The crate also ships
//! the evaluation harness: PSNR/SSIM/RMSE reports and the fusion-gain
//! sweep used to pick the operating point.

pub mod cli;
pub mod error;
pub mod frequency;
pub mod imgio;
pub mod metrics;
pub mod model;
pub mod pansharpen;
pub mod preprocess;
pub mod raster;

pub use error::{Error, Result};
pub use frequency::{decompose, gaussian_kernel, replicate3, FrequencyPair, Kernel, KernelSpec};
pub use imgio::{
    gen_synthetic_dataset, load_image, load_thermal, pair_dataset, save_image, save_thermal,
};
pub use metrics::{evaluate_set, psnr, rmse, ssim, MetricReport};
pub use model::{colorize, forward, train, LossConfig, ModelParams, TrainConfig};
pub use pansharpen::{
    fuse, lambda_sweep, oracle_fuse, FusionConfig, OutOfBand, SweepMode, SweepReport,
};
pub use preprocess::{despike, instance_normalize, invert, preprocess, PreprocessOptions};
pub use raster::{BitDepth, ImageF32, PairedSample, ThermalFrame};
