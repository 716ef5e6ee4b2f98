//! Command-line entry point: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Every run
//! logs its resolved configuration to stderr. `THERMOPAN_THREADS`
//! caps internal parallelism (0 or unset = automatic).

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::frequency::KernelSpec;
use crate::imgio;
use crate::metrics::evaluate_set;
use crate::model::{self, LossConfig, TrainConfig};
use crate::pansharpen::{self, FusionConfig, OutOfBand, SweepMode};
use crate::preprocess::{self, PreprocessOptions};
use crate::raster::{BitDepth, PairedSample};

#[derive(Parser, Debug)]
#[command(
    name = "thermopan",
    version,
    about = "Thermal-to-visible colorization: preprocessing, frequency decomposition, fusion, training, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Clamp out-of-band pixels into [0,1].
    #[default]
    Clip,
    /// Affine-map the whole image back into [0,1].
    Renormalize,
}

impl From<ModeArg> for OutOfBand {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Clip => OutOfBand::Clip,
            ModeArg::Renormalize => OutOfBand::Renormalize,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// De-spike, normalize to [0,1], and invert a raw thermal frame.
    Preprocess {
        /// Input thermal file (8-bit PNG or 16-bit TIFF, grayscale).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output file for the preprocessed frame (16-bit TIFF).
        #[arg(long)]
        out: PathBuf,
        /// Skip the final intensity inversion.
        #[arg(long)]
        no_invert: bool,
        /// Median window side for spike removal (odd, >= 3).
        #[arg(long, default_value_t = preprocess::DEFAULT_DESPIKE_WINDOW)]
        despike_window: usize,
        /// Deviation multiplier for spike detection.
        #[arg(long, default_value_t = preprocess::DEFAULT_DESPIKE_K)]
        despike_k: f32,
    },
    /// Split an image into low- and high-frequency bands.
    Decompose {
        /// Input image ([0,1] PNG or TIFF).
        #[arg(long = "in")]
        input: PathBuf,
        /// Gaussian sigma in pixels.
        #[arg(long, default_value_t = 12.0)]
        sigma: f64,
        /// Gaussian kernel side in pixels (odd).
        #[arg(long, default_value_t = 25)]
        size: usize,
        /// Output for the low-frequency band (.png or .tif).
        #[arg(long)]
        out_lf: PathBuf,
        /// Output for the signed high-frequency band
        /// (offset-encoded 16-bit TIFF: stored = round((hf+1)/2*65535)).
        #[arg(long)]
        out_hf: PathBuf,
    },
    /// Fuse a 3-channel low-frequency image with a thermal
    /// high-frequency band.
    Fuse {
        /// Low-frequency RGB image.
        #[arg(long)]
        lf: PathBuf,
        /// Offset-encoded single-channel high-frequency TIFF.
        #[arg(long)]
        hf: PathBuf,
        /// High-frequency gain.
        #[arg(long, default_value_t = 3.0)]
        lambda: f32,
        /// Out-of-band handling.
        #[arg(long, value_enum, default_value_t)]
        mode: ModeArg,
        /// Output image (.png or .tif).
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR statistics of ground-truth fusion across gain values.
    SweepLambda {
        /// Dataset root holding thermal/ and visible/ directories.
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated gain values.
        #[arg(long, default_value = "0,1,2,3,4,5")]
        lambdas: String,
        /// Output CSV path (lambda,min,q1,median,q3,max,mean).
        #[arg(long)]
        csv: PathBuf,
        /// Gaussian kernel side in pixels (odd).
        #[arg(long, default_value_t = 25)]
        size: usize,
        /// Gaussian sigma in pixels.
        #[arg(long, default_value_t = 12.0)]
        sigma: f64,
        /// Measure PSNR on the raw fused sum instead of the clipped image.
        #[arg(long)]
        unclipped: bool,
    },
    /// Train the colorizer on a paired dataset.
    Train {
        /// Dataset root holding thermal/ and visible/ directories.
        #[arg(long)]
        dataset: PathBuf,
        /// Optional key=value config file overriding the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Baseline recipe the config file overrides.
        #[arg(long, value_enum, default_value_t)]
        preset: PresetArg,
        /// Output parameter file.
        #[arg(long)]
        out: PathBuf,
        /// Output loss-history CSV (epoch,loss,lr).
        #[arg(long)]
        history: PathBuf,
    },
    /// Colorize a thermal frame with trained parameters.
    Colorize {
        /// Parameter file written by `train`.
        #[arg(long)]
        params: PathBuf,
        /// Input thermal file (raw frames are preprocessed automatically).
        #[arg(long = "in")]
        input: PathBuf,
        /// High-frequency gain.
        #[arg(long, default_value_t = 3.0)]
        lambda: f32,
        /// Out-of-band handling.
        #[arg(long, value_enum, default_value_t)]
        mode: ModeArg,
        /// Gaussian kernel side in pixels (odd).
        #[arg(long, default_value_t = 25)]
        size: usize,
        /// Gaussian sigma in pixels.
        #[arg(long, default_value_t = 12.0)]
        sigma: f64,
        /// Output image (.png or .tif).
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR/SSIM/RMSE report over prediction/truth directories.
    Evaluate {
        /// Directory of predicted images.
        #[arg(long)]
        pred_dir: PathBuf,
        /// Directory of ground-truth images (matched by file stem).
        #[arg(long)]
        truth_dir: PathBuf,
        /// Output CSV path (id,psnr,ssim,rmse plus a MEAN row).
        #[arg(long)]
        csv: PathBuf,
    },
    /// Generate a synthetic paired dataset.
    GenSynthetic {
        /// RNG seed; identical seeds give bit-identical datasets.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of scenes.
        #[arg(short = 'n', long = "count")]
        count: usize,
        /// Square scene side in pixels (>= 32).
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Output dataset root (creates thermal/ and visible/).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    /// Full-scale recipe: width 64, 1000 epochs, 160x160 crops.
    #[default]
    Full,
    /// Laptop-sized recipe: width 8, 64x64 crops.
    Desk,
}

/// Parse argv, run, and map the outcome onto the documented exit codes.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("THERMOPAN_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) | Err(_) => {
                if raw.trim().parse::<usize>().is_err() {
                    eprintln!("warning: ignoring unparsable THERMOPAN_THREADS={raw}");
                }
            }
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn parse_lambdas(raw: &str) -> Result<Vec<f32>> {
    raw.split(',')
        .map(|s| {
            let v: f32 = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad lambda value '{s}'")))?;
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "lambda must be nonnegative, got {v}"
                )));
            }
            Ok(v)
        })
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean for {key}: '{value}'"))),
    }
}

/// Apply a key=value config file over the preset train/loss configs.
fn apply_config_file(path: &PathBuf, tcfg: &mut TrainConfig, lcfg: &mut LossConfig) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let mut kernel_size = lcfg.kernel.size;
    let mut kernel_sigma = lcfg.kernel.sigma;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Config(format!("line {}: bad {what} '{value}'", lineno + 1));
        match key {
            "epochs" => tcfg.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "lr" => tcfg.lr = value.parse().map_err(|_| bad("lr"))?,
            "decay_start_epoch" => {
                tcfg.decay_start_epoch = value.parse().map_err(|_| bad("decay_start_epoch"))?
            }
            "batch_size" => tcfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "crop" => tcfg.crop = value.parse().map_err(|_| bad("crop"))?,
            "width" => tcfg.width = value.parse().map_err(|_| bad("width"))?,
            "leaky_slope" => tcfg.leaky_slope = value.parse().map_err(|_| bad("leaky_slope"))?,
            "dropout" => tcfg.dropout = value.parse().map_err(|_| bad("dropout"))?,
            "seed" => tcfg.seed = value.parse().map_err(|_| bad("seed"))?,
            "random_crop" => tcfg.augment.random_crop = parse_bool(key, value)?,
            "flip" => tcfg.augment.flip = parse_bool(key, value)?,
            "rotate" => tcfg.augment.rotate = parse_bool(key, value)?,
            "alpha" => lcfg.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "kernel_size" => kernel_size = value.parse().map_err(|_| bad("kernel_size"))?,
            "sigma" => kernel_sigma = value.parse().map_err(|_| bad("sigma"))?,
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    lcfg.kernel = KernelSpec::new(kernel_size, kernel_sigma)?;
    *lcfg = LossConfig::new(lcfg.alpha, lcfg.kernel)?;
    Ok(())
}

fn load_preprocessed_dataset(root: &PathBuf) -> Result<Vec<PairedSample>> {
    let pairing = imgio::load_dataset(root)?;
    for w in &pairing.warnings {
        eprintln!("warning: {w}");
    }
    if pairing.pairs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no usable pairs under {}",
            root.display()
        )));
    }
    pairing
        .pairs
        .into_iter()
        .map(|p| {
            let t = preprocess::preprocess(&p.thermal, &PreprocessOptions::default())?;
            PairedSample::new(p.id.clone(), t, p.visible)
        })
        .collect()
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess {
            input,
            out,
            no_invert,
            despike_window,
            despike_k,
        } => {
            eprintln!(
                "config: preprocess in={} out={} invert={} despike_window={despike_window} despike_k={despike_k}",
                input.display(),
                out.display(),
                !no_invert
            );
            let frame = imgio::load_thermal(&input)?;
            let opts = PreprocessOptions {
                despike_window,
                despike_k,
                invert: !no_invert,
            };
            let result = preprocess::preprocess(&frame, &opts)?;
            imgio::save_image(&result.to_image(), &out, BitDepth::Sixteen)?;
            Ok(())
        }
        Command::Decompose {
            input,
            sigma,
            size,
            out_lf,
            out_hf,
        } => {
            eprintln!(
                "config: decompose in={} size={size} sigma={sigma} out_lf={} out_hf={}",
                input.display(),
                out_lf.display(),
                out_hf.display()
            );
            let img = imgio::load_image(&input)?;
            let spec = KernelSpec::new(size, sigma)?;
            let pair = crate::frequency::decompose(&img, &spec)?;
            // Blur of a [0,1] image can exceed the range by rounding dust.
            let lf = pair.lf.map(|v| v.clamp(0.0, 1.0));
            imgio::save_image_auto(&lf, &out_lf)?;
            imgio::save_hf(&pair.hf, &out_hf)?;
            Ok(())
        }
        Command::Fuse {
            lf,
            hf,
            lambda,
            mode,
            out,
        } => {
            eprintln!(
                "config: fuse lf={} hf={} lambda={lambda} mode={mode:?} out={}",
                lf.display(),
                hf.display(),
                out.display()
            );
            let lf_img = imgio::load_image(&lf)?;
            let hf_img = imgio::load_hf(&hf)?;
            let cfg = FusionConfig::new(lambda, mode.into())?;
            let fused = pansharpen::fuse(&lf_img, &hf_img, &cfg)?;
            imgio::save_image_auto(&fused, &out)?;
            Ok(())
        }
        Command::SweepLambda {
            dataset,
            lambdas,
            csv,
            size,
            sigma,
            unclipped,
        } => {
            eprintln!(
                "config: sweep-lambda dataset={} lambdas={lambdas} size={size} sigma={sigma} unclipped={unclipped} csv={}",
                dataset.display(),
                csv.display()
            );
            let pairs = load_preprocessed_dataset(&dataset)?;
            let gains = parse_lambdas(&lambdas)?;
            let spec = KernelSpec::new(size, sigma)?;
            let mode = if unclipped {
                SweepMode::Unclipped
            } else {
                SweepMode::Clipped
            };
            let report = pansharpen::lambda_sweep(&pairs, &gains, &spec, mode)?;
            fs::write(&csv, report.to_csv())?;
            Ok(())
        }
        Command::Train {
            dataset,
            config,
            preset,
            out,
            history,
        } => {
            let mut tcfg = match preset {
                PresetArg::Full => TrainConfig::full_scale(),
                PresetArg::Desk => TrainConfig::desk_scale(),
            };
            let mut lcfg = LossConfig::default();
            if let Some(path) = &config {
                apply_config_file(path, &mut tcfg, &mut lcfg)?;
            }
            eprintln!(
                "config: train dataset={} preset={preset:?} {tcfg:?} alpha={} kernel={}x{} sigma={} out={} history={}",
                dataset.display(),
                lcfg.alpha,
                lcfg.kernel.size,
                lcfg.kernel.size,
                lcfg.kernel.sigma,
                out.display(),
                history.display()
            );
            let pairs = load_preprocessed_dataset(&dataset)?;
            let (params, stats) = model::train(&pairs, &tcfg, &lcfg)?;
            model::save_params(&params, &out)?;
            fs::write(&history, model::history_to_csv(&stats))?;
            Ok(())
        }
        Command::Colorize {
            params,
            input,
            lambda,
            mode,
            size,
            sigma,
            out,
        } => {
            eprintln!(
                "config: colorize params={} in={} lambda={lambda} mode={mode:?} size={size} sigma={sigma} out={}",
                params.display(),
                input.display(),
                out.display()
            );
            let model_params = model::load_params(&params)?;
            let frame = imgio::load_thermal(&input)?;
            let cfg = FusionConfig::new(lambda, mode.into())?;
            let spec = KernelSpec::new(size, sigma)?;
            let colored = model::colorize(&model_params, &frame, &cfg, &spec)?;
            imgio::save_image_auto(&colored, &out)?;
            Ok(())
        }
        Command::Evaluate {
            pred_dir,
            truth_dir,
            csv,
        } => {
            eprintln!(
                "config: evaluate pred_dir={} truth_dir={} csv={}",
                pred_dir.display(),
                truth_dir.display(),
                csv.display()
            );
            let pairing = imgio::pair_image_dirs(&pred_dir, &truth_dir)?;
            for w in &pairing.warnings {
                eprintln!("warning: {w}");
            }
            let report = evaluate_set(&pairing.items)?;
            fs::write(&csv, report.to_csv())?;
            println!(
                "mean psnr {:.3} dB, ssim {:.3}, rmse {:.3} over {} images",
                report.mean_psnr,
                report.mean_ssim,
                report.mean_rmse,
                report.per_image.len()
            );
            Ok(())
        }
        Command::GenSynthetic {
            seed,
            count,
            size,
            out,
        } => {
            eprintln!(
                "config: gen-synthetic seed={seed} count={count} size={size} out={}",
                out.display()
            );
            let samples = imgio::gen_synthetic_dataset(seed, count, size, size)?;
            imgio::write_dataset(&samples, &out)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_list_parses() {
        assert_eq!(parse_lambdas("0,1,2.5").unwrap(), vec![0.0, 1.0, 2.5]);
        assert!(parse_lambdas("0,x").is_err());
        assert!(parse_lambdas("-1").is_err());
    }

    #[test]
    fn config_file_overrides_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.cfg");
        fs::write(
            &path,
            "# toy setup\nepochs = 12\nlr = 0.002\nwidth=4\ncrop=32\nflip=false\nalpha=5\nkernel_size=9\nsigma=4\n",
        )
        .unwrap();
        let mut tcfg = TrainConfig::full_scale();
        let mut lcfg = LossConfig::default();
        apply_config_file(&path, &mut tcfg, &mut lcfg).unwrap();
        assert_eq!(tcfg.epochs, 12);
        assert_eq!(tcfg.lr, 0.002);
        assert_eq!(tcfg.width, 4);
        assert_eq!(tcfg.crop, 32);
        assert!(!tcfg.augment.flip);
        assert!(tcfg.augment.rotate);
        assert_eq!(lcfg.alpha, 5.0);
        assert_eq!(lcfg.kernel.size, 9);
        assert_eq!(lcfg.kernel.sigma, 4.0);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "momentum = 0.9\n").unwrap();
        let mut tcfg = TrainConfig::full_scale();
        let mut lcfg = LossConfig::default();
        assert!(apply_config_file(&path, &mut tcfg, &mut lcfg).is_err());
    }

    #[test]
    fn help_exits_zero_and_unknown_flag_exits_one() {
        assert_eq!(dispatch(["thermopan", "--help"]), 0);
        assert_eq!(dispatch(["thermopan", "frobnicate"]), 1);
        assert_eq!(dispatch(["thermopan", "fuse", "--bogus"]), 1);
    }

    #[test]
    fn missing_file_exits_two() {
        let code = dispatch([
            "thermopan",
            "preprocess",
            "--in",
            "/nonexistent/input.tif",
            "--out",
            "/tmp/never-written.tif",
        ]);
        assert_eq!(code, 2);
    }
}
