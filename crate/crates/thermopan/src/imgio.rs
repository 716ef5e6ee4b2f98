//! Image file i/o, dataset pairing, and synthetic paired-scene generation.
//!
//! File conventions: 8-bit data lives in PNG, 16-bit data in TIFF. A
//! dataset root holds `thermal/*.tif` and `visible/*.png`, matched by
//! file stem.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{BitDepth, ImageF32, PairedSample, ThermalFrame};

fn extension_of(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn require_extension(path: &Path, depth: BitDepth) -> Result<()> {
    let ext = extension_of(path);
    let ok = match depth {
        BitDepth::Eight => ext == "png",
        BitDepth::Sixteen => ext == "tif" || ext == "tiff",
    };
    if ok {
        Ok(())
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!(
                "{}-bit output must be written as {}",
                depth.bits(),
                match depth {
                    BitDepth::Eight => ".png",
                    BitDepth::Sixteen => ".tif/.tiff",
                }
            ),
        })
    }
}

fn format_for(path: &Path) -> ImageFormat {
    match extension_of(path).as_str() {
        "png" => ImageFormat::Png,
        _ => ImageFormat::Tiff,
    }
}

/// Load a raw thermal frame from an 8- or 16-bit grayscale file.
/// Values are kept losslessly as sensor counts; no normalization.
pub fn load_thermal(path: impl AsRef<Path>) -> Result<ThermalFrame> {
    let path = path.as_ref();
    let img = image::open(path)?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let data: Vec<f32> = buf.into_raw().into_iter().map(|v| v as f32).collect();
            ThermalFrame::from_raw(h as usize, w as usize, data, BitDepth::Eight)
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            let data: Vec<f32> = buf.into_raw().into_iter().map(|v| v as f32).collect();
            ThermalFrame::from_raw(h as usize, w as usize, data, BitDepth::Sixteen)
        }
        _ => Err(Error::NotSingleChannel {
            path: path.to_path_buf(),
        }),
    }
}

/// Write raw thermal counts at the frame's own bit depth (PNG for 8-bit,
/// TIFF for 16-bit). Counts are rounded to the nearest code; values
/// outside the representable range are rejected.
pub fn save_thermal(frame: &ThermalFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let depth = frame.bit_depth();
    require_extension(path, depth)?;
    let max = depth.max_value();
    if frame.data().iter().any(|&v| v < 0.0 || v > max) {
        return Err(Error::OutOfRange(format!(
            "thermal counts exceed the {}-bit range",
            depth.bits()
        )));
    }
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let dynimg = match depth {
        BitDepth::Eight => {
            let data: Vec<u8> = frame.data().iter().map(|&v| v.round() as u8).collect();
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).unwrap())
        }
        BitDepth::Sixteen => {
            let data: Vec<u16> = frame.data().iter().map(|&v| v.round() as u16).collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, data).unwrap())
        }
    };
    dynimg.save_with_format(path, format_for(path))?;
    Ok(())
}

/// Load a [0,1] image from PNG or TIFF (8- or 16-bit, gray or RGB).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF32> {
    let path = path.as_ref();
    let img = image::open(path)?;
    let to_f32 = |data: Vec<f32>, w: u32, h: u32, c: usize| {
        ImageF32::from_vec(h as usize, w as usize, c, data)
    };
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            to_f32(
                buf.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
                w,
                h,
                1,
            )
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            to_f32(
                buf.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(),
                w,
                h,
                1,
            )
        }
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            to_f32(
                buf.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
                w,
                h,
                3,
            )
        }
        DynamicImage::ImageRgb16(buf) => {
            let (w, h) = buf.dimensions();
            to_f32(
                buf.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(),
                w,
                h,
                3,
            )
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("unhandled pixel layout {:?}", other.color()),
        }),
    }
}

/// Save a [0,1] image at the requested depth, rounding to the nearest
/// representable level. Out-of-range pixels are rejected; clip or
/// renormalize before saving.
pub fn save_image(img: &ImageF32, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    require_extension(path, depth)?;
    if !img.in_unit_range() {
        return Err(Error::OutOfRange(
            "image has pixels outside [0,1]; clip or renormalize before saving".into(),
        ));
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let max = depth.max_value();
    let dynimg = match (depth, img.channels()) {
        (BitDepth::Eight, 1) => {
            let data: Vec<u8> = img
                .data()
                .iter()
                .map(|&v| (v * max).round() as u8)
                .collect();
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).unwrap())
        }
        (BitDepth::Eight, _) => {
            let data: Vec<u8> = img
                .data()
                .iter()
                .map(|&v| (v * max).round() as u8)
                .collect();
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).unwrap())
        }
        (BitDepth::Sixteen, 1) => {
            let data: Vec<u16> = img
                .data()
                .iter()
                .map(|&v| (v * max).round() as u16)
                .collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, data).unwrap())
        }
        (BitDepth::Sixteen, _) => {
            let data: Vec<u16> = img
                .data()
                .iter()
                .map(|&v| (v * max).round() as u16)
                .collect();
            DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, data).unwrap())
        }
    };
    dynimg.save_with_format(path, format_for(path))?;
    Ok(())
}

/// Pick the bit depth from a path extension: .png saves 8-bit,
/// .tif/.tiff saves 16-bit.
pub fn save_image_auto(img: &ImageF32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let depth = match extension_of(path).as_str() {
        "png" => BitDepth::Eight,
        "tif" | "tiff" => BitDepth::Sixteen,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("unknown image extension '{other}'"),
            })
        }
    };
    save_image(img, path, depth)
}

/// Store a signed high-frequency band as offset-encoded 16-bit TIFF:
/// stored = round((hf + 1) / 2 * 65535).
pub fn save_hf(hf: &ImageF32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    require_extension(path, BitDepth::Sixteen)?;
    if hf.data().iter().any(|&v| !(-1.0..=1.0).contains(&v)) {
        return Err(Error::OutOfRange(
            "high-frequency band exceeds [-1,1]; offset encoding undefined".into(),
        ));
    }
    let (w, h) = (hf.width() as u32, hf.height() as u32);
    let encode = || {
        hf.data()
            .iter()
            .map(|&v| crate::frequency::encode_hf_sample(v))
            .collect::<Vec<u16>>()
    };
    let dynimg = if hf.channels() == 1 {
        DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, encode()).unwrap())
    } else {
        DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, encode()).unwrap())
    };
    dynimg.save_with_format(path, format_for(path))?;
    Ok(())
}

/// Load an offset-encoded high-frequency band back into signed values.
pub fn load_hf(path: impl AsRef<Path>) -> Result<ImageF32> {
    let path = path.as_ref();
    let img = image::open(path)?;
    let decode = |data: Vec<u16>, w: u32, h: u32, c: usize| {
        let values: Vec<f32> = data
            .into_iter()
            .map(crate::frequency::decode_hf_sample)
            .collect();
        ImageF32::from_vec(h as usize, w as usize, c, values)
    };
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            decode(buf.into_raw(), w, h, 1)
        }
        DynamicImage::ImageRgb16(buf) => {
            let (w, h) = buf.dimensions();
            decode(buf.into_raw(), w, h, 3)
        }
        _ => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "high-frequency bands are stored as 16-bit TIFF".into(),
        }),
    }
}

/// Result of matching a thermal directory against a visible directory.
#[derive(Debug)]
pub struct Pairing {
    pub pairs: Vec<PairedSample>,
    /// Unmatched files and rejected pairs, one human-readable line each.
    pub warnings: Vec<String>,
}

fn list_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = extension_of(&path);
        if ext != "png" && ext != "tif" && ext != "tiff" {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

/// Match thermal and visible files by stem, sorted lexicographically.
/// Unmatched files and dimension-mismatched pairs are reported in
/// `warnings`, never silently dropped.
pub fn pair_dataset(
    thermal_dir: impl AsRef<Path>,
    visible_dir: impl AsRef<Path>,
) -> Result<Pairing> {
    let thermal = list_stems(thermal_dir.as_ref())?;
    let visible = list_stems(visible_dir.as_ref())?;
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (stem, tpath) in &thermal {
        match visible.get(stem) {
            Some(vpath) => {
                let frame = load_thermal(tpath)?;
                let img = load_image(vpath)?;
                if frame.height() != img.height() || frame.width() != img.width() {
                    warnings.push(format!(
                        "pair '{stem}' rejected: thermal {}x{} vs visible {}x{}",
                        frame.height(),
                        frame.width(),
                        img.height(),
                        img.width()
                    ));
                    continue;
                }
                pairs.push(PairedSample::new(stem.clone(), frame, img)?);
            }
            None => warnings.push(format!(
                "no visible match for thermal '{}'",
                tpath.display()
            )),
        }
    }
    for (stem, vpath) in &visible {
        if !thermal.contains_key(stem) {
            warnings.push(format!(
                "no thermal match for visible '{}'",
                vpath.display()
            ));
        }
    }
    Ok(Pairing { pairs, warnings })
}

/// Load the standard `<root>/thermal` + `<root>/visible` layout.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Pairing> {
    let root = root.as_ref();
    pair_dataset(root.join("thermal"), root.join("visible"))
}

/// Write samples into the standard dataset layout.
pub fn write_dataset(samples: &[PairedSample], root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let tdir = root.join("thermal");
    let vdir = root.join("visible");
    fs::create_dir_all(&tdir)?;
    fs::create_dir_all(&vdir)?;
    for s in samples {
        save_thermal(&s.thermal, tdir.join(format!("{}.tif", s.id)))?;
        save_image(
            &s.visible,
            vdir.join(format!("{}.png", s.id)),
            BitDepth::Eight,
        )?;
    }
    Ok(())
}

/// Prediction/truth image pairs for evaluation, matched by stem.
#[derive(Debug)]
pub struct ImagePairing {
    pub items: Vec<(String, ImageF32, ImageF32)>,
    pub warnings: Vec<String>,
}

/// Match two directories of images by file stem (e.g. predictions vs
/// ground truth). Unmatched files and shape mismatches are reported.
pub fn pair_image_dirs(
    pred_dir: impl AsRef<Path>,
    truth_dir: impl AsRef<Path>,
) -> Result<ImagePairing> {
    let pred = list_stems(pred_dir.as_ref())?;
    let truth = list_stems(truth_dir.as_ref())?;
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for (stem, ppath) in &pred {
        match truth.get(stem) {
            Some(tpath) => {
                let p = load_image(ppath)?;
                let t = load_image(tpath)?;
                if !p.same_shape(&t) {
                    warnings.push(format!(
                        "pair '{stem}' rejected: prediction {}x{}x{} vs truth {}x{}x{}",
                        p.height(),
                        p.width(),
                        p.channels(),
                        t.height(),
                        t.width(),
                        t.channels()
                    ));
                    continue;
                }
                items.push((stem.clone(), p, t));
            }
            None => warnings.push(format!(
                "no truth match for prediction '{}'",
                ppath.display()
            )),
        }
    }
    for (stem, tpath) in &truth {
        if !pred.contains_key(stem) {
            warnings.push(format!(
                "no prediction match for truth '{}'",
                tpath.display()
            ));
        }
    }
    Ok(ImagePairing { items, warnings })
}

// Synthetic scene constants. Region temperatures and colors are fixed
// across scenes (up to small jitter) so a thermal->color mapping exists
// for a model to learn. Hot objects carry most of the thermal contrast
// while staying near-neutral in the visible band.
const SKY_TEMP: f32 = 8_000.0;
const FOLIAGE_TEMP: f32 = 30_000.0;
const HOT_TEMP: f32 = 52_000.0;
const TEMP_JITTER: f32 = 400.0;
const THERMAL_TEXTURE: f32 = 1_500.0;
const VISIBLE_TEXTURE: f32 = 0.02;
const SPIKE_PROBABILITY: f64 = 0.001;
const SKY_COLOR: [f32; 3] = [0.72, 0.76, 0.86];
const FOLIAGE_COLOR: [f32; 3] = [0.42, 0.60, 0.46];
const HOT_COLOR: [f32; 3] = [0.55, 0.55, 0.55];
const COLOR_JITTER: f32 = 0.015;

#[derive(Clone, Copy)]
struct Rect {
    y0: usize,
    x0: usize,
    h: usize,
    w: usize,
}

impl Rect {
    fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.y0 && y < self.y0 + self.h && x >= self.x0 && x < self.x0 + self.w
    }
}

/// Generate `n` deterministic paired scenes: a cold sky band above a
/// foliage field with a few hot rectangular objects. Thermal frames are
/// integral 16-bit counts with rare injected spikes (probability 0.001
/// per pixel, value 0 or 65535); visible images are in [0,1].
pub fn gen_synthetic_dataset(seed: u64, n: usize, h: usize, w: usize) -> Result<Vec<PairedSample>> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one scene".into()));
    }
    if h < 32 || w < 32 {
        return Err(Error::InvalidArgument(format!(
            "scene size must be at least 32x32, got {h}x{w}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let horizon = rng.random_range(3 * h / 10..=h / 2);
        let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-TEMP_JITTER..=TEMP_JITTER);
        let temps = [
            SKY_TEMP + jitter(&mut rng),
            FOLIAGE_TEMP + jitter(&mut rng),
            HOT_TEMP + jitter(&mut rng),
        ];
        let mut colors = [SKY_COLOR, FOLIAGE_COLOR, HOT_COLOR];
        for color in &mut colors {
            for ch in color.iter_mut() {
                *ch += rng.random_range(-COLOR_JITTER..=COLOR_JITTER);
            }
        }
        let n_objects = rng.random_range(2..=4usize);
        let mut rects = Vec::with_capacity(n_objects);
        for _ in 0..n_objects {
            let rh = rng.random_range(h / 8..=h / 4);
            let rw = rng.random_range(w / 8..=w / 4);
            let y0 = rng.random_range(horizon..=h - rh);
            let x0 = rng.random_range(0..=w - rw);
            rects.push(Rect {
                y0,
                x0,
                h: rh,
                w: rw,
            });
        }

        let mut thermal = Vec::with_capacity(h * w);
        let mut visible = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                let region = if rects.iter().any(|r| r.contains(y, x)) {
                    2
                } else if y < horizon {
                    0
                } else {
                    1
                };
                let ttex = rng.random_range(-THERMAL_TEXTURE..=THERMAL_TEXTURE);
                let vtex = rng.random_range(-VISIBLE_TEXTURE..=VISIBLE_TEXTURE);
                let mut t = (temps[region] + ttex).clamp(2_000.0, 62_000.0).round();
                if rng.random_bool(SPIKE_PROBABILITY) {
                    t = if rng.random_bool(0.5) { 65_535.0 } else { 0.0 };
                }
                thermal.push(t);
                for &base in &colors[region] {
                    visible.push((base + vtex).clamp(0.0, 1.0));
                }
            }
        }
        let frame = ThermalFrame::from_raw(h, w, thermal, BitDepth::Sixteen)?;
        let img = ImageF32::from_vec(h, w, 3, visible)?;
        samples.push(PairedSample::new(format!("{i:04}"), frame, img)?);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thermal_16bit_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tif");
        let frame =
            ThermalFrame::from_raw(1, 3, vec![0.0, 32768.0, 65535.0], BitDepth::Sixteen).unwrap();
        save_thermal(&frame, &path).unwrap();
        let back = load_thermal(&path).unwrap();
        assert_eq!(back.data(), frame.data());
        assert_eq!(back.bit_depth(), BitDepth::Sixteen);
        assert!(!back.is_normalized());
    }

    #[test]
    fn thermal_8bit_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let frame = ThermalFrame::from_raw(2, 2, vec![255.0; 4], BitDepth::Eight).unwrap();
        save_thermal(&frame, &path).unwrap();
        let back = load_thermal(&path).unwrap();
        assert_eq!(back.data(), &[255.0; 4]);
        assert_eq!(back.bit_depth(), BitDepth::Eight);
    }

    #[test]
    fn rgb_thermal_input_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let img = ImageF32::from_vec(2, 2, 3, vec![0.5; 12]).unwrap();
        save_image(&img, &path, BitDepth::Eight).unwrap();
        let err = load_thermal(&path).unwrap_err();
        assert!(
            err.to_string()
                .contains("thermal input must be single-channel"),
            "unexpected message: {err}"
        );
    }

    #[test]
    fn save_image_rounding() {
        let dir = tempfile::tempdir().unwrap();

        // 1.0 at 8-bit stores 255.
        let img = ImageF32::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let p8 = dir.path().join("a.png");
        save_image(&img, &p8, BitDepth::Eight).unwrap();
        assert_eq!(load_thermal(&p8).unwrap().data(), &[255.0]);

        // 0.5 at 16-bit stores round(0.5 * 65535) = 32768.
        let img = ImageF32::from_vec(1, 1, 1, vec![0.5]).unwrap();
        let p16 = dir.path().join("b.tif");
        save_image(&img, &p16, BitDepth::Sixteen).unwrap();
        assert_eq!(load_thermal(&p16).unwrap().data(), &[32768.0]);
    }

    #[test]
    fn save_image_rejects_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageF32::from_vec(1, 1, 1, vec![1.2]).unwrap();
        let err = save_image(&img, dir.path().join("x.png"), BitDepth::Eight);
        assert!(matches!(err, Err(Error::OutOfRange(_))));
    }

    #[test]
    fn save_rejects_mismatched_extension() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageF32::from_vec(1, 1, 1, vec![0.5]).unwrap();
        assert!(save_image(&img, dir.path().join("x.tif"), BitDepth::Eight).is_err());
        assert!(save_image(&img, dir.path().join("x.png"), BitDepth::Sixteen).is_err());
    }

    fn write_pair(root: &Path, stem: &str, h: usize, w: usize) {
        let t = ThermalFrame::from_raw(h, w, vec![100.0; h * w], BitDepth::Sixteen).unwrap();
        save_thermal(&t, root.join("thermal").join(format!("{stem}.tif"))).unwrap();
        let v = ImageF32::from_vec(h, w, 3, vec![0.5; h * w * 3]).unwrap();
        save_image(
            &v,
            root.join("visible").join(format!("{stem}.png")),
            BitDepth::Eight,
        )
        .unwrap();
    }

    #[test]
    fn pairing_matches_by_stem_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("thermal")).unwrap();
        fs::create_dir_all(dir.path().join("visible")).unwrap();
        write_pair(dir.path(), "b", 4, 4);
        write_pair(dir.path(), "a", 4, 4);
        let pairing = load_dataset(dir.path()).unwrap();
        let ids: Vec<&str> = pairing.pairs.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(pairing.warnings.is_empty());
    }

    #[test]
    fn pairing_reports_unmatched_files() {
        let dir = tempfile::tempdir().unwrap();
        let tdir = dir.path().join("thermal");
        let vdir = dir.path().join("visible");
        fs::create_dir_all(&tdir).unwrap();
        fs::create_dir_all(&vdir).unwrap();
        let t = ThermalFrame::from_raw(4, 4, vec![1.0; 16], BitDepth::Sixteen).unwrap();
        save_thermal(&t, tdir.join("a.tif")).unwrap();
        let v = ImageF32::from_vec(4, 4, 3, vec![0.1; 48]).unwrap();
        save_image(&v, vdir.join("b.png"), BitDepth::Eight).unwrap();
        let pairing = pair_dataset(&tdir, &vdir).unwrap();
        assert!(pairing.pairs.is_empty());
        assert_eq!(pairing.warnings.len(), 2);
    }

    #[test]
    fn pairing_rejects_size_mismatch_with_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("thermal")).unwrap();
        fs::create_dir_all(dir.path().join("visible")).unwrap();
        let t = ThermalFrame::from_raw(4, 4, vec![1.0; 16], BitDepth::Sixteen).unwrap();
        save_thermal(&t, dir.path().join("thermal/a.tif")).unwrap();
        let v = ImageF32::from_vec(8, 8, 3, vec![0.1; 192]).unwrap();
        save_image(&v, dir.path().join("visible/a.png"), BitDepth::Eight).unwrap();
        let pairing = load_dataset(dir.path()).unwrap();
        assert!(pairing.pairs.is_empty());
        assert_eq!(pairing.warnings.len(), 1);
        assert!(
            pairing.warnings[0].contains("'a'"),
            "{}",
            pairing.warnings[0]
        );
    }

    #[test]
    fn synthetic_is_deterministic_in_seed() {
        let a = gen_synthetic_dataset(42, 3, 32, 40).unwrap();
        let b = gen_synthetic_dataset(42, 3, 32, 40).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.thermal.data(), y.thermal.data());
            assert_eq!(x.visible.data(), y.visible.data());
        }
        let c = gen_synthetic_dataset(43, 3, 32, 40).unwrap();
        assert_ne!(a[0].thermal.data(), c[0].thermal.data());
    }

    #[test]
    fn synthetic_contract() {
        let ds = gen_synthetic_dataset(1, 4, 64, 64).unwrap();
        assert_eq!(ds.len(), 4);
        for s in &ds {
            assert_eq!(s.thermal.height(), 64);
            assert_eq!(s.thermal.width(), 64);
            assert!(!s.thermal.is_normalized());
            assert_eq!(s.thermal.bit_depth(), BitDepth::Sixteen);
            // Raw counts, integral, 16-bit range.
            assert!(s
                .thermal
                .data()
                .iter()
                .all(|&v| (0.0..=65535.0).contains(&v)));
            assert!(s.thermal.data().iter().all(|&v| v.fract() == 0.0));
            assert!(s.visible.in_unit_range());
        }
        assert!(gen_synthetic_dataset(1, 0, 64, 64).is_err());
        assert!(gen_synthetic_dataset(1, 1, 16, 64).is_err());
    }

    // Binomial oracle: counting spike pixels over 10 frames of 256x256,
    // expectation 0.001 * 10 * 65536 with a 3-sigma acceptance band.
    #[test]
    fn synthetic_spike_rate() {
        let ds = gen_synthetic_dataset(7, 10, 256, 256).unwrap();
        let count: usize = ds
            .iter()
            .map(|s| {
                s.thermal
                    .data()
                    .iter()
                    .filter(|&&v| v == 0.0 || v == 65535.0)
                    .count()
            })
            .sum();
        let trials = 10.0f64 * 256.0 * 256.0;
        let mean = trials * 0.001;
        let sigma = (trials * 0.001 * 0.999).sqrt();
        assert!(
            (count as f64 - mean).abs() <= 3.0 * sigma,
            "spike count {count} outside {mean} +- {}",
            3.0 * sigma
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn tiff_roundtrip_random_frames(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..9 * 7).map(|_| rng.random_range(0..=65535u16) as f32).collect();
            let frame = ThermalFrame::from_raw(9, 7, data, BitDepth::Sixteen).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.tif");
            save_thermal(&frame, &path).unwrap();
            let back = load_thermal(&path).unwrap();
            prop_assert_eq!(back.data(), frame.data());
        }
    }
}
