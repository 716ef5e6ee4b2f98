//! PSNR / SSIM / RMSE and aggregate evaluation reports.
//!
//! All metrics assume [0,1] pipeline images, so the PSNR peak is 1.0.
//! PSNR is capped at 100 dB once the RMSE drops below 1e-5.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::ImageF32;

/// Cap applied to PSNR for near-identical images.
pub const PSNR_CAP_DB: f64 = 100.0;
const PSNR_RMSE_FLOOR: f64 = 1e-5;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_shapes(a: &ImageF32, b: &ImageF32) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    Ok(())
}

/// Root-mean-square error over all pixels and channels.
pub fn rmse(a: &ImageF32, b: &ImageF32) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok((sum / a.data().len() as f64).sqrt())
}

/// Peak signal-to-noise ratio in dB with peak 1.0, capped at 100 dB.
pub fn psnr(a: &ImageF32, b: &ImageF32) -> Result<f64> {
    let e = rmse(a, b)?;
    Ok(if e < PSNR_RMSE_FLOOR {
        PSNR_CAP_DB
    } else {
        20.0 * (1.0 / e).log10()
    })
}

fn gaussian_window_1d() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut g: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    for v in &mut g {
        *v /= s;
    }
    g
}

/// Separable valid-mode weighted local sums: output is
/// (h - win + 1) x (w - win + 1).
fn local_sums(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let win = g.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        let out = &mut tmp[y * ow..(y + 1) * ow];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &gk) in g.iter().enumerate() {
                acc += gk * row[x + k];
            }
            out[x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (k, &gk) in g.iter().enumerate() {
            let src = &tmp[(y + k) * ow..(y + k + 1) * ow];
            for x in 0..ow {
                dst[x] += gk * src[x];
            }
        }
    }
    out
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, peak 1. Channels are scored independently over all valid
/// window positions and then averaged.
pub fn ssim(a: &ImageF32, b: &ImageF32) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs images at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let g = gaussian_window_1d();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut channel_means = Vec::with_capacity(a.channels());
    for c in 0..a.channels() {
        let pa = a.channel_f64(c);
        let pb = b.channel_f64(c);
        let paa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let pbb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let pab: Vec<f64> = pa.iter().zip(pb.iter()).map(|(x, y)| x * y).collect();
        let mu_a = local_sums(&pa, h, w, &g);
        let mu_b = local_sums(&pb, h, w, &g);
        let e_aa = local_sums(&paa, h, w, &g);
        let e_bb = local_sums(&pbb, h, w, &g);
        let e_ab = local_sums(&pab, h, w, &g);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
        }
        channel_means.push(acc / mu_a.len() as f64);
    }
    Ok(channel_means.iter().sum::<f64>() / channel_means.len() as f64)
}

/// Per-image metrics for one prediction/truth pair.
#[derive(Debug, Clone)]
pub struct ImageMetrics {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
}

/// Per-image metrics plus unweighted means.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_rmse: f64,
}

impl MetricReport {
    /// `id,psnr,ssim,rmse` rows with a final `MEAN` row, 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,psnr,ssim,rmse\n");
        for m in &self.per_image {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                m.id, m.psnr, m.ssim, m.rmse
            ));
        }
        out.push_str(&format!(
            "MEAN,{:.6},{:.6},{:.6}\n",
            self.mean_psnr, self.mean_ssim, self.mean_rmse
        ));
        out
    }
}

/// Score a set of (id, prediction, truth) triples and aggregate with
/// unweighted means. Order of the report follows the input order.
pub fn evaluate_set(items: &[(String, ImageF32, ImageF32)]) -> Result<MetricReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput(
            "evaluate_set needs at least one pair".into(),
        ));
    }
    let per_image: Vec<ImageMetrics> = items
        .par_iter()
        .map(|(id, pred, truth)| {
            Ok(ImageMetrics {
                id: id.clone(),
                psnr: psnr(pred, truth)?,
                ssim: ssim(pred, truth)?,
                rmse: rmse(pred, truth)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = per_image.len() as f64;
    Ok(MetricReport {
        mean_psnr: per_image.iter().map(|m| m.psnr).sum::<f64>() / n,
        mean_ssim: per_image.iter().map(|m| m.ssim).sum::<f64>() / n,
        mean_rmse: per_image.iter().map(|m| m.rmse).sum::<f64>() / n,
        per_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize, c: usize) -> ImageF32 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
        ImageF32::from_vec(h, w, c, data).unwrap()
    }

    fn constant(h: usize, w: usize, c: usize, v: f32) -> ImageF32 {
        ImageF32::from_vec(h, w, c, vec![v; h * w * c]).unwrap()
    }

    #[test]
    fn rmse_basics() {
        let a = random_image(1, 4, 4, 3);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let z = constant(4, 4, 3, 0.0);
        let half = constant(4, 4, 3, 0.5);
        assert!((rmse(&z, &half).unwrap() - 0.5).abs() < 1e-12);
        let small = constant(3, 3, 1, 0.0);
        assert!(rmse(&a, &small).is_err());
    }

    // Naive double-loop oracle.
    #[test]
    fn rmse_matches_naive_reference() {
        let a = random_image(2, 4, 4, 3);
        let b = random_image(3, 4, 4, 3);
        let mut sum = 0.0f64;
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..3 {
                    let d = a.get(y, x, c) as f64 - b.get(y, x, c) as f64;
                    sum += d * d;
                }
            }
        }
        let oracle = (sum / 48.0).sqrt();
        assert!((rmse(&a, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn psnr_basics() {
        let a = random_image(4, 8, 8, 3);
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        // rmse 0.1 -> 20 log10(10) = 20 dB
        let z = constant(8, 8, 1, 0.0);
        let tenth = constant(8, 8, 1, 0.1);
        assert!((psnr(&z, &tenth).unwrap() - 20.0).abs() < 1e-6);
        // rmse 1 -> 0 dB
        let one = constant(8, 8, 1, 1.0);
        assert_eq!(psnr(&z, &one).unwrap(), 0.0);
    }

    #[test]
    fn psnr_decreases_as_rmse_grows() {
        let z = constant(8, 8, 1, 0.0);
        let mut prev = f64::INFINITY;
        for off in [0.05f32, 0.1, 0.2, 0.4, 0.8] {
            let p = psnr(&z, &constant(8, 8, 1, off)).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let a = random_image(5, 16, 16, 3);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = constant(8, 8, 1, 0.1);
        assert!(ssim(&a, &a).is_err());
    }

    // Closed-form oracle: constant images make every window identical,
    // variances vanish, and only the luminance term remains.
    #[test]
    fn ssim_constant_offset_matches_formula() {
        let a = constant(16, 16, 1, 0.4);
        let b = constant(16, 16, 1, 0.5);
        let c1 = 0.0001f64;
        let expected = (2.0 * 0.4 * 0.5 + c1) / (0.4f64.powi(2) + 0.5f64.powi(2) + c1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    // Independent sliding-window reference implementation.
    fn naive_ssim(a: &ImageF32, b: &ImageF32) -> f64 {
        let win = 11usize;
        let r = win / 2;
        let mut g = vec![0.0f64; win * win];
        for i in 0..win {
            for j in 0..win {
                let dy = i as f64 - r as f64;
                let dx = j as f64 - r as f64;
                g[i * win + j] = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            }
        }
        let s: f64 = g.iter().sum();
        for v in &mut g {
            *v /= s;
        }
        let (c1, c2) = (0.01f64 * 0.01, 0.03f64 * 0.03);
        let (h, w) = (a.height(), a.width());
        let mut total = 0.0;
        for c in 0..a.channels() {
            let mut acc = 0.0;
            let mut count = 0usize;
            for y0 in 0..=(h - win) {
                for x0 in 0..=(w - win) {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for i in 0..win {
                        for j in 0..win {
                            let gw = g[i * win + j];
                            ma += gw * a.get(y0 + i, x0 + j, c) as f64;
                            mb += gw * b.get(y0 + i, x0 + j, c) as f64;
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..win {
                        for j in 0..win {
                            let gw = g[i * win + j];
                            let da = a.get(y0 + i, x0 + j, c) as f64 - ma;
                            let db = b.get(y0 + i, x0 + j, c) as f64 - mb;
                            va += gw * da * da;
                            vb += gw * db * db;
                            cov += gw * da * db;
                        }
                    }
                    acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1;
                }
            }
            total += acc / count as f64;
        }
        total / a.channels() as f64
    }

    #[test]
    fn ssim_matches_naive_reference() {
        let a = random_image(6, 32, 32, 1);
        let b = random_image(7, 32, 32, 1);
        let fast = ssim(&a, &b).unwrap();
        let slow = naive_ssim(&a, &b);
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = random_image(8, 20, 20, 3);
        let b = random_image(9, 20, 20, 3);
        let xy = ssim(&a, &b).unwrap();
        let yx = ssim(&b, &a).unwrap();
        assert!((xy - yx).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&xy));
    }

    #[test]
    fn metrics_invariant_under_joint_horizontal_flip() {
        let a = random_image(10, 16, 16, 3);
        let b = random_image(11, 16, 16, 3);
        let flip = |img: &ImageF32| {
            let mut out = img.clone();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    for c in 0..img.channels() {
                        out.set(y, x, c, img.get(y, img.width() - 1 - x, c));
                    }
                }
            }
            out
        };
        let (fa, fb) = (flip(&a), flip(&b));
        assert!((rmse(&a, &b).unwrap() - rmse(&fa, &fb).unwrap()).abs() < 1e-12);
        assert!((psnr(&a, &b).unwrap() - psnr(&fa, &fb).unwrap()).abs() < 1e-10);
        assert!((ssim(&a, &b).unwrap() - ssim(&fa, &fb).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn rmse_triangle_inequality_spot_check() {
        for seed in 0..10u64 {
            let a = random_image(seed * 3, 12, 12, 3);
            let b = random_image(seed * 3 + 1, 12, 12, 3);
            let c = random_image(seed * 3 + 2, 12, 12, 3);
            let ab = rmse(&a, &b).unwrap();
            let bc = rmse(&b, &c).unwrap();
            let ac = rmse(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            assert!((ab - rmse(&b, &a).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluate_set_means_and_csv() {
        let truth = constant(16, 16, 3, 0.5);
        let p1 = constant(16, 16, 3, 0.6); // rmse 0.1
        let p2 = constant(16, 16, 3, 0.8); // rmse 0.3
        let items = vec![
            ("a".to_string(), p1, truth.clone()),
            ("b".to_string(), p2, truth.clone()),
        ];
        let report = evaluate_set(&items).unwrap();
        assert!((report.mean_rmse - 0.2).abs() < 1e-6);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "id,psnr,ssim,rmse");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("MEAN,"));

        let exact = vec![("x".to_string(), truth.clone(), truth.clone())];
        let r = evaluate_set(&exact).unwrap();
        assert_eq!(r.mean_psnr, 100.0);
        assert_eq!(r.mean_ssim, 1.0);
        assert_eq!(r.mean_rmse, 0.0);

        assert!(evaluate_set(&[]).is_err());
    }
}
