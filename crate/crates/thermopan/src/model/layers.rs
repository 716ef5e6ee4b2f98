//! Network layer primitives with hand-written backward passes.
//!
//! Activations are [C, H, W] tensors for a single sample; conv weights
//! are [O, I, K, K]. Every backward returns exact analytic gradients of
//! the composition with an arbitrary upstream gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::tensor::Tensor;

/// Valid output range of one stride along an axis: all `o` with
/// 0 <= o * stride + offset < len.
#[inline]
fn axis_range(out_len: usize, len: usize, stride: usize, offset: isize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset < 0 {
        ((-offset) + s - 1) / s
    } else {
        0
    };
    let hi_incl = (len as isize - 1 - offset).div_euclid(s);
    if hi_incl < lo {
        return (1, 0); // empty
    }
    (lo as usize, (hi_incl as usize).min(out_len - 1))
}

fn conv_output_dims(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
    let (c, h, wd) = x.dims3();
    let (o, ci, k, k2) = w.dims4();
    if ci != c {
        return Err(Error::ShapeMismatch(format!(
            "conv input has {c} channels but kernel expects {ci}"
        )));
    }
    if k != k2 {
        return Err(Error::ShapeMismatch("conv kernels must be square".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv stride must be >= 1".into()));
    }
    if h + 2 * pad < k || wd + 2 * pad < k {
        return Err(Error::ShapeMismatch(format!(
            "conv kernel {k} too large for padded input {h}x{wd} (pad {pad})"
        )));
    }
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    Ok((c, h, wd, o, k, oh, ow))
}

/// Cross-correlation with zero padding.
pub fn conv2d_fwd(
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (c, h, wd, o, k, oh, ow) = conv_output_dims(x, w, stride, pad)?;
    if let Some(b) = bias {
        if b.shape() != [o] {
            return Err(Error::ShapeMismatch(format!(
                "conv bias shape {:?} does not match {o} output channels",
                b.shape()
            )));
        }
    }
    let mut y = Tensor::zeros(&[o, oh, ow]);
    let xd = x.data();
    let wdat = w.data();
    let yd = y.data_mut();
    for oc in 0..o {
        let ybase = oc * oh * ow;
        if let Some(b) = bias {
            yd[ybase..ybase + oh * ow].fill(b.data()[oc]);
        }
        for ic in 0..c {
            let xbase = ic * h * wd;
            for ky in 0..k {
                let dy = ky as isize - pad as isize;
                let (oy_lo, oy_hi) = axis_range(oh, h, stride, dy);
                for kx in 0..k {
                    let wv = wdat[((oc * c + ic) * k + ky) * k + kx];
                    let dx = kx as isize - pad as isize;
                    let (ox_lo, ox_hi) = axis_range(ow, wd, stride, dx);
                    if oy_lo > oy_hi || ox_lo > ox_hi {
                        continue;
                    }
                    for oy in oy_lo..=oy_hi {
                        let iy = (oy * stride) as isize + dy;
                        let yrow = ybase + oy * ow;
                        let xrow = xbase + iy as usize * wd;
                        if stride == 1 {
                            let len = ox_hi - ox_lo + 1;
                            let xstart = (xrow as isize + dx + ox_lo as isize) as usize;
                            let ys = &mut yd[yrow + ox_lo..yrow + ox_lo + len];
                            let xs = &xd[xstart..xstart + len];
                            for (yv, xv) in ys.iter_mut().zip(xs.iter()) {
                                *yv += wv * xv;
                            }
                        } else {
                            for ox in ox_lo..=ox_hi {
                                let ix = ((ox * stride) as isize + dx) as usize;
                                yd[yrow + ox] += wv * xd[xrow + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Gradients produced by [`conv2d_bwd`].
pub struct ConvGrads {
    pub x: Tensor,
    pub w: Tensor,
    pub bias: Option<Tensor>,
}

/// Exact gradients of the convolution w.r.t. input, weights, and bias.
pub fn conv2d_bwd(
    grad_y: &Tensor,
    x: &Tensor,
    w: &Tensor,
    has_bias: bool,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads> {
    let (c, h, wd, o, k, oh, ow) = conv_output_dims(x, w, stride, pad)?;
    if grad_y.shape() != [o, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient shape {:?}, expected [{o}, {oh}, {ow}]",
            grad_y.shape()
        )));
    }
    let mut gx = Tensor::zeros(&[c, h, wd]);
    let mut gw = Tensor::zeros(w.shape());
    let xd = x.data();
    let wdat = w.data();
    let gyd = grad_y.data();
    {
        let gxd = gx.data_mut();
        let gwd = gw.data_mut();
        for oc in 0..o {
            let ybase = oc * oh * ow;
            for ic in 0..c {
                let xbase = ic * h * wd;
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    let (oy_lo, oy_hi) = axis_range(oh, h, stride, dy);
                    for kx in 0..k {
                        let wv = wdat[((oc * c + ic) * k + ky) * k + kx];
                        let dx = kx as isize - pad as isize;
                        let (ox_lo, ox_hi) = axis_range(ow, wd, stride, dx);
                        if oy_lo > oy_hi || ox_lo > ox_hi {
                            continue;
                        }
                        let mut wacc = 0.0;
                        for oy in oy_lo..=oy_hi {
                            let iy = (oy * stride) as isize + dy;
                            let yrow = ybase + oy * ow;
                            let xrow = xbase + iy as usize * wd;
                            for ox in ox_lo..=ox_hi {
                                let ix = ((ox * stride) as isize + dx) as usize;
                                let g = gyd[yrow + ox];
                                wacc += g * xd[xrow + ix];
                                gxd[xrow + ix] += wv * g;
                            }
                        }
                        gwd[((oc * c + ic) * k + ky) * k + kx] += wacc;
                    }
                }
            }
        }
    }
    let bias = if has_bias {
        let mut gb = Tensor::zeros(&[o]);
        for oc in 0..o {
            gb.data_mut()[oc] = gyd[oc * oh * ow..(oc + 1) * oh * ow].iter().sum();
        }
        Some(gb)
    } else {
        None
    };
    Ok(ConvGrads { x: gx, w: gw, bias })
}

pub fn leaky_relu_fwd(x: &Tensor, slope: f64) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    y
}

pub fn leaky_relu_bwd(grad_y: &Tensor, x: &Tensor, slope: f64) -> Tensor {
    let mut gx = grad_y.clone();
    for (g, &xv) in gx.data_mut().iter_mut().zip(x.data().iter()) {
        if xv < 0.0 {
            *g *= slope;
        }
    }
    gx
}

/// Values cached by the instance-norm forward pass for its backward.
pub struct InstanceNormCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

/// Per-channel standardization to zero mean / unit variance over the
/// spatial extent, then a learned affine transform.
pub fn instance_norm_fwd(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, InstanceNormCache)> {
    let (c, h, w) = x.dims3();
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::ShapeMismatch(format!(
            "instance norm affine shapes {:?}/{:?} do not match {c} channels",
            gamma.shape(),
            beta.shape()
        )));
    }
    let n = h * w;
    let mut y = Tensor::zeros(x.shape());
    let mut xhat = Tensor::zeros(x.shape());
    let mut inv_std = Vec::with_capacity(c);
    for ch in 0..c {
        let plane = &x.data()[ch * n..(ch + 1) * n];
        let mean: f64 = plane.iter().sum::<f64>() / n as f64;
        let var: f64 = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        let (g, b) = (gamma.data()[ch], beta.data()[ch]);
        let xh = &mut xhat.data_mut()[ch * n..(ch + 1) * n];
        for (xv, dst) in plane.iter().zip(xh.iter_mut()) {
            *dst = (xv - mean) * is;
        }
        let ys = &mut y.data_mut()[ch * n..(ch + 1) * n];
        for (dst, &xh) in ys.iter_mut().zip(xhat.data()[ch * n..(ch + 1) * n].iter()) {
            *dst = g * xh + b;
        }
    }
    Ok((y, InstanceNormCache { xhat, inv_std }))
}

pub fn instance_norm_bwd(
    grad_y: &Tensor,
    cache: &InstanceNormCache,
    gamma: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (c, h, w) = grad_y.dims3();
    let n = h * w;
    let mut gx = Tensor::zeros(grad_y.shape());
    let mut ggamma = Tensor::zeros(&[c]);
    let mut gbeta = Tensor::zeros(&[c]);
    for ch in 0..c {
        let gy = &grad_y.data()[ch * n..(ch + 1) * n];
        let xh = &cache.xhat.data()[ch * n..(ch + 1) * n];
        let sum_gy: f64 = gy.iter().sum();
        let sum_gy_xhat: f64 = gy.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
        gbeta.data_mut()[ch] = sum_gy;
        ggamma.data_mut()[ch] = sum_gy_xhat;
        let scale = gamma.data()[ch] * cache.inv_std[ch];
        let mean_gy = sum_gy / n as f64;
        let mean_gy_xhat = sum_gy_xhat / n as f64;
        let gxs = &mut gx.data_mut()[ch * n..(ch + 1) * n];
        for i in 0..n {
            gxs[i] = scale * (gy[i] - mean_gy - xh[i] * mean_gy_xhat);
        }
    }
    (gx, ggamma, gbeta)
}

/// Inverted dropout; the mask already carries the 1/(1-p) scale so
/// eval mode is the identity. Deterministic in the seed.
pub fn dropout_fwd(x: &Tensor, p: f64, train: bool, seed: u64) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    if !train || p == 0.0 {
        return Ok((x.clone(), Tensor::filled(x.shape(), 1.0)));
    }
    let keep = 1.0 - p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Tensor::zeros(x.shape());
    for m in mask.data_mut() {
        *m = if rng.random_bool(keep) {
            1.0 / keep
        } else {
            0.0
        };
    }
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(mask.data().iter()) {
        *v *= m;
    }
    Ok((y, mask))
}

pub fn dropout_bwd(grad_y: &Tensor, mask: &Tensor) -> Tensor {
    let mut gx = grad_y.clone();
    for (g, &m) in gx.data_mut().iter_mut().zip(mask.data().iter()) {
        *g *= m;
    }
    gx
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2_fwd(x: &Tensor) -> Tensor {
    let (c, h, w) = x.dims3();
    let mut y = Tensor::zeros(&[c, 2 * h, 2 * w]);
    let xd = x.data();
    let yd = y.data_mut();
    for ch in 0..c {
        for iy in 0..h {
            let src = &xd[ch * h * w + iy * w..ch * h * w + (iy + 1) * w];
            for dy in 0..2 {
                let row = ch * 4 * h * w + (2 * iy + dy) * 2 * w;
                for (ix, &v) in src.iter().enumerate() {
                    yd[row + 2 * ix] = v;
                    yd[row + 2 * ix + 1] = v;
                }
            }
        }
    }
    y
}

/// Backward of nearest-neighbor upsampling: sum each 2x2 block.
pub fn upsample2_bwd(grad_y: &Tensor) -> Tensor {
    let (c, h2, w2) = grad_y.dims3();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut gx = Tensor::zeros(&[c, h, w]);
    let gyd = grad_y.data();
    let gxd = gx.data_mut();
    for ch in 0..c {
        for iy in 0..h {
            let dst = &mut gxd[ch * h * w + iy * w..ch * h * w + (iy + 1) * w];
            for dy in 0..2 {
                let row = ch * h2 * w2 + (2 * iy + dy) * w2;
                for (ix, d) in dst.iter_mut().enumerate() {
                    *d += gyd[row + 2 * ix] + gyd[row + 2 * ix + 1];
                }
            }
        }
    }
    gx
}

pub fn sigmoid_fwd(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
    y
}

pub fn sigmoid_bwd(grad_y: &Tensor, y: &Tensor) -> Tensor {
    let mut gx = grad_y.clone();
    for (g, &yv) in gx.data_mut().iter_mut().zip(y.data().iter()) {
        *g *= yv * (1.0 - yv);
    }
    gx
}

/// Stack two activations along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, ha, wa) = a.dims3();
    let (cb, hb, wb) = b.dims3();
    if ha != hb || wa != wb {
        return Err(Error::ShapeMismatch(format!(
            "concat spatial dims differ: {ha}x{wa} vs {hb}x{wb}"
        )));
    }
    let mut data = Vec::with_capacity((ca + cb) * ha * wa);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[ca + cb, ha, wa], data)
}

/// Split an upstream gradient back into the two concat inputs.
pub fn split_channels(grad: &Tensor, c_first: usize) -> (Tensor, Tensor) {
    let (c, h, w) = grad.dims3();
    let n = h * w;
    let ga = Tensor::from_vec(&[c_first, h, w], grad.data()[..c_first * n].to_vec()).unwrap();
    let gb = Tensor::from_vec(&[c - c_first, h, w], grad.data()[c_first * n..].to_vec()).unwrap();
    (ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tensor::he_init;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central finite differences of scalar(f) w.r.t. one tensor entry.
    fn finite_diff(mut f: impl FnMut(&Tensor) -> f64, at: &Tensor, i: usize, h: f64) -> f64 {
        let mut plus = at.clone();
        plus.data_mut()[i] += h;
        let mut minus = at.clone();
        minus.data_mut()[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    fn assert_close(analytic: f64, numeric: f64, what: &str) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic - numeric).abs() / denom;
        assert!(
            rel < 1e-3,
            "{what}: analytic {analytic} vs fd {numeric} (rel {rel})"
        );
    }

    /// Weighted scalar readout sum(y * probe) makes upstream gradients
    /// nontrivial while staying a plain sum reduction.
    fn probe_for(shape: &[usize], seed: u64) -> Tensor {
        random_tensor(shape, seed)
    }

    fn readout(y: &Tensor, probe: &Tensor) -> f64 {
        y.data()
            .iter()
            .zip(probe.data().iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn conv_identity_kernel() {
        let x = random_tensor(&[1, 5, 5], 1);
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d_fwd(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_zero_input_zero_weight_grad() {
        let x = Tensor::zeros(&[2, 6, 6]);
        let w = he_init(&[3, 2, 3, 3], 5).unwrap();
        let y = conv2d_fwd(&x, &w, None, 1, 1).unwrap();
        let gy = random_tensor(y.shape(), 2);
        let grads = conv2d_bwd(&gy, &x, &w, false, 1, 1).unwrap();
        assert!(grads.w.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_known_cross_correlation() {
        // 3x3 input, 2x2 kernel, stride 1, no padding; worked by hand.
        let x = Tensor::from_vec(&[1, 3, 3], vec![1., 2., 3., 4., 5., 6., 7., 8., 9.]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 2, 2], vec![1., 0., 0., 2.]).unwrap();
        let y = conv2d_fwd(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[1. + 10., 2. + 12., 4. + 16., 5. + 18.]);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        for (stride, pad) in [(1usize, 1usize), (2, 1), (1, 0)] {
            let x = random_tensor(&[3, 8, 8], 10 + stride as u64);
            let w = he_init(&[4, 3, 3, 3], 77).unwrap();
            let b = random_tensor(&[4], 78);
            let y = conv2d_fwd(&x, &w, Some(&b), stride, pad).unwrap();
            let probe = probe_for(y.shape(), 99);
            let grads = conv2d_bwd(&probe, &x, &w, true, stride, pad).unwrap();
            let f_x =
                |t: &Tensor| readout(&conv2d_fwd(t, &w, Some(&b), stride, pad).unwrap(), &probe);
            for &i in &[0usize, 7, 63, 150] {
                assert_close(grads.x.data()[i], finite_diff(f_x, &x, i, 1e-3), "conv gx");
            }
            let f_w =
                |t: &Tensor| readout(&conv2d_fwd(&x, t, Some(&b), stride, pad).unwrap(), &probe);
            for &i in &[0usize, 13, 50, 107] {
                assert_close(grads.w.data()[i], finite_diff(f_w, &w, i, 1e-3), "conv gw");
            }
            let f_b =
                |t: &Tensor| readout(&conv2d_fwd(&x, &w, Some(t), stride, pad).unwrap(), &probe);
            let gb = grads.bias.unwrap();
            for i in 0..4 {
                assert_close(gb.data()[i], finite_diff(f_b, &b, i, 1e-3), "conv gb");
            }
        }
    }

    #[test]
    fn leaky_relu_values_and_gradient() {
        let x = Tensor::from_vec(&[1, 1, 2], vec![-1.0, 2.0]).unwrap();
        let y = leaky_relu_fwd(&x, 0.2);
        assert_eq!(y.data(), &[-0.2, 2.0]);

        let x = random_tensor(&[2, 4, 4], 21);
        let probe = probe_for(&[2, 4, 4], 22);
        let gx = leaky_relu_bwd(&probe, &x, 0.2);
        let f = |t: &Tensor| readout(&leaky_relu_fwd(t, 0.2), &probe);
        for i in 0..x.numel() {
            assert_close(gx.data()[i], finite_diff(f, &x, i, 1e-4), "lrelu gx");
        }
    }

    #[test]
    fn instance_norm_constant_channel_collapses_to_shift() {
        let x = Tensor::filled(&[1, 4, 4], 3.25);
        let gamma = Tensor::filled(&[1], 2.0);
        let beta = Tensor::filled(&[1], 0.7);
        let (y, _) = instance_norm_fwd(&x, &gamma, &beta, 1e-5).unwrap();
        for &v in y.data() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn instance_norm_standardizes() {
        let x = random_tensor(&[3, 6, 6], 31);
        let gamma = Tensor::filled(&[3], 1.0);
        let beta = Tensor::zeros(&[3]);
        let (y, _) = instance_norm_fwd(&x, &gamma, &beta, 1e-5).unwrap();
        for c in 0..3 {
            let plane = &y.data()[c * 36..(c + 1) * 36];
            let mean: f64 = plane.iter().sum::<f64>() / 36.0;
            let var: f64 = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 36.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4); // eps-regularized
        }
    }

    #[test]
    fn instance_norm_gradients_match_finite_differences() {
        let x = random_tensor(&[2, 5, 5], 41);
        let gamma = random_tensor(&[2], 42);
        let beta = random_tensor(&[2], 43);
        let probe = probe_for(&[2, 5, 5], 44);
        let (_, cache) = instance_norm_fwd(&x, &gamma, &beta, 1e-5).unwrap();
        let (gx, gg, gb) = instance_norm_bwd(&probe, &cache, &gamma);

        let f_x = |t: &Tensor| {
            readout(
                &instance_norm_fwd(t, &gamma, &beta, 1e-5).unwrap().0,
                &probe,
            )
        };
        for i in 0..x.numel() {
            assert_close(gx.data()[i], finite_diff(f_x, &x, i, 1e-4), "in gx");
        }
        let f_g = |t: &Tensor| readout(&instance_norm_fwd(&x, t, &beta, 1e-5).unwrap().0, &probe);
        for i in 0..2 {
            assert_close(gg.data()[i], finite_diff(f_g, &gamma, i, 1e-4), "in ggamma");
        }
        let f_b = |t: &Tensor| readout(&instance_norm_fwd(&x, &gamma, t, 1e-5).unwrap().0, &probe);
        for i in 0..2 {
            assert_close(gb.data()[i], finite_diff(f_b, &beta, i, 1e-4), "in gbeta");
        }
    }

    #[test]
    fn dropout_eval_is_identity() {
        let x = random_tensor(&[2, 3, 3], 51);
        let (y, mask) = dropout_fwd(&x, 0.5, false, 7).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn dropout_train_mask_deterministic_and_scaled() {
        let x = Tensor::filled(&[1, 8, 8], 1.0);
        let (y1, m1) = dropout_fwd(&x, 0.5, true, 7).unwrap();
        let (y2, m2) = dropout_fwd(&x, 0.5, true, 7).unwrap();
        assert_eq!(y1.data(), y2.data());
        assert_eq!(m1.data(), m2.data());
        assert!(y1.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let (y3, _) = dropout_fwd(&x, 0.5, true, 8).unwrap();
        assert_ne!(y1.data(), y3.data());
    }

    #[test]
    fn dropout_gradient_matches_finite_differences() {
        let x = random_tensor(&[1, 6, 6], 61);
        let probe = probe_for(&[1, 6, 6], 62);
        let (_, mask) = dropout_fwd(&x, 0.5, true, 9).unwrap();
        let gx = dropout_bwd(&probe, &mask);
        let f = |t: &Tensor| readout(&dropout_fwd(t, 0.5, true, 9).unwrap().0, &probe);
        for i in 0..x.numel() {
            assert_close(gx.data()[i], finite_diff(f, &x, i, 1e-4), "dropout gx");
        }
    }

    #[test]
    fn upsample_fwd_and_bwd() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![1., 2., 3., 4.]).unwrap();
        let y = upsample2_fwd(&x);
        assert_eq!(y.shape(), &[1, 4, 4]);
        assert_eq!(&y.data()[0..4], &[1., 1., 2., 2.]);
        assert_eq!(&y.data()[12..16], &[3., 3., 4., 4.]);

        let x = random_tensor(&[3, 4, 4], 71);
        let probe = probe_for(&[3, 8, 8], 72);
        let gx = upsample2_bwd(&probe);
        let f = |t: &Tensor| readout(&upsample2_fwd(t), &probe);
        for i in 0..x.numel() {
            assert_close(gx.data()[i], finite_diff(f, &x, i, 1e-4), "upsample gx");
        }
    }

    #[test]
    fn sigmoid_gradient_matches_finite_differences() {
        let x = random_tensor(&[1, 4, 4], 81);
        let probe = probe_for(&[1, 4, 4], 82);
        let y = sigmoid_fwd(&x);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let gx = sigmoid_bwd(&probe, &y);
        let f = |t: &Tensor| readout(&sigmoid_fwd(t), &probe);
        for i in 0..x.numel() {
            assert_close(gx.data()[i], finite_diff(f, &x, i, 1e-4), "sigmoid gx");
        }
    }

    #[test]
    fn concat_and_split_are_inverse() {
        let a = random_tensor(&[2, 3, 3], 91);
        let b = random_tensor(&[4, 3, 3], 92);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), &[6, 3, 3]);
        let (ga, gb) = split_channels(&cat, 2);
        assert_eq!(ga.data(), a.data());
        assert_eq!(gb.data(), b.data());
        let bad = random_tensor(&[1, 4, 4], 93);
        assert!(concat_channels(&a, &bad).is_err());
    }
}
