//! The trainable colorizer: a small convolutional encoder-decoder with
//! skip connections, trained with the composite L1 + weighted blurred-MSE
//! loss under ADAM.
//!
//! Everything here is deterministic in the configured seed: weight
//! initialization, batch sampling, augmentation, and dropout masks all
//! derive from it, and the computation is single-threaded f64.

pub mod adam;
pub mod augment;
mod io;
pub mod layers;
pub mod loss;
pub mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use augment::{augment, AugmentOptions};
pub use io::{load_params, save_params};
pub use loss::{loss_total, LossConfig, LossOutput};
pub use tensor::{he_init, Tensor};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frequency::{decompose, KernelSpec};
use crate::pansharpen::{fuse, FusionConfig};
use crate::preprocess::{preprocess, PreprocessOptions};
use crate::raster::{ImageF32, PairedSample, ThermalFrame};
use layers::{
    concat_channels, conv2d_bwd, conv2d_fwd, dropout_bwd, dropout_fwd, instance_norm_bwd,
    instance_norm_fwd, leaky_relu_bwd, leaky_relu_fwd, sigmoid_bwd, sigmoid_fwd, split_channels,
    upsample2_bwd, upsample2_fwd, InstanceNormCache,
};

const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Network shape descriptor: stride-2 conv/instance-norm/leaky-relu
/// encoder blocks, nearest-neighbor-upsample decoder blocks with skip
/// connections, terminal 3-channel conv + sigmoid. Dropout sits on the
/// bottleneck only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_width: usize,
    pub levels: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl Architecture {
    pub fn desk_scale() -> Self {
        Self {
            in_channels: 1,
            out_channels: 3,
            base_width: 8,
            levels: 4,
            leaky_slope: 0.2,
            dropout: 0.0,
        }
    }

    pub fn full_scale() -> Self {
        Self {
            in_channels: 1,
            out_channels: 3,
            base_width: 64,
            levels: 4,
            leaky_slope: 0.2,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 {
            return Err(Error::InvalidArgument(
                "architecture channel counts must be nonzero".into(),
            ));
        }
        if self.levels == 0 || self.levels > 8 {
            return Err(Error::InvalidArgument(format!(
                "architecture levels must be in 1..=8, got {}",
                self.levels
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Input sides must divide this.
    pub fn downsample_factor(&self) -> usize {
        1 << self.levels
    }

    fn enc_in(&self, i: usize) -> usize {
        if i == 0 {
            self.in_channels
        } else {
            self.base_width << (i - 1)
        }
    }

    fn enc_out(&self, i: usize) -> usize {
        self.base_width << i
    }

    fn dec_up_in(&self, i: usize) -> usize {
        if i == 0 {
            self.enc_out(self.levels - 1)
        } else {
            self.dec_out(i - 1)
        }
    }

    fn dec_skip(&self, i: usize) -> usize {
        if i + 1 < self.levels {
            self.enc_out(self.levels - 2 - i)
        } else {
            self.in_channels
        }
    }

    fn dec_out(&self, i: usize) -> usize {
        if i + 1 < self.levels {
            self.base_width << (self.levels - 2 - i)
        } else {
            self.base_width
        }
    }

    /// Parameter tensor shapes in storage order: per encoder block
    /// conv weights + instance-norm scale/shift, the same for decoder
    /// blocks, then the terminal conv.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::with_capacity(6 * self.levels + 1);
        for i in 0..self.levels {
            let (ci, co) = (self.enc_in(i), self.enc_out(i));
            shapes.push(vec![co, ci, 3, 3]);
            shapes.push(vec![co]);
            shapes.push(vec![co]);
        }
        for i in 0..self.levels {
            let ci = self.dec_up_in(i) + self.dec_skip(i);
            let co = self.dec_out(i);
            shapes.push(vec![co, ci, 3, 3]);
            shapes.push(vec![co]);
            shapes.push(vec![co]);
        }
        shapes.push(vec![self.out_channels, self.base_width, 3, 3]);
        shapes
    }

    fn enc_idx(&self, i: usize) -> usize {
        3 * i
    }

    fn dec_idx(&self, i: usize) -> usize {
        3 * self.levels + 3 * i
    }

    fn out_idx(&self) -> usize {
        6 * self.levels
    }
}

/// All learnable tensors plus the descriptor they belong to.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub arch: Architecture,
    pub tensors: Vec<Tensor>,
}

/// splitmix64; decorrelates the seeds handed to sub-streams.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ModelParams {
    /// He-normal conv weights, unit instance-norm scales, zero shifts;
    /// deterministic in the seed.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut tensors = Vec::new();
        for (i, shape) in arch.tensor_shapes().into_iter().enumerate() {
            let t = match shape.len() {
                4 => he_init(&shape, mix_seed(seed, i as u64))?,
                1 => {
                    // scale/shift pairs are stored scale first
                    let is_scale = tensors
                        .last()
                        .map(|p: &Tensor| p.shape().len() == 4)
                        .unwrap_or(false);
                    if is_scale {
                        Tensor::filled(&shape, 1.0)
                    } else {
                        Tensor::zeros(&shape)
                    }
                }
                _ => unreachable!("tensor_shapes emits only conv and affine shapes"),
            };
            tensors.push(t);
        }
        Ok(Self {
            arch: *arch,
            tensors,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }
}

struct BlockCache {
    conv_in: Tensor,
    norm: InstanceNormCache,
    act_in: Tensor,
}

struct Tape {
    enc: Vec<BlockCache>,
    dropout_mask: Tensor,
    dec: Vec<BlockCache>,
    dec_up_channels: Vec<usize>,
    final_in: Tensor,
    y: Tensor,
}

fn run_block(
    tensors: &[Tensor],
    idx: usize,
    input: &Tensor,
    stride: usize,
    slope: f64,
) -> Result<(Tensor, BlockCache)> {
    let z = conv2d_fwd(input, &tensors[idx], None, stride, 1)?;
    let (normed, cache) =
        instance_norm_fwd(&z, &tensors[idx + 1], &tensors[idx + 2], INSTANCE_NORM_EPS)?;
    let out = leaky_relu_fwd(&normed, slope);
    Ok((
        out,
        BlockCache {
            conv_in: input.clone(),
            norm: cache,
            act_in: normed,
        },
    ))
}

fn run_forward(
    arch: &Architecture,
    tensors: &[Tensor],
    x: &Tensor,
    train: bool,
    dropout_seed: u64,
) -> Result<(Tensor, Tape)> {
    let slope = arch.leaky_slope;
    let mut enc = Vec::with_capacity(arch.levels);
    let mut enc_outs: Vec<Tensor> = Vec::with_capacity(arch.levels);
    let mut cur = x.clone();
    for i in 0..arch.levels {
        let (out, cache) = run_block(tensors, arch.enc_idx(i), &cur, 2, slope)?;
        enc.push(cache);
        enc_outs.push(out.clone());
        cur = out;
    }

    let (bottleneck, dropout_mask) = dropout_fwd(&cur, arch.dropout, train, dropout_seed)?;
    cur = bottleneck;

    let mut dec = Vec::with_capacity(arch.levels);
    let mut dec_up_channels = Vec::with_capacity(arch.levels);
    for i in 0..arch.levels {
        let up = upsample2_fwd(&cur);
        dec_up_channels.push(up.dims3().0);
        let skip: &Tensor = if i + 1 < arch.levels {
            &enc_outs[arch.levels - 2 - i]
        } else {
            x
        };
        let cat = concat_channels(&up, skip)?;
        let (out, cache) = run_block(tensors, arch.dec_idx(i), &cat, 1, slope)?;
        dec.push(cache);
        cur = out;
    }

    let z = conv2d_fwd(&cur, &tensors[arch.out_idx()], None, 1, 1)?;
    let y = sigmoid_fwd(&z);
    Ok((
        y.clone(),
        Tape {
            enc,
            dropout_mask,
            dec,
            dec_up_channels,
            final_in: cur,
            y,
        },
    ))
}

fn add_into(acc: &mut Tensor, add: &Tensor) {
    for (a, &b) in acc.data_mut().iter_mut().zip(add.data().iter()) {
        *a += b;
    }
}

fn block_backward(
    tensors: &[Tensor],
    idx: usize,
    cache: &BlockCache,
    grad_out: &Tensor,
    stride: usize,
    slope: f64,
    grads: &mut [Tensor],
) -> Result<Tensor> {
    let g_act = leaky_relu_bwd(grad_out, &cache.act_in, slope);
    let (gz, ggamma, gbeta) = instance_norm_bwd(&g_act, &cache.norm, &tensors[idx + 1]);
    add_into(&mut grads[idx + 1], &ggamma);
    add_into(&mut grads[idx + 2], &gbeta);
    let conv = conv2d_bwd(&gz, &cache.conv_in, &tensors[idx], false, stride, 1)?;
    add_into(&mut grads[idx], &conv.w);
    Ok(conv.x)
}

/// Accumulates parameter gradients (aligned with `tensors`) for one
/// sample; the gradient w.r.t. the network input is discarded.
fn run_backward(
    arch: &Architecture,
    tensors: &[Tensor],
    tape: &Tape,
    grad_y: &Tensor,
    grads: &mut [Tensor],
) -> Result<()> {
    let slope = arch.leaky_slope;
    let gz = sigmoid_bwd(grad_y, &tape.y);
    let conv = conv2d_bwd(&gz, &tape.final_in, &tensors[arch.out_idx()], false, 1, 1)?;
    add_into(&mut grads[arch.out_idx()], &conv.w);
    let mut g = conv.x;

    // Skip-connection gradients accumulate onto encoder outputs.
    let mut enc_out_grads: Vec<Option<Tensor>> = (0..arch.levels).map(|_| None).collect();
    let stash = |slot: &mut Option<Tensor>, add: Tensor| match slot {
        Some(t) => add_into(t, &add),
        None => *slot = Some(add),
    };

    for i in (0..arch.levels).rev() {
        let g_cat = block_backward(tensors, arch.dec_idx(i), &tape.dec[i], &g, 1, slope, grads)?;
        let (g_up, g_skip) = split_channels(&g_cat, tape.dec_up_channels[i]);
        if i + 1 < arch.levels {
            stash(&mut enc_out_grads[arch.levels - 2 - i], g_skip);
        } // else: gradient w.r.t. the raw input, unused
        g = upsample2_bwd(&g_up);
    }

    let g_bottleneck = dropout_bwd(&g, &tape.dropout_mask);
    stash(&mut enc_out_grads[arch.levels - 1], g_bottleneck);

    for i in (0..arch.levels).rev() {
        let g_out = enc_out_grads[i]
            .take()
            .expect("every encoder output feeds the graph");
        let g_in = block_backward(
            tensors,
            arch.enc_idx(i),
            &tape.enc[i],
            &g_out,
            2,
            slope,
            grads,
        )?;
        if i > 0 {
            stash(&mut enc_out_grads[i - 1], g_in);
        }
    }
    Ok(())
}

fn thermal_to_tensor(frame: &ThermalFrame) -> Tensor {
    let data: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
    Tensor::from_vec(&[1, frame.height(), frame.width()], data).expect("shape matches")
}

fn visible_to_tensor(img: &ImageF32) -> Tensor {
    let (h, w) = (img.height(), img.width());
    let mut data = vec![0.0f64; 3 * h * w];
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                data[(c * h + y) * w + x] = img.get(y, x, c) as f64;
            }
        }
    }
    Tensor::from_vec(&[3, h, w], data).expect("shape matches")
}

fn tensor_to_image(t: &Tensor) -> Result<ImageF32> {
    let (c, h, w) = t.dims3();
    let mut img = ImageF32::new(h, w, c)?;
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                img.set(y, x, ch, t.data()[(ch * h + y) * w + x] as f32);
            }
        }
    }
    Ok(img)
}

fn check_forward_input(arch: &Architecture, img: &ImageF32) -> Result<()> {
    if img.channels() != arch.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "forward expects {} input channel(s), got {}",
            arch.in_channels,
            img.channels()
        )));
    }
    let f = arch.downsample_factor();
    if !img.height().is_multiple_of(f) || !img.width().is_multiple_of(f) {
        return Err(Error::ShapeMismatch(format!(
            "input {}x{} not divisible by the downsampling factor {f}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

/// Evaluation-mode forward pass: preprocessed thermal in, colorized
/// image (sigmoid-bounded, same size) out.
pub fn forward(params: &ModelParams, x: &ImageF32) -> Result<ImageF32> {
    check_forward_input(&params.arch, x)?;
    let xt = Tensor::from_vec(
        &[1, x.height(), x.width()],
        x.data().iter().map(|&v| v as f64).collect(),
    )?;
    let (y, _) = run_forward(&params.arch, &params.tensors, &xt, false, 0)?;
    tensor_to_image(&y)
}

/// Full training recipe: epochs, optimizer settings, crop geometry,
/// architecture width, and augmentation toggles.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub decay_start_epoch: usize,
    pub batch_size: usize,
    pub crop: usize,
    pub width: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub seed: u64,
    pub augment: AugmentOptions,
}

impl TrainConfig {
    /// Full-scale recipe: 1000 epochs at lr 8e-4 decaying after 400,
    /// batches of 32 crops of 160x160.
    pub fn full_scale() -> Self {
        Self {
            epochs: 1000,
            lr: 8e-4,
            decay_start_epoch: 400,
            batch_size: 32,
            crop: 160,
            width: 64,
            leaky_slope: 0.2,
            dropout: 0.5,
            seed: 0,
            augment: AugmentOptions::default(),
        }
    }

    /// Laptop-sized recipe for smoke tests: width 8 on 64x64 crops.
    pub fn desk_scale() -> Self {
        Self {
            epochs: 2000,
            lr: 2e-3,
            decay_start_epoch: 800,
            batch_size: 4,
            crop: 64,
            width: 8,
            leaky_slope: 0.2,
            dropout: 0.0,
            seed: 1,
            augment: AugmentOptions::disabled(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be >= 1".into()));
        }
        let factor = 1usize << 4;
        if self.crop == 0 || !self.crop.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "crop must be a positive multiple of {factor}, got {}",
                self.crop
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            in_channels: 1,
            out_channels: 3,
            base_width: self.width,
            levels: 4,
            leaky_slope: self.leaky_slope,
            dropout: self.dropout,
        }
    }

    /// Learning rate for an epoch: constant, then linear decay to 10%
    /// of the initial rate by the final epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs == 0 || epoch < self.decay_start_epoch {
            return self.lr;
        }
        let last = self.epochs - 1;
        if last <= self.decay_start_epoch {
            return self.lr;
        }
        let t = (epoch - self.decay_start_epoch) as f64 / (last - self.decay_start_epoch) as f64;
        self.lr * (1.0 - 0.9 * t.min(1.0))
    }
}

/// Per-epoch training log entry.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// `epoch,loss,lr` CSV for a training history.
pub fn history_to_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,lr\n");
    for e in history {
        out.push_str(&format!("{},{:.8},{:.8}\n", e.epoch, e.loss, e.lr));
    }
    out
}

/// Mini-batch training loop: sample -> augment -> forward -> loss ->
/// backward -> ADAM. Deterministic in `tcfg.seed`; aborts if the loss
/// leaves the finite range.
pub fn train(
    dataset: &[PairedSample],
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    tcfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training needs at least one pair".into()));
    }
    for s in dataset {
        if !s.thermal.is_normalized() {
            return Err(Error::NotNormalized);
        }
    }
    let arch = tcfg.architecture();
    let mut params = ModelParams::init(&arch, mix_seed(tcfg.seed, 0xA11))?;
    let mut history = Vec::with_capacity(tcfg.epochs);
    if tcfg.epochs == 0 {
        return Ok((params, history));
    }
    let mut state = AdamState::new(&params.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tcfg.seed, 0xB0B));
    let iters_per_epoch = dataset.len().div_ceil(tcfg.batch_size);
    let mut step = 0u64;
    for epoch in 0..tcfg.epochs {
        let lr = tcfg.learning_rate(epoch);
        let mut epoch_loss = 0.0;
        for _ in 0..iters_per_epoch {
            let mut grads: Vec<Tensor> = params
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect();
            let mut batch_loss = 0.0;
            for _ in 0..tcfg.batch_size {
                let idx = rng.random_range(0..dataset.len());
                let aug_seed = rng.random::<u64>();
                let dropout_seed = rng.random::<u64>();
                let sample = augment(&dataset[idx], tcfg.crop, aug_seed, &tcfg.augment)?;
                let x = thermal_to_tensor(&sample.thermal);
                let y = visible_to_tensor(&sample.visible);
                let (out, tape) = run_forward(&arch, &params.tensors, &x, true, dropout_seed)?;
                let lo = loss_total(&out, &y, lcfg)?;
                if !lo.total.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        loss: lo.total,
                    });
                }
                batch_loss += lo.total;
                run_backward(&arch, &params.tensors, &tape, &lo.grad, &mut grads)?;
            }
            let scale = 1.0 / tcfg.batch_size as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            step += 1;
            adam_step(
                &mut params.tensors,
                &grads,
                &mut state,
                lr,
                DEFAULT_BETA1,
                DEFAULT_BETA2,
                DEFAULT_EPS,
                step,
            )?;
            epoch_loss += batch_loss * scale;
        }
        history.push(EpochStats {
            epoch,
            loss: epoch_loss / iters_per_epoch as f64,
            lr,
        });
    }
    Ok((params, history))
}

/// Full inference pipeline: preprocess a raw frame if needed, predict
/// the colorized image, then fuse its low-frequency band with the
/// thermal high-frequency band.
pub fn colorize(
    params: &ModelParams,
    frame: &ThermalFrame,
    fcfg: &FusionConfig,
    spec: &KernelSpec,
) -> Result<ImageF32> {
    let prepared = if frame.is_normalized() {
        frame.clone()
    } else {
        preprocess(frame, &PreprocessOptions::default())?
    };
    let x = prepared.to_image();
    let generated = forward(params, &x)?;
    let g_lf = decompose(&generated, spec)?.lf;
    let x_hf = decompose(&x, spec)?.hf;
    fuse(&g_lf, &x_hf, fcfg)
}
