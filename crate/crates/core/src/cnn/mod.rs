//! Convolutional classifier over `2 × W` frames.
//!
//! Layout: `blocks` × [conv 1×4 (16 filters, same padding) → batch norm →
//! leaky ReLU → max pool 1×2 / 2], then a 2×4 conv that folds the two rows,
//! a global average pool over the remaining `W / 2^blocks` columns, a fully
//! connected layer with one output per class, leaky ReLU, dropout (training
//! only) and softmax.

mod checkpoint;
pub mod kernels;
mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capture::Frame;
use crate::error::{Error, Result};
use crate::seed;
use kernels::{ConvShape, KW};

pub use checkpoint::{load_checkpoint, save_checkpoint, write_history_csv, Checkpoint};
pub use train::{evaluate, split_frames, train, EpochRecord, Evaluation, SplitData, SplitSpec, TrainedModel};

/// Floating-point element type of a model.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Default + Debug + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

pub const INPUT_ROWS: usize = 2;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub window_len: usize,
    pub conv_blocks: usize,
    pub filters: usize,
    pub num_classes: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        Self {
            window_len: 8192,
            conv_blocks: 5,
            filters: 16,
            num_classes: 25,
            leaky_slope: 0.01,
            dropout: 0.5,
        }
    }
}

impl CnnArchitecture {
    pub fn new(window_len: usize, num_classes: usize) -> Self {
        Self {
            window_len,
            num_classes,
            ..Self::default()
        }
    }

    /// The small variant used for gradient checks.
    pub fn reduced(num_classes: usize) -> Self {
        Self {
            window_len: 64,
            conv_blocks: 2,
            num_classes,
            ..Self::default()
        }
    }

    /// Width entering the final conv, which is also the average-pool length.
    pub fn pooled_width(&self) -> usize {
        self.window_len >> self.conv_blocks
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.conv_blocks == 0 || self.filters == 0 {
            return bad("need at least one conv block and filter".into());
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        let div = 1usize << self.conv_blocks;
        if self.window_len < div || self.window_len % div != 0 {
            return bad(format!(
                "window length {} is not a multiple of 2^{}",
                self.window_len, self.conv_blocks
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} outside [0, 1)", self.leaky_slope));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        INPUT_ROWS * self.window_len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub initial_learning_rate: f64,
    pub lr_drop_factor: f64,
    pub lr_drop_period_epochs: usize,
    pub l2_regularization: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            initial_learning_rate: 0.07,
            lr_drop_factor: 0.1,
            lr_drop_period_epochs: 19,
            l2_regularization: 1e-4,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 40,
            rng_seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_learning_rate > 0.0
            && self.lr_drop_factor > 0.0
            && self.lr_drop_factor < 1.0
            && self.lr_drop_period_epochs > 0
            && self.l2_regularization >= 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size > 0
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad training schedule {self:?}")))
        }
    }

    /// Learning rate for a 1-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let drops = (epoch.max(1) - 1) / self.lr_drop_period_epochs;
        self.initial_learning_rate * self.lr_drop_factor.powi(drops as i32)
    }
}

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    /// Included in the L2 penalty.
    pub decay: bool,
}

impl<T: Scalar> Tensor<T> {
    fn zeros(name: impl Into<String>, shape: Vec<usize>, decay: bool) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![T::zero(); len],
            decay,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
            decay: self.decay,
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v.f64() * v.f64()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Trainable state of the classifier.
///
/// `params` order: per block `conv{b}.weight`, `bn{b}.gamma`, `bn{b}.beta`;
/// then `final.weight`, `final.bias`, `fc.weight`, `fc.bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<T> {
    pub arch: CnnArchitecture,
    pub params: Vec<Tensor<T>>,
    pub bn: Vec<BnStats>,
}

/// Intermediate values kept by a training forward pass.
pub struct ForwardCache<T> {
    n: usize,
    block_in: Vec<Vec<T>>,
    block_z: Vec<Vec<T>>,
    block_h: Vec<Vec<T>>,
    block_mean: Vec<Vec<f64>>,
    block_var: Vec<Vec<f64>>,
    block_istd: Vec<Vec<f64>>,
    final_in: Vec<T>,
    fc_in: Vec<T>,
    fc_pre: Vec<T>,
    mask: Vec<T>,
    /// `[n][classes]` softmax output.
    pub probs: Vec<f64>,
}

impl<T: Scalar> Cnn<T> {
    /// Fan-in scaled uniform weights, unit gain and zero offset in batch norm.
    pub fn new(arch: CnnArchitecture, init_seed: u64) -> Result<Self> {
        arch.validate()?;
        let f = arch.filters;
        let mut rng = seed::rng(init_seed);
        let mut params = Vec::new();
        let mut uniform = |t: &mut Tensor<T>, limit: f64| {
            for v in &mut t.data {
                *v = T::of(rng.random_range(-limit..limit));
            }
        };
        for b in 0..arch.conv_blocks {
            let cin = if b == 0 { 1 } else { f };
            let mut w = Tensor::zeros(format!("conv{b}.weight"), vec![f, cin, 1, KW], true);
            uniform(&mut w, 1.0 / ((cin * KW) as f64).sqrt());
            let mut gamma = Tensor::zeros(format!("bn{b}.gamma"), vec![f], false);
            gamma.data.fill(T::one());
            params.push(w);
            params.push(gamma);
            params.push(Tensor::zeros(format!("bn{b}.beta"), vec![f], false));
        }
        let mut fw = Tensor::zeros("final.weight", vec![f, f, INPUT_ROWS, KW], true);
        uniform(&mut fw, 1.0 / ((f * INPUT_ROWS * KW) as f64).sqrt());
        params.push(fw);
        params.push(Tensor::zeros("final.bias", vec![f], false));
        let mut fc = Tensor::zeros("fc.weight", vec![arch.num_classes, f], true);
        uniform(&mut fc, 1.0 / (f as f64).sqrt());
        params.push(fc);
        params.push(Tensor::zeros("fc.bias", vec![arch.num_classes], false));
        let bn = (0..arch.conv_blocks)
            .map(|_| BnStats {
                mean: vec![0.0; f],
                var: vec![1.0; f],
            })
            .collect();
        Ok(Self { arch, params, bn })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(Tensor::zeros_like).collect()
    }

    fn final_index(&self) -> usize {
        3 * self.arch.conv_blocks
    }

    /// Validates frame shapes and labels, then packs them into a `[n][1][2][W]` tensor.
    fn pack(&self, frames: &[&Frame]) -> Result<Vec<T>> {
        let len = self.arch.frame_len();
        let mut x = Vec::with_capacity(frames.len() * len);
        for fr in frames {
            if fr.width != self.arch.window_len || fr.data.len() != len {
                return Err(Error::ShapeMismatch {
                    expected: format!("2x{}", self.arch.window_len),
                    got: format!("{}x{}", fr.data.len() / fr.width.max(1), fr.width),
                });
            }
            if fr.label as usize >= self.arch.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: fr.label,
                    classes: self.arch.num_classes,
                });
            }
            x.extend(fr.data.iter().map(|&v| T::of(v)));
        }
        Ok(x)
    }

    /// Batch forward pass.
    ///
    /// In training mode batch norm uses batch statistics (and updates the
    /// running ones when `update_stats`), and dropout draws its mask from
    /// `dropout_seed`.
    pub fn forward_batch(
        &mut self,
        frames: &[&Frame],
        training: bool,
        update_stats: bool,
        dropout_seed: u64,
    ) -> Result<ForwardCache<T>> {
        if frames.is_empty() {
            return Err(Error::Dataset("empty batch".into()));
        }
        let x = self.pack(frames)?;
        let cache = self.forward_tensor(x, frames.len(), training, dropout_seed);
        if training && update_stats {
            let count = (cache.n * INPUT_ROWS) as f64;
            for (b, st) in self.bn.iter_mut().enumerate() {
                let m = count * (self.arch.window_len >> b) as f64;
                let unbiased = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
                for c in 0..st.mean.len() {
                    st.mean[c] = (1.0 - BN_MOMENTUM) * st.mean[c] + BN_MOMENTUM * cache.block_mean[b][c];
                    st.var[c] = (1.0 - BN_MOMENTUM) * st.var[c] + BN_MOMENTUM * cache.block_var[b][c] * unbiased;
                }
            }
        }
        Ok(cache)
    }

    fn forward_tensor(&self, x: Vec<T>, n: usize, training: bool, dropout_seed: u64) -> ForwardCache<T> {
        let a = self.arch.clone();
        let f = a.filters;
        let slope = T::of(a.leaky_slope);
        let mut cache = ForwardCache {
            n,
            block_in: Vec::with_capacity(a.conv_blocks),
            block_z: Vec::with_capacity(a.conv_blocks),
            block_h: Vec::with_capacity(a.conv_blocks),
            block_mean: Vec::new(),
            block_var: Vec::new(),
            block_istd: Vec::new(),
            final_in: Vec::new(),
            fc_in: Vec::new(),
            fc_pre: Vec::new(),
            mask: Vec::new(),
            probs: Vec::new(),
        };
        let mut cur = x;
        let mut w = a.window_len;
        for b in 0..a.conv_blocks {
            let cin = if b == 0 { 1 } else { f };
            let s = ConvShape { n, cin, cout: f, h: INPUT_ROWS, kh: 1, w };
            let z = kernels::conv_forward(&cur, &self.params[3 * b].data, None, s);
            let m = INPUT_ROWS * w;
            let (mean, var) = if training {
                kernels::channel_stats(&z, n, f, m)
            } else {
                (self.bn[b].mean.clone(), self.bn[b].var.clone())
            };
            let istd: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let h = kernels::bn_leaky_forward(
                &z,
                n,
                f,
                m,
                &mean,
                &istd,
                &self.params[3 * b + 1].data,
                &self.params[3 * b + 2].data,
                slope,
            );
            let pooled = kernels::maxpool_forward(&h, w);
            w /= 2;
            if training {
                cache.block_in.push(cur);
                cache.block_z.push(z);
                cache.block_h.push(h);
                cache.block_mean.push(mean);
                cache.block_var.push(var);
                cache.block_istd.push(istd);
            }
            cur = pooled;
        }
        let fi = self.final_index();
        let s = ConvShape { n, cin: f, cout: f, h: INPUT_ROWS, kh: INPUT_ROWS, w };
        let y = kernels::conv_forward(&cur, &self.params[fi].data, Some(&self.params[fi + 1].data), s);
        let inv_w = T::of(1.0 / w as f64);
        let feat: Vec<T> = y
            .chunks_exact(w)
            .map(|row| row.iter().fold(T::zero(), |acc, &v| acc + v) * inv_w)
            .collect();

        let c = a.num_classes;
        let (fw, fb) = (&self.params[fi + 2].data, &self.params[fi + 3].data);
        let mut pre = vec![T::zero(); n * c];
        for b in 0..n {
            let fv = &feat[b * f..(b + 1) * f];
            for k in 0..c {
                pre[b * c + k] = fb[k] + kernels::dot(&fw[k * f..(k + 1) * f], fv);
            }
        }
        let mask: Vec<T> = if training && a.dropout > 0.0 {
            let mut rng = seed::rng(dropout_seed);
            let keep = T::of(1.0 / (1.0 - a.dropout));
            (0..n * c)
                .map(|_| if rng.random::<f64>() < a.dropout { T::zero() } else { keep })
                .collect()
        } else {
            Vec::new()
        };
        let mut probs = vec![0.0; n * c];
        for b in 0..n {
            let logits: Vec<f64> = (0..c)
                .map(|k| {
                    let mut v = kernels::leaky(pre[b * c + k], slope);
                    if !mask.is_empty() {
                        v *= mask[b * c + k];
                    }
                    v.f64()
                })
                .collect();
            softmax_into(&logits, &mut probs[b * c..(b + 1) * c]);
        }
        cache.probs = probs;
        if training {
            cache.final_in = cur;
            cache.fc_in = feat;
            cache.fc_pre = pre;
            cache.mask = mask;
        }
        cache
    }

    /// Class probabilities for one frame in inference mode.
    pub fn forward(&self, frame: &Frame) -> Result<Vec<f64>> {
        Ok(self.predict(&[frame])?.into_iter().next().expect("one row"))
    }

    /// Class probabilities in inference mode, one row per frame.
    pub fn predict(&self, frames: &[&Frame]) -> Result<Vec<Vec<f64>>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.pack(frames)?;
        let cache = self.forward_tensor(x, frames.len(), false, 0);
        Ok(cache
            .probs
            .chunks_exact(self.arch.num_classes)
            .map(<[f64]>::to_vec)
            .collect())
    }

    /// Training-mode loss and gradients for a batch.
    ///
    /// Loss is the mean cross-entropy plus `l2 * Σ w²` over conv and FC
    /// weights.
    pub fn loss_and_gradients(
        &mut self,
        frames: &[&Frame],
        l2: f64,
        update_stats: bool,
        dropout_seed: u64,
    ) -> Result<(f64, Vec<Tensor<T>>, ForwardCache<T>)> {
        let cache = self.forward_batch(frames, true, update_stats, dropout_seed)?;
        let labels: Vec<usize> = frames.iter().map(|f| f.label as usize).collect();
        let ce = cross_entropy(&cache.probs, &labels, self.arch.num_classes);
        let penalty: f64 = self.params.iter().filter(|t| t.decay).map(Tensor::sum_sq).sum();
        let grads = self.backward(&cache, &labels, l2);
        Ok((ce + l2 * penalty, grads, cache))
    }

    fn backward(&self, cache: &ForwardCache<T>, labels: &[usize], l2: f64) -> Vec<Tensor<T>> {
        let a = &self.arch;
        let (n, c, f) = (cache.n, a.num_classes, a.filters);
        let slope = T::of(a.leaky_slope);
        let mut grads = self.zero_grads();
        let fi = self.final_index();

        // d(mean CE)/d(logit) = (p - onehot) / n, then through dropout and leaky.
        let mut dpre = vec![T::zero(); n * c];
        for b in 0..n {
            for k in 0..c {
                let j = b * c + k;
                let target = if labels[b] == k { 1.0 } else { 0.0 };
                let mut g = T::of((cache.probs[j] - target) / n as f64);
                if !cache.mask.is_empty() {
                    g *= cache.mask[j];
                }
                if cache.fc_pre[j] <= T::zero() {
                    g *= slope;
                }
                dpre[j] = g;
            }
        }
        let mut dfeat = vec![T::zero(); n * f];
        {
            let fw = &self.params[fi + 2].data;
            let (gw, rest) = grads[fi + 2..].split_at_mut(1);
            let (gw, gb) = (&mut gw[0].data, &mut rest[0].data);
            for b in 0..n {
                let fv = &cache.fc_in[b * f..(b + 1) * f];
                for k in 0..c {
                    let g = dpre[b * c + k];
                    gb[k] += g;
                    for q in 0..f {
                        gw[k * f + q] += g * fv[q];
                        dfeat[b * f + q] += g * fw[k * f + q];
                    }
                }
            }
        }
        let mut w = a.pooled_width();
        let inv_w = T::of(1.0 / w as f64);
        let dy: Vec<T> = dfeat.iter().flat_map(|&g| std::iter::repeat_n(g * inv_w, w)).collect();
        let s = ConvShape { n, cin: f, cout: f, h: INPUT_ROWS, kh: INPUT_ROWS, w };
        let (mut dcur, dk, db) = kernels::conv_backward(&cache.final_in, &self.params[fi].data, &dy, s, true);
        grads[fi].data = dk;
        grads[fi + 1].data = db;

        for b in (0..a.conv_blocks).rev() {
            let h = &cache.block_h[b];
            w *= 2;
            let dh = kernels::maxpool_backward(h, &dcur);
            let (dz, dgamma, dbeta) = kernels::bn_leaky_backward(
                &cache.block_z[b],
                h,
                &dh,
                n,
                f,
                INPUT_ROWS * w,
                &cache.block_mean[b],
                &cache.block_istd[b],
                &self.params[3 * b + 1].data,
                slope,
            );
            let cin = if b == 0 { 1 } else { f };
            let s = ConvShape { n, cin, cout: f, h: INPUT_ROWS, kh: 1, w };
            let (dx, dk, _) = kernels::conv_backward(&cache.block_in[b], &self.params[3 * b].data, &dz, s, b > 0);
            grads[3 * b].data = dk;
            grads[3 * b + 1].data = dgamma;
            grads[3 * b + 2].data = dbeta;
            dcur = dx;
        }
        if l2 > 0.0 {
            let two_l2 = T::of(2.0 * l2);
            for (g, p) in grads.iter_mut().zip(&self.params) {
                if p.decay {
                    for (gv, &pv) in g.data.iter_mut().zip(&p.data) {
                        *gv += two_l2 * pv;
                    }
                }
            }
        }
        grads
    }

    /// Same architecture and parameters in another element type.
    pub fn cast<U: Scalar>(&self) -> Cnn<U> {
        Cnn {
            arch: self.arch.clone(),
            params: self
                .params
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::of(v.f64())).collect(),
                    decay: t.decay,
                })
                .collect(),
            bn: self.bn.clone(),
        }
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `-ln p`, finite for `p == 0` and NaN for NaN.
pub(crate) fn nll(p: f64) -> f64 {
    if p == 0.0 {
        -f64::MIN_POSITIVE.ln()
    } else {
        -p.ln()
    }
}

/// Mean categorical cross-entropy of `[n][classes]` probabilities.
pub fn cross_entropy(probs: &[f64], labels: &[usize], classes: usize) -> f64 {
    let n = labels.len();
    labels
        .iter()
        .enumerate()
        .map(|(b, &y)| nll(probs[b * classes + y]))
        .sum::<f64>()
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{FrameSource, Representation};

    pub(crate) fn random_frame(w: usize, label: u32, seed_: u64) -> Frame {
        let mut rng = seed::rng(seed_);
        let data = (0..2 * w).map(|_| rng.random_range(-1.5..1.5)).collect();
        Frame {
            data,
            width: w,
            label,
            source: FrameSource {
                scenario_id: "t".into(),
                transmission: 0,
                window: seed_ as u32,
            },
            representation: Representation::Iq,
        }
    }

    #[test]
    fn pooled_width_matches_average_pool() {
        let a = CnnArchitecture::default();
        assert_eq!(a.pooled_width(), 256);
        assert_eq!(CnnArchitecture::reduced(5).pooled_width(), 16);
        assert!(CnnArchitecture::new(8200, 25).validate().is_err());
    }

    #[test]
    fn parameter_count_closed_form() {
        let a = CnnArchitecture::default();
        let m = Cnn::<f32>::new(a, 1).unwrap();
        // conv0 16*4, bn 32, conv1..4 16*16*4 + 32 each, final 16*16*8 + 16, fc 16*25 + 25.
        let expected = (64 + 32) + 4 * (1024 + 32) + (2048 + 16) + (400 + 25);
        assert_eq!(m.parameter_count(), expected);
    }

    #[test]
    fn learning_rate_schedule() {
        let s = TrainSchedule::default();
        assert_eq!(s.learning_rate(1), 0.07);
        assert_eq!(s.learning_rate(19), 0.07);
        assert!((s.learning_rate(20) - 0.007).abs() < 1e-15);
        assert!((s.learning_rate(39) - 0.0007).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one() {
        let m = Cnn::<f64>::new(CnnArchitecture::reduced(7), 3).unwrap();
        for s in 0..5 {
            let p = m.forward(&random_frame(64, 0, s)).unwrap();
            assert_eq!(p.len(), 7);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn shape_and_label_errors() {
        let m = Cnn::<f32>::new(CnnArchitecture::reduced(3), 3).unwrap();
        assert!(matches!(m.forward(&random_frame(32, 0, 1)), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(m.forward(&random_frame(64, 3, 1)), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn uniform_prediction_cross_entropy() {
        let c = 25;
        let probs = vec![1.0 / c as f64; 3 * c];
        assert!((cross_entropy(&probs, &[0, 5, 24], c) - 25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scaled_frame_changes_output() {
        let m = Cnn::<f64>::new(CnnArchitecture::reduced(4), 9).unwrap();
        let fr = random_frame(64, 0, 4);
        let big = Frame {
            data: fr.data.iter().map(|v| v * 10.0).collect(),
            ..fr.clone()
        };
        let a = m.forward(&fr).unwrap();
        let b = m.forward(&big).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-6));
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_gradients() {
        let mut m = Cnn::<f64>::new(CnnArchitecture::reduced(3), 5).unwrap();
        m.arch.dropout = 0.0;
        let frames: Vec<Frame> = (0..3).map(|i| random_frame(64, i as u32, 10 + i)).collect();
        let once: Vec<&Frame> = frames.iter().collect();
        let twice: Vec<&Frame> = frames.iter().chain(frames.iter()).collect();
        let (l1, g1, _) = m.loss_and_gradients(&once, 1e-4, false, 0).unwrap();
        let (l2, g2, _) = m.loss_and_gradients(&twice, 1e-4, false, 0).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{}", a.name);
            }
        }
    }
}
