use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, nll, Cnn, Scalar, Tensor, TrainSchedule};
use crate::capture::Frame;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub rng_seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            rng_seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&p| !(p > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be positive and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Counts `(train, validation, test)` for `n` units, each at least 1.
    fn counts(&self, n: usize) -> (usize, usize, usize) {
        let val = ((n as f64 * self.validation).round() as usize).max(1);
        let test = ((n as f64 * self.test).round() as usize).max(1);
        (n.saturating_sub(val + test), val, test)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SplitData {
    pub train: Vec<Frame>,
    pub validation: Vec<Frame>,
    pub test: Vec<Frame>,
}

type Group = Vec<Frame>;

/// Partition frames into train / validation / test.
///
/// Whole transmissions are assigned to one split when a class has at least
/// three of them. Otherwise each transmission is cut into contiguous window
/// blocks, so no window appears in more than one split.
pub fn split_frames(frames: Vec<Frame>, spec: &SplitSpec) -> Result<SplitData> {
    spec.validate()?;
    let mut by_class: BTreeMap<u32, BTreeMap<(String, u32), Group>> = BTreeMap::new();
    for f in frames {
        let class = if spec.stratified { f.label } else { 0 };
        by_class
            .entry(class)
            .or_default()
            .entry((f.source.scenario_id.clone(), f.source.transmission))
            .or_default()
            .push(f);
    }
    let mut out = SplitData::default();
    for (class, groups) in by_class {
        let mut groups: Vec<Group> = groups.into_values().collect();
        for g in &mut groups {
            g.sort_by_key(|f| f.source.window);
        }
        if groups.len() >= 3 {
            let mut rng = seed::rng(seed::derive(spec.rng_seed, class as u64));
            groups.shuffle(&mut rng);
            let (tr, va, _) = spec.counts(groups.len());
            for (i, g) in groups.into_iter().enumerate() {
                let dest = if i < tr {
                    &mut out.train
                } else if i < tr + va {
                    &mut out.validation
                } else {
                    &mut out.test
                };
                dest.extend(g);
            }
        } else {
            for g in groups {
                if g.len() < 3 {
                    return Err(Error::Dataset(format!(
                        "class {class}: a transmission with {} frames cannot be split three ways",
                        g.len()
                    )));
                }
                let (tr, va, _) = spec.counts(g.len());
                let mut it = g.into_iter();
                out.train.extend(it.by_ref().take(tr));
                out.validation.extend(it.by_ref().take(va));
                out.test.extend(it);
            }
        }
    }
    if spec.stratified {
        let classes = |v: &[Frame]| {
            let mut c: Vec<u32> = v.iter().map(|f| f.label).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        let all = classes(&out.train);
        if classes(&out.validation) != all || classes(&out.test) != all {
            return Err(Error::Dataset("a class is missing from a split".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: Cnn<T>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl Evaluation {
    pub fn frames(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

const EVAL_BATCH: usize = 64;

/// Inference-mode accuracy, mean cross-entropy and confusion matrix.
pub fn evaluate<T: Scalar>(model: &Cnn<T>, frames: &[Frame]) -> Result<Evaluation> {
    let c = model.arch.num_classes;
    let mut confusion = vec![vec![0u64; c]; c];
    let mut loss = 0.0;
    for chunk in frames.chunks(EVAL_BATCH) {
        let refs: Vec<&Frame> = chunk.iter().collect();
        let probs = model.predict(&refs)?;
        for (fr, p) in chunk.iter().zip(&probs) {
            let pred = argmax(p);
            confusion[fr.label as usize][pred] += 1;
            loss += nll(p[fr.label as usize]);
        }
    }
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
    Ok(Evaluation {
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        loss: if total > 0 { loss / total as f64 } else { 0.0 },
        confusion,
    })
}

fn argmax(p: &[f64]) -> usize {
    // First maximum wins, so ties resolve deterministically.
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Momentum SGD over shuffled mini-batches with a step learning-rate schedule.
pub fn train<T: Scalar>(mut model: Cnn<T>, data: &SplitData, schedule: &TrainSchedule) -> Result<TrainedModel<T>> {
    schedule.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::Dataset("training and validation splits must be non-empty".into()));
    }
    let mut classes: Vec<u32> = data.train.iter().map(|f| f.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Dataset("training split has a single class".into()));
    }
    let start = Instant::now();
    let mut velocity: Vec<Tensor<T>> = model.zero_grads();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::with_capacity(schedule.max_epochs);
    let mut best: Option<(f64, usize, Cnn<T>)> = None;

    for epoch in 1..=schedule.max_epochs {
        let lr = schedule.learning_rate(epoch);
        let mut rng = seed::rng(seed::derive(schedule.rng_seed, epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, idx) in order.chunks(schedule.batch_size).enumerate() {
            let batch: Vec<&Frame> = idx.iter().map(|&i| &data.train[i]).collect();
            let dseed = seed::derive(seed::derive(schedule.rng_seed ^ 0x5eed, epoch as u64), bi as u64);
            let (loss, grads, cache) = model.loss_and_gradients(&batch, schedule.l2_regularization, true, dseed)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let c = model.arch.num_classes;
            let labels: Vec<usize> = batch.iter().map(|f| f.label as usize).collect();
            loss_sum += cross_entropy(&cache.probs, &labels, c) * batch.len() as f64;
            correct += cache
                .probs
                .chunks_exact(c)
                .zip(&labels)
                .filter(|(p, &y)| argmax(p) == y)
                .count();
            let (mu, step) = (T::of(schedule.momentum), T::of(lr));
            for ((p, g), v) in model.params.iter_mut().zip(&grads).zip(&mut velocity) {
                for ((pv, &gv), vv) in p.data.iter_mut().zip(&g.data).zip(&mut v.data) {
                    *vv = mu * *vv - step * gv;
                    *pv += *vv;
                }
            }
        }
        let n = data.train.len() as f64;
        let val = evaluate(&model, &data.validation)?;
        if !val.loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val.loss });
        }
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        log::info!(
            "epoch {epoch:>3} lr {lr:.5} train loss {:.4} acc {:.3} val loss {:.4} acc {:.3}",
            rec.train_loss,
            rec.train_acc,
            rec.val_loss,
            rec.val_acc
        );
        history.push(rec);
        if best.as_ref().is_none_or(|(acc, _, _)| val.accuracy > *acc) {
            best = Some((val.accuracy, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainedModel {
        model,
        best_epoch,
        history,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}
