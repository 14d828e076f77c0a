//! Gradient-descent training of the grasp network.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{evaluate_oacc, total_loss, total_loss_backward, GraspNet, LossBreakdown};
use crate::data::{augment, DatasetRecord};
use crate::error::{Error, Result};
use crate::grasp::{rasterize_targets, RectMetricConfig, SelectionConfig};
use crate::nn::Adam;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Plain gradient descent: w <- w - lr * dL/dw.
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub augment: bool,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.001,
            seed: 0,
            augment: true,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput(
                "epochs and batch size must be positive".into(),
            ));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidInput("negative learning rate".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub loss_quality: f64,
    pub loss_angle: f64,
    pub loss_width: f64,
    pub oacc: f64,
}

/// Trains the network in place and returns per-epoch metrics (mean train
/// loss terms plus rectangle-metric accuracy on the test set).
///
/// Deterministic for a fixed seed: shuffling, augmentation draws, and the
/// per-sample gradient reduction all run in a fixed order.
pub fn train(
    net: &mut GraspNet,
    train_set: &[DatasetRecord],
    test_set: &[DatasetRecord],
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    for r in train_set {
        if r.labels.is_empty() {
            return Err(Error::Dataset(format!("{}: training record without labels", r.id)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate, net.param_count());
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let width_scale = net.config.width_scale;
    let input = net.config.input_size;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);

        let mut epoch_loss = LossBreakdown {
            total: 0.0,
            quality: 0.0,
            angle: 0.0,
            width: 0.0,
        };
        let mut n_batches = 0usize;

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            // Per-sample augmentation seeds drawn on the main thread so the
            // stream does not depend on worker scheduling.
            let samples: Vec<(usize, u64)> = batch
                .iter()
                .map(|&i| (i, rng.random::<u64>()))
                .collect();

            let results: Vec<Result<(LossBreakdown, Vec<f64>)>> = samples
                .par_iter()
                .map(|&(i, aug_seed)| {
                    let record = if cfg.augment {
                        augment(&train_set[i], aug_seed)
                    } else {
                        train_set[i].clone()
                    };
                    let target = rasterize_targets(&record.labels, input, input)?;
                    let fwd = net.forward(&record.rgb)?;
                    let loss = total_loss(&fwd.heads, &target, width_scale)?;
                    if !loss.total.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "training loss at epoch {epoch}, batch {batch_idx}"
                        )));
                    }
                    let head_grads = total_loss_backward(&fwd.heads, &target, width_scale);
                    let (_, gparams) = net.backward(&fwd, &head_grads, true);
                    Ok((loss, gparams.expect("parameter gradients requested")))
                })
                .collect();

            // Fixed-order reduction.
            let mut grad = vec![0.0f64; net.param_count()];
            let mut batch_loss = LossBreakdown {
                total: 0.0,
                quality: 0.0,
                angle: 0.0,
                width: 0.0,
            };
            let bsz = samples.len() as f64;
            for r in results {
                let (loss, g) = r?;
                batch_loss.total += loss.total / bsz;
                batch_loss.quality += loss.quality / bsz;
                batch_loss.angle += loss.angle / bsz;
                batch_loss.width += loss.width / bsz;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi / bsz;
                }
            }

            let mut params = net.flatten_params();
            match cfg.optimizer {
                OptimizerKind::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
                OptimizerKind::Adam => adam.step(&mut params, &grad),
            }
            net.set_params(&params);

            epoch_loss.total += batch_loss.total;
            epoch_loss.quality += batch_loss.quality;
            epoch_loss.angle += batch_loss.angle;
            epoch_loss.width += batch_loss.width;
            n_batches += 1;
        }

        let nb = n_batches.max(1) as f64;
        let oacc = if test_set.is_empty() {
            f64::NAN
        } else {
            evaluate_oacc(
                test_set,
                |r| net.infer(&r.rgb),
                &SelectionConfig { smooth_sigma: 0.0 },
                &RectMetricConfig::default(),
            )?
        };
        let row = EpochMetrics {
            epoch,
            loss: epoch_loss.total / nb,
            loss_quality: epoch_loss.quality / nb,
            loss_angle: epoch_loss.angle / nb,
            loss_width: epoch_loss.width / nb,
            oacc,
        };
        log::info!(
            "epoch {}: loss {:.6} (q {:.6} a {:.6} w {:.6}) oacc {:.3}",
            row.epoch,
            row.loss,
            row.loss_quality,
            row.loss_angle,
            row.loss_width,
            row.oacc
        );
        metrics.push(row);
    }
    Ok(metrics)
}
