//! Adam optimization of the patch against a frozen grasp model.

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{init_patch, place_patch, sample_placement, tv_loss_grad, AqpConfig, Patch};
use crate::data::DatasetRecord;
use crate::error::{Error, Result};
use crate::model::{GraspNet, HeadGrads};
use crate::nn::Adam;
use crate::resize::resize_bilinear_backward;

/// One row of the patch-optimization log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AqpEpoch {
    pub epoch: usize,
    pub qacc: f64,
    pub loss_total: f64,
    pub loss_quality: f64,
    pub loss_tv: f64,
    pub loss_diff: f64,
}

struct SampleGrad {
    dpatch: Array3<f64>,
    l_qp: f64,
    l_d: f64,
}

/// Optimizes a fresh uniform-random patch on the training set, reporting the
/// patch-region quality metric on the test set after every epoch. The model
/// is frozen throughout; only patch pixels change, clamped to `[0,1]` after
/// every step.
pub fn optimize_patch(
    net: &GraspNet,
    train_set: &[DatasetRecord],
    test_set: &[DatasetRecord],
    cfg: &AqpConfig,
) -> Result<(Patch, Vec<AqpEpoch>)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidInput("empty patch training set".into()));
    }
    let side = net.input_size();
    let mut patch = init_patch(side, cfg.seed);
    let n_params = patch.pixels.len();
    let mut adam = Adam::new(cfg.learning_rate, n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_opts = super::QaccOptions {
        threshold: cfg.qacc_threshold,
        batch_size: cfg.batch_size,
        seed: cfg.seed ^ 0x51c3,
        scale_range: cfg.scale_range,
    };

    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.lr_decay_epochs.contains(&epoch) {
            adam.lr *= 0.1;
        }
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);

        let mut epoch_l_qp = 0.0;
        let mut epoch_l_tv = 0.0;
        let mut epoch_l_d = 0.0;
        let mut epoch_total = 0.0;
        let mut n_batches = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let placements: Vec<(usize, super::PatchPlacement)> = batch
                .iter()
                .map(|&i| {
                    let record = &train_set[i];
                    (
                        i,
                        sample_placement(
                            &mut rng,
                            side,
                            record.rgb.height(),
                            record.rgb.width(),
                            cfg.scale_range,
                        ),
                    )
                })
                .collect();
            let bsz = placements.len() as f64;

            let results: Vec<Result<SampleGrad>> = placements
                .par_iter()
                .map(|&(i, placement)| {
                    sample_gradient(net, &train_set[i], &patch, &placement, cfg, bsz, side)
                })
                .collect();

            let mut grad_flat = vec![0.0f64; n_params];
            let mut batch_l_qp = 0.0;
            let mut batch_l_d = 0.0;
            for r in results {
                let s = r?;
                batch_l_qp += s.l_qp / bsz;
                batch_l_d += s.l_d / bsz;
                for (acc, g) in grad_flat.iter_mut().zip(s.dpatch.iter()) {
                    *acc += g;
                }
            }
            let (l_tv, tv_grad) = tv_loss_grad(&patch.pixels);
            for (acc, g) in grad_flat.iter_mut().zip(tv_grad.iter()) {
                *acc += cfg.beta * g;
            }
            let batch_total = batch_l_qp + cfg.beta * l_tv + cfg.gamma * batch_l_d;
            if !batch_total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "patch loss at epoch {epoch} (l_qp {batch_l_qp}, l_tv {l_tv}, l_d {batch_l_d})"
                )));
            }

            let mut flat: Vec<f64> = patch.pixels.iter().copied().collect();
            adam.step(&mut flat, &grad_flat);
            for (p, v) in patch.pixels.iter_mut().zip(&flat) {
                *p = v.clamp(0.0, 1.0);
            }

            epoch_l_qp += batch_l_qp;
            epoch_l_tv += l_tv;
            epoch_l_d += batch_l_d;
            epoch_total += batch_total;
            n_batches += 1;
        }

        let nb = n_batches.max(1) as f64;
        let qacc = if test_set.is_empty() {
            f64::NAN
        } else {
            super::qacc(net, test_set, &patch, &eval_opts, None)?
        };
        let row = AqpEpoch {
            epoch,
            qacc,
            loss_total: epoch_total / nb,
            loss_quality: epoch_l_qp / nb,
            loss_tv: epoch_l_tv / nb,
            loss_diff: epoch_l_d / nb,
        };
        log::info!(
            "patch epoch {}: loss {:.6} (qp {:.6} tv {:.6} d {:.6}) qacc {:.3}",
            row.epoch,
            row.loss_total,
            row.loss_quality,
            row.loss_tv,
            row.loss_diff,
            row.qacc
        );
        curve.push(row);
    }

    patch.meta.alpha = cfg.alpha;
    patch.meta.beta = cfg.beta;
    patch.meta.gamma = cfg.gamma;
    patch.meta.epochs = cfg.epochs;
    patch.meta.seed = cfg.seed;
    patch.meta.final_qacc = curve.last().map(|r| r.qacc).unwrap_or(f64::NAN);
    Ok((patch, curve))
}

/// Loss terms and patch gradient for one composited sample. The returned
/// gradient already carries the 1/B batch factor.
fn sample_gradient(
    net: &GraspNet,
    record: &DatasetRecord,
    patch: &Patch,
    placement: &super::PatchPlacement,
    cfg: &AqpConfig,
    batch_size: f64,
    patch_side: usize,
) -> Result<SampleGrad> {
    let (composited, region) = place_patch(&record.rgb, patch, placement)?;
    let fwd = net.forward(&composited)?;
    // Decoded quality (clamped); gradients flow only through the unclamped
    // band.
    let raw = &fwd.heads.quality;
    let q = raw.mapv(|v| v.clamp(0.0, 1.0));
    let (h, w) = q.dim();

    // Region statistics plus extreme positions in one row-major pass.
    let n_region = (placement.side * placement.side) as f64;
    let mut sum = 0.0;
    let mut min_in = f64::INFINITY;
    let mut min_pos = (0usize, 0usize);
    let mut max_out = f64::NEG_INFINITY;
    let mut max_pos = None;
    for r in 0..h {
        for c in 0..w {
            let v = q[[r, c]];
            if region[[r, c]] == 1 {
                sum += v;
                if v < min_in {
                    min_in = v;
                    min_pos = (r, c);
                }
            } else if v > max_out {
                max_out = v;
                max_pos = Some((r, c));
            }
        }
    }
    let mean = sum / n_region;
    let mut var_acc = 0.0;
    for r in placement.top..placement.top + placement.side {
        for c in placement.left..placement.left + placement.side {
            let d = q[[r, c]] - mean;
            var_acc += d * d;
        }
    }
    let var = var_acc / n_region;
    let l_qp = -mean + cfg.alpha * var;

    let (l_d, d_sign) = match max_pos {
        Some(_) => {
            let diff = min_in - max_out;
            ((diff).abs(), crate::nn::sgn(diff))
        }
        None => {
            log::warn!("{}: patch covers whole frame, difference term 0", record.id);
            (0.0, 0.0)
        }
    };

    // d(loss)/dQ, batch factor folded in.
    let mut gq = Array2::<f64>::zeros((h, w));
    let inv_b = 1.0 / batch_size;
    for r in placement.top..placement.top + placement.side {
        for c in placement.left..placement.left + placement.side {
            gq[[r, c]] = inv_b * (-1.0 + 2.0 * cfg.alpha * (q[[r, c]] - mean)) / n_region;
        }
    }
    if let Some(mp) = max_pos {
        gq[[min_pos.0, min_pos.1]] += inv_b * cfg.gamma * d_sign;
        gq[[mp.0, mp.1]] -= inv_b * cfg.gamma * d_sign;
    }
    // clamp chain rule
    for ((r, c), g) in gq.indexed_iter_mut() {
        if !(0.0..=1.0).contains(&raw[[r, c]]) {
            *g = 0.0;
        }
    }

    let grads = HeadGrads {
        quality: gq,
        sin: Array2::zeros((h, w)),
        cos: Array2::zeros((h, w)),
        width_norm: Array2::zeros((h, w)),
    };
    let (gframe, _) = net.backward(&fwd, &grads, false);

    // Chain through the paste (crop to region) and the bilinear rescale.
    let mut gregion = Array3::<f64>::zeros((3, placement.side, placement.side));
    for ch in 0..3 {
        for r in 0..placement.side {
            for c in 0..placement.side {
                gregion[[ch, r, c]] = gframe[[ch, placement.top + r, placement.left + c]];
            }
        }
    }
    let dpatch = resize_bilinear_backward(&gregion, patch_side, patch_side);
    Ok(SampleGrad { dpatch, l_qp, l_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::Rng;
    use crate::types::Frame;
    use ndarray::Array3;

    fn tiny_records(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
                let mut rgb = Frame::zeros(16, 16);
                for v in rgb.data_mut().iter_mut() {
                    *v = rng.random::<f64>();
                }
                DatasetRecord {
                    id: format!("s{i}"),
                    rgb,
                    depth: None,
                    labels: vec![],
                    hand_mask: None,
                }
            })
            .collect()
    }

    fn quick_cfg() -> AqpConfig {
        AqpConfig {
            epochs: 2,
            batch_size: 2,
            learning_rate: 0.05,
            lr_decay_epochs: vec![],
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_lr_leaves_patch_unchanged_and_qacc_flat() {
        let net = GraspNet::init(ModelConfig::tiny(16), 1);
        let records = tiny_records(4);
        let cfg = AqpConfig {
            learning_rate: 0.0,
            ..quick_cfg()
        };
        let reference = init_patch(16, cfg.seed);
        let (patch, curve) = optimize_patch(&net, &records, &records, &cfg).unwrap();
        assert_eq!(patch.pixels, reference.pixels);
        assert_eq!(curve[0].qacc, curve[1].qacc);
    }

    #[test]
    fn frozen_model_weights_unchanged() {
        let net = GraspNet::init(ModelConfig::tiny(16), 2);
        let before = net.flatten_params();
        let records = tiny_records(4);
        optimize_patch(&net, &records, &[], &quick_cfg()).unwrap();
        assert_eq!(net.flatten_params(), before);
    }

    #[test]
    fn dataset_pixels_never_touched() {
        let net = GraspNet::init(ModelConfig::tiny(16), 4);
        let records = tiny_records(3);
        let snapshot: Vec<Array3<f64>> = records.iter().map(|r| r.rgb.data().clone()).collect();
        optimize_patch(&net, &records, &[], &quick_cfg()).unwrap();
        for (r, s) in records.iter().zip(&snapshot) {
            assert_eq!(r.rgb.data(), s);
        }
    }

    #[test]
    fn optimization_is_deterministic() {
        let net = GraspNet::init(ModelConfig::tiny(16), 5);
        let records = tiny_records(4);
        let (p1, c1) = optimize_patch(&net, &records, &records, &quick_cfg()).unwrap();
        let (p2, c2) = optimize_patch(&net, &records, &records, &quick_cfg()).unwrap();
        assert_eq!(p1.pixels, p2.pixels);
        assert_eq!(c1, c2);
    }

    #[test]
    fn patch_stays_in_unit_range() {
        let net = GraspNet::init(ModelConfig::tiny(16), 6);
        let records = tiny_records(4);
        let cfg = AqpConfig {
            learning_rate: 0.5, // aggressive steps to hit the clamp
            ..quick_cfg()
        };
        let (patch, _) = optimize_patch(&net, &records, &[], &cfg).unwrap();
        assert!(patch.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    /// Full-chain gradient check: d(L_aqp)/d(patch) against central finite
    /// differences through placement, forward, and all three loss terms.
    #[test]
    fn patch_gradient_matches_finite_differences() {
        let net = GraspNet::init(ModelConfig::tiny(16), 7);
        let records = tiny_records(1);
        let cfg = AqpConfig {
            batch_size: 1,
            ..quick_cfg()
        };
        let patch = init_patch(16, 11);
        let placement = super::super::PatchPlacement {
            scale: 0.5,
            top: 4,
            left: 5,
            side: 8,
        };

        let loss_of = |pixels: &Array3<f64>| -> f64 {
            let p = Patch {
                pixels: pixels.clone(),
                meta: Default::default(),
            };
            let (composited, region) = place_patch(&records[0].rgb, &p, &placement).unwrap();
            let q = net.infer(&composited).unwrap().quality;
            let mut inside = Vec::new();
            let mut outside = Vec::new();
            for r in 0..16 {
                for c in 0..16 {
                    if region[[r, c]] == 1 {
                        inside.push(q[[r, c]]);
                    } else {
                        outside.push(q[[r, c]]);
                    }
                }
            }
            let l_qp = super::super::quality_patch_loss(&[inside.clone()], cfg.alpha).unwrap();
            let l_d = super::super::difference_loss(&[inside], &[outside]).unwrap();
            let l_tv = super::super::tv_loss(pixels);
            l_qp + cfg.beta * l_tv + cfg.gamma * l_d
        };

        let s = sample_gradient(&net, &records[0], &patch, &placement, &cfg, 1.0, 16).unwrap();
        let (_, tvg) = tv_loss_grad(&patch.pixels);
        let h = 1e-5;
        for &(ch, r, c) in &[(0usize, 5usize, 6usize), (1, 8, 8), (2, 11, 9), (0, 0, 0)] {
            let analytic = s.dpatch[[ch, r, c]] + cfg.beta * tvg[[ch, r, c]];
            let mut pp = patch.pixels.clone();
            pp[[ch, r, c]] += h;
            let lp = loss_of(&pp);
            pp[[ch, r, c]] -= 2.0 * h;
            let lm = loss_of(&pp);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-8);
            assert!(rel < 1e-3, "({ch},{r},{c}): fd={fd} analytic={analytic}");
        }
    }
}
