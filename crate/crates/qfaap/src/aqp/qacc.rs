//! Patch-region quality metric: per batch, the fraction of patch-region
//! pixels whose predicted quality exceeds the threshold, averaged over
//! batches.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{place_patch, sample_placement, Patch, PatchPlacement};
use crate::data::DatasetRecord;
use crate::error::{Error, Result};
use crate::model::GraspNet;
use crate::pqgd::{pqgd_refine, PqgdConfig};
use crate::types::{Frame, HandMask};

#[derive(Debug, Clone, Copy)]
pub struct QaccOptions {
    pub threshold: f64,
    pub batch_size: usize,
    /// Placement-sampling seed; identical seeds give identical placements.
    pub seed: u64,
    pub scale_range: (f64, f64),
}

impl Default for QaccOptions {
    fn default() -> Self {
        QaccOptions {
            threshold: 0.5,
            batch_size: 8,
            seed: 0,
            scale_range: (0.1, 1.0),
        }
    }
}

/// Generic metric core: `infer` maps a composited frame and its patch-region
/// mask to a quality map.
pub fn qacc_with<F>(
    infer: F,
    records: &[DatasetRecord],
    patch: &Patch,
    opts: &QaccOptions,
) -> Result<f64>
where
    F: Fn(&Frame, &Array2<u8>) -> Result<Array2<f64>> + Sync,
{
    if records.is_empty() {
        return Err(Error::InvalidInput("empty qacc dataset".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidInput("zero batch size".into()));
    }
    // All placements drawn up front in record order so parallel evaluation
    // cannot perturb the stream.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let placements: Vec<PatchPlacement> = records
        .iter()
        .map(|r| {
            sample_placement(
                &mut rng,
                patch.side(),
                r.rgb.height(),
                r.rgb.width(),
                opts.scale_range,
            )
        })
        .collect();

    let per_sample: Vec<Result<(usize, usize)>> = records
        .par_iter()
        .zip(placements.par_iter())
        .map(|(record, placement)| {
            let (composited, region) = place_patch(&record.rgb, patch, placement)?;
            let quality = infer(&composited, &region)?;
            let mut hits = 0usize;
            let mut total = 0usize;
            for ((r, c), m) in region.indexed_iter() {
                if *m == 1 {
                    total += 1;
                    if quality[[r, c]] > opts.threshold {
                        hits += 1;
                    }
                }
            }
            Ok((hits, total))
        })
        .collect();

    let mut counts = Vec::with_capacity(records.len());
    for r in per_sample {
        counts.push(r?);
    }

    let mut batch_ratios = Vec::new();
    for batch in counts.chunks(opts.batch_size) {
        let hits: usize = batch.iter().map(|(h, _)| h).sum();
        let total: usize = batch.iter().map(|(_, t)| t).sum();
        if total == 0 {
            return Err(Error::InvalidInput("batch with no patch pixels".into()));
        }
        batch_ratios.push(hits as f64 / total as f64);
    }
    Ok(batch_ratios.iter().sum::<f64>() / batch_ratios.len() as f64)
}

/// Patch-region quality metric under the given model, optionally refining
/// each composited frame with the masked projected-gradient step first
/// (the patch region plays the role of the mask).
pub fn qacc(
    net: &GraspNet,
    records: &[DatasetRecord],
    patch: &Patch,
    opts: &QaccOptions,
    refine: Option<&PqgdConfig>,
) -> Result<f64> {
    match refine {
        None => qacc_with(
            |frame, _| Ok(net.forward(frame)?.heads.quality.mapv(|v| v.clamp(0.0, 1.0))),
            records,
            patch,
            opts,
        ),
        Some(cfg) => qacc_with(
            |frame, region| {
                let mask = HandMask::new(region.clone())?;
                let refined = pqgd_refine(net, frame, &mask, cfg)?;
                Ok(net
                    .forward(&refined)?
                    .heads
                    .quality
                    .mapv(|v| v.clamp(0.0, 1.0)))
            },
            records,
            patch,
            opts,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aqp::init_patch;
    use crate::types::Frame;

    fn records(n: usize, side: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| DatasetRecord {
                id: format!("q{i}"),
                rgb: Frame::zeros(side, side),
                depth: None,
                labels: vec![],
                hand_mask: None,
            })
            .collect()
    }

    #[test]
    fn all_ones_model_scores_one() {
        let patch = init_patch(16, 1);
        let recs = records(5, 16);
        let q = qacc_with(
            |_, _| Ok(Array2::from_elem((16, 16), 1.0)),
            &recs,
            &patch,
            &QaccOptions::default(),
        )
        .unwrap();
        assert_eq!(q, 1.0);
    }

    #[test]
    fn all_zeros_model_scores_zero() {
        let patch = init_patch(16, 2);
        let recs = records(5, 16);
        let q = qacc_with(
            |_, _| Ok(Array2::zeros((16, 16))),
            &recs,
            &patch,
            &QaccOptions::default(),
        )
        .unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn crafted_batches_match_counting_oracle() {
        // Two samples per batch with quality = 1 exactly on chosen rows of
        // the patch region; count by hand.
        let patch = init_patch(16, 3);
        let recs = records(2, 16);
        let opts = QaccOptions {
            batch_size: 2,
            seed: 9,
            ..Default::default()
        };
        // Reproduce the placements the metric will draw.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let placements: Vec<PatchPlacement> = recs
            .iter()
            .map(|r| sample_placement(&mut rng, 16, r.rgb.height(), r.rgb.width(), (0.1, 1.0)))
            .collect();

        // Model: quality 1 on even rows, 0 on odd rows.
        let infer = |_: &Frame, _: &Array2<u8>| {
            Ok(Array2::from_shape_fn((16, 16), |(r, _)| {
                if r % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            }))
        };
        let got = qacc_with(infer, &recs, &patch, &opts).unwrap();

        let mut hits = 0usize;
        let mut total = 0usize;
        for p in &placements {
            for r in p.top..p.top + p.side {
                for _ in p.left..p.left + p.side {
                    total += 1;
                    if r % 2 == 0 {
                        hits += 1;
                    }
                }
            }
        }
        let expect = hits as f64 / total as f64;
        assert_eq!(got, expect);
    }

    #[test]
    fn placements_reproducible_under_seed() {
        let patch = init_patch(16, 4);
        let recs = records(6, 16);
        let opts = QaccOptions {
            seed: 77,
            ..Default::default()
        };
        let infer = |frame: &Frame, _: &Array2<u8>| {
            // Quality depends on the composited frame so placement changes
            // the metric.
            let mean = frame.data().sum() / frame.data().len() as f64;
            Ok(Array2::from_elem((16, 16), mean))
        };
        let a = qacc_with(infer, &recs, &patch, &opts).unwrap();
        let b = qacc_with(infer, &recs, &patch, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_partition_invariance_with_equal_pixel_counts() {
        // Force equal region sizes by pinning the scale range; then qacc must
        // not depend on how records are grouped into batches.
        let patch = init_patch(16, 5);
        let recs = records(8, 16);
        let infer = |_: &Frame, region: &Array2<u8>| {
            Ok(Array2::from_shape_fn((16, 16), |(r, c)| {
                if region[[r, c]] == 1 && (r + c) % 3 == 0 {
                    1.0
                } else {
                    0.0
                }
            }))
        };
        let mk_opts = |bs: usize| QaccOptions {
            batch_size: bs,
            seed: 13,
            scale_range: (0.5, 0.5),
            ..Default::default()
        };
        let q1 = qacc_with(infer, &recs, &patch, &mk_opts(1)).unwrap();
        let q2 = qacc_with(infer, &recs, &patch, &mk_opts(4)).unwrap();
        let q3 = qacc_with(infer, &recs, &patch, &mk_opts(8)).unwrap();
        assert!((q1 - q2).abs() < 1e-12);
        assert!((q2 - q3).abs() < 1e-12);
    }

    #[test]
    fn qacc_in_unit_interval_on_real_model() {
        use crate::model::{GraspNet, ModelConfig};
        let net = GraspNet::init(ModelConfig::tiny(16), 6);
        let patch = init_patch(16, 7);
        let recs = records(4, 16);
        let q = qacc(&net, &recs, &patch, &QaccOptions::default(), None).unwrap();
        assert!((0.0..=1.0).contains(&q));
        let q_refined = qacc(
            &net,
            &recs,
            &patch,
            &QaccOptions::default(),
            Some(&PqgdConfig::default()),
        )
        .unwrap();
        assert!((0.0..=1.0).contains(&q_refined));
    }
}
