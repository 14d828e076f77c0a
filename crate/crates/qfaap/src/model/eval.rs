//! Rectangle-metric evaluation of grasp predictions.

use crate::data::DatasetRecord;
use crate::error::{Error, Result};
use crate::grasp::{
    rasterize_targets, rectangle_match, select_best_grasp, GraspMaps, RectMetricConfig,
    SelectionConfig,
};

/// Fraction of records whose top-1 selected grasp passes the rectangle
/// metric. `infer` maps a record to its predicted grasp maps, which lets
/// callers plug in a network, an oracle, or a degenerate stub.
pub fn evaluate_oacc<F>(
    records: &[DatasetRecord],
    infer: F,
    select_cfg: &SelectionConfig,
    metric_cfg: &RectMetricConfig,
) -> Result<f64>
where
    F: Fn(&DatasetRecord) -> Result<GraspMaps> + Sync,
{
    if records.is_empty() {
        return Err(Error::InvalidInput("empty evaluation dataset".into()));
    }
    metric_cfg.validate()?;
    let mut hits = 0usize;
    for record in records {
        let maps = infer(record)?;
        let grasp = select_best_grasp(&maps, None, select_cfg)?;
        if rectangle_match(&grasp, &record.labels, metric_cfg) {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

/// Oracle inference: rasterizes the record's own labels. Useful as a
/// self-match upper bound.
pub fn oracle_infer(record: &DatasetRecord) -> Result<GraspMaps> {
    rasterize_targets(
        &record.labels,
        record.rgb.height(),
        record.rgb.width(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::GraspCandidate;
    use crate::types::Frame;
    use ndarray::Array2;

    fn record_with_label() -> DatasetRecord {
        DatasetRecord {
            id: "r".into(),
            rgb: Frame::zeros(64, 64),
            depth: None,
            labels: vec![GraspCandidate::new(32.0, 30.0, 18.0, 8.0, 0.3, 1.0).unwrap()],
            hand_mask: None,
        }
    }

    #[test]
    fn oracle_model_scores_one() {
        let records = vec![record_with_label(), record_with_label()];
        let oacc = evaluate_oacc(
            &records,
            oracle_infer,
            &SelectionConfig { smooth_sigma: 0.0 },
            &RectMetricConfig::default(),
        )
        .unwrap();
        assert_eq!(oacc, 1.0);
    }

    #[test]
    fn constant_zero_quality_is_reported_not_an_error() {
        let records = vec![record_with_label()];
        let zero = |r: &DatasetRecord| {
            Ok(GraspMaps {
                quality: Array2::zeros((r.rgb.height(), r.rgb.width())),
                angle: Array2::zeros((r.rgb.height(), r.rgb.width())),
                width: Array2::zeros((r.rgb.height(), r.rgb.width())),
            })
        };
        let oacc = evaluate_oacc(
            &records,
            zero,
            &SelectionConfig { smooth_sigma: 0.0 },
            &RectMetricConfig::default(),
        )
        .unwrap();
        // Tie-break pixel (0,0) with width clamp will not match the label.
        assert_eq!(oacc, 0.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let r = evaluate_oacc(
            &[],
            oracle_infer,
            &SelectionConfig { smooth_sigma: 0.0 },
            &RectMetricConfig::default(),
        );
        assert!(r.is_err());
    }
}
