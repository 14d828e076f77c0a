// Temporary desk-scale pilot: training throughput and O-ACC trend.
use qfaap::data::{gen_synthetic, split_imagewise, HandPlacement, SyntheticSceneSpec};
use qfaap::model::{train, GraspNet, ModelConfig, OptimizerKind, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_scenes: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let optimizer = match args.get(3).map(String::as_str) {
        Some("sgd") => OptimizerKind::Sgd,
        _ => OptimizerKind::Adam,
    };
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.001);
    let augment: bool = args.get(5).map(|s| s == "aug").unwrap_or(true);

    let spec = SyntheticSceneSpec {
        canvas: 224,
        object_count: (3, 5),
        hand: HandPlacement::None,
        max_hand_overlap: 0.4,
        adjacency_px: 20.0,
        seed: 42,
    };
    let t0 = std::time::Instant::now();
    let scenes = gen_synthetic(&spec, n_scenes).unwrap();
    eprintln!("generated {} scenes in {:.1}s", scenes.len(), t0.elapsed().as_secs_f64());

    let records: Vec<_> = scenes.into_iter().map(|(r, _)| r).collect();
    let (train_set, test_set) = split_imagewise(records, 0.9, 0).unwrap();
    eprintln!("train {} / test {}", train_set.len(), test_set.len());

    let mut net = GraspNet::init(ModelConfig::ref_fcn(224).unwrap(), 0);
    eprintln!("params: {}", net.param_count());
    let cfg = TrainConfig {
        epochs,
        batch_size: 8,
        learning_rate: lr,
        seed: 0,
        augment,
        optimizer,
    };
    let t1 = std::time::Instant::now();
    let metrics = train(&mut net, &train_set, &test_set, &cfg).unwrap();
    let dt = t1.elapsed().as_secs_f64();
    eprintln!(
        "trained {} epochs in {:.1}s ({:.1}s/epoch)",
        epochs,
        dt,
        dt / epochs as f64
    );
    for m in metrics.iter().filter(|m| m.epoch % 5 == 0 || m.epoch + 1 == epochs) {
        println!(
            "epoch {}: loss {:.5} (q {:.5} a {:.5} w {:.5}) oacc {:.3}",
            m.epoch, m.loss, m.loss_quality, m.loss_angle, m.loss_width, m.oacc
        );
    }

    // diagnostics on a few test scenes
    use qfaap::grasp::{rectangle_match, rotated_iou, select_best_grasp, RectMetricConfig, SelectionConfig};
    for record in test_set.iter().take(4) {
        let maps = net.infer(&record.rgb).unwrap();
        let g = select_best_grasp(&maps, None, &SelectionConfig { smooth_sigma: 0.0 }).unwrap();
        let qmax = maps.quality.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // closest label by center distance
        let nearest = record
            .labels
            .iter()
            .min_by(|a, b| {
                let da = (a.col - g.col).hypot(a.row - g.row);
                let db = (b.col - g.col).hypot(b.row - g.row);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let iou = rotated_iou(&g, nearest);
        let dth = qfaap::grasp::angle_difference(g.angle, nearest.angle);
        let hit = rectangle_match(&g, &record.labels, &RectMetricConfig::default());
        println!(
            "{}: pred ({:.0},{:.0}) w{:.1} h{:.1} th{:.2} q{:.2} (qmax {:.2}) | nearest ({:.0},{:.0}) w{:.1} h{:.1} th{:.2} | iou {:.3} dth {:.2} hit {}",
            record.id, g.col, g.row, g.width, g.height, g.angle, g.quality, qmax,
            nearest.col, nearest.row, nearest.width, nearest.height, nearest.angle, iou, dth, hit
        );
        // quality at each label center, at corners, background mean
        let at = |r: usize, c: usize| maps.quality[[r, c]];
        let labels_q: Vec<String> = record
            .labels
            .iter()
            .map(|l| format!("{:.2}", at(l.row as usize, l.col as usize)))
            .collect();
        let mean_q = maps.quality.sum() / maps.quality.len() as f64;
        println!(
            "   labels q: [{}]  corners: {:.2} {:.2} {:.2} {:.2}  mean {:.3}",
            labels_q.join(","),
            at(0, 0),
            at(0, 223),
            at(223, 0),
            at(223, 223),
            mean_q
        );
    }
}
