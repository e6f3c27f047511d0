use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semloc::bench::build_block_world;
use semloc::likelihood::{make_geometric_model, semantic_likelihood};
use semloc::sensing::expected_range_scan;
use semloc::{Detection, LikelihoodModel, Pose2D, SemanticObservation, SemanticParams, SensorConfig};

fn observation(rng: &mut ChaCha8Rng, around: Option<&SemanticObservation>) -> SemanticObservation {
    let n = rng.random_range(0..=5);
    let detections = (0..n)
        .map(|_| match around.filter(|o| !o.is_empty() && rng.random_bool(0.7)) {
            Some(o) => {
                let d = &o.detections[rng.random_range(0..o.len())];
                Detection::new(
                    &d.class_label,
                    d.rho + rng.random_range(-1.5..1.5),
                    semloc::world::wrap_angle(d.theta + rng.random_range(-0.15..0.15)),
                )
            }
            None => Detection::new(
                ["rock", "pipe"][rng.random_range(0..2)],
                rng.random_range(0.5..20.0),
                rng.random_range(-PI..PI),
            ),
        })
        .collect();
    SemanticObservation::new(detections)
}

#[test]
fn semantic_likelihood_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = SemanticParams::default();
    for _ in 0..1000 {
        let a = observation(&mut rng, None);
        let b = observation(&mut rng, Some(&a));
        let ab = semantic_likelihood(&a, &b, &params);
        let ba = semantic_likelihood(&b, &a, &params);
        assert!((ab - ba).abs() <= 1e-12, "{ab} vs {ba}");
    }
}

#[test]
fn geometric_likelihood_peaks_at_the_true_cell() {
    let map = build_block_world();
    let cfg = SensorConfig::geometric();
    let model = make_geometric_model(&cfg, 0.3).unwrap();
    for truth in [Pose2D::new(-15.0, -15.0, 0.0), Pose2D::new(0.3, -2.2, 1.1), Pose2D::new(14.0, 3.7, -2.5)] {
        let z = expected_range_scan(&map, &truth, &cfg).unwrap();
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in -10..=10 {
            for j in -10..=10 {
                let pose = Pose2D::new(truth.x + 0.1 * i as f64, truth.y + 0.1 * j as f64, truth.heading);
                let ll = model.log_likelihood(&pose, &z, &map).unwrap();
                if ll > best.0 {
                    best = (ll, i, j);
                }
            }
        }
        assert_eq!((best.1, best.2), (0, 0), "argmax off the true pose {truth:?}");
        assert_eq!(best.0, 0.0);
    }
}
