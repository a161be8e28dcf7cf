#![allow(dead_code)]

use hfttc_core::data::{NormalizationFrame, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random smooth scene: each vehicle drives with its own speed, lane offset
/// and a gentle curvature. Row 0 ends its history at the origin.
pub fn random_scene(n: usize, th: usize, tp: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(n);
    let mut future = Vec::with_capacity(n);
    for i in 0..n {
        let (x0, y0) = if i == 0 {
            (0.0, 0.0)
        } else {
            (rng.gen_range(-30.0..30.0), rng.gen_range(-6.0..6.0))
        };
        let v = rng.gen_range(5.0..25.0);
        let curve = rng.gen_range(-0.02..0.02);
        let at = |k: i64| {
            let t = k as f64 * 0.1;
            [x0 + v * t, y0 + curve * v * t * t]
        };
        history.push((-(th as i64) + 1..=0).map(at).collect());
        future.push((1..=tp as i64).map(at).collect());
    }
    Scene {
        name: format!("rand{seed}"),
        recording: "rand".into(),
        vehicle_ids: (0..n as u64).map(|k| 100 + k).collect(),
        dt: 0.1,
        start_frame: 0,
        history,
        future,
        frame: NormalizationFrame::IDENTITY,
    }
}
