//! Seeded inputs shared by the pipeline benches.

use esar_core::features::{Keypoint, KeypointSeries, Role};
use esar_core::model::{ActivityClass, ActivityInterval, ActivityLog, LogSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rounds` passes over classes 0..=7, each step 3–12 s, between filler.
pub fn procedure_log(rng: &mut impl Rng, rounds: usize, source: LogSource) -> ActivityLog {
    let mut t = 0.0;
    let mut iv = Vec::new();
    let mut push = |c: u8, len: f64, t: &mut f64| {
        iv.push(ActivityInterval::from_seconds(*t, *t + len, ActivityClass::from_id(c).unwrap()).unwrap());
        *t += len;
    };
    push(8, 3.0, &mut t);
    for _ in 0..rounds {
        for c in 0..=7 {
            push(c, rng.random_range(3..=12) as f64, &mut t);
        }
    }
    push(8, 3.0, &mut t);
    ActivityLog::new("B01T1", source, iv).unwrap()
}

/// Same classes as `log` with every inner boundary moved by up to ±1 s.
pub fn perturbed(rng: &mut impl Rng, log: &ActivityLog) -> ActivityLog {
    let iv = log.intervals();
    let mut bounds: Vec<f64> = iv.iter().map(|i| i.start().seconds()).collect();
    bounds.push(log.end());
    for k in 1..bounds.len() - 1 {
        bounds[k] += rng.random_range(-1i32..=1) as f64;
    }
    let out = iv
        .iter()
        .enumerate()
        .map(|(k, i)| ActivityInterval::from_seconds(bounds[k], bounds[k + 1], i.class()).unwrap())
        .collect();
    ActivityLog::new(log.video_id(), LogSource::LlmPromptA, out).unwrap()
}

/// Jittered standing skeleton with a slow sideways sway.
pub fn keypoints(rng: &mut impl Rng, joints: usize, fps: f64, seconds: f64) -> KeypointSeries {
    let n = (fps * seconds) as usize;
    let frames = (0..n)
        .map(|f| {
            let sway = 5.0 * (f as f64 / fps).sin();
            (0..joints)
                .map(|j| Keypoint {
                    x: 300.0 + 4.0 * j as f64 + sway + rng.random_range(-1.0..1.0),
                    y: 100.0 + 22.0 * j as f64 + rng.random_range(-1.0..1.0),
                    conf: 0.9,
                })
                .collect()
        })
        .collect();
    KeypointSeries::new("B01T1", fps, Role::Nurse, "T1", frames).unwrap()
}

/// `n` rows of `d` uniform features.
pub fn rows(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}
