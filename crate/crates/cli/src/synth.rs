//! Seeded synthetic data: golden two-round activity logs, LLM-style
//! responses with boundary jitter and one hallucinated seconds field, and
//! keypoint series where students sway laterally and hold their hands low.

use std::f64::consts::TAU;

use esar_core::features::{Keypoint, KeypointSeries, Role, COCO_JOINTS};
use esar_core::model::{ActivityClass, ActivityInterval, ActivityLog, LogSource, ModelError};
use esar_core::parser::{render_log, LogFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::split::{Split, SplitEntry};

/// Standing skeleton, image coordinates (y grows downwards).
const BASE_POSE: [(f64, f64); 17] = [
    (320.0, 100.0),
    (330.0, 90.0),
    (310.0, 90.0),
    (340.0, 95.0),
    (300.0, 95.0),
    (360.0, 160.0),
    (280.0, 160.0),
    (375.0, 230.0),
    (265.0, 230.0),
    (360.0, 290.0),
    (280.0, 290.0),
    (345.0, 300.0),
    (295.0, 300.0),
    (345.0, 390.0),
    (295.0, 390.0),
    (345.0, 470.0),
    (295.0, 470.0),
];

const WRISTS: [usize; 2] = [9, 10];
const ELBOWS: [usize; 2] = [7, 8];
const HIPS: [usize; 2] = [11, 12];

pub fn video_rng(seed: u64, video_id: &str) -> ChaCha8Rng {
    // per-video stream, independent of generation order
    let tag = video_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ tag)
}

/// Two rounds of 0→…→5→(6)→7, with filler before, between and after.
pub fn golden_log(rng: &mut impl Rng, video_id: &str) -> Result<ActivityLog, ModelError> {
    let mut intervals = Vec::new();
    let mut t = 0u32;
    let mut push = |class: ActivityClass, len: u32, t: &mut u32| -> Result<(), ModelError> {
        intervals.push(ActivityInterval::from_seconds(*t as f64, (*t + len) as f64, class)?);
        *t += len;
        Ok(())
    };
    push(ActivityClass::Others, rng.random_range(2..6), &mut t)?;
    for round in 0..2 {
        if round == 1 && rng.random_bool(0.5) {
            push(ActivityClass::Others, rng.random_range(1..4), &mut t)?;
        }
        let mut classes: Vec<u8> = (0..=5).collect();
        if rng.random_bool(0.5) {
            classes.push(6);
        }
        classes.push(7);
        for c in classes {
            push(ActivityClass::from_id(c)?, rng.random_range(4..15), &mut t)?;
        }
    }
    push(ActivityClass::Others, rng.random_range(2..5), &mut t)?;
    ActivityLog::new_continuous(video_id, LogSource::GroundTruth, intervals)
}

/// Ground truth with every inner boundary moved by up to ±2 s.
pub fn jittered(rng: &mut impl Rng, gt: &ActivityLog, source: LogSource) -> Result<ActivityLog, ModelError> {
    let iv = gt.intervals();
    let mut bounds: Vec<f64> = iv.iter().map(|i| i.start().seconds()).collect();
    bounds.push(gt.end());
    for k in 1..bounds.len() - 1 {
        let lo = bounds[k - 1] + 1.0;
        let hi = iv[k].stop().seconds() - 1.0;
        let b = (bounds[k] + rng.random_range(-2i32..=2) as f64).clamp(lo, hi.max(lo));
        bounds[k] = b;
    }
    let intervals = iv
        .iter()
        .enumerate()
        .map(|(k, i)| {
            ActivityInterval::from_seconds(bounds[k], bounds[k + 1], i.class())
                .map(|x| x.with_justification(format!("hands and catheter consistent with {}", i.class().name().to_lowercase())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ActivityLog::new_continuous(gt.video_id(), source, intervals)
}

/// Render a prediction as LLM output, replacing the seconds field of one
/// line past the first minute with its `mm:ss` digits (e.g. 83 → 123).
pub fn response_text(pred: &ActivityLog, format: LogFormat, rng: &mut impl Rng) -> String {
    let body = render_log(pred, format);
    let candidates: Vec<usize> = pred
        .intervals()
        .iter()
        .enumerate()
        .filter(|(_, i)| i.start().seconds() >= 60.0)
        .map(|(k, _)| k)
        .collect();
    let target = (!candidates.is_empty()).then(|| candidates[rng.random_range(0..candidates.len())]);
    let mut out = String::from("Here is the activity log for the video.\n\n");
    for (k, line) in body.lines().enumerate() {
        if Some(k) == target {
            let start = pred.intervals()[k].start();
            let s = start.seconds() as u64;
            let hallucinated = (s / 60) * 100 + s % 60;
            let raw = start.to_string();
            let line = match format {
                LogFormat::A => line.replacen(&raw, &hallucinated.to_string(), 1),
                LogFormat::B => line.replacen(&format!("[{raw} "), &format!("[{hallucinated} "), 1),
            };
            out.push_str(&line);
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

pub fn role_of(video_id: &str) -> Option<Role> {
    match video_id.chars().next() {
        Some('N') | Some('n') => Some(Role::Nurse),
        Some('S') | Some('s') => Some(Role::Student),
        _ => None,
    }
}

/// Seeded skeleton motion. Students sway the whole body sideways and keep
/// their hands lower; about 1% of detections are dropped.
pub fn keypoint_series(
    rng: &mut impl Rng,
    video_id: &str,
    session: &str,
    role: Role,
    fps: f64,
    duration_s: f64,
) -> KeypointSeries {
    let n = (duration_s * fps).round() as usize;
    let (sway, hand_drop, noise) = match role {
        Role::Nurse => (2.0, 0.0, 1.0),
        Role::Student => (14.0, 35.0, 1.5),
    };
    let gain = rng.random_range(0.8..1.2);
    let phase = rng.random_range(0.0..TAU);
    let sway_hz = rng.random_range(0.25..0.35);
    let work_hz = rng.random_range(0.45..0.55);
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let t = f as f64 / fps;
        let dx = gain * sway * (TAU * sway_hz * t + phase).sin();
        let mut frame = Vec::with_capacity(COCO_JOINTS.len());
        for (j, &(bx, by)) in BASE_POSE.iter().enumerate() {
            if rng.random_bool(0.01) {
                frame.push(Keypoint { x: 0.0, y: 0.0, conf: 0.05 });
                continue;
            }
            let mut x = bx + dx * if HIPS.contains(&j) { 1.0 } else { 0.7 };
            let mut y = by;
            if WRISTS.contains(&j) || ELBOWS.contains(&j) {
                let amp = if WRISTS.contains(&j) { 1.0 } else { 0.5 };
                x += amp * 20.0 * (TAU * work_hz * t).sin();
                y += amp * (10.0 * (TAU * 0.7 * t + 1.0).sin() + hand_drop);
            }
            let jitter = |rng: &mut dyn rand::RngCore| -> f64 {
                // sum of uniforms ≈ normal
                (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() * noise * 0.87
            };
            x += jitter(rng);
            y += jitter(rng);
            frame.push(Keypoint { x, y, conf: 0.9 });
        }
        frames.push(frame);
    }
    KeypointSeries::new(video_id, fps, role, session, frames).expect("synthetic series is well formed")
}

/// Nurses except the last train; the last nurse and all students test.
pub fn split_entries(nurses: usize, students: usize) -> Vec<SplitEntry> {
    let mut out = Vec::new();
    for p in 1..=nurses {
        for s in ["T1", "T2"] {
            out.push(SplitEntry {
                participant: format!("N{p:02}"),
                session: s.into(),
                split: if p < nurses || nurses == 1 { Split::Train } else { Split::Test },
            });
        }
    }
    for p in 1..=students {
        for s in ["T1", "T2"] {
            out.push(SplitEntry {
                participant: format!("S{p:02}"),
                session: s.into(),
                split: Split::Test,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use esar_core::model::ProcedureModel;
    use esar_core::parser::{parse_log, Continuity, ParseOptions, RepairRule};
    use esar_core::sequence::validate;

    #[test]
    fn golden_logs_validate_clean() {
        let model = ProcedureModel::default();
        for seed in 0..20 {
            let mut rng = video_rng(seed, "N01T1");
            let log = golden_log(&mut rng, "N01T1").unwrap();
            let r = validate(&log, &model);
            assert!(r.ok, "{:?}", r.violations);
        }
    }

    #[test]
    fn responses_parse_back_with_one_repair() {
        let mut rng = video_rng(3, "N02T1");
        let gt = golden_log(&mut rng, "N02T1").unwrap();
        let pred = jittered(&mut rng, &gt, LogSource::LlmPromptA).unwrap();
        for format in [LogFormat::A, LogFormat::B] {
            let text = response_text(&pred, format, &mut rng);
            let rep = parse_log(&text, &ParseOptions::new("N02T1", format, Continuity::Require)).unwrap();
            assert_eq!(rep.log.len(), pred.len());
            let mmss: Vec<_> = rep.repairs.iter().filter(|r| r.rule == RepairRule::MmssOverridesSeconds).collect();
            assert_eq!(mmss.len(), 1, "{:?}", rep.repairs);
            for (a, b) in rep.log.intervals().iter().zip(pred.intervals()) {
                assert_eq!(a.start(), b.start());
                assert_eq!(a.class(), b.class());
            }
        }
    }

    #[test]
    fn students_differ_from_nurses() {
        let mut rng = video_rng(0, "x");
        let nurse = keypoint_series(&mut rng, "N01T1", "T1", Role::Nurse, 10.0, 20.0);
        let student = keypoint_series(&mut rng, "S01T1", "T1", Role::Student, 10.0, 20.0);
        let spread = |s: &KeypointSeries| {
            let hip: Vec<f64> = s.frames.iter().map(|f| f[11].x).filter(|x| *x > 1.0).collect();
            hip.iter().cloned().fold(f64::MIN, f64::max) - hip.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(spread(&student) > 2.0 * spread(&nurse));
        assert_eq!(nurse.frames.len(), 200);
    }
}
