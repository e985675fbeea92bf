//! Feature extraction checked against direct evaluations of the definitions.

use esar_core::features::{
    channel_features, extract_matrix, feature_names, interpolate_missing, spectral_centroid, Keypoint, KeypointSeries,
    Role, WindowSpec,
};
use proptest::prelude::*;

/// O(N²) DFT magnitude centroid of the mean-removed signal.
fn naive_centroid(signal: &[f64], fps: f64) -> f64 {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in signal.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += (v - mean) * ang.cos();
            im += (v - mean) * ang.sin();
        }
        let mag = re.hypot(im);
        num += mag * k as f64 * fps / n as f64;
        den += mag;
    }
    if den < 1e-9 {
        0.0
    } else {
        num / den
    }
}

#[test]
fn alternating_channel_sits_at_nyquist() {
    let s: Vec<f64> = (0..90).map(|i| (i % 2) as f64).collect();
    let f = channel_features(&s, 30.0);
    assert_eq!(f[0], 0.5);
    assert_eq!(f[4], 1.0);
    assert!((f[9] - 15.0).abs() < 1e-9);
    assert!((naive_centroid(&s, 30.0) - 15.0).abs() < 1e-9);
    assert_eq!(f[8], 89.0);
}

#[test]
fn pure_tone_centroid() {
    // an on-bin sinusoid concentrates all magnitude in one bin
    let fps = 30.0;
    let s: Vec<f64> = (0..90).map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / fps).sin()).collect();
    assert!((spectral_centroid(&s, fps) - 2.0).abs() < 1e-9);
}

#[test]
fn extracted_matrix_shape() {
    let fps = 30.0;
    let frames: Vec<Vec<Keypoint>> = (0..300)
        .map(|i| {
            (0..17)
                .map(|j| Keypoint {
                    x: (i as f64 * 0.1 + j as f64).sin() * 50.0 + 300.0,
                    y: j as f64 * 10.0 + i as f64 * 0.05,
                    conf: 0.9,
                })
                .collect()
        })
        .collect();
    let s = KeypointSeries::new("N03T1", fps, Role::Nurse, "N03", frames).unwrap();
    let (s, _) = interpolate_missing(&s, 0.1).unwrap();
    let m = extract_matrix(&s, WindowSpec::default()).unwrap();
    assert_eq!(m.n_rows(), 8);
    assert_eq!(m.feature_names(), feature_names(17).as_slice());
    assert!(m.rows().iter().flatten().all(|v| v.is_finite()));
    let starts: Vec<f64> = m.provenance().iter().map(|p| p.start_s).collect();
    assert_eq!(starts, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
}

proptest! {
    #[test]
    fn centroid_matches_naive_dft(s in proptest::collection::vec(-10.0f64..10.0, 2..80), fps in 10.0f64..60.0) {
        let fast = spectral_centroid(&s, fps);
        let slow = naive_centroid(&s, fps);
        prop_assert!((fast - slow).abs() < 1e-7 * (1.0 + slow), "{} vs {}", fast, slow);
    }

    #[test]
    fn basic_statistics_match_definitions(s in proptest::collection::vec(-100.0f64..100.0, 2..80)) {
        let f = channel_features(&s, 30.0);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let std = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let mx = s.iter().cloned().fold(f64::MIN, f64::max);
        let mn = s.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!((f[0] - mean).abs() < 1e-9);
        prop_assert!((f[1] - std).abs() < 1e-9);
        prop_assert_eq!(f[4], mx - mn);
        prop_assert!(f[5] >= f[0].abs() - 1e-9);
    }
}
