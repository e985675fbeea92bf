use std::cell::RefCell;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::keypoints::{joint_names, KeypointSeries};
use super::matrix::{FeatureMatrix, WindowProvenance};
use super::window::{make_windows, Window, WindowSpec};
use super::FeatureError;

/// Per-channel statistics, in output order.
pub const CHANNEL_FEATURES: [&str; 10] = [
    "mean",
    "std",
    "min",
    "max",
    "range",
    "rms",
    "slope",
    "mean_abs_diff",
    "zero_crossings",
    "spectral_centroid",
];

/// `<joint>_<axis>__<feature>`, channel-major.
pub fn feature_names(joint_count: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(joint_count * 2 * CHANNEL_FEATURES.len());
    for joint in joint_names(joint_count) {
        for axis in ["x", "y"] {
            for f in CHANNEL_FEATURES {
                names.push(format!("{joint}_{axis}__{f}"));
            }
        }
    }
    names
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitude-weighted mean frequency (Hz) over bins `0..=N/2` of the
/// mean-removed signal; 0 for a flat signal.
pub fn spectral_centroid(signal: &[f64], fps: f64) -> f64 {
    let n = signal.len();
    if n == 0 {
        return 0.0;
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    let (mut num, mut den) = (0.0, 0.0);
    for (k, c) in buf.iter().take(n / 2 + 1).enumerate() {
        let mag = c.norm();
        num += k as f64 * fps / n as f64 * mag;
        den += mag;
    }
    // magnitudes at rounding level mean there is no spectrum to speak of
    let scale = signal.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if den <= 1e-9 * scale * n as f64 {
        0.0
    } else {
        num / den
    }
}

/// The ten channel statistics of one signal sampled at `fps`.
pub fn channel_features(signal: &[f64], fps: f64) -> [f64; 10] {
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let min = signal.iter().copied().fold(f64::INFINITY, f64::min);
    let max = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (signal.iter().map(|v| v * v).sum::<f64>() / n).sqrt();

    // least squares on t_i = i / fps
    let t_mean = (n - 1.0) / 2.0 / fps;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in signal.iter().enumerate() {
        let dt = i as f64 / fps - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    let mean_abs_diff = signal.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0).max(1.0);

    // signs of the mean-removed signal, ignoring values at rounding level
    let tol = 1e-9 * (max.abs().max(min.abs())).max(1.0);
    let mut crossings = 0usize;
    let mut last_sign = 0i8;
    for v in signal {
        let d = v - mean;
        let s = if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                crossings += 1;
            }
            last_sign = s;
        }
    }

    [
        mean,
        var.sqrt(),
        min,
        max,
        max - min,
        rms,
        slope,
        mean_abs_diff,
        crossings as f64,
        spectral_centroid(signal, fps),
    ]
}

/// 10 statistics × (x, y) × joints, in [`feature_names`] order.
pub fn extract_features(window: &Window<'_>) -> Result<Vec<f64>, FeatureError> {
    if window.frames.len() < 2 {
        return Err(FeatureError::WindowTooShort(window.frames.len()));
    }
    let joints = window.frames[0].len();
    let mut out = Vec::with_capacity(joints * 2 * CHANNEL_FEATURES.len());
    let mut buf = Vec::with_capacity(window.frames.len());
    for j in 0..joints {
        for axis in 0..2 {
            buf.clear();
            buf.extend(window.frames.iter().map(|f| if axis == 0 { f[j].x } else { f[j].y }));
            out.extend_from_slice(&channel_features(&buf, window.fps));
        }
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite {
            row: window.index,
            column: i,
        });
    }
    Ok(out)
}

/// Window a series and extract every window in parallel.
pub fn extract_matrix(series: &KeypointSeries, spec: WindowSpec) -> Result<FeatureMatrix, FeatureError> {
    let windows = make_windows(series, spec)?;
    let rows = windows
        .par_iter()
        .map(extract_features)
        .collect::<Result<Vec<_>, _>>()?;
    let provenance = windows
        .iter()
        .map(|w| WindowProvenance {
            video_id: series.video_id.clone(),
            start_s: w.start_s,
            role: series.role,
            session: series.session.clone(),
        })
        .collect();
    FeatureMatrix::new(feature_names(series.joint_count), rows, spec, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_channel() {
        let f = channel_features(&[7.5; 90], 30.0);
        assert_eq!(f[0], 7.5);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[6], 0.0);
        assert_eq!(f[8], 0.0);
        assert_eq!(f[9], 0.0);
    }

    #[test]
    fn ramp_slope() {
        let fps = 30.0;
        let (a, b) = (3.0, -1.75);
        let s: Vec<f64> = (0..90).map(|i| a + b * i as f64 / fps).collect();
        let f = channel_features(&s, fps);
        assert!((f[6] - b).abs() < 1e-9);
        assert_eq!(f[8], 1.0);
    }

    #[test]
    fn names_are_fixed() {
        let names = feature_names(17);
        assert_eq!(names.len(), 340);
        assert_eq!(names[0], "nose_x__mean");
        assert_eq!(names[19], "nose_y__spectral_centroid");
        assert_eq!(names[339], "right_ankle_y__spectral_centroid");
    }

    fn signal() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, 2..64)
    }

    proptest! {
        #[test]
        fn translation_covariance(s in signal(), c in -1e3f64..1e3) {
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let (f, g) = (channel_features(&s, 30.0), channel_features(&shifted, 30.0));
            prop_assert!((g[0] - f[0] - c).abs() < 1e-9 * (1.0 + c.abs()));
            for i in [1usize, 4, 6] {
                prop_assert!((g[i] - f[i]).abs() < 1e-8 * (1.0 + c.abs()), "feature {}", i);
            }
            prop_assert_eq!(g[8], f[8]);
        }
    }
}
