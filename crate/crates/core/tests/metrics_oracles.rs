//! Metrics checked against independently computed references.

use esar_core::metrics::{
    aggregate_mean, discretize, interval_accuracy, macro_f1, paired_t_test, student_t_cdf, welch_t_test,
    LabelSequence,
};
use esar_core::{ActivityClass, ActivityInterval, ActivityLog, LogSource};
use proptest::prelude::*;

fn table() -> Vec<(String, String, f64, f64)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table_classification.csv");
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string(), r[2].parse().unwrap(), r[3].parse().unwrap())
        })
        .collect()
}

fn column(method: &str, acc: bool) -> Vec<f64> {
    table()
        .into_iter()
        .filter(|r| r.1 == method)
        .map(|r| if acc { r.2 } else { r.3 })
        .collect()
}

/// Two-sided tail mass of the unnormalized t density by composite Simpson
/// on the substitution `t = tan θ`, which maps the infinite tail to a finite range.
fn simpson_two_sided_p(t: f64, df: f64) -> f64 {
    let density = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let integrate = |lo: f64, hi: f64| {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let f = |th: f64| {
            let c = th.cos();
            if c == 0.0 {
                0.0
            } else {
                density(th.tan()) / (c * c)
            }
        };
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        s * h / 3.0
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let total = integrate(0.0, half_pi);
    let tail = integrate(t.abs().atan(), half_pi);
    tail / total
}

#[test]
fn table_means_match_printed_values() {
    let cases = [
        ("prompt_a", true, 78.73),
        ("prompt_a", false, 62.94),
        ("prompt_b", true, 72.65),
        ("prompt_b", false, 59.56),
        ("baseline", true, 53.83),
        ("baseline", false, 46.0),
    ];
    for (m, acc, printed) in cases {
        let mean = aggregate_mean(&column(m, acc)).unwrap();
        assert!((mean - printed).abs() <= 0.02, "{m} acc={acc}: {mean} vs {printed}");
    }
}

#[test]
fn paired_t_matches_reference_values() {
    // reference values from an independent statistics library (scipy.stats.ttest_rel)
    let cases = [
        ("prompt_a", true, 5.871572607932242, 1.074625691808349e-4),
        ("prompt_b", true, 3.8866468314609204, 2.534176882948096e-3),
        ("prompt_a", false, 3.3232684086361006, 6.791820955292723e-3),
        ("prompt_b", false, 2.327751565548269, 4.002738029115496e-2),
    ];
    for (m, acc, t, p) in cases {
        let r = paired_t_test(&column(m, acc), &column("baseline", acc)).unwrap();
        assert_eq!(r.df, 11.0);
        assert!((r.t - t).abs() < 1e-10, "{m}: t {} vs {t}", r.t);
        assert!((r.p_two_sided - p).abs() / p < 1e-8, "{m}: p {} vs {p}", r.p_two_sided);
        let quad = simpson_two_sided_p(r.t, r.df);
        assert!((r.p_two_sided - quad).abs() / quad < 1e-6, "{m}: quadrature {quad}");
    }
}

#[test]
fn paired_p_is_on_the_reported_order() {
    // reported: 5e-5 and 1e-3 (accuracy), 3e-3 and 0.02 (F1)
    let reported = [("prompt_a", true, 5e-5), ("prompt_b", true, 1e-3), ("prompt_a", false, 3e-3), ("prompt_b", false, 0.02)];
    for (m, acc, r) in reported {
        let p = paired_t_test(&column(m, acc), &column("baseline", acc)).unwrap().p_two_sided;
        assert!(p / r < 5.0 && r / p < 5.0, "{m} acc={acc}: {p} vs {r}");
    }
}

#[test]
fn welch_matches_reference() {
    let r = welch_t_test(&column("prompt_a", true), &column("baseline", true)).unwrap();
    assert!((r.t - 5.1061).abs() < 1e-3);
    assert!((r.df - 16.47).abs() < 0.01);
    assert!((r.p_two_sided - 9.666e-5).abs() / 9.666e-5 < 1e-3);
}

#[test]
fn t_cdf_matches_quadrature() {
    for df in [1.0, 3.0, 11.0, 30.0] {
        for t in [0.1, 1.0, 2.5, 6.0] {
            let p = 2.0 * (1.0 - student_t_cdf(t, df));
            let q = simpson_two_sided_p(t, df);
            assert!((p - q).abs() < 1e-9 + 1e-6 * q, "df {df} t {t}: {p} vs {q}");
        }
    }
}

/// Label per step by the class that covers most of the step, measured per millisecond;
/// ties go to the later class.
fn majority_oracle(parts: &[(u32, u32, u8)], horizon_ms: u32, res_ms: u32) -> Vec<u8> {
    let steps = horizon_ms.div_ceil(res_ms);
    (0..steps)
        .map(|t| {
            let mut counts = [0u32; 9];
            let mut last_seen = [0u32; 9];
            // whole steps; time past the horizon is uncovered
            for ms in t * res_ms..(t + 1) * res_ms {
                let c = parts
                    .iter()
                    .find(|(a, b, _)| *a <= ms && ms < *b)
                    .map_or(8, |p| p.2);
                counts[c as usize] += 1;
                last_seen[c as usize] = ms;
            }
            let best = *counts.iter().max().unwrap();
            (0..9u8)
                .filter(|c| counts[*c as usize] == best)
                .max_by_key(|c| last_seen[*c as usize])
                .unwrap()
        })
        .collect()
}

fn log_ms(parts: &[(u32, u32, u8)]) -> ActivityLog {
    let iv = parts
        .iter()
        .map(|(a, b, c)| {
            ActivityInterval::from_seconds(*a as f64 / 1000.0, *b as f64 / 1000.0, ActivityClass::from_id(*c).unwrap())
                .unwrap()
        })
        .collect();
    ActivityLog::new("v", LogSource::GroundTruth, iv).unwrap()
}

#[test]
fn halfway_boundary_goes_to_later_interval() {
    let parts = [(0, 1500, 0), (1500, 3000, 2)];
    let s = discretize(&log_ms(&parts), 1.0, 3.0).unwrap();
    let ids: Vec<u8> = s.labels().iter().map(|c| c.id()).collect();
    assert_eq!(ids, majority_oracle(&parts, 3000, 1000));
    assert_eq!(ids, vec![0, 2, 2]);
}

/// Per-class F1 straight from the definition, by counting.
fn brute_macro_f1(g: &[u8], p: &[u8]) -> f64 {
    let mut f1s = Vec::new();
    for c in 0..9u8 {
        let tp = g.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let fp = g.iter().zip(p).filter(|(a, b)| **a != c && **b == c).count() as f64;
        let fn_ = g.iter().zip(p).filter(|(a, b)| **a == c && **b != c).count() as f64;
        if tp + fp + fn_ == 0.0 {
            continue;
        }
        f1s.push(2.0 * tp / (2.0 * tp + fp + fn_));
    }
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

fn seq(ids: &[u8]) -> LabelSequence {
    let labels = ids.iter().map(|i| ActivityClass::from_id(*i).unwrap()).collect();
    LabelSequence::new(1.0, ids.len() as f64, labels).unwrap()
}

#[test]
fn balanced_gt_single_class_prediction() {
    let g = [0, 0, 1, 1];
    let p = [0, 0, 0, 0];
    let m = macro_f1(&seq(&g), &seq(&p), &ActivityClass::ALL).unwrap();
    assert!((m - brute_macro_f1(&g, &p)).abs() < 1e-15);
    assert!((m - 1.0 / 3.0).abs() < 1e-15);
}

fn arb_log() -> impl Strategy<Value = (Vec<(u32, u32, u8)>, u32)> {
    // contiguous or gapped intervals, each at least one resolution step long
    proptest::collection::vec((1000u32..6000, 0u32..3000, 0u8..9), 1..8).prop_map(|v| {
        let mut t = 0;
        let mut parts = Vec::new();
        for (len, gap, c) in v {
            t += gap;
            parts.push((t, t + len, c));
            t += len;
        }
        (parts, t)
    })
}

proptest! {
    #[test]
    fn discretize_matches_majority_oracle((parts, end) in arb_log(), extra in 0u32..2500) {
        let horizon = end + extra;
        let s = discretize(&log_ms(&parts), 1.0, horizon as f64 / 1000.0).unwrap();
        let ids: Vec<u8> = s.labels().iter().map(|c| c.id()).collect();
        let oracle = majority_oracle(&parts, horizon, 1000);
        prop_assert_eq!(ids.len(), oracle.len());
        // with at most one boundary inside a step, the midpoint class is the majority class
        for (t, (a, b)) in ids.iter().zip(&oracle).enumerate() {
            let lo = t as u32 * 1000;
            let hi = lo + 1000;
            let boundaries = parts.iter().flat_map(|p| [p.0, p.1]).filter(|x| *x > lo && *x < hi).count();
            if boundaries <= 1 {
                prop_assert_eq!(a, b, "step {}", t);
            }
        }
    }

    #[test]
    fn macro_f1_matches_brute_force(
        g in proptest::collection::vec(0u8..9, 20),
        p in proptest::collection::vec(0u8..9, 20),
    ) {
        let m = macro_f1(&seq(&g), &seq(&p), &ActivityClass::ALL).unwrap();
        prop_assert!((m - brute_macro_f1(&g, &p)).abs() < 1e-12);
        let acc = interval_accuracy(&seq(&g), &seq(&p)).unwrap();
        let hits = g.iter().zip(&p).filter(|(a, b)| a == b).count() as f64;
        prop_assert_eq!(acc, hits / 20.0);
    }
}
