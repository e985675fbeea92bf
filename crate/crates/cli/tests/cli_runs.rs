use std::path::{Path, PathBuf};

use esar_cli::split::Split;
use esar_cli::{check_split, run_args, ConfigError, Context, SplitEntry};
use serde_json::Value;

const TABLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table_classification.csv");

fn esar(args: &[&str]) -> anyhow::Result<i32> {
    let mut argv = vec!["esar"];
    argv.extend_from_slice(args);
    run_args(argv, &Context::default())
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("syn");
    assert_eq!(esar(&["synth", "--out", s(&out), "--seed", "3", "--duration", "20"]).unwrap(), 0);
    out
}

fn entry(p: &str, sess: &str, split: Split) -> SplitEntry {
    SplitEntry { participant: p.into(), session: sess.into(), split }
}

#[test]
fn identical_logs_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path());
    let gt = syn.join("gt/N01T1.json");
    let out = dir.path().join("score");
    assert_eq!(esar(&["score", "--gt", s(&gt), "--pred", s(&gt), "--out", s(&out)]).unwrap(), 0);
    let m = json(&out.join("N01T1.metrics.json"));
    assert_eq!(m["accuracy"], 1.0);
    assert_eq!(m["macro_f1"], 1.0);
}

#[test]
fn aggregate_over_prompt_a_rows_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(TABLE).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || l.contains(",prompt_a,"))
        .map(|(_, l)| l)
        .collect();
    assert_eq!(kept.len(), 13);
    let csv = dir.path().join("a.csv");
    std::fs::write(&csv, kept.join("\n") + "\n").unwrap();
    let out = dir.path().join("agg");
    assert_eq!(esar(&["aggregate", s(&csv), "--out", s(&out)]).unwrap(), 0);
    let summary = json(&out.join("summary.json"));
    let a = &summary["methods"][0];
    assert_eq!(a["method"], "prompt_a");
    assert!((a["accuracy_mean"].as_f64().unwrap() - 78.73).abs() <= 0.02);
    // no baseline rows, so nothing to test against
    assert!(summary["tests"].as_array().unwrap().is_empty());
}

#[test]
fn leaky_split_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("split.csv");
    std::fs::write(&manifest, "participant,session,split\nN03,T1,train\nN03,T2,test\nN01,T1,train\n").unwrap();

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("[paths]\nsplit_manifest = {:?}\n", s(&manifest))).unwrap();
    let err = esar(&["--config", s(&cfg), "aggregate", TABLE, "--out", s(&dir.path().join("x"))]).unwrap_err();
    assert!(err.downcast_ref::<ConfigError>().is_some(), "{err:#}");
    assert!(err.to_string().contains("N03"), "{err}");

    let syn = synth(dir.path());
    let feats = dir.path().join("feat");
    assert_eq!(esar(&["extract", s(&syn.join("keypoints/N01T1.csv")), "--fps", "10", "--out", s(&feats)]).unwrap(), 0);
    let err = esar(&["train", s(&feats.join("features.csv")), "--split", s(&manifest), "--out", s(&dir.path().join("m"))])
        .unwrap_err();
    assert!(err.downcast_ref::<ConfigError>().is_some(), "{err:#}");

    assert_eq!(esar(&["check-split", s(&manifest)]).unwrap(), 1);
    assert_eq!(esar(&["check-split", s(&syn.join("split.csv"))]).unwrap(), 0);
}

#[test]
fn split_checker_names_every_leaking_participant() {
    let entries = [
        entry("N01", "T1", Split::Train),
        entry("N01", "T2", Split::Train),
        entry("N02", "T1", Split::Train),
        entry("N02", "T2", Split::Test),
        entry("S01", "T1", Split::Test),
        entry("S01", "T2", Split::Train),
    ];
    let v = check_split(&entries);
    assert_eq!(v.iter().map(|x| x.participant.as_str()).collect::<Vec<_>>(), ["N02", "S01"]);
    assert_eq!(v[0].train_sessions, ["T1"]);
    assert_eq!(v[0].test_sessions, ["T2"]);
    assert!(check_split(&entries[..2]).is_empty());
}

#[test]
fn strict_validation_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path());
    let bad = dir.path().join("bad.txt");
    // one round only, with cleanup and positioning swapped
    std::fs::write(
        &bad,
        "0, (0:00), 4, (0:04), Catheter preparation, 0\n\
         4, (0:04), 8, (0:08), Wearing gloves, 1\n\
         8, (0:08), 12, (0:12), Suctioning phlegm, 2\n\
         12, (0:12), 16, (0:16), Cleaning the catheter, 3\n\
         16, (0:16), 20, (0:20), Positioning the patient, 6\n\
         20, (0:20), 24, (0:24), Discarding the catheter, 4\n\
         24, (0:24), 28, (0:28), Put on oxygen mask, 5\n\
         28, (0:28), 32, (0:32), Auscultation, 7\n",
    )
    .unwrap();
    let parsed = dir.path().join("parsed");
    assert_eq!(esar(&["parse", s(&bad), "--video-id", "N09T1", "--out", s(&parsed)]).unwrap(), 0);
    let log = parsed.join("N09T1.log.json");
    let out = dir.path().join("v");
    assert_eq!(esar(&["validate", s(&log), "--out", s(&out)]).unwrap(), 0);
    assert_eq!(esar(&["validate", s(&log), "--strict", "--out", s(&out)]).unwrap(), 1);
    let report = json(&out.join("N09T1.validation.json"));
    assert_eq!(report["ok"], false);
    let good = syn.join("gt/N01T1.json");
    assert_eq!(esar(&["validate", s(&good), "--strict", "--out", s(&dir.path().join("g"))]).unwrap(), 0);
}

#[test]
fn reruns_give_identical_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path());
    let kp: Vec<String> = ["N01T1", "N02T1", "S01T1"]
        .iter()
        .map(|v| s(&syn.join(format!("keypoints/{v}.csv"))).to_string())
        .collect();
    let run = |tag: &str| {
        let feats = dir.path().join(format!("f{tag}"));
        let mut args = vec!["extract"];
        args.extend(kp.iter().map(String::as_str));
        args.extend(["--fps", "10", "--window", "4", "--stride", "2", "--out", s(&feats)]);
        assert_eq!(esar(&args).unwrap(), 0);
        let model = dir.path().join(format!("m{tag}"));
        let f = feats.join("features.csv");
        assert_eq!(esar(&["train", s(&f), "--trees", "20", "--seed", "5", "--out", s(&model)]).unwrap(), 0);
        let ex = dir.path().join(format!("e{tag}"));
        let m = model.join("model.json");
        assert_eq!(
            esar(&["explain", "--model", s(&m), "--features", s(&f), "--permutations", "10", "--seed", "1", "--out", s(&ex)])
                .unwrap(),
            0
        );
        [feats, model, ex]
    };
    let first = run("1");
    let second = run("2");
    for (a, b) in first.iter().zip(&second) {
        let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.iter().any(|n| n == "manifest.json"));
        for n in names {
            let (x, y) = (std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap());
            if n == "manifest.json" {
                // input paths name the other run's directory; digests must agree
                let (x, y): (Value, Value) = (serde_json::from_slice(&x).unwrap(), serde_json::from_slice(&y).unwrap());
                assert_eq!(x["outputs"], y["outputs"]);
                let digests = |v: &Value| v["inputs"].as_array().unwrap().iter().map(|i| i["sha256"].clone()).collect::<Vec<_>>();
                assert_eq!(digests(&x), digests(&y));
            } else {
                assert_eq!(x, y, "{} differs", n.to_string_lossy());
            }
        }
    }
}
