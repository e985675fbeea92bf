use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _};
use esar_core::anomaly::{
    fit_forest, shapley_attribution, AttributionVector, ForestParams, IsolationForestModel, DEFAULT_SUBSAMPLE,
    DEFAULT_THRESHOLD, DEFAULT_TREES,
};
use esar_core::features::{
    extract_matrix, interpolate_missing, FeatureMatrix, KeypointSeries, Role, WindowProvenance, WindowSpec,
};
use esar_core::feedback::{
    assemble_student_prompt, attribution_summary, build_alignment_bundle, render_with_fallback, Lexicon, Verdict,
    WindowRange, DEFAULT_TOP_K,
};
use esar_core::llm::{assemble_prompt, ExchangeRecord, FixtureStore, Gateway, Mode, TemplateId};
use esar_core::metrics::{aggregate_mean, paired_t_test, score_logs, welch_t_test, MetricsReport, DEFAULT_RESOLUTION_S};
use esar_core::model::{ActivityClass, ActivityLog, LogSource, ProcedureModel};
use esar_core::parser::{parse_log, LogFormat, ParseOptions};
use esar_core::sequence::validate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::config::{config_error, RunConfig};
use crate::manifest::RunDir;
use crate::split::{self, participant_of, split_video_id, Split};
use crate::{synth, Context};

const DEFAULT_ROUNDS: usize = 2;
const DEFAULT_PERMUTATIONS: usize = 100;
const DEFAULT_BACKGROUND: usize = 32;

/// File name up to the first dot: `videos/N03T1.a.txt` → `N03T1`.
pub fn video_id_of(path: &str) -> String {
    let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
    name.split('.').next().unwrap_or(name).to_string()
}

fn csv_header() -> &'static str {
    "video_id,method,accuracy,f1"
}

pub fn parse(a: ParseArgs, _cfg: &RunConfig) -> anyhow::Result<i32> {
    if a.video_id.is_some() && a.inputs.len() > 1 {
        return Err(config_error("--video-id needs exactly one input"));
    }
    let mut run = RunDir::create(&a.out)?;
    let texts = a
        .inputs
        .iter()
        .map(|p| Ok((p.clone(), run.read(p)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let reports = texts
        .par_iter()
        .map(|(p, text)| {
            let vid = a.video_id.clone().unwrap_or_else(|| video_id_of(&p.display().to_string()));
            parse_log(text, &ParseOptions::new(vid, a.format, a.continuity))
                .with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for r in &reports {
        let vid = r.log.video_id();
        run.write(&format!("{vid}.log.json"), r.log.to_json() + "\n")?;
        run.write(&format!("{vid}.repairs.json"), r.sidecar_json() + "\n")?;
        println!(
            "{vid}: {} intervals, {} repairs, {} dropped lines",
            r.log.len(),
            r.repairs.len(),
            r.dropped_lines.len()
        );
    }
    run.finish(
        "parse",
        json!({"format": a.format, "continuity": a.continuity, "video_id": a.video_id}),
    )?;
    Ok(0)
}

fn read_log(run: &mut RunDir, path: &Path) -> anyhow::Result<ActivityLog> {
    let text = run.read(path)?;
    ActivityLog::from_json(&text).with_context(|| format!("{} is not an activity log", path.display()))
}

pub fn validate_cmd(a: ValidateArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let rounds = a.rounds.or(cfg.metrics.rounds).unwrap_or(DEFAULT_ROUNDS);
    let model = ProcedureModel::with_rounds(rounds).map_err(|e| config_error(e.to_string()))?;
    let mut run = RunDir::create(&a.out)?;
    let logs = a.logs.iter().map(|p| read_log(&mut run, p)).collect::<anyhow::Result<Vec<_>>>()?;
    let reports: Vec<_> = logs.par_iter().map(|l| validate(l, &model)).collect();
    let mut failing = 0;
    for r in &reports {
        run.write_json(&format!("{}.validation.json", r.video_id), r)?;
        if r.ok {
            println!("{}: ok ({} rounds)", r.video_id, r.rounds.len());
        } else {
            failing += 1;
            for v in &r.violations {
                println!("{}: {:?} {:?}: {}", r.video_id, v.severity, v.kind, v.message);
            }
        }
    }
    run.finish("validate", json!({"rounds": rounds, "strict": a.strict}))?;
    Ok(if a.strict && failing > 0 { 1 } else { 0 })
}

fn is_log_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".json")
        && name != "manifest.json"
        && ![".repairs.json", ".validation.json", ".metrics.json"]
            .iter()
            .any(|s| name.ends_with(s))
}

fn list_dir(dir: &Path, keep: impl Fn(&Path) -> bool) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && keep(p))
        .collect();
    out.sort();
    Ok(out)
}

fn logs_at(run: &mut RunDir, path: &Path) -> anyhow::Result<Vec<ActivityLog>> {
    if path.is_dir() {
        list_dir(path, is_log_file)?.iter().map(|p| read_log(run, p)).collect()
    } else {
        Ok(vec![read_log(run, path)?])
    }
}

pub fn score(a: ScoreArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let gt = a
        .gt
        .clone()
        .or_else(|| cfg.paths.gt_dir.clone())
        .ok_or_else(|| config_error("score needs --gt or paths.gt_dir"))?;
    let pred = a
        .pred
        .clone()
        .or_else(|| cfg.paths.pred_dir.clone())
        .ok_or_else(|| config_error("score needs --pred or paths.pred_dir"))?;
    let resolution = a.resolution.or(cfg.metrics.resolution).unwrap_or(DEFAULT_RESOLUTION_S);
    let mut run = RunDir::create(&a.out)?;
    let gts = logs_at(&mut run, &gt)?;
    let preds = logs_at(&mut run, &pred)?;
    let pairs: Vec<(ActivityLog, ActivityLog)> = if gts.len() == 1 && preds.len() == 1 && !gt.is_dir() {
        vec![(gts[0].clone(), preds[0].clone())]
    } else {
        let mut by_id: BTreeMap<String, ActivityLog> =
            preds.into_iter().map(|l| (l.video_id().to_string(), l)).collect();
        let mut pairs = Vec::new();
        for g in gts {
            let p = by_id
                .remove(g.video_id())
                .ok_or_else(|| anyhow::anyhow!("no prediction for video {}", g.video_id()))?;
            pairs.push((g, p));
        }
        for id in by_id.keys() {
            eprintln!("warning: prediction {id} has no ground truth; skipped");
        }
        pairs
    };
    let reports = pairs
        .par_iter()
        .map(|(g, p)| {
            score_logs(g, p, resolution, a.horizon, &ActivityClass::ALL)
                .with_context(|| format!("scoring {}", g.video_id()))
        })
        .collect::<anyhow::Result<Vec<MetricsReport>>>()?;
    let mut csv = format!("{}\n", csv_header());
    for r in &reports {
        run.write_json(&format!("{}.metrics.json", r.video_id), r)?;
        let row = r.csv_row(&a.method);
        println!("{row}");
        csv.push_str(&row);
        csv.push('\n');
    }
    run.write("metrics.csv", csv)?;
    run.finish(
        "score",
        json!({"resolution": resolution, "horizon": a.horizon, "method": a.method}),
    )?;
    Ok(0)
}

#[derive(Debug, Deserialize)]
struct MetricRow {
    video_id: String,
    method: String,
    accuracy: f64,
    f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub videos: usize,
    pub accuracy_mean: f64,
    pub f1_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignificanceTest {
    pub method: String,
    pub baseline: String,
    pub metric: String,
    pub test: String,
    pub n: usize,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub baseline: String,
    pub methods: Vec<MethodSummary>,
    pub tests: Vec<SignificanceTest>,
}

type Columns = BTreeMap<String, (f64, f64)>;

fn read_rows(run: &mut RunDir, paths: &[PathBuf]) -> anyhow::Result<(Vec<String>, BTreeMap<String, Columns>)> {
    let mut order = Vec::new();
    let mut table: BTreeMap<String, Columns> = BTreeMap::new();
    for p in paths {
        let text = run.read(p)?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for (i, rec) in rdr.deserialize::<MetricRow>().enumerate() {
            let line = i + 2;
            let r = rec.with_context(|| format!("{}: line {line}", p.display()))?;
            if !order.contains(&r.method) {
                order.push(r.method.clone());
            }
            let col = table.entry(r.method.clone()).or_default();
            if col.insert(r.video_id.clone(), (r.accuracy, r.f1)).is_some() {
                bail!("{}: line {line}: duplicate row for {} / {}", p.display(), r.video_id, r.method);
            }
        }
    }
    if order.is_empty() {
        bail!("no metric rows in {}", paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    }
    Ok((order, table))
}

/// Per-method means and tests of every method against the baseline.
pub fn summarize(order: &[String], table: &BTreeMap<String, Columns>, baseline: &str, welch: bool) -> anyhow::Result<Summary> {
    let mut methods = Vec::new();
    for m in order {
        let col = &table[m];
        let acc: Vec<f64> = col.values().map(|v| v.0).collect();
        let f1: Vec<f64> = col.values().map(|v| v.1).collect();
        methods.push(MethodSummary {
            method: m.clone(),
            videos: col.len(),
            accuracy_mean: aggregate_mean(&acc)?,
            f1_mean: aggregate_mean(&f1)?,
        });
    }
    let mut tests = Vec::new();
    if let Some(base) = table.get(baseline) {
        for m in order.iter().filter(|m| *m != baseline) {
            let col = &table[m];
            let common: Vec<&String> = col.keys().filter(|v| base.contains_key(*v)).collect();
            for (metric, pick) in [("accuracy", 0usize), ("f1", 1)] {
                let get = |c: &Columns, v: &String| if pick == 0 { c[v].0 } else { c[v].1 };
                let a: Vec<f64> = common.iter().map(|v| get(col, v)).collect();
                let b: Vec<f64> = common.iter().map(|v| get(base, v)).collect();
                let mut push = |test: &str, n: usize, r: Result<esar_core::metrics::TTestResult, esar_core::metrics::MetricsError>| {
                    let (t, df, p, note) = match r {
                        Ok(r) => (Some(r.t), Some(r.df), Some(r.p_two_sided), None),
                        Err(e) => (None, None, None, Some(e.to_string())),
                    };
                    tests.push(SignificanceTest {
                        method: m.clone(),
                        baseline: baseline.to_string(),
                        metric: metric.to_string(),
                        test: test.to_string(),
                        n,
                        t,
                        df,
                        p_two_sided: p,
                        note,
                    });
                };
                push("paired_t", a.len(), paired_t_test(&a, &b));
                if welch {
                    let all_a: Vec<f64> = col.keys().map(|v| get(col, v)).collect();
                    let all_b: Vec<f64> = base.keys().map(|v| get(base, v)).collect();
                    push("welch_t", all_a.len().min(all_b.len()), welch_t_test(&all_a, &all_b));
                }
            }
        }
    }
    Ok(Summary {
        baseline: baseline.to_string(),
        methods,
        tests,
    })
}

fn summary_markdown(order: &[String], table: &BTreeMap<String, Columns>, s: &Summary) -> String {
    let mut md = String::from("# Result summary\n\n| Video |");
    for m in order {
        md.push_str(&format!(" {m} accuracy | {m} F1 |"));
    }
    md.push_str("\n|---|");
    md.push_str(&"---|---|".repeat(order.len()));
    md.push('\n');
    let videos: BTreeSet<&String> = table.values().flat_map(|c| c.keys()).collect();
    let cell = |v: Option<f64>| v.map_or("–".to_string(), |x| format!("{x:.2}"));
    for v in videos {
        md.push_str(&format!("| {v} |"));
        for m in order {
            let c = table[m].get(v);
            md.push_str(&format!(" {} | {} |", cell(c.map(|x| x.0)), cell(c.map(|x| x.1))));
        }
        md.push('\n');
    }
    md.push_str("| **Mean** |");
    for ms in &s.methods {
        md.push_str(&format!(" **{:.2}** | **{:.2}** |", ms.accuracy_mean, ms.f1_mean));
    }
    md.push('\n');
    if !s.tests.is_empty() {
        md.push_str(&format!(
            "\n## Two-sided tests against {}\n\n| Method | Metric | Test | n | t | df | p |\n|---|---|---|---|---|---|---|\n",
            s.baseline
        ));
        for t in &s.tests {
            let num = |v: Option<f64>, prec: usize| v.map_or("–".to_string(), |x| format!("{x:.prec$}"));
            let p = t.p_two_sided.map_or_else(|| t.note.clone().unwrap_or_default(), |p| format!("{p:.3e}"));
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {p} |\n",
                t.method,
                t.metric,
                t.test,
                t.n,
                num(t.t, 4),
                num(t.df, 2)
            ));
        }
    }
    md
}

pub fn aggregate(a: AggregateArgs, _cfg: &RunConfig) -> anyhow::Result<i32> {
    let mut run = RunDir::create(&a.out)?;
    let (order, table) = read_rows(&mut run, &a.rows)?;
    let s = summarize(&order, &table, &a.baseline, a.welch)?;
    let md = summary_markdown(&order, &table, &s);
    run.write_json("summary.json", &s)?;
    run.write("summary.md", &md)?;
    print!("{md}");
    run.finish("aggregate", json!({"baseline": a.baseline, "welch": a.welch}))?;
    Ok(0)
}

fn window_spec(length: Option<f64>, stride: Option<f64>, cfg: &RunConfig) -> anyhow::Result<WindowSpec> {
    let d = WindowSpec::default();
    WindowSpec::new(
        length.or(cfg.window.length_s).unwrap_or(d.length_s),
        stride.or(cfg.window.stride_s).unwrap_or(d.stride_s),
    )
    .map_err(|e| config_error(e.to_string()))
}

pub fn extract(a: ExtractArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let spec = window_spec(a.window, a.stride, cfg)?;
    let inputs = if !a.keypoints.is_empty() {
        a.keypoints.clone()
    } else if let Some(dir) = &cfg.paths.keypoint_dir {
        list_dir(dir, |p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))?
    } else {
        return Err(config_error("extract needs keypoint files or paths.keypoint_dir"));
    };
    if inputs.is_empty() {
        bail!("no keypoint files found");
    }
    let mut run = RunDir::create(&a.out)?;
    let texts = inputs
        .iter()
        .map(|p| Ok((p.clone(), run.read(p)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let results = texts
        .par_iter()
        .map(|(p, text)| {
            let vid = video_id_of(&p.display().to_string());
            let role = match a.role {
                Some(r) => r,
                None => synth::role_of(&vid)
                    .ok_or_else(|| config_error(format!("cannot infer role of {vid}; pass --role")))?,
            };
            let session = a.session.clone().unwrap_or_else(|| split_video_id(&vid).1);
            let series = if p.extension().and_then(|e| e.to_str()) == Some("json") {
                KeypointSeries::from_json_str(text, &vid, a.fps, role, &session)
            } else {
                KeypointSeries::from_csv_reader(text.as_bytes(), &vid, a.fps, role, &session, a.joints)
            }
            .with_context(|| format!("reading keypoints {}", p.display()))?;
            let (series, report) = interpolate_missing(&series, a.missing_threshold)
                .with_context(|| format!("interpolating {}", p.display()))?;
            let m = extract_matrix(&series, spec).with_context(|| format!("extracting {}", p.display()))?;
            Ok((vid, report, m))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut interpolation = BTreeMap::new();
    let mut parts = Vec::new();
    for (vid, report, m) in results {
        println!("{vid}: {} windows", m.n_rows());
        interpolation.insert(vid, report);
        parts.push(m);
    }
    let matrix = FeatureMatrix::concat(&parts)?;
    matrix.write(&run.root().join("features.csv"))?;
    run.record_output("features.csv")?;
    run.record_output("features.json")?;
    run.write_json("interpolation.json", &interpolation)?;
    run.finish(
        "extract",
        json!({"fps": a.fps, "role": a.role, "session": a.session, "joints": a.joints, "window": spec, "missing_threshold": a.missing_threshold}),
    )?;
    Ok(0)
}

fn read_matrix(run: &mut RunDir, path: &Path) -> anyhow::Result<FeatureMatrix> {
    for p in [path.to_path_buf(), FeatureMatrix::sidecar_path(path)] {
        let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        run.record_input(&p, &bytes);
    }
    FeatureMatrix::read(path).with_context(|| format!("reading feature matrix {}", path.display()))
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    rows: usize,
    videos: Vec<String>,
    participants: Vec<String>,
    effective_subsample: usize,
    mean_training_score: f64,
    max_training_score: f64,
}

pub fn train(a: TrainArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let split_path = a.split.clone().or_else(|| cfg.paths.split_manifest.clone());
    let mut run = RunDir::create(&a.out)?;
    let train_participants: Option<BTreeSet<String>> = match &split_path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            run.record_input(p, &bytes);
            let entries = split::load_checked(p)?;
            Some(
                entries
                    .into_iter()
                    .filter(|e| e.split == Split::Train)
                    .map(|e| e.participant)
                    .collect(),
            )
        }
        None => None,
    };
    let parts = a.features.iter().map(|p| read_matrix(&mut run, p)).collect::<anyhow::Result<Vec<_>>>()?;
    let all = FeatureMatrix::concat(&parts)?;
    let x = all.filter(|w| {
        w.role == Role::Nurse
            && train_participants
                .as_ref()
                .is_none_or(|t| t.contains(&participant_of(&w.video_id)))
    });
    if x.n_rows() == 0 {
        return Err(config_error("no nurse windows in the training split"));
    }
    let params = ForestParams {
        n_trees: a.trees.or(cfg.forest.trees).unwrap_or(DEFAULT_TREES),
        subsample_size: a.psi.or(cfg.forest.psi).unwrap_or(DEFAULT_SUBSAMPLE),
        seed: a.seed.or(cfg.forest.seed).unwrap_or(0),
    };
    let model = fit_forest(&x, params).context("fitting isolation forest")?;
    let scores = model.score_rows(x.rows())?;
    let videos: BTreeSet<String> = x.provenance().iter().map(|w| w.video_id.clone()).collect();
    let participants: BTreeSet<String> = videos.iter().map(|v| participant_of(v)).collect();
    let summary = TrainSummary {
        rows: x.n_rows(),
        videos: videos.into_iter().collect(),
        participants: participants.into_iter().collect(),
        effective_subsample: model.effective_subsample,
        mean_training_score: scores.iter().sum::<f64>() / scores.len() as f64,
        max_training_score: scores.iter().cloned().fold(f64::MIN, f64::max),
    };
    run.write("model.json", model.to_json() + "\n")?;
    run.write_json("train_summary.json", &summary)?;
    println!(
        "trained {} trees on {} windows from {} participants",
        model.n_trees,
        summary.rows,
        summary.participants.len()
    );
    run.finish("train", json!({"forest": params, "split": split_path}))?;
    Ok(0)
}

/// What `explain` writes and `feedback` reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Explanation {
    pub row: usize,
    pub provenance: WindowProvenance,
    pub window_length_s: f64,
    pub attribution: AttributionVector,
}

fn evenly_spaced(rows: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    if rows.len() <= k {
        return rows;
    }
    (0..k).map(|i| rows[i * rows.len() / k].clone()).collect()
}

pub fn explain(a: ExplainArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let model_path = a
        .model
        .clone()
        .or_else(|| cfg.paths.model.clone())
        .ok_or_else(|| config_error("explain needs --model or paths.model"))?;
    let mut run = RunDir::create(&a.out)?;
    let model_text = run.read(&model_path)?;
    let model = IsolationForestModel::from_json(&model_text).with_context(|| format!("loading {}", model_path.display()))?;
    let x = read_matrix(&mut run, &a.features)?;
    if x.feature_names() != model.feature_names.as_slice() {
        bail!("{} features do not match the model's", a.features.display());
    }
    let scores = model.score_rows(x.rows())?;
    let row = match a.row {
        Some(r) if r < x.n_rows() => r,
        Some(r) => bail!("row {r} out of range ({} windows)", x.n_rows()),
        None => (0..scores.len())
            .max_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(j.cmp(&i)))
            .ok_or_else(|| anyhow::anyhow!("feature matrix is empty"))?,
    };
    let bg_matrix = match &a.background {
        Some(p) => read_matrix(&mut run, p)?,
        None => x.clone(),
    };
    let nurses = bg_matrix.filter(|w| w.role == Role::Nurse);
    let bg_rows = if nurses.n_rows() > 0 { nurses.rows().to_vec() } else { bg_matrix.rows().to_vec() };
    let size = a.background_size.or(cfg.shapley.background_size).unwrap_or(DEFAULT_BACKGROUND).max(1);
    let background = evenly_spaced(bg_rows, size);
    let n_perm = a.permutations.or(cfg.shapley.permutations).unwrap_or(DEFAULT_PERMUTATIONS);
    let seed = a.seed.or(cfg.shapley.seed).unwrap_or(0);
    let attribution = shapley_attribution(&model, &x.rows()[row], &background, n_perm, seed)?;
    let ex = Explanation {
        row,
        provenance: x.provenance()[row].clone(),
        window_length_s: x.window_spec().length_s,
        attribution,
    };
    run.write_json("explanation.json", &ex)?;
    run.write("attributions.csv", ex.attribution.to_csv())?;
    println!(
        "{} @ {:.1} s: score {:.4}, base {:.4}, efficiency gap {:.2e}",
        ex.provenance.video_id,
        ex.provenance.start_s,
        ex.attribution.score,
        ex.attribution.base_value,
        ex.attribution.efficiency_gap()
    );
    run.finish(
        "explain",
        json!({"row": row, "background_rows": background.len(), "permutations": n_perm, "seed": seed}),
    )?;
    Ok(0)
}

fn gateway(cfg: &RunConfig, flags: &LlmFlags, ctx: &Context) -> Gateway {
    let g = Gateway::new(cfg.endpoint(flags), Arc::clone(&ctx.transport));
    match &ctx.credential {
        Some(f) => {
            let f = Arc::clone(f);
            g.with_credential_lookup(move |name| f(name))
        }
        None => g,
    }
}

pub fn feedback(a: FeedbackArgs, cfg: &RunConfig, ctx: &Context) -> anyhow::Result<i32> {
    let mut run = RunDir::create(&a.out)?;
    let text = run.read(&a.explanation)?;
    let ex: Explanation = serde_json::from_str(&text).with_context(|| format!("reading {}", a.explanation.display()))?;
    let threshold = a.threshold.or(cfg.feedback.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let top_k = a.top_k.or(cfg.feedback.top_k).unwrap_or(DEFAULT_TOP_K);
    if top_k == 0 {
        return Err(config_error("--top-k must be at least 1"));
    }
    let lexicon = Lexicon::builtin();
    lexicon.check_covers(&ex.attribution.feature_names)?;
    let verdict = Verdict::from_score(ex.attribution.score, threshold);
    let summary = attribution_summary(&verdict, &ex.attribution, top_k);
    let plot_ref = "attributions.csv";
    let prompt = assemble_student_prompt(&summary, Some(plot_ref));
    run.write("student_prompt.txt", &prompt.text)?;
    let response = match (&a.llm_response, a.llm) {
        (Some(p), _) => Some(run.read(p)?),
        (None, true) => {
            let g = gateway(cfg, &a.endpoint, ctx);
            let r = g.send(TemplateId::StudentSupport.as_str(), &prompt.text, Some(plot_ref))?;
            run.write("llm_response.txt", &r)?;
            Some(r)
        }
        (None, false) => None,
    };
    let (report, render_warnings) = render_with_fallback(response.as_deref(), verdict, &ex.attribution, top_k, lexicon)?;
    let range = WindowRange {
        video_id: ex.provenance.video_id.clone(),
        start_s: ex.provenance.start_s,
        stop_s: ex.provenance.start_s + ex.window_length_s,
    };
    let bundle = build_alignment_bundle(report, &ex.attribution, range, Some(plot_ref.to_string()), lexicon)?;
    bundle.write_dir(run.root())?;
    for f in ["report.md", "report.json", "attributions.csv", "provenance.json", "mapping.json"] {
        run.record_output(f)?;
    }
    let warnings: Vec<String> = prompt
        .warnings
        .iter()
        .map(|w| w.0.clone())
        .chain(render_warnings)
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    run.write_json("warnings.json", &warnings)?;
    print!("{}", bundle.report.to_markdown());
    run.finish(
        "feedback",
        json!({"threshold": threshold, "top_k": top_k, "llm": a.llm || a.llm_response.is_some()}),
    )?;
    Ok(0)
}

fn recognition_template(prompt: &str) -> anyhow::Result<(TemplateId, LogFormat)> {
    let id: TemplateId = prompt.parse()?;
    match id {
        TemplateId::A => Ok((id, LogFormat::A)),
        TemplateId::B => Ok((id, LogFormat::B)),
        TemplateId::StudentSupport => Err(config_error("recognize needs prompt a or b")),
    }
}

pub fn recognize(a: RecognizeArgs, cfg: &RunConfig, ctx: &Context) -> anyhow::Result<i32> {
    let (id, format) = recognition_template(&a.prompt)?;
    let rounds = a.rounds.or(cfg.metrics.rounds).unwrap_or(DEFAULT_ROUNDS);
    let model = ProcedureModel::with_rounds(rounds).map_err(|e| config_error(e.to_string()))?;
    let video_id = a.video_id.clone().unwrap_or_else(|| video_id_of(&a.video));
    let mut run = RunDir::create(&a.out)?;
    let prompt = assemble_prompt(id.as_str(), Some(&a.video), &BTreeMap::new())?;
    let g = gateway(cfg, &a.endpoint, ctx);
    let response = g
        .send(id.as_str(), &prompt, Some(&a.video))
        .with_context(|| format!("requesting recognition of {}", a.video))?;
    if g.config().mode == Mode::Replay {
        if let Some(dir) = &g.config().fixtures_dir {
            let fixture = FixtureStore::new(dir).path_for(&g.request(&prompt, Some(&a.video)).digest());
            let bytes = std::fs::read(&fixture).with_context(|| format!("reading {}", fixture.display()))?;
            run.record_input(&fixture, &bytes);
        }
    }
    run.write("prompt.txt", &prompt)?;
    run.write("response.txt", &response)?;
    let parsed = parse_log(&response, &ParseOptions::new(&video_id, format, a.continuity))
        .with_context(|| format!("parsing the response for {video_id}"))?;
    run.write("log.json", parsed.log.to_json() + "\n")?;
    run.write("repairs.json", parsed.sidecar_json() + "\n")?;
    let report = validate(&parsed.log, &model);
    run.write_json("validation.json", &report)?;
    println!(
        "{video_id}: {} intervals, {} repairs, {} violations",
        parsed.log.len(),
        parsed.repairs.len(),
        report.violations.len()
    );
    let resolution = a.resolution.or(cfg.metrics.resolution).unwrap_or(DEFAULT_RESOLUTION_S);
    if let Some(gt_path) = &a.gt {
        let gt = read_log(&mut run, gt_path)?;
        let m = score_logs(&gt, &parsed.log, resolution, None, &ActivityClass::ALL)?;
        let method = match id {
            TemplateId::A => "prompt_a",
            _ => "prompt_b",
        };
        run.write_json("metrics.json", &m)?;
        let row = m.csv_row(method);
        println!("{row}");
        run.write("metrics.csv", format!("{}\n{row}\n", csv_header()))?;
    }
    let endpoint = g.config();
    run.finish(
        "recognize",
        json!({
            "video": a.video,
            "prompt": id,
            "model": endpoint.model,
            "mode": endpoint.mode,
            "endpoint_id": endpoint.endpoint_id,
            "rounds": rounds,
            "resolution": resolution,
            "continuity": a.continuity,
        }),
    )?;
    Ok(if a.strict && !report.ok { 1 } else { 0 })
}

pub fn fixture(a: FixtureArgs, cfg: &RunConfig, ctx: &Context) -> anyhow::Result<i32> {
    let (id, _) = recognition_template(&a.prompt)?;
    let endpoint = cfg.endpoint(&a.endpoint);
    let dir = endpoint
        .fixtures_dir
        .clone()
        .ok_or_else(|| config_error("fixture needs --fixtures or paths.fixtures_dir"))?;
    let prompt = assemble_prompt(id.as_str(), Some(&a.video), &BTreeMap::new())?;
    let response = std::fs::read_to_string(&a.response).with_context(|| format!("reading {}", a.response.display()))?;
    let g = gateway(cfg, &a.endpoint, ctx);
    let req = g.request(&prompt, Some(&a.video));
    let record = ExchangeRecord {
        digest: req.digest(),
        prompt_id: id.as_str().to_string(),
        attachment: req.attachment.clone(),
        response,
        // hand-made fixtures carry no capture time
        timestamp: 0,
        endpoint_id: endpoint.endpoint_id.clone(),
    };
    let path = FixtureStore::new(dir).save(&record)?;
    println!("{}", path.display());
    Ok(0)
}

pub fn check_split_cmd(a: CheckSplitArgs, cfg: &RunConfig) -> anyhow::Result<i32> {
    let path = a
        .manifest
        .clone()
        .or_else(|| cfg.paths.split_manifest.clone())
        .ok_or_else(|| config_error("check-split needs a manifest"))?;
    let violations = split::check_split(&split::read_manifest(&path)?);
    if violations.is_empty() {
        println!("ok: no participant in both splits");
        return Ok(0);
    }
    for v in &violations {
        println!("violation: {v}");
    }
    Ok(1)
}

pub fn synth_cmd(a: SynthArgs, _cfg: &RunConfig) -> anyhow::Result<i32> {
    if a.nurses == 0 {
        return Err(config_error("--nurses must be at least 1"));
    }
    let mut run = RunDir::create(&a.out)?;
    let entries = synth::split_entries(a.nurses, a.students);
    for e in &entries {
        let vid = format!("{}{}", e.participant, e.session);
        let mut rng = synth::video_rng(a.seed, &vid);
        let gt = synth::golden_log(&mut rng, &vid)?;
        run.write(&format!("gt/{vid}.json"), gt.to_json() + "\n")?;
        for (format, source, tag) in [(LogFormat::A, LogSource::LlmPromptA, "a"), (LogFormat::B, LogSource::LlmPromptB, "b")] {
            let pred = synth::jittered(&mut rng, &gt, source)?;
            run.write(&format!("responses/{vid}.{tag}.txt"), synth::response_text(&pred, format, &mut rng))?;
        }
        let role = synth::role_of(&vid).expect("synthetic ids start with N or S");
        let series = synth::keypoint_series(&mut rng, &vid, &e.session, role, a.fps, a.duration);
        run.write(&format!("keypoints/{vid}.csv"), series.to_csv_string())?;
    }
    run.write("split.csv", split::write_manifest(&entries))?;
    println!("{} videos written to {}", entries.len(), a.out.display());
    run.finish(
        "synth",
        json!({"seed": a.seed, "nurses": a.nurses, "students": a.students, "fps": a.fps, "duration": a.duration}),
    )?;
    Ok(0)
}
