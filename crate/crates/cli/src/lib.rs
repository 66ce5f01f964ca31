//! Command implementations behind the `hometrace` binary.
//!
//! Each `cmd_*` function does the work of one subcommand and returns a short
//! human-readable summary; `main` only parses arguments and maps errors to
//! exit codes.

pub mod args;
pub mod error;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hometrace::defense::{defense_data, evaluate_defense_on, DefenseConfig, DefenseStage, DegradationCurve};
use hometrace::features::stage2_features;
use hometrace::learners::{default_states, load_model, save_model, ForestParams, LearnerSpec};
use hometrace::metrics::{overall_accuracy, per_label_reports};
use hometrace::pipeline::artifacts::{read_jsonl, series_from_jsonl, series_to_jsonl, snapshots_to_jsonl, write_jsonl};
use hometrace::pipeline::{
    activity_labels_at, annotated_activity, annotated_segments, build_snapshots, cascade_bound, grid_times,
    group_by_identity, holdout_predictions, label_runs, segment_states, stage1_dataset, stage1_identify, stage1_train,
    stage2_dataset, stage2_detect, stage2_train, stage3_classify, stage3_dataset, stage3_train, stage4_infer,
    stage4_train, Deployment, SegmentAlign, Stage1Model, Stage2Model, Stage3Model, Stage3Params, Stage4Model,
    StateSegment, TransitionSeries, WindowChoice,
};
use hometrace::simulate::home::{expand_program, HomeLayout};
use hometrace::simulate::{builtin_scenario, builtin_scenario_names, generate_scenario, ScenarioScript};
use hometrace::traceio::{load_capture_dir, save_capture_dir, split_flows, SplitBy};
use hometrace::{macro_average, Capture, DeviceIdentity, IntervalKind, MetricReport, Trace};

use args::{
    AttackArgs, Cli, Command, DefendArgs, DefendStage, EvalArgs, InjectWhere, LearnerKind, ResumeFrom, SimulateArgs,
    TrainArgs,
};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_MODEL, EXIT_USAGE};

pub const DEPLOYMENT_FILE: &str = "deployment.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const IDENTITIES_FILE: &str = "identities.json";
pub const SERIES_FILE: &str = "series.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";
pub const ACTIVITIES_FILE: &str = "activities.jsonl";

/// Model file name and envelope kind for each stage.
pub const STAGE_MODELS: [(&str, &str); 4] =
    [("stage1.json", "stage1"), ("stage2.json", "stage2"), ("stage3.json", "stage3"), ("stage4.json", "stage4")];

/// Stage-2 hold-out fraction used for the training report.
const HOLDOUT_FRACTION: f64 = 0.25;

pub fn run(cli: Cli) -> CliResult<String> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
        return pool.install(|| dispatch(cli.command));
    }
    dispatch(cli.command)
}

fn dispatch(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Train(a) => cmd_train(&a).map(|r| r.to_text()),
        Command::Attack(a) => cmd_attack(&a).map(|r| r.to_text()),
        Command::Defend(a) => cmd_defend(&a).map(|curves| {
            curves.iter().map(|c| format!("{:?}\n{}", c.stage, c.to_csv())).collect::<Vec<_>>().join("\n")
        }),
        Command::Eval(a) => cmd_eval(&a).map(|r| r.to_text()),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_file(path, &serde_json::to_string_pretty(value)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_file(path)?).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// A scenario file path, or the name of a bundled scenario.
pub fn load_scenario(arg: &str) -> CliResult<ScenarioScript> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(ScenarioScript::from_json(&read_file(path)?)?);
    }
    if builtin_scenario_names().contains(&arg) {
        return Ok(builtin_scenario(arg)?);
    }
    Err(CliError::data(format!(
        "scenario `{arg}` is neither a file nor a bundled scenario ({})",
        builtin_scenario_names().join(", ")
    )))
}

fn load_capture(dir: &Path) -> CliResult<Capture> {
    if !dir.is_dir() {
        return Err(CliError::data(format!("capture directory {} does not exist", dir.display())));
    }
    Ok(load_capture_dir(dir)?)
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be positive, got {v}")))
    }
}

// ---------------------------------------------------------------- simulate

/// Writes the capture, `deployment.json` and the expanded `scenario.json`.
pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<String> {
    let script = load_scenario(&a.scenario)?;
    let expanded = expand_program(&script, a.seed)?;
    let capture = generate_scenario(&expanded, a.seed)?;
    save_capture_dir(&capture, &a.out)?;
    let deployment = Deployment::from_script(&expanded, &HomeLayout::walking())?;
    write_json(&a.out.join(DEPLOYMENT_FILE), &deployment)?;
    write_json(&a.out.join(SCENARIO_FILE), &expanded)?;
    Ok(format!(
        "wrote {} flows, {} packets, {} activities to {}",
        capture.traces.len(),
        capture.meta.total_packets,
        capture.activities.len(),
        a.out.display()
    ))
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub stages: BTreeMap<String, Value>,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (stage, v) in &self.stages {
            s.push_str(&format!("{stage}: {v}\n"));
        }
        s
    }
}

fn model_path(dir: &Path, stage: usize) -> PathBuf {
    dir.join(STAGE_MODELS[stage - 1].0)
}

/// Loads a stage model, reporting a missing file as a model error naming the stage.
pub fn load_stage<T: for<'de> Deserialize<'de>>(dir: &Path, stage: usize) -> CliResult<T> {
    let path = model_path(dir, stage);
    if !path.exists() {
        return Err(CliError::model(format!("Stage-{stage} model not found at {}", path.display())));
    }
    Ok(load_model(STAGE_MODELS[stage - 1].1, &path)?)
}

fn save_stage<T: Serialize>(dir: &Path, stage: usize, model: &T) -> CliResult<()> {
    Ok(save_model(STAGE_MODELS[stage - 1].1, model, model_path(dir, stage))?)
}

fn report_json(r: &MetricReport) -> Value {
    r.to_json_value()
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<TrainReport> {
    check_positive("interval", a.interval)?;
    check_positive("alpha", a.alpha + f64::MIN_POSITIVE)?;
    check_positive("grid", a.grid)?;
    if let Some(w) = a.window {
        check_positive("window", w)?;
    }
    if a.trees == 0 {
        return Err(CliError::usage("--trees must be at least 1"));
    }
    let capture = load_capture(&a.capture)?;
    let traces = split_flows(&capture, SplitBy::FlowId);
    create_dir(&a.out)?;
    let mut report = TrainReport::default();
    let seed = a.seed;

    if a.stage.includes(1) {
        let model = stage1_train(&traces, a.interval, a.k)?;
        let (x, y) = stage1_dataset(&traces, a.interval)?;
        let spec = LearnerSpec::Knn { k: a.k };
        let (pred, truth) = holdout_predictions(&x, &y, HOLDOUT_FRACTION, &spec, hometrace::rng::derive_seed(seed, "train/stage1"))?;
        report.stages.insert(
            "stage1".into(),
            json!({ "windows": x.len(), "devices": model.knn.labels.len(), "holdout_window_accuracy": overall_accuracy(&pred, &truth)? }),
        );
        save_stage(&a.out, 1, &model)?;
    }

    let stage2_spec = match a.learner {
        LearnerKind::Knn => LearnerSpec::Knn { k: a.k },
        LearnerKind::Rf => LearnerSpec::Forest(ForestParams { trees: a.trees, ..ForestParams::default() }),
    };
    let window = a.window.map_or(WindowChoice::Recommended, WindowChoice::Fixed);
    let mut stage2: Option<Stage2Model> = None;
    if a.stage.includes(2) {
        let model = stage2_train(&traces, &stage2_spec, window, seed)?;
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        for (key, det) in &model.detectors {
            let groups = group_by_identity(&traces);
            let Some((_, group)) = groups.get(key) else { continue };
            let (x, y) = stage2_dataset(group.iter().copied(), det.window_s)?;
            let Ok((p, t)) =
                holdout_predictions(&x, &y, HOLDOUT_FRACTION, &stage2_spec, hometrace::rng::derive_seed(seed, key))
            else {
                continue;
            };
            pred.extend(p);
            truth.extend(t);
        }
        let mut entry = json!({
            "detectors": model.detectors.len(),
            "windows_s": model.detectors.iter().map(|(k, d)| (k.clone(), d.window_s)).collect::<BTreeMap<_, _>>(),
        });
        if !truth.is_empty() {
            let r = hometrace::compute_metrics(hometrace::ConfusionCounts::one_vs_rest(&pred, &truth, "1"))?;
            entry["holdout"] = report_json(&r);
        }
        report.stages.insert("stage2".into(), entry);
        save_stage(&a.out, 2, &model)?;
        stage2 = Some(model);
    }

    if a.stage.includes(3) {
        let windows: BTreeMap<String, f64> = match &stage2 {
            Some(m) => m.detectors.iter().map(|(k, d)| (k.clone(), d.window_s)).collect(),
            None if model_path(&a.out, 2).exists() => {
                let m: Stage2Model = load_stage(&a.out, 2)?;
                m.detectors.iter().map(|(k, d)| (k.clone(), d.window_s)).collect()
            }
            None => BTreeMap::new(),
        };
        let params = Stage3Params {
            forest: ForestParams { trees: a.trees, ..ForestParams::default() },
            select: !a.no_select,
        };
        let model = stage3_train(&traces, &windows, &params, seed)?;
        let mut segs_total = 0;
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        for (key, (_, group)) in group_by_identity(&traces) {
            let mut segs = Vec::new();
            for t in &group {
                segs.extend(annotated_segments(t, SegmentAlign::Raw)?);
            }
            segs_total += segs.len();
            let (x, y) = stage3_dataset(&segs)?;
            let spec = LearnerSpec::Forest(params.forest.clone());
            if let Ok((p, t)) = holdout_predictions(&x, &y, HOLDOUT_FRACTION, &spec, hometrace::rng::derive_seed(seed, &key)) {
                pred.extend(p.into_iter().map(|l| format!("{key}:{l}")));
                truth.extend(t.into_iter().map(|l| format!("{key}:{l}")));
            }
        }
        let mut entry = json!({ "classifiers": model.classifiers.len(), "segments": segs_total });
        if !truth.is_empty() {
            let reps: Vec<MetricReport> = per_label_reports(&pred, &truth)?.into_iter().map(|(_, r)| r).collect();
            entry["holdout_accuracy"] = json!(overall_accuracy(&pred, &truth)?);
            entry["holdout_macro"] = report_json(&macro_average(&reps)?);
        }
        report.stages.insert("stage3".into(), entry);
        save_stage(&a.out, 3, &model)?;
    }

    if a.stage.includes(4) {
        let deployment = load_deployment(&a.capture, None)?;
        let times = grid_times(capture.meta.duration_s, a.grid)?;
        let end = times.last().map_or(0.0, |t| t + a.grid);
        let snaps = build_snapshots(&annotated_activity(&capture), a.grid, &deployment, end)?;
        let labels = activity_labels_at(&times, &capture.activities);
        let states = default_states();
        let model = stage4_train(&[(snaps.clone(), labels.clone())], &states, a.alpha, a.grid)?;
        let fit = stage4_infer(&snaps, &model.hmm, Some(&labels))?;
        report.stages.insert(
            "stage4".into(),
            json!({ "snapshots": snaps.len(), "width": deployment.width(), "training_accuracy": fit.accuracy }),
        );
        save_stage(&a.out, 4, &model)?;
    }

    write_json(&a.out.join("train_report.json"), &report)?;
    write_file(&a.out.join("train_report.txt"), &report.to_text())?;
    Ok(report)
}

fn load_deployment(capture_dir: &Path, explicit: Option<&Path>) -> CliResult<Deployment> {
    let path = explicit.map_or_else(|| capture_dir.join(DEPLOYMENT_FILE), Path::to_path_buf);
    if !path.exists() {
        return Err(CliError::data(format!("deployment map {} not found", path.display())));
    }
    read_json(&path)
}

// ---------------------------------------------------------------- attack

/// Per-stage scores of one attack run against the capture's ground truth.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttackReport {
    /// Fraction of labeled flows whose device type was identified correctly.
    pub identification_accuracy: Option<f64>,
    /// Window-level activity detection, active windows positive.
    pub detection: Option<MetricReport>,
    /// Fraction of detected segments whose predicted state matches the
    /// annotation they overlap most.
    pub classification_accuracy: Option<f64>,
    /// Snapshot-level activity decoding accuracy.
    pub activity_accuracy: Option<f64>,
    pub activity_macro: Option<MetricReport>,
    /// Product of the four stage rates.
    pub cascade_bound: Option<f64>,
    pub flows: usize,
    pub segments: usize,
    pub snapshots: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

impl AttackReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("flows={} segments={} snapshots={}\n", self.flows, self.segments, self.snapshots));
        s.push_str(&format!("X identification_accuracy={}\n", fmt_opt(self.identification_accuracy)));
        let d = self.detection.as_ref();
        s.push_str(&format!(
            "Y detection_accuracy={} detection_f1={}\n",
            fmt_opt(d.and_then(|r| r.accuracy)),
            fmt_opt(d.and_then(|r| r.f1))
        ));
        s.push_str(&format!("Z classification_accuracy={}\n", fmt_opt(self.classification_accuracy)));
        s.push_str(&format!(
            "T activity_accuracy={} activity_macro_f1={}\n",
            fmt_opt(self.activity_accuracy),
            fmt_opt(self.activity_macro.as_ref().and_then(|r| r.f1))
        ));
        s.push_str(&format!("cascade_bound={}\n", fmt_opt(self.cascade_bound)));
        s
    }
}

#[derive(Serialize, Deserialize)]
struct IdentityRow {
    flow_id: String,
    identity: DeviceIdentity,
}

fn truth_label(t: &Trace, seg: &StateSegment) -> String {
    t.annotations_of(IntervalKind::DeviceActivity)
        .map(|a| (a.end.min(seg.end_s) - a.start.max(seg.start_s), a))
        .filter(|(o, _)| *o > 0.0)
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map_or_else(|| "none".to_string(), |(_, a)| a.label.clone())
}

/// Runs the cascade. Stages see packet metadata only; the capture's device
/// metadata and annotations are used for scoring, never as input.
pub fn cmd_attack(a: &AttackArgs) -> CliResult<AttackReport> {
    let first = match a.resume_from {
        None => 1,
        Some(ResumeFrom::Stage2) => 2,
        Some(ResumeFrom::Stage3) => 3,
        Some(ResumeFrom::Stage4) => 4,
    };
    // Fail on missing models before doing any work.
    for stage in first..=4 {
        if !model_path(&a.models, stage).exists() {
            return Err(CliError::model(format!(
                "Stage-{stage} model not found at {}",
                model_path(&a.models, stage).display()
            )));
        }
    }
    let capture = load_capture(&a.capture)?;
    let deployment = load_deployment(&a.capture, a.deployment.as_deref())?;
    let traces = split_flows(&capture, SplitBy::FlowId);
    let by_flow: BTreeMap<&str, &Trace> = traces.iter().map(|t| (t.meta.flow_id.as_str(), t)).collect();
    create_dir(&a.out)?;
    let mut report = AttackReport { flows: traces.len(), ..Default::default() };

    // Stage 1.
    let identities: BTreeMap<String, DeviceIdentity> = if first <= 1 {
        let m1: Stage1Model = load_stage(&a.models, 1)?;
        let blind: Vec<Trace> = traces.iter().map(blind_trace).collect();
        let ids = stage1_identify(&blind, &m1, m1.interval_s)?;
        let rows: Vec<IdentityRow> =
            ids.iter().map(|(f, id)| IdentityRow { flow_id: f.clone(), identity: id.clone() }).collect();
        write_json(&a.out.join(IDENTITIES_FILE), &rows)?;
        ids
    } else {
        let rows: Vec<IdentityRow> = read_json(&a.out.join(IDENTITIES_FILE))?;
        rows.into_iter().map(|r| (r.flow_id, r.identity)).collect()
    };
    let scored: Vec<bool> = traces
        .iter()
        .filter_map(|t| Some(identities.get(&t.meta.flow_id)? == &t.meta.identity()?))
        .collect();
    if !scored.is_empty() {
        report.identification_accuracy =
            Some(scored.iter().filter(|&&b| b).count() as f64 / scored.len() as f64);
    }

    // Stage 2.
    let series: Vec<TransitionSeries> = if first <= 2 {
        let m2: Stage2Model = load_stage(&a.models, 2)?;
        let mut out = Vec::new();
        for t in &traces {
            let Some(id) = identities.get(&t.meta.flow_id) else { continue };
            let Ok(det) = m2.detector(id) else { continue };
            out.push(stage2_detect(&blind_trace(t), det, det.window_s)?);
        }
        write_file(&a.out.join(SERIES_FILE), &series_to_jsonl(&out)?)?;
        out
    } else {
        let p = a.out.join(SERIES_FILE);
        series_from_jsonl(&read_file(&p)?, &p.display().to_string())?
    };
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for ts in &series {
        let Some(t) = by_flow.get(ts.flow_id.as_str()) else { continue };
        let windows = stage2_features(&hometrace::traceio::to_splt(t)?, ts.window_s, &t.annotations)?;
        for (w, &b) in windows.iter().zip(&ts.bits) {
            pred.push(if b { "1" } else { "0" }.to_string());
            truth.push(w.label.clone().unwrap_or_default());
        }
    }
    if !truth.is_empty() {
        report.detection = Some(hometrace::compute_metrics(hometrace::ConfusionCounts::one_vs_rest(&pred, &truth, "1"))?);
    }

    // Stage 3.
    let segments: Vec<StateSegment> = if first <= 3 {
        let m3: Stage3Model = load_stage(&a.models, 3)?;
        let mut out = Vec::new();
        for ts in &series {
            let Some(t) = by_flow.get(ts.flow_id.as_str()) else { continue };
            let segs = segment_states(&blind_trace(t), ts)?;
            match identities.get(&ts.flow_id).map(|id| m3.classifier(id)) {
                Some(Ok(c)) => out.extend(stage3_classify(&segs, c)?),
                _ => out.extend(segs),
            }
        }
        write_jsonl(&out, a.out.join(SEGMENTS_FILE))?;
        out
    } else {
        read_jsonl(a.out.join(SEGMENTS_FILE))?
    };
    let hits: Vec<bool> = segments
        .iter()
        .filter_map(|s| {
            let t = by_flow.get(s.flow_id.as_str())?;
            Some(s.label.as_deref() == Some(truth_label(t, s).as_str()))
        })
        .collect();
    report.segments = segments.len();
    if !hits.is_empty() {
        report.classification_accuracy = Some(hits.iter().filter(|&&b| b).count() as f64 / hits.len() as f64);
    }

    // Stage 4.
    let m4: Stage4Model = load_stage(&a.models, 4)?;
    if m4.hmm.width != deployment.width() {
        return Err(CliError::model(format!(
            "Stage-4 model expects {} snapshot bits, deployment has {}",
            m4.hmm.width,
            deployment.width()
        )));
    }
    let times = grid_times(capture.meta.duration_s, m4.grid_s)?;
    let end = times.last().map_or(0.0, |t| t + m4.grid_s);
    let placed: Vec<StateSegment> =
        segments.iter().filter(|s| deployment.positions.contains_key(&s.flow_id)).cloned().collect();
    let snaps = build_snapshots(&placed, m4.grid_s, &deployment, end)?;
    let truth4 = activity_labels_at(&times, &capture.activities);
    let out4 = stage4_infer(&snaps, &m4.hmm, Some(&truth4))?;
    write_file(&a.out.join(SNAPSHOTS_FILE), &snapshots_to_jsonl(&snaps)?)?;
    write_jsonl(&label_runs(&snaps, &out4.labels, m4.grid_s), a.out.join(ACTIVITIES_FILE))?;
    report.snapshots = snaps.len();
    report.activity_accuracy = out4.accuracy;
    report.activity_macro = out4.macro_report;

    let rates = [
        report.identification_accuracy,
        report.detection.as_ref().and_then(|r| r.accuracy),
        report.classification_accuracy,
        report.activity_accuracy,
    ];
    if rates.iter().all(Option::is_some) {
        report.cascade_bound = Some(cascade_bound(&rates.map(Option::unwrap)));
    }
    write_json(&a.out.join("report.json"), &report)?;
    write_file(&a.out.join("report.txt"), &report.to_text())?;
    Ok(report)
}

/// The trace as an attacker sees it: no device metadata, no labels.
fn blind_trace(t: &Trace) -> Trace {
    let mut b = t.clone();
    b.annotations.clear();
    b.meta.brand.clear();
    b.meta.device_type.clear();
    b
}

// ---------------------------------------------------------------- defend

pub fn parse_rates(s: &str) -> CliResult<Vec<f64>> {
    let rates = s
        .split(',')
        .map(|r| r.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad rate `{r}`"))))
        .collect::<CliResult<Vec<_>>>()?;
    hometrace::defense::validate_rates(&rates).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(rates)
}

/// Writes `<stage>.csv` and `<stage>.json` (long format) per evaluated stage.
pub fn cmd_defend(a: &DefendArgs) -> CliResult<Vec<DegradationCurve>> {
    let rates = parse_rates(&a.rates)?;
    if a.trees == 0 {
        return Err(CliError::usage("--trees must be at least 1"));
    }
    let script = load_scenario(&a.scenario)?;
    let data = defense_data(&script, a.seed)?;
    let cfg = DefenseConfig {
        detector: LearnerSpec::Knn { k: a.k },
        classifier: Stage3Params {
            forest: ForestParams { trees: a.trees, ..ForestParams::default() },
            ..Stage3Params::default()
        },
        inject_train: a.inject != InjectWhere::Test,
        inject_test: a.inject != InjectWhere::Train,
        ..DefenseConfig::default()
    };
    let stages: &[DefenseStage] = match a.stage {
        DefendStage::Detection => &[DefenseStage::Detection],
        DefendStage::Classification => &[DefenseStage::Classification],
        DefendStage::Both => &[DefenseStage::Detection, DefenseStage::Classification],
    };
    create_dir(&a.out)?;
    let mut curves = Vec::new();
    for &stage in stages {
        let curve = evaluate_defense_on(&data, stage, &rates, a.seed, &cfg)?;
        let name = match stage {
            DefenseStage::Detection => "detection",
            DefenseStage::Classification => "classification",
        };
        write_file(&a.out.join(format!("{name}.csv")), &curve.to_csv())?;
        write_json(&a.out.join(format!("{name}.json")), &curve.to_long_json())?;
        curves.push(curve);
    }
    Ok(curves)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_report: MetricReport,
    pub per_label: Vec<(String, MetricReport)>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("accuracy={}\n[macro]\n{}", self.accuracy, self.macro_report.to_text());
        for (l, r) in &self.per_label {
            s.push_str(&format!("[{l}]\n{}", r.to_text()));
        }
        s
    }
}

fn read_labels(path: &Path) -> CliResult<Vec<String>> {
    Ok(read_file(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<EvalReport> {
    let pred = read_labels(&a.predictions)?;
    let truth = read_labels(&a.truth)?;
    if pred.len() != truth.len() {
        return Err(CliError::data(format!("{} predictions but {} truth labels", pred.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(CliError::data("no labels to score"));
    }
    let per_label = per_label_reports(&pred, &truth)?;
    let reps: Vec<MetricReport> = per_label.iter().map(|(_, r)| r.clone()).collect();
    let report = EvalReport { accuracy: overall_accuracy(&pred, &truth)?, macro_report: macro_average(&reps)?, per_label };
    create_dir(&a.out)?;
    let json = json!({
        "accuracy": report.accuracy,
        "macro": report.macro_report.to_json_value(),
        "per_label": report.per_label.iter().map(|(l, r)| (l.clone(), r.to_json_value())).collect::<serde_json::Map<_, _>>(),
    });
    write_json(&a.out.join("report.json"), &json)?;
    write_file(&a.out.join("report.txt"), &report.to_text())?;
    Ok(report)
}
