use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::inject::{inject_spoof_spans, InjectionPolicy, Mimicry, SpoofSpan};
use crate::domain::Trace;
use crate::error::{Error, Result};
use crate::features::stage2_features;
use crate::learners::LearnerSpec;
use crate::metrics::{compute_metrics, macro_average, per_label_reports, ConfusionCounts, MetricReport};
use crate::pipeline::{
    annotated_segments, classify_segment, fit_state_classifier, group_by_identity, stage2_train,
    SegmentAlign, Stage3Params, StateSegment, WindowChoice,
};
use crate::rng;
use crate::simulate::home::expand_program;
use crate::simulate::{generate_scenario, DeviceArchetype, ScenarioScript};
use crate::traceio::{to_splt, Capture};

/// Label given to segments cut around injected bursts.
pub const DECOY: &str = "DECOY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseStage {
    Detection,
    Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig {
    pub mimicry: Mimicry,
    pub detector: LearnerSpec,
    pub window: WindowChoice,
    pub classifier: Stage3Params,
    pub inject_train: bool,
    pub inject_test: bool,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            mimicry: Mimicry::BurstMimic,
            detector: LearnerSpec::Knn { k: crate::learners::DEFAULT_K },
            window: WindowChoice::Recommended,
            classifier: Stage3Params::default(),
            inject_train: true,
            inject_test: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub report: MetricReport,
}

/// Attack quality of one stage as a function of the injection rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationCurve {
    pub stage: DefenseStage,
    pub points: Vec<CurvePoint>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x}"))
}

impl DegradationCurve {
    pub fn baseline(&self) -> &MetricReport {
        &self.points[0].report
    }

    pub fn f1_at(&self, rate: f64) -> Option<f64> {
        self.points.iter().find(|p| (p.rate - rate).abs() < 1e-9).and_then(|p| p.report.f1)
    }

    /// `rate,f1,precision,recall,accuracy`, one row per rate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rate,f1,precision,recall,accuracy\n");
        for p in &self.points {
            let r = &p.report;
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.rate,
                fmt_opt(r.f1),
                fmt_opt(r.precision),
                fmt_opt(r.tpr),
                fmt_opt(r.accuracy)
            ));
        }
        s
    }

    /// One `{stage, rate, metric, value}` object per defined metric value.
    pub fn to_long_json(&self) -> Value {
        let mut rows = Vec::new();
        for p in &self.points {
            let r = &p.report;
            for (metric, v) in [("f1", r.f1), ("precision", r.precision), ("recall", r.tpr), ("accuracy", r.accuracy)] {
                if let Some(v) = v {
                    rows.push(json!({ "stage": self.stage, "rate": p.rate, "metric": metric, "value": v }));
                }
            }
        }
        Value::Array(rows)
    }
}

/// Clean training and test captures of one scenario, plus each flow's archetype.
#[derive(Debug, Clone)]
pub struct DefenseData {
    pub train: Capture,
    pub test: Capture,
    pub archetypes: BTreeMap<String, DeviceArchetype>,
}

pub fn defense_data(script: &ScenarioScript, seed: u64) -> Result<DefenseData> {
    let make = |tag: &str| -> Result<Capture> {
        let s = rng::derive_seed(seed, tag);
        generate_scenario(&expand_program(script, s)?, s)
    };
    Ok(DefenseData { train: make("defense/train")?, test: make("defense/test")?, archetypes: archetypes_by_flow(script)? })
}

type Injected = (Vec<Trace>, BTreeMap<String, Vec<SpoofSpan>>);

fn inject_all(c: &Capture, rate: Option<f64>, enabled: bool, data: &DefenseData, mimicry: Mimicry, seed: u64) -> Result<Injected> {
    let mut traces = Vec::new();
    let mut spans = BTreeMap::new();
    for t in c.traces.values().filter(|t| !t.is_empty()) {
        match rate {
            Some(rate) if enabled && rate > 0.0 => {
                let p = InjectionPolicy::new(rate, mimicry, seed)?;
                let (inj, s) = inject_spoof_spans(t, &p, data.archetypes.get(&t.meta.flow_id))?;
                traces.push(inj);
                spans.insert(t.meta.flow_id.clone(), s);
            }
            _ => traces.push(t.clone()),
        }
    }
    Ok((traces, spans))
}

fn detection_report(train: &[Trace], test: &[Trace], cfg: &DefenseConfig, seed: u64) -> Result<MetricReport> {
    let model = stage2_train(train, &cfg.detector, cfg.window, seed)?;
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for t in test {
        let Some(id) = t.meta.identity() else { continue };
        let Some(det) = model.detectors.get(&id.to_string()) else { continue };
        for w in stage2_features(&to_splt(t)?, det.window_s, &t.annotations)? {
            pred.push(det.classifier.predict(&w.vector())?);
            truth.push(w.label.unwrap_or_default());
        }
    }
    compute_metrics(ConfusionCounts::one_vs_rest(&pred, &truth, "1"))
}

fn labeled_segments(traces: &[Trace], spans: &BTreeMap<String, Vec<SpoofSpan>>) -> Result<BTreeMap<String, Vec<StateSegment>>> {
    let mut out: BTreeMap<String, Vec<StateSegment>> = BTreeMap::new();
    for (key, (_, group)) in group_by_identity(traces) {
        let segs = out.entry(key).or_default();
        for t in group {
            segs.extend(annotated_segments(t, SegmentAlign::Raw)?);
            let m = to_splt(t)?;
            for s in spans.get(&t.meta.flow_id).into_iter().flatten() {
                let packets = m.slice(s.start, s.end + 1e-9);
                if !packets.is_empty() {
                    segs.push(StateSegment {
                        flow_id: t.meta.flow_id.clone(),
                        start_s: s.start,
                        end_s: s.end,
                        packets,
                        label: Some(DECOY.to_string()),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn classification_report(
    train: &Injected,
    test: &Injected,
    cfg: &DefenseConfig,
    seed: u64,
) -> Result<MetricReport> {
    let tr = labeled_segments(&train.0, &train.1)?;
    let te = labeled_segments(&test.0, &test.1)?;
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let tag = |key: &str, l: &str| if l == DECOY { DECOY.to_string() } else { format!("{key}:{l}") };
    for (key, segs) in &tr {
        let Some(test_segs) = te.get(key) else { continue };
        if segs.is_empty() || test_segs.is_empty() {
            continue;
        }
        let id = crate::domain::DeviceIdentity::parse(key)?;
        let c = fit_state_classifier(id, segs, &cfg.classifier, rng::derive_seed(seed, key))?;
        for s in test_segs {
            pred.push(tag(key, &classify_segment(s, &c)?));
            truth.push(tag(key, s.label.as_deref().unwrap_or_default()));
        }
    }
    if truth.is_empty() {
        return Err(Error::invalid("no labeled segments to classify"));
    }
    // decoys are a confuser class; the score covers real device states only
    let reports: Vec<MetricReport> = per_label_reports(&pred, &truth)?
        .into_iter()
        .filter(|(l, r)| l != DECOY && r.support > 0)
        .map(|(_, r)| r)
        .collect();
    macro_average(&reports)
}

/// Scores one stage with spoofed traffic at `rate` (`None` runs the attack
/// with no injection at all).
pub fn evaluate_rate(data: &DefenseData, stage: DefenseStage, rate: Option<f64>, seed: u64, cfg: &DefenseConfig) -> Result<MetricReport> {
    let train = inject_all(&data.train, rate, cfg.inject_train, data, cfg.mimicry, rng::derive_seed(seed, "inject/train"))?;
    let test = inject_all(&data.test, rate, cfg.inject_test, data, cfg.mimicry, rng::derive_seed(seed, "inject/test"))?;
    let fit_seed = rng::derive_seed(seed, "defense/fit");
    match stage {
        DefenseStage::Detection => detection_report(&train.0, &test.0, cfg, fit_seed),
        DefenseStage::Classification => classification_report(&train, &test, cfg, fit_seed),
    }
}

pub fn validate_rates(rates: &[f64]) -> Result<()> {
    if rates.first() != Some(&0.0) {
        return Err(Error::invalid("rates must start with the 0 baseline"));
    }
    if rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("rates must be strictly increasing"));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=super::MAX_RATE).contains(*r)) {
        return Err(Error::invalid(format!("rate {r} outside [0, {}]", super::MAX_RATE)));
    }
    Ok(())
}

/// Degradation curve over `rates` (which must start at 0), each point
/// retrained and evaluated independently.
pub fn evaluate_defense_on(
    data: &DefenseData,
    stage: DefenseStage,
    rates: &[f64],
    seed: u64,
    cfg: &DefenseConfig,
) -> Result<DegradationCurve> {
    validate_rates(rates)?;
    let points = rates
        .par_iter()
        .map(|&rate| Ok(CurvePoint { rate, report: evaluate_rate(data, stage, Some(rate), seed, cfg)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DegradationCurve { stage, points })
}

pub fn evaluate_defense(script: &ScenarioScript, stage: DefenseStage, rates: &[f64], seed: u64) -> Result<DegradationCurve> {
    let data = defense_data(script, seed)?;
    evaluate_defense_on(&data, stage, rates, seed, &DefenseConfig::default())
}

/// Checks baseline dominance and adjacent-rate monotonicity within `tol`.
pub fn is_degrading(curve: &DegradationCurve, tol: f64) -> bool {
    let f: Vec<f64> = curve.points.iter().map(|p| p.report.f1.unwrap_or(0.0)).collect();
    f.iter().skip(1).all(|&v| v <= f[0] + 1e-12) && f.windows(2).all(|w| w[1] <= w[0] + tol)
}

/// Resolves the scenario of `script` to per-flow archetypes (exposed for
/// callers that inject outside the harness).
pub fn archetypes_by_flow(script: &ScenarioScript) -> Result<BTreeMap<String, DeviceArchetype>> {
    Ok(script.devices.iter().map(|d| d.flow_id.clone()).zip(script.resolve()?).collect())
}
