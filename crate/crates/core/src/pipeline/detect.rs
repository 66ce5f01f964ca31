use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::types::{StateSegment, TransitionSeries};
use crate::domain::{DeviceIdentity, IntervalKind, LabeledInterval, Trace};
use crate::metrics::ConfusionCounts;
use crate::error::{Error, Result};
use crate::features::{recommend_window, stage2_features};
use crate::learners::{Classifier, LearnerSpec};
use crate::traceio::to_splt;

/// Activity detector for one device type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub identity: DeviceIdentity,
    pub window_s: f64,
    pub classifier: Classifier,
}

/// Per-device activity detectors keyed by `brand/device_type`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stage2Model {
    pub detectors: BTreeMap<String, Detector>,
}

impl Stage2Model {
    pub fn detector(&self, id: &DeviceIdentity) -> Result<&Detector> {
        self.detectors.get(&id.to_string()).ok_or_else(|| Error::Model(format!("no activity detector for `{id}`")))
    }
}

/// How the detection window is chosen for each device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowChoice {
    /// A quarter of the mean annotated activity duration.
    Recommended,
    /// The mean annotated activity duration times this factor.
    DurationTimes(f64),
    Fixed(f64),
}

/// Mean length of the `DeviceActivity` annotations across traces.
pub fn mean_activity_duration<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> Option<f64> {
    let d: Vec<f64> =
        traces.into_iter().flat_map(|t| t.annotations_of(IntervalKind::DeviceActivity).map(|a| a.duration())).collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// Window vectors and `"1"`/`"0"` labels for a set of traces.
pub fn stage2_dataset<'a>(
    traces: impl IntoIterator<Item = &'a Trace>,
    window_s: f64,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in traces {
        if t.is_empty() {
            continue;
        }
        for w in stage2_features(&to_splt(t)?, window_s, &t.annotations)? {
            x.push(w.vector());
            y.push(w.label.unwrap_or_default());
        }
    }
    Ok((x, y))
}

/// Groups labeled, non-coordinator traces by device identity.
pub fn group_by_identity(traces: &[Trace]) -> BTreeMap<String, (DeviceIdentity, Vec<&Trace>)> {
    let mut groups: BTreeMap<String, (DeviceIdentity, Vec<&Trace>)> = BTreeMap::new();
    for t in traces {
        if t.meta.is_zigbee_coordinator() || t.is_empty() {
            continue;
        }
        if let Some(id) = t.meta.identity() {
            groups.entry(id.to_string()).or_insert_with(|| (id, Vec::new())).1.push(t);
        }
    }
    groups
}

pub fn resolve_window(choice: WindowChoice, traces: &[&Trace]) -> Result<Option<f64>> {
    Ok(match choice {
        WindowChoice::Fixed(w) => Some(w),
        WindowChoice::Recommended => match mean_activity_duration(traces.iter().copied()) {
            Some(d) => Some(recommend_window(d)?),
            None => None,
        },
        WindowChoice::DurationTimes(f) => mean_activity_duration(traces.iter().copied()).map(|d| d * f),
    })
}

/// Trains one detector per device type seen with both active and idle windows.
pub fn stage2_train(traces: &[Trace], spec: &LearnerSpec, window: WindowChoice, seed: u64) -> Result<Stage2Model> {
    let mut model = Stage2Model::default();
    for (key, (id, group)) in group_by_identity(traces) {
        let Some(w) = resolve_window(window, &group)? else {
            log::debug!("no activity annotations for {key}; skipping detector");
            continue;
        };
        let (x, y) = stage2_dataset(group.iter().copied(), w)?;
        if !(y.iter().any(|l| l == "1") && y.iter().any(|l| l == "0")) {
            log::debug!("{key}: windows carry a single label; skipping detector");
            continue;
        }
        let classifier = spec.fit(&x, &y, crate::rng::derive_seed(seed, &key))?;
        model.detectors.insert(key, Detector { identity: id, window_s: w, classifier });
    }
    if model.detectors.is_empty() {
        return Err(Error::invalid("no device had both active and idle windows"));
    }
    Ok(model)
}

/// One bit per window of the trace, from the device's detector.
pub fn stage2_detect(t: &Trace, detector: &Detector, window_s: f64) -> Result<TransitionSeries> {
    if (window_s - detector.window_s).abs() > 1e-9 {
        return Err(Error::Model(format!(
            "detector for `{}` uses {} s windows, asked for {} s",
            detector.identity, detector.window_s, window_s
        )));
    }
    let windows = stage2_features(&to_splt(t)?, window_s, &[])?;
    let bits = windows
        .iter()
        .map(|w| Ok(detector.classifier.predict(&w.vector())? == "1"))
        .collect::<Result<_>>()?;
    Ok(TransitionSeries { flow_id: t.meta.flow_id.clone(), window_s, bits })
}

/// Candidate activity segments: maximal runs of 1-windows, with runs
/// separated by a single 0-window merged. Segments without packets are dropped.
pub fn segment_states(t: &Trace, ts: &TransitionSeries) -> Result<Vec<StateSegment>> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, &b) in ts.bits.iter().enumerate() {
        if !b {
            continue;
        }
        match runs.last_mut() {
            Some(r) if i <= r.1 + 2 => r.1 = i,
            _ => runs.push((i, i)),
        }
    }
    if runs.is_empty() {
        return Ok(Vec::new());
    }
    let m = to_splt(t)?;
    Ok(runs
        .into_iter()
        .filter_map(|(a, b)| {
            let (start_s, end_s) = (a as f64 * ts.window_s, (b + 1) as f64 * ts.window_s);
            let packets = m.slice(start_s, end_s);
            (!packets.is_empty()).then(|| StateSegment { flow_id: t.meta.flow_id.clone(), start_s, end_s, packets, label: None })
        })
        .collect())
}

/// Scores a transition series against annotations on a common time grid of
/// step `resolution_s`: an instant is predicted active when its window's bit
/// is set and truly active when a `DeviceActivity` annotation contains it.
/// Unlike per-window scores, this is comparable across window sizes.
pub fn timeline_counts(ts: &TransitionSeries, annotations: &[LabeledInterval], end_s: f64, resolution_s: f64) -> Result<ConfusionCounts> {
    if !(resolution_s.is_finite() && resolution_s > 0.0) {
        return Err(Error::invalid(format!("resolution must be positive, got {resolution_s}")));
    }
    let acts: Vec<&LabeledInterval> = annotations.iter().filter(|a| a.kind == IntervalKind::DeviceActivity).collect();
    let mut c = ConfusionCounts::default();
    let steps = (end_s / resolution_s).ceil() as usize;
    for k in 0..steps {
        let t = k as f64 * resolution_s;
        let w = (t / ts.window_s).floor() as usize;
        let pred = ts.bits.get(w).copied().unwrap_or(false);
        let truth = acts.iter().any(|a| a.contains(t));
        match (pred, truth) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}
