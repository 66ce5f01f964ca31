use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::detect::group_by_identity;
use super::types::StateSegment;
use crate::domain::{DeviceIdentity, IntervalKind, Trace};
use crate::error::{Error, Result};
use crate::features::{select_features, ts_features, SelectionMask, TS_DIM};
use crate::learners::{forest_fit, forest_predict, ForestModel, ForestParams, LabelSet};
use crate::traceio::to_splt;

/// How training segments are cut from annotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentAlign {
    /// Exactly the annotated span, end inclusive.
    Raw,
    /// Widened to whole windows of this length, as the detector would cut it.
    Window(f64),
}

/// One segment per `DeviceActivity` annotation, labeled with the action.
pub fn annotated_segments(t: &Trace, align: SegmentAlign) -> Result<Vec<StateSegment>> {
    if t.is_empty() {
        return Ok(Vec::new());
    }
    let m = to_splt(t)?;
    Ok(t.annotations_of(IntervalKind::DeviceActivity)
        .filter_map(|a| {
            let (start_s, end_s, packets) = match align {
                SegmentAlign::Raw => (a.start, a.end, m.slice(a.start, next_up(a.end))),
                SegmentAlign::Window(w) => {
                    let s = (a.start / w).floor() * w;
                    let e = ((a.end / w).floor() + 1.0) * w;
                    (s, e, m.slice(s, e))
                }
            };
            (!packets.is_empty()).then(|| StateSegment {
                flow_id: t.meta.flow_id.clone(),
                start_s,
                end_s,
                packets,
                label: Some(a.label.clone()),
            })
        })
        .collect())
}

fn next_up(x: f64) -> f64 {
    x + x.abs().max(1.0) * f64::EPSILON * 4.0
}

/// Feature rows and labels for labeled segments.
pub fn stage3_dataset(segments: &[StateSegment]) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut x = Vec::with_capacity(segments.len());
    let mut y = Vec::with_capacity(segments.len());
    for s in segments {
        let label = s.label.clone().ok_or_else(|| Error::invalid("training segment without a label"))?;
        x.push(ts_features(&s.packets).0);
        y.push(label);
    }
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatePredictor {
    Forest(ForestModel),
    /// The device was only ever seen in one state.
    Constant { label: String },
}

/// State classifier for one device type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateClassifier {
    pub identity: DeviceIdentity,
    pub mask: SelectionMask,
    pub predictor: StatePredictor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stage3Model {
    pub classifiers: BTreeMap<String, StateClassifier>,
}

impl Stage3Model {
    pub fn classifier(&self, id: &DeviceIdentity) -> Result<&StateClassifier> {
        self.classifiers.get(&id.to_string()).ok_or_else(|| Error::Model(format!("no state classifier for `{id}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage3Params {
    pub forest: ForestParams,
    /// Apply importance-based feature selection before the final fit.
    pub select: bool,
}

impl Default for Stage3Params {
    fn default() -> Self {
        Stage3Params { forest: ForestParams::default(), select: true }
    }
}

/// Fits a state classifier on labeled segments of one device type.
pub fn fit_state_classifier(
    identity: DeviceIdentity,
    segments: &[StateSegment],
    params: &Stage3Params,
    seed: u64,
) -> Result<StateClassifier> {
    let (x, y) = stage3_dataset(segments)?;
    if x.is_empty() {
        return Err(Error::invalid(format!("no labeled segments for `{identity}`")));
    }
    let labels = LabelSet::from_labels(&y);
    if labels.len() < 2 {
        return Ok(StateClassifier {
            identity,
            mask: SelectionMask::identity(TS_DIM),
            predictor: StatePredictor::Constant { label: labels.decode(0).to_string() },
        });
    }
    let mask = if params.select && x.len() >= 10 {
        select_features(&x, &y, crate::rng::derive_seed(seed, "selection"))?
    } else {
        SelectionMask::identity(TS_DIM)
    };
    let xm: Vec<Vec<f64>> = x.iter().map(|r| mask.apply(r)).collect::<Result<_>>()?;
    let forest = forest_fit(&xm, &y, &params.forest, seed)?;
    Ok(StateClassifier { identity, mask, predictor: StatePredictor::Forest(forest) })
}

/// Trains one classifier per device type. `windows` maps a device key to the
/// detector window used to cut training segments; unmapped devices train on
/// raw annotation spans.
pub fn stage3_train(
    traces: &[Trace],
    windows: &BTreeMap<String, f64>,
    params: &Stage3Params,
    seed: u64,
) -> Result<Stage3Model> {
    let mut model = Stage3Model::default();
    for (key, (id, group)) in group_by_identity(traces) {
        let align = windows.get(&key).map_or(SegmentAlign::Raw, |&w| SegmentAlign::Window(w));
        let mut segs = Vec::new();
        for t in group {
            segs.extend(annotated_segments(t, align)?);
        }
        if segs.is_empty() {
            continue;
        }
        let c = fit_state_classifier(id, &segs, params, crate::rng::derive_seed(seed, &key))?;
        model.classifiers.insert(key, c);
    }
    if model.classifiers.is_empty() {
        return Err(Error::invalid("no annotated device activity to train on"));
    }
    Ok(model)
}

pub fn classify_segment(seg: &StateSegment, c: &StateClassifier) -> Result<String> {
    match &c.predictor {
        StatePredictor::Constant { label } => Ok(label.clone()),
        StatePredictor::Forest(f) => {
            if seg.packets.is_empty() {
                return Err(Error::invalid("cannot classify a segment without packets"));
            }
            forest_predict(f, &c.mask.apply(&ts_features(&seg.packets).0)?)
        }
    }
}

/// Labels each segment with the predicted device state.
pub fn stage3_classify(segments: &[StateSegment], c: &StateClassifier) -> Result<Vec<StateSegment>> {
    segments
        .iter()
        .map(|s| Ok(StateSegment { label: Some(classify_segment(s, c)?), ..s.clone() }))
        .collect()
}
