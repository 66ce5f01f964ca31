use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{DeviceIdentity, Trace};
use crate::error::{Error, Result};
use crate::features::stage1_features;
use crate::learners::{knn_fit, KnnModel};
use crate::traceio::to_splt;

/// Trained device identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Model {
    pub interval_s: f64,
    pub knn: KnnModel,
    /// Identity reported for ZigBee coordinator flows, which skip the classifier.
    pub hub_identity: DeviceIdentity,
}

fn windows_of(t: &Trace, interval_s: f64) -> Result<Vec<Vec<f64>>> {
    let m = to_splt(t)?;
    Ok(stage1_features(&m, interval_s, None)?
        .into_iter()
        .filter(|w| w.packet_count > 0)
        .map(|w| w.vector())
        .collect())
}

/// Non-empty windows of every labeled, non-coordinator trace.
pub fn stage1_dataset(traces: &[Trace], interval_s: f64) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in traces {
        if t.meta.is_zigbee_coordinator() || t.is_empty() {
            continue;
        }
        let Some(id) = t.meta.identity() else { continue };
        for w in windows_of(t, interval_s)? {
            x.push(w);
            y.push(id.to_string());
        }
    }
    Ok((x, y))
}

pub fn stage1_train(traces: &[Trace], interval_s: f64, k: usize) -> Result<Stage1Model> {
    let (x, y) = stage1_dataset(traces, interval_s)?;
    if x.is_empty() {
        return Err(Error::invalid("no labeled device windows to train on"));
    }
    let hub_identity = traces
        .iter()
        .filter(|t| t.meta.is_zigbee_coordinator())
        .find_map(|t| t.meta.identity())
        .unwrap_or_else(|| DeviceIdentity::new("zigbee", "hub"));
    Ok(Stage1Model { interval_s, knn: knn_fit(&x, &y, k)?, hub_identity })
}

/// Identifies one flow by majority vote over its non-empty windows. Vote
/// ties go to the smaller total neighbour distance, then label order.
pub fn identify_trace(t: &Trace, model: &Stage1Model) -> Result<DeviceIdentity> {
    if t.meta.is_zigbee_coordinator() {
        return Ok(model.hub_identity.clone());
    }
    let windows = windows_of(t, model.interval_s)?;
    let mut tally: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for w in &windows {
        let v = model.knn.predict_detail(w)?;
        let e = tally.entry(v.label).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += v.mean_distance;
    }
    let mut best: Option<(&String, (usize, f64))> = None;
    for (label, &(n, d)) in &tally {
        let better = match best {
            None => true,
            Some((_, (bn, bd))) => n > bn || (n == bn && d < bd),
        };
        if better {
            best = Some((label, (n, d)));
        }
    }
    let (label, _) = best.ok_or_else(|| Error::invalid(format!("flow `{}` has no packets", t.meta.flow_id)))?;
    DeviceIdentity::parse(label)
}

/// Maps every non-empty flow to a device identity. `interval_s` must match
/// the interval the model was trained with.
pub fn stage1_identify(traces: &[Trace], model: &Stage1Model, interval_s: f64) -> Result<BTreeMap<String, DeviceIdentity>> {
    if (interval_s - model.interval_s).abs() > 1e-9 {
        return Err(Error::Model(format!(
            "identification model was trained with interval {} s, asked for {} s",
            model.interval_s, interval_s
        )));
    }
    traces
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| Ok((t.meta.flow_id.clone(), identify_trace(t, model)?)))
        .collect()
}
