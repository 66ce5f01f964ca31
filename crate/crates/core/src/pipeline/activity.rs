use serde::{Deserialize, Serialize};

use super::types::{Deployment, Position, Snapshot, StateSegment};
use crate::domain::{IntervalKind, LabeledInterval};
use crate::error::{Error, Result};
use crate::learners::{hmm_fit_supervised, hmm_viterbi, HmmModel};
use crate::metrics::{macro_average, overall_accuracy, per_label_reports, MetricReport};
use crate::simulate::home::IDLE;
use crate::traceio::Capture;

pub const DEFAULT_GRID_S: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Grid times `k * grid_s` strictly below `end_s`.
pub fn grid_times(end_s: f64, grid_s: f64) -> Result<Vec<f64>> {
    if !(grid_s.is_finite() && grid_s > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {grid_s}")));
    }
    let n = (end_s / grid_s).ceil().max(0.0) as usize;
    Ok((0..n).map(|k| k as f64 * grid_s).collect())
}

/// One snapshot per grid time: a placement's bit is set iff one of its
/// flow's segments covers the time; the controller's segments set the
/// active bit and the deployment's away spans clear the at-home bit.
pub fn build_snapshots(segments: &[StateSegment], grid_s: f64, deployment: &Deployment, end_s: f64) -> Result<Vec<Snapshot>> {
    let mut placed = Vec::with_capacity(segments.len());
    for s in segments {
        placed.push((deployment.position(&s.flow_id)?, s));
    }
    Ok(grid_times(end_s, grid_s)?
        .into_iter()
        .map(|t| {
            let mut snap = Snapshot {
                time_s: t,
                sensors: vec![false; deployment.sensors.len()],
                devices: vec![false; deployment.devices.len()],
                controller_active: false,
                controller_home: !deployment.is_away(t),
            };
            for (pos, s) in &placed {
                if !s.covers(t) {
                    continue;
                }
                match *pos {
                    Position::Sensor(i) => snap.sensors[i] = true,
                    Position::Device(i) => snap.devices[i] = true,
                    Position::Controller => snap.controller_active = true,
                    Position::Ignored => {}
                }
            }
            snap
        })
        .collect())
}

/// Annotated device activity of every flow, as unlabeled-packet segments.
pub fn annotated_activity(capture: &Capture) -> Vec<StateSegment> {
    capture
        .traces
        .values()
        .flat_map(|t| {
            t.annotations_of(IntervalKind::DeviceActivity).map(|a| StateSegment {
                flow_id: t.meta.flow_id.clone(),
                start_s: a.start,
                end_s: a.end,
                packets: Default::default(),
                label: Some(a.label.clone()),
            })
        })
        .collect()
}

/// The user activity covering each time, or idle.
pub fn activity_labels_at(times: &[f64], activities: &[LabeledInterval]) -> Vec<String> {
    times
        .iter()
        .map(|&t| {
            activities
                .iter()
                .find(|a| a.kind == IntervalKind::UserActivity && a.start <= t && t < a.end)
                .map_or_else(|| IDLE.to_string(), |a| a.label.clone())
        })
        .collect()
}

/// Collapses a decoded label sequence into spans, skipping idle stretches.
pub fn label_runs(snapshots: &[Snapshot], labels: &[String], grid_s: f64) -> Vec<LabeledInterval> {
    let mut out: Vec<LabeledInterval> = Vec::new();
    for (s, l) in snapshots.iter().zip(labels) {
        if l == IDLE {
            continue;
        }
        match out.last_mut() {
            Some(last) if &last.label == l && (last.end - s.time_s).abs() < 1e-9 => last.end = s.time_s + grid_s,
            _ => out.push(LabeledInterval {
                start: s.time_s,
                end: s.time_s + grid_s,
                kind: IntervalKind::UserActivity,
                label: l.clone(),
            }),
        }
    }
    out
}

/// Trained activity decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage4Model {
    pub grid_s: f64,
    pub hmm: HmmModel,
}

pub fn stage4_train(sequences: &[(Vec<Snapshot>, Vec<String>)], states: &[String], alpha: f64, grid_s: f64) -> Result<Stage4Model> {
    let seqs: Vec<(Vec<Vec<bool>>, Vec<String>)> =
        sequences.iter().map(|(s, l)| (s.iter().map(Snapshot::bits).collect(), l.clone())).collect();
    Ok(Stage4Model { grid_s, hmm: hmm_fit_supervised(&seqs, states, alpha)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage4Output {
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// One-vs-rest report per activity label present in truth or prediction.
    #[serde(default)]
    pub reports: Vec<(String, MetricReport)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_report: Option<MetricReport>,
}

/// Viterbi-decodes the snapshot sequence; scores it when truth is given.
pub fn stage4_infer(snapshots: &[Snapshot], model: &HmmModel, truth: Option<&[String]>) -> Result<Stage4Output> {
    let obs: Vec<Vec<bool>> = snapshots.iter().map(Snapshot::bits).collect();
    let labels = hmm_viterbi(model, &obs)?;
    let mut out = Stage4Output { labels, accuracy: None, reports: Vec::new(), macro_report: None };
    if let Some(truth) = truth {
        if truth.len() != out.labels.len() {
            return Err(Error::DimensionMismatch { expected: out.labels.len(), got: truth.len() });
        }
        if !truth.is_empty() {
            out.accuracy = Some(overall_accuracy(&out.labels, truth)?);
            out.reports = per_label_reports(&out.labels, truth)?;
            let reps: Vec<MetricReport> = out.reports.iter().map(|(_, r)| r.clone()).collect();
            out.macro_report = Some(macro_average(&reps)?);
        }
    }
    Ok(out)
}
