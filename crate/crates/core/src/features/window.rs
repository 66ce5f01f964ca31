use serde::{Deserialize, Serialize};

use crate::domain::{IntervalKind, LabeledInterval};
use crate::error::{Error, Result};
use crate::traceio::SpltMatrix;

/// Statistics of one fixed-length time window.
///
/// Empty windows carry sentinels: `mean_len = 0`, `mean_iat = window_len_s`,
/// `dispersion = 0`. A window with a single packet also reports
/// `mean_iat = window_len_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub window_start_s: f64,
    pub window_len_s: f64,
    pub mean_len: f64,
    pub mean_iat: f64,
    pub dispersion: f64,
    pub packet_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl WindowFeatures {
    /// The classifier input: `[mean_len, mean_iat, dispersion]`.
    pub fn vector(&self) -> Vec<f64> {
        vec![self.mean_len, self.mean_iat, self.dispersion]
    }

    pub fn window_end_s(&self) -> f64 {
        self.window_start_s + self.window_len_s
    }
}

pub const WINDOW_FEATURE_NAMES: [&str; 3] = ["mean_len", "mean_iat", "dispersion"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dispersion {
    StdDev,
    MedianAbsDev,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub(crate) fn median_abs_dev(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

/// Number of windows of length `w` needed to place every packet of a trace
/// ending at `end` into a half-open window.
pub fn window_count(end: f64, w: f64) -> usize {
    (end / w).floor() as usize + 1
}

fn windowed(m: &SpltMatrix, w: f64, disp: Dispersion) -> Result<Vec<WindowFeatures>> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::invalid(format!("window length must be positive, got {w}")));
    }
    let n = window_count(m.end_time(), w);
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    for r in &m.rows {
        let idx = ((r.timestamp / w).floor() as usize).min(n - 1);
        buckets[idx].push((r.timestamp, r.length as f64));
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(i, pkts)| {
            let start = i as f64 * w;
            if pkts.is_empty() {
                return WindowFeatures {
                    window_start_s: start,
                    window_len_s: w,
                    mean_len: 0.0,
                    mean_iat: w,
                    dispersion: 0.0,
                    packet_count: 0,
                    label: None,
                };
            }
            let lens: Vec<f64> = pkts.iter().map(|p| p.1).collect();
            let mean_iat = if pkts.len() < 2 {
                w
            } else {
                (pkts[pkts.len() - 1].0 - pkts[0].0) / (pkts.len() - 1) as f64
            };
            WindowFeatures {
                window_start_s: start,
                window_len_s: w,
                mean_len: mean(&lens),
                mean_iat,
                dispersion: match disp {
                    Dispersion::StdDev => population_std(&lens),
                    Dispersion::MedianAbsDev => median_abs_dev(&lens),
                },
                packet_count: pkts.len(),
                label: None,
            }
        })
        .collect())
}

/// Device-identification windows: mean length, mean inter-arrival time and
/// population standard deviation of lengths, each window labeled with
/// `label` when given.
pub fn stage1_features(m: &SpltMatrix, interval_s: f64, label: Option<&str>) -> Result<Vec<WindowFeatures>> {
    let mut out = windowed(m, interval_s, Dispersion::StdDev)?;
    if let Some(l) = label {
        for wf in &mut out {
            wf.label = Some(l.to_string());
        }
    }
    Ok(out)
}

/// Activity-detection windows: as [`stage1_features`] but with the median
/// absolute deviation of lengths, labeled `"1"` when the window overlaps any
/// `DeviceActivity` annotation and `"0"` otherwise.
pub fn stage2_features(m: &SpltMatrix, window_s: f64, annotations: &[LabeledInterval]) -> Result<Vec<WindowFeatures>> {
    let mut out = windowed(m, window_s, Dispersion::MedianAbsDev)?;
    let acts: Vec<&LabeledInterval> = annotations.iter().filter(|a| a.kind == IntervalKind::DeviceActivity).collect();
    for wf in &mut out {
        let active = acts.iter().any(|a| a.overlaps(wf.window_start_s, wf.window_end_s()));
        wf.label = Some(if active { "1" } else { "0" }.to_string());
    }
    Ok(out)
}

/// Window length of a quarter of the activity duration.
pub fn recommend_window(activity_duration_s: f64) -> Result<f64> {
    if !(activity_duration_s.is_finite() && activity_duration_s > 0.0) {
        return Err(Error::invalid(format!("activity duration must be positive, got {activity_duration_s}")));
    }
    Ok(activity_duration_s / 4.0)
}
