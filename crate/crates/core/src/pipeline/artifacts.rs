//! JSONL forms of the stage outputs, so a run can resume from any stage.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::types::{Snapshot, StateSegment, TransitionSeries};
use crate::error::{Error, Result};
use crate::traceio::{to_splt, Capture};

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl<T: DeserializeOwned>(text: &str, name: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: name.to_string(), line: i + 1, msg: e.to_string() })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_jsonl(items)?).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_jsonl(&text, &path.display().to_string())
}

#[derive(Serialize, Deserialize)]
struct SeriesLine {
    flow_id: String,
    window_s: f64,
    bits: String,
}

pub fn series_to_jsonl(series: &[TransitionSeries]) -> Result<String> {
    let lines: Vec<SeriesLine> = series
        .iter()
        .map(|s| SeriesLine { flow_id: s.flow_id.clone(), window_s: s.window_s, bits: s.bit_string() })
        .collect();
    to_jsonl(&lines)
}

pub fn series_from_jsonl(text: &str, name: &str) -> Result<Vec<TransitionSeries>> {
    from_jsonl::<SeriesLine>(text, name)?
        .into_iter()
        .map(|l| TransitionSeries::from_bit_string(&l.flow_id, l.window_s, &l.bits))
        .collect()
}

fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            _ => Err(Error::invalid(format!("bit string contains `{c}`"))),
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    time_s: f64,
    #[serde(rename = "S")]
    sensors: String,
    #[serde(rename = "D")]
    devices: String,
    #[serde(rename = "M")]
    controller_active: u8,
    #[serde(rename = "L")]
    controller_home: u8,
}

pub fn snapshots_to_jsonl(snaps: &[Snapshot]) -> Result<String> {
    let lines: Vec<SnapshotLine> = snaps
        .iter()
        .map(|s| SnapshotLine {
            time_s: s.time_s,
            sensors: bit_string(&s.sensors),
            devices: bit_string(&s.devices),
            controller_active: s.controller_active as u8,
            controller_home: s.controller_home as u8,
        })
        .collect();
    to_jsonl(&lines)
}

pub fn snapshots_from_jsonl(text: &str, name: &str) -> Result<Vec<Snapshot>> {
    from_jsonl::<SnapshotLine>(text, name)?
        .into_iter()
        .map(|l| {
            Ok(Snapshot {
                time_s: l.time_s,
                sensors: parse_bits(&l.sensors)?,
                devices: parse_bits(&l.devices)?,
                controller_active: l.controller_active != 0,
                controller_home: l.controller_home != 0,
            })
        })
        .collect()
}

/// Re-slices each reloaded segment's packets from the capture.
pub fn attach_packets(segments: &mut [StateSegment], capture: &Capture) -> Result<()> {
    for s in segments {
        let t = capture
            .traces
            .get(&s.flow_id)
            .ok_or_else(|| Error::invalid(format!("segment refers to unknown flow `{}`", s.flow_id)))?;
        s.packets = to_splt(t)?.slice(s.start_s, s.end_s);
    }
    Ok(())
}
