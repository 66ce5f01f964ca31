//! Reading, writing and reshaping packet traces.
//!
//! The canonical on-disk form is a whitespace-separated line format, one
//! packet per line:
//!
//! ```text
//! <timestamp_s> <I|O> <length_bytes> <flow_id> <wifi|zigbee|ble> [spoofed]
//! ```
//!
//! Lines starting with `#` are comments, except two directives:
//! `#!device <flow_id> <protocol> <brand> <device_type>` attaches device
//! metadata to a flow, and `#!epoch <t0>` declares an absolute origin that is
//! subtracted from every timestamp. Files ending in `.jsonl` hold one JSON
//! object per line with the same field names instead.
//!
//! Annotation sidecars use `<start_s> <end_s> <kind> <label>`, where the label
//! is the rest of the line.

mod format;
mod splt;

pub use format::{
    load_capture_dir, parse_annotations, parse_annotations_str, parse_trace_file, parse_trace_str,
    save_capture_dir, serialize_annotations, serialize_annotations_jsonl, serialize_capture,
    serialize_capture_jsonl, write_annotations, write_capture, CAPTURE_FILE, ACTIVITIES_FILE, ANNOTATION_DIR,
};
pub use splt::{split_flows, to_splt, SpltMatrix, SpltRow, SplitBy};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{LabeledInterval, Trace};

/// Capture-level bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    /// Largest timestamp in the capture.
    pub duration_s: f64,
    pub total_packets: usize,
    pub total_bytes: u64,
    /// Records that had to be moved by the stable re-sort at parse time.
    pub reordered: usize,
}

/// A set of per-flow traces plus capture-wide user-activity annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Capture {
    pub traces: BTreeMap<String, Trace>,
    pub meta: CaptureMeta,
    pub activities: Vec<LabeledInterval>,
}

impl Capture {
    pub fn from_traces(traces: impl IntoIterator<Item = Trace>) -> Self {
        let mut c = Capture::default();
        for t in traces {
            c.traces.insert(t.meta.flow_id.clone(), t);
        }
        c.refresh_meta();
        c
    }

    /// Recomputes duration and totals from the traces.
    pub fn refresh_meta(&mut self) {
        self.meta.total_packets = self.traces.values().map(Trace::len).sum();
        self.meta.total_bytes = self.traces.values().map(Trace::total_bytes).sum();
        self.meta.duration_s = self.traces.values().filter_map(Trace::last_timestamp).fold(0.0, f64::max);
    }

    pub fn is_empty(&self) -> bool {
        self.meta.total_packets == 0
    }

    /// Shifts every timestamp (and annotation) so the earliest packet is at 0.
    pub fn rebase_to_first_packet(&mut self) {
        let t0 = self
            .traces
            .values()
            .filter_map(|t| t.records.first().map(|r| r.timestamp))
            .fold(f64::INFINITY, f64::min);
        if !t0.is_finite() || t0 == 0.0 {
            return;
        }
        for t in self.traces.values_mut() {
            for r in &mut t.records {
                r.timestamp -= t0;
            }
            for a in &mut t.annotations {
                a.start = (a.start - t0).max(0.0);
                a.end -= t0;
            }
        }
        for a in &mut self.activities {
            a.start = (a.start - t0).max(0.0);
            a.end -= t0;
        }
        self.refresh_meta();
    }
}
