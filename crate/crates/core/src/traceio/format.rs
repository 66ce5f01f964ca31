use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Capture;
use crate::domain::{DeviceMeta, Direction, IntervalKind, LabeledInterval, PacketRecord, Protocol, Trace};
use crate::error::{Error, Result};

pub const CAPTURE_FILE: &str = "capture.trace";
pub const ACTIVITIES_FILE: &str = "activities.ann";
pub const ANNOTATION_DIR: &str = "annotations";

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum JsonLine {
    Device { device: DeviceMeta },
    Packet(PacketRecord),
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_trace_file(path: impl AsRef<Path>) -> Result<Capture> {
    let path = path.as_ref();
    let text = read(path)?;
    if is_jsonl(path) {
        parse_trace_jsonl(&text, &path.display().to_string())
    } else {
        parse_trace_str(&text, &path.display().to_string())
    }
}

struct Builder<'a> {
    name: &'a str,
    devices: BTreeMap<String, DeviceMeta>,
    records: BTreeMap<String, Vec<PacketRecord>>,
}

impl<'a> Builder<'a> {
    fn new(name: &'a str) -> Self {
        Builder { name, devices: BTreeMap::new(), records: BTreeMap::new() }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.name.to_string(), line, msg: msg.into() }
    }

    fn device(&mut self, line: usize, meta: DeviceMeta) -> Result<()> {
        if let Some(prev) = self.devices.get(&meta.flow_id) {
            if prev != &meta {
                return Err(self.err(line, format!("conflicting device metadata for flow `{}`", meta.flow_id)));
            }
        }
        self.devices.insert(meta.flow_id.clone(), meta);
        Ok(())
    }

    fn packet(&mut self, line: usize, rec: PacketRecord) -> Result<()> {
        rec.validate().map_err(|e| self.err(line, e.to_string()))?;
        let first_proto = self.records.get(&rec.flow_id).and_then(|v| v.first()).map(|r| r.protocol);
        let declared = self.devices.get(&rec.flow_id).map(|d| d.protocol);
        if let Some(p) = first_proto.or(declared) {
            if p != rec.protocol {
                return Err(self.err(line, format!("flow `{}` mixes protocols {} and {}", rec.flow_id, p, rec.protocol)));
            }
        }
        self.records.entry(rec.flow_id.clone()).or_default().push(rec);
        Ok(())
    }

    fn finish(self) -> Capture {
        let mut capture = Capture::default();
        let mut reordered = 0;
        let Builder { mut devices, records, .. } = self;
        for (flow, recs) in records {
            let meta = devices.remove(&flow).unwrap_or_else(|| DeviceMeta {
                flow_id: flow.clone(),
                protocol: recs[0].protocol,
                brand: String::new(),
                device_type: String::new(),
            });
            let mut t = Trace::new(meta);
            t.records = recs;
            reordered += t.sort_records();
            capture.traces.insert(flow, t);
        }
        // declared devices without packets still carry metadata
        for (flow, meta) in devices {
            capture.traces.insert(flow, Trace::new(meta));
        }
        capture.refresh_meta();
        capture.meta.reordered = reordered;
        if reordered > 0 {
            log::warn!("re-sorted {reordered} out-of-order records");
        }
        capture
    }
}

/// Parses the line format. `name` is used in error messages.
pub fn parse_trace_str(text: &str, name: &str) -> Result<Capture> {
    let mut b = Builder::new(name);
    let mut epoch = 0.0;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix("#!") {
            let toks: Vec<&str> = directive.split_whitespace().collect();
            match toks.as_slice() {
                ["device", flow, proto, brand, dtype] => {
                    let protocol = Protocol::from_token(proto).ok_or_else(|| b.err(lineno, format!("unknown protocol `{proto}`")))?;
                    let meta = DeviceMeta {
                        flow_id: flow.to_string(),
                        protocol,
                        brand: if *brand == "-" { String::new() } else { brand.to_string() },
                        device_type: if *dtype == "-" { String::new() } else { dtype.to_string() },
                    };
                    b.device(lineno, meta)?;
                }
                ["epoch", t0] => {
                    epoch = t0.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| b.err(lineno, format!("bad epoch `{t0}`")))?;
                }
                _ => return Err(b.err(lineno, format!("unknown directive `{line}`"))),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 && toks.len() != 6 {
            return Err(b.err(lineno, format!("expected 5 or 6 fields, found {}", toks.len())));
        }
        let ts: f64 = toks[0].parse().map_err(|_| b.err(lineno, format!("bad timestamp `{}`", toks[0])))?;
        let direction = Direction::from_token(toks[1]).ok_or_else(|| b.err(lineno, format!("bad direction `{}`", toks[1])))?;
        let length: u32 = toks[2].parse().map_err(|_| b.err(lineno, format!("bad length `{}`", toks[2])))?;
        let protocol = Protocol::from_token(toks[4]).ok_or_else(|| b.err(lineno, format!("bad protocol `{}`", toks[4])))?;
        let spoofed = match toks.get(5) {
            None => false,
            Some(&"spoofed") => true,
            Some(other) => return Err(b.err(lineno, format!("unexpected trailing field `{other}`"))),
        };
        let rec = PacketRecord { timestamp: ts - epoch, direction, length, flow_id: toks[3].to_string(), protocol, spoofed };
        b.packet(lineno, rec)?;
    }
    Ok(b.finish())
}

fn parse_trace_jsonl(text: &str, name: &str) -> Result<Capture> {
    let mut b = Builder::new(name);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<JsonLine>(line).map_err(|e| b.err(i + 1, e.to_string()))? {
            JsonLine::Device { device } => b.device(i + 1, device)?,
            JsonLine::Packet(p) => b.packet(i + 1, p)?,
        }
    }
    Ok(b.finish())
}

/// Records of all flows merged by timestamp; ties keep flow order, then
/// in-flow order.
fn merged_records(c: &Capture) -> Vec<&PacketRecord> {
    let mut all: Vec<&PacketRecord> = c.traces.values().flat_map(|t| t.records.iter()).collect();
    all.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    all
}

fn dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

pub fn serialize_capture(c: &Capture) -> String {
    let mut out = String::new();
    for t in c.traces.values() {
        let m = &t.meta;
        writeln!(out, "#!device {} {} {} {}", m.flow_id, m.protocol, dash(&m.brand), dash(&m.device_type)).unwrap();
    }
    for r in merged_records(c) {
        write!(out, "{} {} {} {} {}", r.timestamp, r.direction.token(), r.length, r.flow_id, r.protocol).unwrap();
        if r.spoofed {
            out.push_str(" spoofed");
        }
        out.push('\n');
    }
    out
}

pub fn serialize_capture_jsonl(c: &Capture) -> String {
    let mut out = String::new();
    for t in c.traces.values() {
        out.push_str(&serde_json::to_string(&JsonLine::Device { device: t.meta.clone() }).unwrap());
        out.push('\n');
    }
    for r in merged_records(c) {
        out.push_str(&serde_json::to_string(r).unwrap());
        out.push('\n');
    }
    out
}

pub fn write_capture(c: &Capture, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = if is_jsonl(path) { serialize_capture_jsonl(c) } else { serialize_capture(c) };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<Vec<LabeledInterval>> {
    let path = path.as_ref();
    let text = read(path)?;
    let name = path.display().to_string();
    if is_jsonl(path) {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let iv: LabeledInterval =
                serde_json::from_str(line).map_err(|e| Error::Parse { path: name.clone(), line: i + 1, msg: e.to_string() })?;
            iv.validate().map_err(|e| Error::Parse { path: name.clone(), line: i + 1, msg: e.to_string() })?;
            out.push(iv);
        }
        Ok(out)
    } else {
        parse_annotations_str(&text, &name)
    }
}

pub fn parse_annotations_str(text: &str, name: &str) -> Result<Vec<LabeledInterval>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { path: name.to_string(), line: i + 1, msg };
        let mut it = line.splitn(4, char::is_whitespace);
        let (Some(s), Some(e), Some(k), Some(label)) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(err("expected `<start> <end> <kind> <label>`".into()));
        };
        let start: f64 = s.parse().map_err(|_| err(format!("bad start `{s}`")))?;
        let end: f64 = e.parse().map_err(|_| err(format!("bad end `{e}`")))?;
        let kind = IntervalKind::from_token(k).ok_or_else(|| err(format!("bad kind `{k}`")))?;
        out.push(LabeledInterval::new(start, end, kind, label.trim()).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn serialize_annotations(items: &[LabeledInterval]) -> String {
    let mut out = String::new();
    for a in items {
        writeln!(out, "{} {} {} {}", a.start, a.end, a.kind.token(), a.label).unwrap();
    }
    out
}

pub fn serialize_annotations_jsonl(items: &[LabeledInterval]) -> String {
    items.iter().map(|a| serde_json::to_string(a).unwrap() + "\n").collect()
}

pub fn write_annotations(items: &[LabeledInterval], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = if is_jsonl(path) { serialize_annotations_jsonl(items) } else { serialize_annotations(items) };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `capture.trace`, one `annotations/<flow_id>.ann` per annotated
/// flow, and `activities.ann` for capture-level user activities.
pub fn save_capture_dir(c: &Capture, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let ann_dir = dir.join(ANNOTATION_DIR);
    fs::create_dir_all(&ann_dir).map_err(|e| Error::io(&ann_dir, e))?;
    write_capture(c, dir.join(CAPTURE_FILE))?;
    for t in c.traces.values().filter(|t| !t.annotations.is_empty()) {
        write_annotations(&t.annotations, ann_dir.join(format!("{}.ann", t.meta.flow_id)))?;
    }
    write_annotations(&c.activities, dir.join(ACTIVITIES_FILE))
}

/// Inverse of [`save_capture_dir`]. Missing annotation files are treated as
/// "no labels".
pub fn load_capture_dir(dir: impl AsRef<Path>) -> Result<Capture> {
    let dir = dir.as_ref();
    let mut c = parse_trace_file(dir.join(CAPTURE_FILE))?;
    for t in c.traces.values_mut() {
        let p = dir.join(ANNOTATION_DIR).join(format!("{}.ann", t.meta.flow_id));
        if p.exists() {
            t.annotations = parse_annotations(&p)?;
        }
    }
    let p = dir.join(ACTIVITIES_FILE);
    if p.exists() {
        c.activities = parse_annotations(&p)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_line_file() {
        let c = parse_trace_str("0.0 I 100 a wifi\n0.5 O 60 a wifi\n1.0 I 80 a wifi\n", "t").unwrap();
        assert_eq!(c.traces.len(), 1);
        assert_eq!(c.traces["a"].len(), 3);
        assert_eq!(c.meta.total_packets, 3);
        assert_eq!(c.meta.total_bytes, 240);
        assert_eq!(c.meta.duration_s, 1.0);
    }

    #[test]
    fn bad_direction_reports_line() {
        let err = parse_trace_str("0.0 I 100 a wifi\n0.5 2 60 a wifi\n", "t").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_fields_rejected() {
        for bad in ["x I 1 a wifi", "0 I 0 a wifi", "0 I -3 a wifi", "0 I 1 a lte", "-1 I 1 a wifi", "0 I 1 a wifi extra", "0 I 1"] {
            assert!(parse_trace_str(bad, "t").is_err(), "{bad}");
        }
    }

    #[test]
    fn interleaved_flows_are_grouped() {
        let c = parse_trace_str("0 I 10 A wifi\n1 O 10 B wifi\n2 I 10 A wifi\n", "t").unwrap();
        assert_eq!(c.traces["A"].len(), 2);
        assert_eq!(c.traces["B"].len(), 1);
    }

    #[test]
    fn unsorted_input_is_normalized() {
        let c = parse_trace_str("1.0 I 10 A wifi\n0.5 I 20 A wifi\n0.5 O 30 A wifi\n", "t").unwrap();
        let lens: Vec<u32> = c.traces["A"].records.iter().map(|r| r.length).collect();
        assert_eq!(lens, vec![20, 30, 10]);
        assert_eq!(c.meta.reordered, 1);
    }

    #[test]
    fn epoch_directive_rebases() {
        let c = parse_trace_str("#!epoch 1000\n1000.5 I 10 A wifi\n", "t").unwrap();
        assert_eq!(c.traces["A"].records[0].timestamp, 0.5);
    }

    #[test]
    fn device_directive_and_spoofed_flag() {
        let text = "#!device 0x0000 zigbee SmartThings hub\n0.25 O 45 0x0000 zigbee spoofed\n";
        let c = parse_trace_str(text, "t").unwrap();
        let t = &c.traces["0x0000"];
        assert!(t.meta.is_zigbee_coordinator());
        assert_eq!(t.meta.brand, "SmartThings");
        assert!(t.records[0].spoofed);
        assert_eq!(serialize_capture(&c), text);
    }

    #[test]
    fn mixed_protocols_in_one_flow_rejected() {
        assert!(parse_trace_str("0 I 10 A wifi\n1 I 10 A ble\n", "t").is_err());
    }

    #[test]
    fn jsonl_matches_line_format() {
        let c = parse_trace_str("#!device a wifi TPLink plug\n0 I 10 a wifi\n0.5 O 20 a wifi spoofed\n", "t").unwrap();
        let back = parse_trace_jsonl(&serialize_capture_jsonl(&c), "t").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn annotations_parse_with_spaces_in_label() {
        let a = parse_annotations_str("0 5 DeviceActivity live view\n", "a").unwrap();
        assert_eq!(a[0].label, "live view");
        assert_eq!(parse_annotations_str(&serialize_annotations(&a), "a").unwrap(), a);
        assert!(parse_annotations_str("5 1 DeviceState ON\n", "a").is_err());
        assert!(parse_annotations_str("0 1 Bogus ON\n", "a").is_err());
    }
}
