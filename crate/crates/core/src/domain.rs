//! Domain types shared by every stage: packets, traces, labeled intervals and
//! device identities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network address the ZigBee coordinator (hub) always uses.
pub const ZIGBEE_COORDINATOR: &str = "0x0000";

/// BLE advertising channels.
pub const BLE_ADVERTISING_CHANNELS: [u8; 3] = [37, 38, 39];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "I")]
    Incoming,
    #[serde(rename = "O")]
    Outgoing,
}

impl Direction {
    pub fn as_bit(self) -> u8 {
        match self {
            Direction::Incoming => 1,
            Direction::Outgoing => 0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Direction::Incoming => "I",
            Direction::Outgoing => "O",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "I" => Some(Direction::Incoming),
            "O" => Some(Direction::Outgoing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[serde(rename = "wifi")]
    WiFi,
    #[serde(rename = "zigbee")]
    ZigBee,
    #[serde(rename = "ble")]
    Ble,
}

impl Protocol {
    pub fn token(self) -> &'static str {
        match self {
            Protocol::WiFi => "wifi",
            Protocol::ZigBee => "zigbee",
            Protocol::Ble => "ble",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "wifi" => Some(Protocol::WiFi),
            "zigbee" => Some(Protocol::ZigBee),
            "ble" => Some(Protocol::Ble),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Metadata of one observed packet.
///
/// `spoofed` is set only on packets injected by the countermeasure. It is
/// bookkeeping for evaluation: attack stages consume [`crate::traceio::SpltMatrix`]
/// views, which do not carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub direction: Direction,
    pub length: u32,
    pub flow_id: String,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub spoofed: bool,
}

impl PacketRecord {
    pub fn new(timestamp: f64, direction: Direction, length: u32, flow_id: impl Into<String>, protocol: Protocol) -> Self {
        PacketRecord { timestamp, direction, length, flow_id: flow_id.into(), protocol, spoofed: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() || self.timestamp < 0.0 {
            return Err(Error::invalid(format!("timestamp {} must be finite and non-negative", self.timestamp)));
        }
        if self.length == 0 {
            return Err(Error::invalid("packet length must be at least 1 byte"));
        }
        if self.flow_id.is_empty() || self.flow_id.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("bad flow id `{}`", self.flow_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntervalKind {
    DeviceActivity,
    DeviceState,
    UserActivity,
}

impl IntervalKind {
    pub fn token(self) -> &'static str {
        match self {
            IntervalKind::DeviceActivity => "DeviceActivity",
            IntervalKind::DeviceState => "DeviceState",
            IntervalKind::UserActivity => "UserActivity",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "DeviceActivity" => Some(IntervalKind::DeviceActivity),
            "DeviceState" => Some(IntervalKind::DeviceState),
            "UserActivity" => Some(IntervalKind::UserActivity),
            _ => None,
        }
    }
}

/// A ground-truth label over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInterval {
    pub start: f64,
    pub end: f64,
    pub kind: IntervalKind,
    pub label: String,
}

impl LabeledInterval {
    pub fn new(start: f64, end: f64, kind: IntervalKind, label: impl Into<String>) -> Result<Self> {
        let iv = LabeledInterval { start, end, kind, label: label.into() };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start >= self.end {
            return Err(Error::invalid(format!("interval [{}, {}) is empty or not finite", self.start, self.end)));
        }
        if self.label.trim().is_empty() {
            return Err(Error::invalid("interval label must be non-empty"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    /// Half-open overlap test against `[start, end)`.
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && start < self.end
    }
}

/// A device class, unique within a catalog by `<brand, device_type>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceIdentity {
    pub brand: String,
    pub device_type: String,
}

impl DeviceIdentity {
    pub fn new(brand: impl Into<String>, device_type: impl Into<String>) -> Self {
        DeviceIdentity { brand: brand.into(), device_type: device_type.into() }
    }

    /// Parses the `brand/device_type` form produced by `Display`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((b, t)) if !b.is_empty() && !t.is_empty() => Ok(DeviceIdentity::new(b, t)),
            _ => Err(Error::invalid(format!("device identity `{s}` is not of the form brand/type"))),
        }
    }
}

impl fmt::Display for DeviceIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.brand, self.device_type)
    }
}

/// Per-flow device metadata. `brand`/`device_type` are empty when unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceMeta {
    pub flow_id: String,
    pub protocol: Protocol,
    #[serde(default)]
    pub brand: String,
    #[serde(default)]
    pub device_type: String,
}

impl DeviceMeta {
    pub fn identity(&self) -> Option<DeviceIdentity> {
        if self.brand.is_empty() || self.device_type.is_empty() {
            None
        } else {
            Some(DeviceIdentity::new(&self.brand, &self.device_type))
        }
    }

    pub fn is_zigbee_coordinator(&self) -> bool {
        self.protocol == Protocol::ZigBee && self.flow_id == ZIGBEE_COORDINATOR
    }
}

/// A time-ordered packet sequence of one flow (or of a merged group of flows).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<PacketRecord>,
    pub meta: DeviceMeta,
    pub annotations: Vec<LabeledInterval>,
}

impl Trace {
    pub fn new(meta: DeviceMeta) -> Self {
        Trace { records: Vec::new(), meta, annotations: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.records.last().map(|r| r.timestamp)
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.length as u64).sum()
    }

    /// Stable sort by timestamp; returns how many records were out of order.
    pub fn sort_records(&mut self) -> usize {
        let out_of_order = self.records.windows(2).filter(|w| w[1].timestamp < w[0].timestamp).count();
        if out_of_order > 0 {
            self.records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        }
        out_of_order
    }

    pub fn annotations_of(&self, kind: IntervalKind) -> impl Iterator<Item = &LabeledInterval> {
        self.annotations.iter().filter(move |a| a.kind == kind)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            r.validate()?;
        }
        if self.records.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::invalid("trace records are not sorted by timestamp"));
        }
        let end = self.last_timestamp().unwrap_or(0.0);
        for a in &self.annotations {
            a.validate()?;
            if a.start < 0.0 || a.end > end {
                return Err(Error::invalid(format!(
                    "annotation [{}, {}) lies outside [0, {end}]",
                    a.start, a.end
                )));
            }
        }
        Ok(())
    }
}
