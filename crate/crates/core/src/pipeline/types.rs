use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::home::HomeLayout;
use crate::simulate::{Role, ScenarioScript};
use crate::traceio::SpltMatrix;

/// Home state at one instant: sensor bits, device bits, controller-active
/// and controller-at-home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time_s: f64,
    pub sensors: Vec<bool>,
    pub devices: Vec<bool>,
    pub controller_active: bool,
    pub controller_home: bool,
}

impl Snapshot {
    /// Flattened observation: sensors, devices, controller-active, at-home.
    pub fn bits(&self) -> Vec<bool> {
        let mut v = Vec::with_capacity(self.sensors.len() + self.devices.len() + 2);
        v.extend(&self.sensors);
        v.extend(&self.devices);
        v.push(self.controller_active);
        v.push(self.controller_home);
        v
    }

    pub fn width(&self) -> usize {
        self.sensors.len() + self.devices.len() + 2
    }
}

/// A stretch of one flow attributed to a single device state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSegment {
    pub flow_id: String,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(skip)]
    pub packets: SpltMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl StateSegment {
    pub fn covers(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// Per-window activity bits for one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSeries {
    pub flow_id: String,
    pub window_s: f64,
    pub bits: Vec<bool>,
}

impl TransitionSeries {
    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(flow_id: &str, window_s: f64, bits: &str) -> Result<Self> {
        let bits = bits
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(Error::invalid(format!("bit string contains `{c}`"))),
            })
            .collect::<Result<_>>()?;
        Ok(TransitionSeries { flow_id: flow_id.to_string(), window_s, bits })
    }
}

/// Where a flow lands in the snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "slot", content = "index", rename_all = "lowercase")]
pub enum Position {
    Sensor(usize),
    Device(usize),
    Controller,
    /// Present in the capture but not part of the snapshot (hubs, background devices).
    Ignored,
}

/// Maps flows to snapshot bits and carries the controller's away spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub sensors: Vec<String>,
    pub devices: Vec<String>,
    pub positions: BTreeMap<String, Position>,
    #[serde(default)]
    pub away: Vec<(f64, f64)>,
}

impl Deployment {
    /// Derives the map from a scenario's placements against a layout.
    /// Controller-role slots feed the M bit; unplaced slots are ignored.
    pub fn from_script(script: &ScenarioScript, layout: &HomeLayout) -> Result<Self> {
        let mut positions = BTreeMap::new();
        for slot in &script.devices {
            let pos = if slot.role == Role::Controller {
                Position::Controller
            } else if let Some(i) = layout.sensors.iter().position(|p| *p == slot.placement) {
                Position::Sensor(i)
            } else if let Some(i) = layout.devices.iter().position(|p| *p == slot.placement) {
                Position::Device(i)
            } else if slot.placement.is_empty() {
                Position::Ignored
            } else {
                return Err(Error::invalid(format!("placement `{}` is not in the layout", slot.placement)));
            };
            positions.insert(slot.flow_id.clone(), pos);
        }
        Ok(Deployment {
            sensors: layout.sensors.clone(),
            devices: layout.devices.clone(),
            positions,
            away: script.away.clone(),
        })
    }

    pub fn width(&self) -> usize {
        self.sensors.len() + self.devices.len() + 2
    }

    pub fn is_away(&self, t: f64) -> bool {
        self.away.iter().any(|&(s, e)| s <= t && t < e)
    }

    pub fn position(&self, flow_id: &str) -> Result<Position> {
        self.positions.get(flow_id).copied().ok_or_else(|| Error::invalid(format!("flow `{flow_id}` is not in the deployment map")))
    }
}
