use serde::{Deserialize, Serialize};

use super::{Catalog, DeviceArchetype};
use crate::domain::{DeviceIdentity, IntervalKind, LabeledInterval};
use crate::error::{Error, Result};

/// What a device contributes to the home snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sensor,
    Device,
    Controller,
    Hub,
    #[default]
    Other,
}

/// Either `"brand/device_type"` looked up in a catalog, or an inline archetype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchetypeRef {
    Named(String),
    Inline(Box<DeviceArchetype>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSlot {
    pub flow_id: String,
    pub archetype: ArchetypeRef,
    #[serde(default)]
    pub placement: String,
    #[serde(default)]
    pub role: Role,
    /// Action emitted when an activity step marks this placement active.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub time_s: f64,
    pub device: usize,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

/// Random activity schedule expanded into events by
/// [`super::home::expand_program`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProgram {
    pub activities: usize,
    /// Idle gap between activities, uniform in `[min, max]` seconds.
    pub gap_s: (f64, f64),
    pub step_s: f64,
    #[serde(default = "default_start")]
    pub start_s: f64,
    /// Labels to draw from; empty means every built-in template.
    #[serde(default)]
    pub labels: Vec<String>,
    /// Extra device actions sprinkled during idle gaps, per device slot
    /// without a placement, one every `background_every_s` seconds on average.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_every_s: Option<f64>,
}

fn default_start() -> f64 {
    10.0
}

/// A smart-home scenario: devices, timed actions and user-activity labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub duration_s: f64,
    pub devices: Vec<DeviceSlot>,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
    /// Spans during which the controller is away from home.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub away: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<ActivityProgram>,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve_with(&self, catalog: &Catalog) -> Result<Vec<DeviceArchetype>> {
        self.devices
            .iter()
            .map(|slot| match &slot.archetype {
                ArchetypeRef::Inline(a) => Ok((**a).clone()),
                ArchetypeRef::Named(name) => {
                    let id = DeviceIdentity::parse(name)?;
                    catalog.find(&id).cloned().ok_or_else(|| Error::invalid(format!("unknown archetype `{name}`")))
                }
            })
            .collect()
    }

    pub fn resolve(&self) -> Result<Vec<DeviceArchetype>> {
        self.resolve_with(&Catalog::builtin())
    }

    pub fn validate_events(&self, resolved: &[DeviceArchetype]) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("scenario duration must be positive"));
        }
        let mut flows = std::collections::BTreeSet::new();
        for slot in &self.devices {
            if !flows.insert(slot.flow_id.as_str()) {
                return Err(Error::invalid(format!("duplicate flow id `{}`", slot.flow_id)));
            }
        }
        for e in &self.events {
            let arch = resolved
                .get(e.device)
                .ok_or_else(|| Error::invalid(format!("event refers to device {} of {}", e.device, resolved.len())))?;
            if !(0.0..=self.duration_s).contains(&e.time_s) {
                return Err(Error::invalid(format!("event at {} outside [0, {}]", e.time_s, self.duration_s)));
            }
            arch.action(&e.action)?;
        }
        Ok(())
    }

    /// Groups time-ordered events carrying the same activity label into spans;
    /// a run continues while each next event starts before the span's end.
    pub fn activity_spans(&self, resolved: &[DeviceArchetype]) -> Result<Vec<LabeledInterval>> {
        let mut evs: Vec<&ScriptEvent> = self.events.iter().filter(|e| e.activity.is_some()).collect();
        evs.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let mut spans: Vec<LabeledInterval> = Vec::new();
        for e in evs {
            let label = e.activity.as_deref().unwrap();
            let end = (e.time_s + resolved[e.device].action(&e.action)?.duration_s).min(self.duration_s);
            match spans.last_mut() {
                Some(last) if last.label == label && e.time_s <= last.end => last.end = last.end.max(end),
                _ => spans.push(LabeledInterval::new(e.time_s, end, IntervalKind::UserActivity, label)?),
            }
        }
        Ok(spans)
    }
}

const BUILTIN_SCENARIOS: [(&str, &str); 3] = [
    ("benchmark", include_str!("../../data/scenarios/benchmark.json")),
    ("walking", include_str!("../../data/scenarios/walking.json")),
    ("defense", include_str!("../../data/scenarios/defense.json")),
];

/// Names of the scenarios shipped with the crate.
pub fn builtin_scenario_names() -> Vec<&'static str> {
    BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// The shipped scenario called `name`, as raw JSON.
pub fn builtin_scenario_json(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioScript> {
    let text = builtin_scenario_json(name).ok_or_else(|| Error::invalid(format!("no built-in scenario `{name}`")))?;
    ScenarioScript::from_json(text)
}
