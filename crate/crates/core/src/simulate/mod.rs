//! Seeded generator of labeled smart-home traffic.

mod archetype;
mod catalog;
mod generator;
pub mod home;
mod scenario;

pub(crate) use archetype::sample_direction;
pub use archetype::{BurstModel, CountDist, DeviceArchetype, Heartbeat, LengthDist, Quirks};
pub use catalog::{builtin_catalog, Catalog};
pub use generator::{
    generate_device_trace, generate_scenario, state_dataset_traces, DeviceEvent, AWAY, STATE_DATASET_DEVICES,
};
pub use scenario::{
    builtin_scenario, builtin_scenario_json, builtin_scenario_names, ActivityProgram, ArchetypeRef, DeviceSlot, Role,
    ScenarioScript, ScriptEvent,
};
