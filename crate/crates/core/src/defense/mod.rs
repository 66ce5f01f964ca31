//! Spoofed-traffic injection and the harness measuring how much it degrades
//! activity detection and state classification.

mod harness;
mod inject;

pub use harness::{
    archetypes_by_flow, defense_data, evaluate_defense, evaluate_defense_on, evaluate_rate, is_degrading,
    validate_rates, CurvePoint, DefenseConfig, DefenseData, DefenseStage, DegradationCurve, DECOY,
};
pub use inject::{inject_spoof, inject_spoof_spans, strip_spoofed, InjectionPolicy, Mimicry, SpoofSpan, MAX_RATE};
