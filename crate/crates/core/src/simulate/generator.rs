use std::collections::BTreeMap;

use rand::Rng;

use super::archetype::{sample_direction, DEFAULT_ADVERTISING_LENGTH, DEFAULT_REPEATER_LENGTH};
use super::scenario::ScenarioScript;
use super::DeviceArchetype;
use crate::domain::{DeviceMeta, Direction, IntervalKind, LabeledInterval, PacketRecord, Trace};
use crate::error::{Error, Result};
use crate::rng;
use crate::traceio::Capture;

/// One scheduled device action.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEvent {
    pub time_s: f64,
    pub action: String,
}

impl DeviceEvent {
    pub fn new(time_s: f64, action: impl Into<String>) -> Self {
        DeviceEvent { time_s, action: action.into() }
    }
}

/// Generates one device's trace: heartbeats over the whole duration, one burst
/// per event, and protocol quirk packets.
///
/// Heartbeats, bursts and quirks draw from separate streams keyed by
/// `(seed, flow_id)`, so adding an event leaves the heartbeat sequence intact.
/// Annotations: one `DeviceActivity` per event (burst span) and `DeviceState`
/// intervals between bursts, all clipped to the last packet.
pub fn generate_device_trace(
    a: &DeviceArchetype,
    flow_id: &str,
    events: &[DeviceEvent],
    duration_s: f64,
    seed: u64,
) -> Result<Trace> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
    }
    a.validate()?;
    if events.windows(2).any(|w| w[1].time_s < w[0].time_s) {
        return Err(Error::invalid("events must be sorted by time"));
    }
    for e in events {
        if !(0.0..=duration_s).contains(&e.time_s) {
            return Err(Error::invalid(format!("event at {} lies outside [0, {duration_s}]", e.time_s)));
        }
        a.action(&e.action)?;
    }

    let proto = a.protocol;
    let mut recs = Vec::new();
    let push = |recs: &mut Vec<PacketRecord>, t: f64, dir: Direction, len: u32| {
        recs.push(PacketRecord::new(t, dir, len, flow_id, proto));
    };

    // keep-alives continue through activity
    let hb = &a.heartbeat;
    let mut r = rng::stream(seed, &format!("{flow_id}/heartbeat"));
    // each beat is scheduled from the previous one, so the phase drifts
    let mut t = r.gen::<f64>() * hb.period_s;
    while t < duration_s {
        let len = hb.length.sample(&mut r);
        let dir = sample_direction(&mut r, hb.incoming_fraction);
        if t >= 0.0 {
            push(&mut recs, t, dir, len);
        }
        let jitter = if hb.jitter_s > 0.0 { r.gen_range(-hb.jitter_s..=hb.jitter_s) } else { 0.0 };
        t += hb.period_s + jitter;
    }

    let mut activity = Vec::with_capacity(events.len());
    for (i, e) in events.iter().enumerate() {
        let burst = a.action(&e.action)?;
        let mut r = rng::indexed(seed, &format!("{flow_id}/burst"), i as u64);
        let n = burst.count.sample(&mut r);
        for _ in 0..n {
            let t = e.time_s + r.gen::<f64>() * burst.duration_s;
            let len = burst.length.sample(&mut r);
            let dir = sample_direction(&mut r, burst.incoming_fraction);
            if t < duration_s {
                push(&mut recs, t, dir, len);
            }
        }
        activity.push((e.time_s, (e.time_s + burst.duration_s).min(duration_s), e.action.clone()));
    }

    if let Some(period) = a.quirks.repeater_period_s {
        let len = a.quirks.repeater_length.unwrap_or(DEFAULT_REPEATER_LENGTH);
        let n = (duration_s / period).floor() as u64;
        for k in 1..=n {
            push(&mut recs, k as f64 * period, Direction::Outgoing, len);
        }
    }
    if let Some(rate) = a.quirks.advertising_rate_hz {
        let len = a.quirks.advertising_length.unwrap_or(DEFAULT_ADVERTISING_LENGTH);
        let mut r = rng::stream(seed, &format!("{flow_id}/advertising"));
        let n = (rate * duration_s).round() as u64;
        for _ in 0..n {
            push(&mut recs, r.gen::<f64>() * duration_s, Direction::Outgoing, len);
        }
    }

    let mut trace = Trace::new(DeviceMeta {
        flow_id: flow_id.to_string(),
        protocol: proto,
        brand: a.brand.clone(),
        device_type: a.device_type.clone(),
    });
    trace.records = recs;
    trace.sort_records();
    let end = trace.last_timestamp().unwrap_or(0.0);

    let mut ann = Vec::new();
    let mut clip_push = |start: f64, stop: f64, kind: IntervalKind, label: &str| {
        let stop = stop.min(end);
        if start < stop {
            ann.push(LabeledInterval { start, end: stop, kind, label: label.to_string() });
        }
    };
    let mut state_from = 0.0;
    let mut state = a.idle_state.clone();
    for (start, stop, label) in &activity {
        clip_push(state_from, *start, IntervalKind::DeviceState, &state);
        clip_push(*start, *stop, IntervalKind::DeviceActivity, label);
        state_from = state_from.max(*stop);
        state = label.clone();
    }
    clip_push(state_from, duration_s, IntervalKind::DeviceState, &state);
    ann.sort_by(|x, y| x.start.total_cmp(&y.start));
    trace.annotations = ann;
    Ok(trace)
}

/// Identities used for the bundled state-classification dataset.
pub const STATE_DATASET_DEVICES: [&str; 6] =
    ["August/lock", "TPLink/plug", "Hue/bulb", "SmartThings/outlet", "SmartThings/motion", "SmartThings/multipurpose"];

/// One trace per archetype with `events` bursts spaced `spacing_s` apart,
/// cycling through the device's actions in name order. Flow ids are the
/// device identities.
pub fn state_dataset_traces(archetypes: &[&DeviceArchetype], events: usize, spacing_s: f64, seed: u64) -> Result<Vec<Trace>> {
    archetypes
        .iter()
        .map(|a| {
            let id = a.identity().to_string();
            let actions: Vec<&String> = a.actions.keys().collect();
            let evs: Vec<DeviceEvent> = (0..events)
                .map(|i| DeviceEvent::new(spacing_s * (i as f64 + 0.25), actions[i % actions.len()].clone()))
                .collect();
            generate_device_trace(a, &id, &evs, spacing_s * (events as f64 + 0.5), rng::derive_seed(seed, &id))
        })
        .collect()
}

/// Expands a scenario into one trace per device plus capture-level user
/// activity annotations.
pub fn generate_scenario(script: &ScenarioScript, seed: u64) -> Result<Capture> {
    let resolved = script.resolve()?;
    script.validate_events(&resolved)?;

    let mut per_device: BTreeMap<usize, Vec<DeviceEvent>> = BTreeMap::new();
    for e in &script.events {
        per_device.entry(e.device).or_default().push(DeviceEvent::new(e.time_s, &e.action));
    }
    let mut capture = Capture::default();
    for (i, (slot, arch)) in script.devices.iter().zip(&resolved).enumerate() {
        let mut evs = per_device.remove(&i).unwrap_or_default();
        evs.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let mut trace = generate_device_trace(arch, &slot.flow_id, &evs, script.duration_s, seed)?;
        if slot.role == super::scenario::Role::Controller {
            let end = trace.last_timestamp().unwrap_or(0.0);
            for &(s, e) in &script.away {
                let e = e.min(end);
                if s < e {
                    trace.annotations.push(LabeledInterval { start: s, end: e, kind: IntervalKind::DeviceState, label: AWAY.into() });
                }
            }
            trace.annotations.sort_by(|x, y| x.start.total_cmp(&y.start));
        }
        capture.traces.insert(slot.flow_id.clone(), trace);
    }
    capture.refresh_meta();
    capture.activities = script.activity_spans(&resolved)?;
    Ok(capture)
}

/// DeviceState label marking the controller as away from home.
pub const AWAY: &str = "AWAY";
