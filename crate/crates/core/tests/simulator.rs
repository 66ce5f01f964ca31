use hometrace::simulate::{
    builtin_scenario, generate_device_trace, generate_scenario, Catalog, DeviceEvent, ScenarioScript,
};
use hometrace::{DeviceIdentity, IntervalKind};

fn outlet() -> hometrace::simulate::DeviceArchetype {
    Catalog::builtin().find(&DeviceIdentity::new("SmartThings", "outlet")).unwrap().clone()
}

#[test]
fn idle_outlet_emits_one_repeater_packet_per_period() {
    let a = outlet();
    let len = a.quirks.repeater_length.unwrap_or(45);
    let t = generate_device_trace(&a, "0x1001", &[], 150.0, 3).unwrap();
    let on_grid = t
        .records
        .iter()
        .filter(|r| r.length == len && (r.timestamp / 15.0).fract() == 0.0 && r.timestamp > 0.0)
        .count();
    assert_eq!(on_grid, 10);
    assert!(t.annotations_of(IntervalKind::DeviceActivity).next().is_none());
}

#[test]
fn heartbeat_rate_matches_period() {
    let cat = Catalog::builtin();
    let plain: Vec<_> =
        cat.archetypes.iter().filter(|a| a.quirks.repeater_period_s.is_none() && a.quirks.advertising_rate_hz.is_none()).collect();
    assert!(plain.len() >= 3);
    for a in plain {
        let d = 400.0 * a.heartbeat.period_s;
        let t = generate_device_trace(a, "f", &[], d, 9).unwrap();
        let expect = d / a.heartbeat.period_s;
        let got = t.len() as f64;
        assert!((got - expect).abs() <= 0.05 * expect + 2.0, "{}: {got} vs {expect}", a.identity());
    }
}

#[test]
fn bursts_add_packets_without_moving_heartbeats() {
    let a = outlet();
    let action = a.actions.keys().next().unwrap().clone();
    let quiet = generate_device_trace(&a, "f", &[], 300.0, 5).unwrap();
    let busy = generate_device_trace(&a, "f", &[DeviceEvent::new(100.0, action)], 300.0, 5).unwrap();
    assert!(busy.len() > quiet.len());
    for r in &quiet.records {
        assert!(busy.records.contains(r));
    }
}

#[test]
fn scenario_without_events_has_no_user_activity() {
    let mut s: ScenarioScript = builtin_scenario("benchmark").unwrap();
    s.events.clear();
    s.program = None;
    s.duration_s = 300.0;
    let c = generate_scenario(&s, 1).unwrap();
    assert!(c.activities.iter().all(|a| a.kind != IntervalKind::UserActivity));
    assert!(c.traces.values().all(|t| t.annotations_of(IntervalKind::DeviceActivity).next().is_none()));
}

#[test]
fn same_seed_same_capture() {
    let s = builtin_scenario("benchmark").unwrap();
    let s = ScenarioScript { duration_s: 600.0, ..s };
    assert_eq!(generate_scenario(&s, 4).unwrap(), generate_scenario(&s, 4).unwrap());
    assert_ne!(generate_scenario(&s, 4).unwrap(), generate_scenario(&s, 5).unwrap());
}
