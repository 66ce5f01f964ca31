use hometrace::defense::{defense_data, evaluate_rate, DefenseConfig, DefenseStage};
use hometrace::simulate::builtin_scenario;

#[test]
fn zero_rate_equals_undefended_baseline() {
    let mut s = builtin_scenario("defense").unwrap();
    s.duration_s = 1500.0;
    if let Some(p) = s.program.as_mut() {
        p.background_every_s = Some(75.0);
    }
    let data = defense_data(&s, 5).unwrap();
    let cfg = DefenseConfig::default();
    for stage in [DefenseStage::Detection, DefenseStage::Classification] {
        let none = evaluate_rate(&data, stage, None, 5, &cfg).unwrap();
        let zero = evaluate_rate(&data, stage, Some(0.0), 5, &cfg).unwrap();
        assert_eq!(none, zero, "{stage:?}");
    }
}
