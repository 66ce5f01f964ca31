//! User-activity templates over a home layout, and their expansion into
//! device events or directly into snapshot sequences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Role, ScenarioScript, ScriptEvent};
use crate::error::{Error, Result};
use crate::pipeline::Snapshot;
use crate::rng;

pub const IDLE: &str = "Idle";

/// One sub-activity: which placements are active, whether the controller app
/// is in use, and whether the controller is at home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub active: Vec<String>,
    #[serde(default)]
    pub controller: bool,
    #[serde(default = "yes")]
    pub home: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTemplate {
    pub label: String,
    pub time_dependent: bool,
    pub steps: Vec<Step>,
}

fn step(active: &[&str], controller: bool, home: bool) -> Step {
    Step { active: active.iter().map(|s| s.to_string()).collect(), controller, home }
}

/// The six activity classes over the walking-scenario layout: lights L1/L2,
/// motion sensors M1/M2, door sensor D1, light sensors Li1/Li2, lock Lo1.
pub fn builtin_templates() -> Vec<ActivityTemplate> {
    let t = |label: &str, time_dependent, steps| ActivityTemplate { label: label.into(), time_dependent, steps };
    vec![
        // controlling a device from inside the home
        t("Activity-1", false, vec![step(&["L1"], true, true)]),
        // controlling a device from outside
        t("Activity-2", false, vec![step(&["Lo1"], true, false)]),
        // presence at a specific point
        t("Activity-3", false, vec![step(&["M2", "Li2"], false, true)]),
        // walking from the door to the bedroom
        t(
            "Activity-4",
            true,
            vec![
                step(&["L1"], false, true),
                step(&["L1", "D1", "Lo1"], false, true),
                step(&["L2", "M1", "Li1"], false, true),
                step(&["Li2", "L2", "M2", "D1", "Lo1"], false, true),
                step(&["L2", "M2", "Li2"], false, true),
            ],
        ),
        // entering / exiting
        t(
            "Activity-5",
            true,
            vec![step(&["Lo1"], false, true), step(&["Lo1", "D1"], false, true), step(&["D1", "M1", "Li1"], false, true)],
        ),
        // opening / closing a door or window
        t("Activity-6", true, vec![step(&["D1"], false, true), step(&["D1", "Li1"], false, true), step(&["D1"], false, true)]),
    ]
}

/// Bit layout of a snapshot: sensor placements, then device placements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomeLayout {
    pub sensors: Vec<String>,
    pub devices: Vec<String>,
}

impl HomeLayout {
    pub fn walking() -> Self {
        HomeLayout {
            sensors: ["M1", "M2", "D1", "Li1", "Li2"].iter().map(|s| s.to_string()).collect(),
            devices: ["L1", "L2", "Lo1"].iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.sensors.len() + self.devices.len() + 2
    }

    /// Noise-free snapshot for one step (or idle when `step` is `None`).
    pub fn snapshot(&self, time_s: f64, step: Option<&Step>) -> Snapshot {
        let on = |p: &String| step.is_some_and(|s| s.active.contains(p));
        Snapshot {
            time_s,
            sensors: self.sensors.iter().map(on).collect(),
            devices: self.devices.iter().map(on).collect(),
            controller_active: step.is_some_and(|s| s.controller),
            controller_home: step.map_or(true, |s| s.home),
        }
    }
}

/// Parameters of a synthetic snapshot run.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRun {
    pub activities: usize,
    /// Labels to draw from (uniformly).
    pub labels: Vec<String>,
    /// Grid points per step, inclusive range.
    pub step_len: (usize, usize),
    /// Idle grid points between activities, inclusive range.
    pub idle_len: (usize, usize),
    /// Independent bit-flip probability.
    pub noise: f64,
    pub grid_s: f64,
}

/// Generates a labeled snapshot sequence directly from templates.
pub fn synthesize_snapshots(
    layout: &HomeLayout,
    templates: &[ActivityTemplate],
    run: &SnapshotRun,
    seed: u64,
) -> Result<(Vec<Snapshot>, Vec<String>)> {
    let chosen: Vec<&ActivityTemplate> = run
        .labels
        .iter()
        .map(|l| templates.iter().find(|t| &t.label == l).ok_or_else(|| Error::UnknownLabel(l.clone())))
        .collect::<Result<_>>()?;
    if chosen.is_empty() {
        return Err(Error::invalid("no activity labels to draw from"));
    }
    if !(0.0..=0.5).contains(&run.noise) {
        return Err(Error::invalid("bit-flip probability must lie in [0, 0.5]"));
    }
    let mut r = rng::stream(seed, "snapshots");
    let mut snaps = Vec::new();
    let mut labels = Vec::new();
    let mut emit = |step: Option<&Step>, label: &str| {
        let t = snaps.len() as f64 * run.grid_s;
        snaps.push(layout.snapshot(t, step));
        labels.push(label.to_string());
    };
    let idle = |r: &mut rand_chacha::ChaCha8Rng| r.gen_range(run.idle_len.0..=run.idle_len.1);
    for _ in 0..idle(&mut r) {
        emit(None, IDLE);
    }
    for _ in 0..run.activities {
        let tpl = chosen[r.gen_range(0..chosen.len())];
        for s in &tpl.steps {
            for _ in 0..r.gen_range(run.step_len.0..=run.step_len.1) {
                emit(Some(s), &tpl.label);
            }
        }
        for _ in 0..idle(&mut r) {
            emit(None, IDLE);
        }
    }
    if run.noise > 0.0 {
        let mut nr = rng::stream(seed, "snapshot-noise");
        for s in &mut snaps {
            let mut flip = |b: &mut bool| {
                if nr.gen::<f64>() < run.noise {
                    *b = !*b;
                }
            };
            s.sensors.iter_mut().for_each(&mut flip);
            s.devices.iter_mut().for_each(&mut flip);
            flip(&mut s.controller_active);
            flip(&mut s.controller_home);
        }
    }
    Ok((snaps, labels))
}

/// Expands `script.program` into timed events and away spans. Each step
/// triggers every active placement's device at the step start.
pub fn expand_program(script: &ScenarioScript, seed: u64) -> Result<ScenarioScript> {
    let Some(prog) = &script.program else {
        return Ok(script.clone());
    };
    if !(prog.step_s > 0.0 && prog.gap_s.0 >= 0.0 && prog.gap_s.0 <= prog.gap_s.1) {
        return Err(Error::invalid("program needs step_s > 0 and 0 <= gap min <= gap max"));
    }
    let resolved = script.resolve()?;
    let templates = builtin_templates();
    let chosen: Vec<&ActivityTemplate> = if prog.labels.is_empty() {
        templates.iter().collect()
    } else {
        prog.labels
            .iter()
            .map(|l| templates.iter().find(|t| &t.label == l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect::<Result<_>>()?
    };
    let slot_of = |placement: &str| {
        script
            .devices
            .iter()
            .position(|d| d.placement == placement)
            .ok_or_else(|| Error::invalid(format!("no device placed at `{placement}`")))
    };
    // without an explicit trigger a device cycles through its actions in order
    let mut fired = vec![0usize; script.devices.len()];
    let mut trigger_of = |idx: usize| -> String {
        let n = fired[idx];
        fired[idx] += 1;
        script.devices[idx]
            .trigger
            .clone()
            .unwrap_or_else(|| resolved[idx].actions.keys().nth(n % resolved[idx].actions.len()).unwrap().clone())
    };
    let controller = script.devices.iter().position(|d| d.role == Role::Controller);

    let mut out = script.clone();
    out.program = None;
    let mut r = rng::stream(seed, "program");
    let mut t = prog.start_s;
    for _ in 0..prog.activities {
        let tpl = chosen[r.gen_range(0..chosen.len())];
        for s in &tpl.steps {
            for p in &s.active {
                let idx = slot_of(p)?;
                out.events.push(ScriptEvent { time_s: t, device: idx, action: trigger_of(idx), activity: Some(tpl.label.clone()) });
            }
            if s.controller {
                let idx = controller.ok_or_else(|| Error::invalid("template uses the controller but none is placed"))?;
                out.events.push(ScriptEvent { time_s: t, device: idx, action: trigger_of(idx), activity: Some(tpl.label.clone()) });
            }
            if !s.home {
                out.away.push((t, t + prog.step_s));
            }
            t += prog.step_s;
        }
        t += r.gen_range(prog.gap_s.0..=prog.gap_s.1);
    }
    let activity_end = t;

    if let Some(every) = prog.background_every_s {
        for (idx, slot) in script.devices.iter().enumerate() {
            if !slot.placement.is_empty() || slot.role == Role::Controller {
                continue;
            }
            let mut br = rng::stream(seed, &format!("background/{}", slot.flow_id));
            let actions: Vec<&String> = resolved[idx].actions.keys().collect();
            let mut bt = br.gen_range(0.0..every);
            loop {
                let action = actions[br.gen_range(0..actions.len())].clone();
                let dur = resolved[idx].actions[&action].duration_s;
                if bt + dur > activity_end.max(script.duration_s) {
                    break;
                }
                out.events.push(ScriptEvent { time_s: bt, device: idx, action, activity: None });
                bt += dur + 2.0 + br.gen_range(0.5..1.5) * every;
            }
        }
    }
    out.events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    out.duration_s = out.duration_s.max(activity_end);
    Ok(out)
}
