use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{IntervalKind, PacketRecord, Trace};
use crate::error::{Error, Result};
use crate::rng;
use crate::simulate::DeviceArchetype;

pub const MAX_RATE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mimicry {
    /// Whole fake bursts drawn from the device's own action models, placed in
    /// idle time.
    BurstMimic,
    /// Packets at uniform times over the trace span with heartbeat-like lengths.
    UniformNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionPolicy {
    /// Spoofed packets as a fraction of the trace's real packet count.
    pub rate: f64,
    pub mimicry: Mimicry,
    pub seed: u64,
}

impl InjectionPolicy {
    pub fn new(rate: f64, mimicry: Mimicry, seed: u64) -> Result<Self> {
        let p = InjectionPolicy { rate, mimicry, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_RATE).contains(&self.rate) {
            return Err(Error::invalid(format!("injection rate must lie in [0, {MAX_RATE}], got {}", self.rate)));
        }
        Ok(())
    }
}

/// A fake burst placed by [`inject_spoof_spans`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofSpan {
    pub start: f64,
    pub end: f64,
    /// The action whose burst model was imitated.
    pub action: String,
    pub packets: usize,
}

fn spoof_count(t: &Trace, rate: f64) -> usize {
    let real = t.records.iter().filter(|r| !r.spoofed).count();
    (rate * real as f64 + 1e-9).floor() as usize
}

/// Adds `floor(rate * N)` spoofed packets to a copy of the trace, where `N`
/// is its real packet count, and re-sorts it. Original records are kept as
/// they are. Burst mimicry needs the device's archetype.
pub fn inject_spoof(t: &Trace, p: &InjectionPolicy, archetype: Option<&DeviceArchetype>) -> Result<Trace> {
    Ok(inject_spoof_spans(t, p, archetype)?.0)
}

/// As [`inject_spoof`], also returning the spans of injected bursts (empty
/// for uniform noise).
///
/// Bursts are generated as one seeded sequence and the last is truncated to
/// the packet budget, so a higher rate extends the same sequence.
pub fn inject_spoof_spans(
    t: &Trace,
    p: &InjectionPolicy,
    archetype: Option<&DeviceArchetype>,
) -> Result<(Trace, Vec<SpoofSpan>)> {
    p.validate()?;
    if t.is_empty() {
        return Err(Error::invalid(format!("cannot inject into empty trace `{}`", t.meta.flow_id)));
    }
    let budget = spoof_count(t, p.rate);
    let mut out = t.clone();
    if budget == 0 {
        return Ok((out, Vec::new()));
    }
    let span_end = t.last_timestamp().unwrap_or(0.0);
    let span_start = t.records.first().map_or(0.0, |r| r.timestamp);
    let mut r = rng::stream(p.seed, &format!("spoof/{}", t.meta.flow_id));
    let proto = t.meta.protocol;
    let flow = t.meta.flow_id.as_str();
    let spoofed = |time: f64, dir, len| {
        let mut rec = PacketRecord::new(time, dir, len, flow, proto);
        rec.spoofed = true;
        rec
    };
    let mut spans = Vec::new();
    match p.mimicry {
        Mimicry::UniformNoise => {
            let a = archetype.map(|a| &a.heartbeat);
            for _ in 0..budget {
                let time = r.gen_range(span_start..=span_end);
                let len = match a {
                    Some(h) => h.length.sample(&mut r),
                    None => t.records[r.gen_range(0..t.records.len())].length,
                };
                let dir = crate::simulate::sample_direction(&mut r, 0.5);
                out.records.push(spoofed(time, dir, len));
            }
        }
        Mimicry::BurstMimic => {
            let a = archetype.ok_or_else(|| Error::invalid("burst mimicry needs the device archetype"))?;
            let busy: Vec<(f64, f64)> = t.annotations_of(IntervalKind::DeviceActivity).map(|x| (x.start, x.end)).collect();
            let actions: Vec<(&String, &crate::simulate::BurstModel)> = a.actions.iter().collect();
            let mut placed: Vec<(f64, f64)> = Vec::new();
            let mut left = budget;
            while left > 0 {
                let (name, burst) = actions[r.gen_range(0..actions.len())];
                let dur = burst.duration_s.min(span_end - span_start);
                let n = (burst.count.sample(&mut r) as usize).min(left);
                let free = |s: f64, taken: &[(f64, f64)]| {
                    busy.iter().chain(taken).all(|&(b0, b1)| s + dur < b0 || s > b1)
                };
                let mut start = None;
                for _ in 0..64 {
                    let s = r.gen_range(span_start..=(span_end - dur).max(span_start));
                    if free(s, &placed) {
                        start = Some(s);
                        break;
                    }
                }
                // a crowded trace falls back to overlapping earlier fakes, never real activity
                if start.is_none() {
                    for _ in 0..256 {
                        let s = r.gen_range(span_start..=(span_end - dur).max(span_start));
                        if free(s, &[]) {
                            start = Some(s);
                            break;
                        }
                    }
                }
                let s = start.ok_or_else(|| Error::invalid(format!("no idle time left in `{flow}` for spoofed bursts")))?;
                for _ in 0..n {
                    let time = s + r.gen::<f64>() * dur;
                    let len = burst.length.sample(&mut r);
                    let dir = crate::simulate::sample_direction(&mut r, burst.incoming_fraction);
                    out.records.push(spoofed(time, dir, len));
                }
                placed.push((s, s + dur));
                spans.push(SpoofSpan { start: s, end: s + dur, action: name.clone(), packets: n });
                left -= n;
            }
        }
    }
    out.sort_records();
    Ok((out, spans))
}

/// The trace without its spoofed packets.
pub fn strip_spoofed(t: &Trace) -> Trace {
    let mut out = t.clone();
    out.records.retain(|r| !r.spoofed);
    out
}
