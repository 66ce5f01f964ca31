use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DeviceIdentity, Direction, Protocol};
use crate::error::{Error, Result};

/// Packet length distribution in bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthDist {
    Constant { value: u32 },
    /// Uniform over the inclusive range `[min, max]`.
    Uniform { min: u32, max: u32 },
    Categorical { values: Vec<u32>, weights: Vec<f64> },
}

impl LengthDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            LengthDist::Constant { value } if *value >= 1 => Ok(()),
            LengthDist::Uniform { min, max } if *min >= 1 && min <= max => Ok(()),
            LengthDist::Categorical { values, weights }
                if !values.is_empty()
                    && values.len() == weights.len()
                    && values.iter().all(|v| *v >= 1)
                    && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
                    && weights.iter().sum::<f64>() > 0.0 =>
            {
                Ok(())
            }
            other => Err(Error::invalid(format!("invalid length distribution {other:?}"))),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match self {
            LengthDist::Constant { value } => *value,
            LengthDist::Uniform { min, max } => rng.gen_range(*min..=*max),
            LengthDist::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                for (v, w) in values.iter().zip(weights) {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                *values.last().unwrap()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LengthDist::Constant { value } => *value as f64,
            LengthDist::Uniform { min, max } => (*min as f64 + *max as f64) / 2.0,
            LengthDist::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| *v as f64 * w).sum::<f64>() / total
            }
        }
    }
}

/// Integer count, uniform over `[mean - spread, mean + spread]` clamped at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountDist {
    pub mean: u32,
    #[serde(default)]
    pub spread: u32,
}

impl CountDist {
    pub fn min(&self) -> u32 {
        self.mean.saturating_sub(self.spread).max(1)
    }

    pub fn max(&self) -> u32 {
        self.mean + self.spread
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.min()..=self.max())
    }
}

/// Traffic emitted by one device action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstModel {
    pub duration_s: f64,
    pub count: CountDist,
    pub length: LengthDist,
    /// Fraction of burst packets that are incoming.
    pub incoming_fraction: f64,
}

impl BurstModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("burst duration must be positive"));
        }
        if self.count.mean < 1 {
            return Err(Error::invalid("burst must carry at least one packet on average"));
        }
        if !(0.0..=1.0).contains(&self.incoming_fraction) {
            return Err(Error::invalid("incoming fraction must lie in [0, 1]"));
        }
        self.length.validate()
    }

    /// Average burst packet rate in packets per second.
    pub fn rate(&self) -> f64 {
        self.count.mean as f64 / self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub period_s: f64,
    /// Gaps between beats are `period_s` plus a uniform draw from
    /// `[-jitter_s, +jitter_s]`.
    pub jitter_s: f64,
    pub length: LengthDist,
    #[serde(default = "half")]
    pub incoming_fraction: f64,
}

fn half() -> f64 {
    0.5
}

/// Protocol-specific background traffic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Quirks {
    /// ZigBee routers re-broadcast the coordinator's beacons at this period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeater_period_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeater_length: Option<u32>,
    /// BLE advertising rate while idle, packets per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advertising_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advertising_length: Option<u32>,
}

pub const DEFAULT_REPEATER_LENGTH: u32 = 45;
pub const DEFAULT_ADVERTISING_LENGTH: u32 = 37;

/// A generative model of one device class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceArchetype {
    pub brand: String,
    pub device_type: String,
    pub protocol: Protocol,
    pub heartbeat: Heartbeat,
    pub actions: BTreeMap<String, BurstModel>,
    #[serde(default)]
    pub quirks: Quirks,
    /// State label before the first action.
    #[serde(default = "idle")]
    pub idle_state: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

fn idle() -> String {
    "IDLE".into()
}

impl DeviceArchetype {
    pub fn identity(&self) -> DeviceIdentity {
        DeviceIdentity::new(&self.brand, &self.device_type)
    }

    pub fn validate(&self) -> Result<()> {
        let hb = &self.heartbeat;
        if !(hb.period_s.is_finite() && hb.period_s > 0.0) {
            return Err(Error::invalid(format!("{}: heartbeat period must be positive", self.identity())));
        }
        if !(hb.jitter_s.is_finite() && hb.jitter_s >= 0.0 && hb.jitter_s < hb.period_s) {
            return Err(Error::invalid(format!("{}: jitter must lie in [0, period)", self.identity())));
        }
        if !(0.0..=1.0).contains(&hb.incoming_fraction) {
            return Err(Error::invalid("incoming fraction must lie in [0, 1]"));
        }
        hb.length.validate()?;
        if self.actions.is_empty() {
            return Err(Error::invalid(format!("{}: no actions", self.identity())));
        }
        for (name, b) in &self.actions {
            b.validate().map_err(|e| Error::invalid(format!("{} action `{name}`: {e}", self.identity())))?;
        }
        if let Some(p) = self.quirks.repeater_period_s {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid("repeater period must be positive"));
            }
        }
        if let Some(r) = self.quirks.advertising_rate_hz {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid("advertising rate must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn action(&self, label: &str) -> Result<&BurstModel> {
        self.actions.get(label).ok_or_else(|| Error::UnknownLabel(format!("{}: action {label}", self.identity())))
    }

    /// Ratio of the slowest action's burst rate to the heartbeat rate; the
    /// generated traffic is at least this much denser inside activity.
    pub fn burst_to_heartbeat_ratio(&self) -> f64 {
        let hb_rate = 1.0 / self.heartbeat.period_s;
        self.actions.values().map(BurstModel::rate).fold(f64::INFINITY, f64::min) / hb_rate
    }

    pub fn mean_action_duration(&self) -> f64 {
        self.actions.values().map(|b| b.duration_s).sum::<f64>() / self.actions.len() as f64
    }
}

pub(crate) fn sample_direction<R: Rng>(rng: &mut R, incoming_fraction: f64) -> Direction {
    if rng.gen::<f64>() < incoming_fraction {
        Direction::Incoming
    } else {
        Direction::Outgoing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn length_dists_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = LengthDist::Uniform { min: 10, max: 12 };
        let c = LengthDist::Categorical { values: vec![5, 9], weights: vec![0.0, 1.0] };
        for _ in 0..200 {
            assert!((10..=12).contains(&u.sample(&mut rng)));
            assert_eq!(c.sample(&mut rng), 9);
        }
        assert!(LengthDist::Constant { value: 0 }.validate().is_err());
        assert!(LengthDist::Uniform { min: 5, max: 4 }.validate().is_err());
        assert!(LengthDist::Categorical { values: vec![5], weights: vec![] }.validate().is_err());
    }

    #[test]
    fn count_dist_clamps_at_one() {
        let c = CountDist { mean: 2, spread: 5 };
        assert_eq!(c.min(), 1);
        assert_eq!(c.max(), 7);
    }
}
