use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Capture;
use crate::domain::{DeviceMeta, Protocol, Trace};
use crate::error::{Error, Result};

/// One `(timestamp, direction, length)` row; direction 1 = incoming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpltRow {
    pub timestamp: f64,
    pub direction: u8,
    pub length: u32,
}

/// Sequence of packet lengths and times for one flow. This is the only view
/// of traffic the attack stages see.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpltMatrix {
    pub flow_id: String,
    pub rows: Vec<SpltRow>,
}

impl SpltMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.timestamp)
    }

    /// Rows with `start <= timestamp < end`.
    pub fn slice(&self, start: f64, end: f64) -> SpltMatrix {
        let lo = self.rows.partition_point(|r| r.timestamp < start);
        let hi = self.rows.partition_point(|r| r.timestamp < end);
        SpltMatrix { flow_id: self.flow_id.clone(), rows: self.rows[lo..hi.max(lo)].to_vec() }
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.length as f64).collect()
    }

    pub fn inter_arrivals(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect()
    }
}

pub fn to_splt(t: &Trace) -> Result<SpltMatrix> {
    if t.is_empty() {
        return Err(Error::invalid(format!("trace `{}` is empty", t.meta.flow_id)));
    }
    Ok(SpltMatrix {
        flow_id: t.meta.flow_id.clone(),
        rows: t
            .records
            .iter()
            .map(|r| SpltRow { timestamp: r.timestamp, direction: r.direction.as_bit(), length: r.length })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitBy {
    FlowId,
    Protocol,
}

/// Partitions a capture's records into traces. Grouping by protocol merges
/// flows into one trace per protocol, with `flow_id` set to `protocol:<name>`.
pub fn split_flows(c: &Capture, by: SplitBy) -> Vec<Trace> {
    match by {
        SplitBy::FlowId => c.traces.values().filter(|t| !t.is_empty()).cloned().collect(),
        SplitBy::Protocol => {
            let mut groups: BTreeMap<Protocol, Trace> = BTreeMap::new();
            for t in c.traces.values() {
                for r in &t.records {
                    groups
                        .entry(r.protocol)
                        .or_insert_with(|| {
                            Trace::new(DeviceMeta {
                                flow_id: format!("protocol:{}", r.protocol),
                                protocol: r.protocol,
                                brand: String::new(),
                                device_type: String::new(),
                            })
                        })
                        .records
                        .push(r.clone());
                }
            }
            groups
                .into_values()
                .map(|mut t| {
                    t.sort_records();
                    t
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Direction, PacketRecord};

    fn trace(flow: &str, proto: Protocol, pkts: &[(f64, Direction, u32)]) -> Trace {
        let mut t = Trace::new(DeviceMeta { flow_id: flow.into(), protocol: proto, brand: String::new(), device_type: String::new() });
        for &(ts, d, l) in pkts {
            t.records.push(PacketRecord::new(ts, d, l, flow, proto));
        }
        t
    }

    #[test]
    fn splt_maps_direction_and_keeps_order() {
        let t = trace("a", Protocol::WiFi, &[(0.0, Direction::Incoming, 100), (0.2, Direction::Outgoing, 60)]);
        let m = to_splt(&t).unwrap();
        assert_eq!(
            m.rows,
            vec![
                SpltRow { timestamp: 0.0, direction: 1, length: 100 },
                SpltRow { timestamp: 0.2, direction: 0, length: 60 }
            ]
        );
        let single = trace("a", Protocol::WiFi, &[(0.0, Direction::Outgoing, 60)]);
        assert_eq!(to_splt(&single).unwrap().rows, vec![SpltRow { timestamp: 0.0, direction: 0, length: 60 }]);
        assert!(to_splt(&trace("a", Protocol::WiFi, &[])).is_err());
    }

    #[test]
    fn split_by_flow_and_protocol() {
        let a = trace("A", Protocol::ZigBee, &[(0.0, Direction::Incoming, 10), (1.0, Direction::Incoming, 10), (2.0, Direction::Incoming, 10)]);
        let b = trace("B", Protocol::ZigBee, &[(0.5, Direction::Outgoing, 20), (1.5, Direction::Outgoing, 20)]);
        let c = Capture::from_traces([a, b]);
        let by_flow = split_flows(&c, SplitBy::FlowId);
        assert_eq!(by_flow.iter().map(Trace::len).collect::<Vec<_>>(), vec![3, 2]);
        let by_proto = split_flows(&c, SplitBy::Protocol);
        assert_eq!(by_proto.len(), 1);
        assert_eq!(by_proto[0].len(), 5);
        let ts: Vec<f64> = by_proto[0].records.iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn coordinator_flow_is_taggable() {
        let hub = trace("0x0000", Protocol::ZigBee, &[(0.0, Direction::Outgoing, 40)]);
        let dev = trace("0x1a2b", Protocol::ZigBee, &[(0.3, Direction::Incoming, 40)]);
        let c = Capture::from_traces([hub, dev]);
        let tagged: Vec<bool> = split_flows(&c, SplitBy::FlowId).iter().map(|t| t.meta.is_zigbee_coordinator()).collect();
        assert_eq!(tagged, vec![true, false]);
    }
}
