//! Multi-stage traffic-metadata inference against smart-home devices.
//!
//! The attack runs as a cascade over packet metadata only (timestamp,
//! direction, length, link-layer flow identity):
//!
//! 1. identify each flow's device type from windowed statistics (kNN),
//! 2. detect windows in which a device is active (random forest or kNN),
//! 3. classify each active segment's device state from a time-series feature
//!    bank (random forest, with extra-trees feature selection),
//! 4. decode user activities from per-instant home snapshots with an HMM.
//!
//! [`simulate`] generates seeded, labeled traffic for every stage and
//! [`defense`] measures how spoofed-packet injection degrades stages 2 and 3.

pub mod defense;
pub mod domain;
pub mod error;
pub mod features;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simulate;
pub mod traceio;

pub use domain::{
    DeviceIdentity, DeviceMeta, Direction, IntervalKind, LabeledInterval, PacketRecord, Protocol, Trace,
    ZIGBEE_COORDINATOR,
};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, macro_average, ConfusionCounts, MetricReport};
pub use traceio::{Capture, SpltMatrix};
