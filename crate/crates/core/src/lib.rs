//! Engine for paired electronic guidebooks that share audio by eavesdropping.
//!
//! Each visitor's device plays clips chosen from a shared catalog by tapping
//! imagemap targets. Paired devices exchange small control messages rather
//! than audio; a device that is not playing its own clip can hear its
//! companion's, joined mid-clip, at a chosen eavesdrop level.
//!
//! Module map:
//! - [`catalog`]: content catalog, validation, checksum, hit-testing
//! - [`audio`]: per-device playback state and the render rule
//! - [`protocol`]: control messages, peer model updates, wire format
//! - [`simnet`]: seeded lossy datagram channel
//! - [`harness`]: scenario runner, oracle, metrics, fuzzing
//! - [`batch`]: sequential/parallel execution of independent runs

pub mod audio;
pub mod batch;
pub mod catalog;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod harness;
pub mod ids;
pub mod protocol;
pub mod simnet;

#[cfg(test)]
mod fixtures;

pub use audio::{AudibleState, DeviceState, EavesdropLevel, GuidebookConfig, PlaybackRecord, Source};
pub use catalog::{Catalog, CatalogError, CatalogSummary, TapOutcome};
pub use error::EngineError;
pub use geometry::Point;
pub use ids::{ClipId, DeviceId, Millis, TargetId, WallId};
pub use protocol::{ControlMessage, Payload, ProtocolConfig};
pub use simnet::{NetworkConfig, SimNet};
