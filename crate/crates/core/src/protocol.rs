//! Control messages between paired devices and the rules for keeping each
//! device's model of its companion's playback up to date.
//!
//! Messages carry sequence numbers that strictly increase per sender. A
//! receiver applies a message only if its sequence number is newer than
//! anything applied so far, so any delivery order converges to the state
//! described by the newest message (last writer wins). Announce messages
//! are full snapshots; they are sent periodically and in a short burst
//! after each local change, which is how lost datagrams are recovered.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{DeviceState, PlaybackRecord};
use crate::catalog::Catalog;
use crate::error::EngineError;
use crate::ids::{ClipId, DeviceId, Millis};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub clip_id: ClipId,
    pub position_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Start {
        clip_id: ClipId,
        position_ms: u64,
    },
    Stop {
        clip_id: ClipId,
    },
    /// Sender's full playback state; `None` when idle.
    Announce {
        snapshot: Option<Snapshot>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Start { .. } => "start",
            Payload::Stop { .. } => "stop",
            Payload::Announce { .. } => "announce",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlMessage {
    pub sender: DeviceId,
    pub seq: u64,
    pub sent_at_ms: Millis,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub announce_interval_ms: u64,
    /// Added to the assumed transit time when estimating a peer's clip start.
    pub latency_compensation_ms: u64,
    pub position_tolerance_ms: u64,
    /// Extra announces spread evenly over one interval after each local
    /// start/stop. Zero gives a purely periodic schedule.
    pub change_announces: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { announce_interval_ms: 1000, latency_compensation_ms: 0, position_tolerance_ms: 50, change_announces: 7 }
    }
}

impl ProtocolConfig {
    pub fn is_valid(&self) -> bool {
        self.announce_interval_ms > 0
    }

    /// Spacing of post-change announces.
    pub fn change_announce_spacing_ms(&self) -> u64 {
        self.announce_interval_ms / (u64::from(self.change_announces) + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiveOutcome {
    Applied,
    /// Older than (or equal to) the newest applied message; ignored.
    Stale,
}

impl DeviceState {
    /// Applies a control message from the paired peer.
    pub fn on_receive(
        &mut self,
        catalog: &Catalog,
        msg: &ControlMessage,
        receive_ms: Millis,
        config: &ProtocolConfig,
    ) -> Result<ReceiveOutcome, EngineError> {
        if msg.sender != self.peer_id {
            return Err(EngineError::WrongSender { expected: self.peer_id.clone(), got: msg.sender.clone() });
        }
        let started = match &msg.payload {
            Payload::Start { clip_id, position_ms } => Some((clip_id, *position_ms)),
            Payload::Announce { snapshot: Some(s) } => Some((&s.clip_id, s.position_ms)),
            Payload::Stop { clip_id } => {
                if catalog.clip(clip_id).is_none() {
                    return Err(EngineError::UnknownClip(clip_id.clone()));
                }
                None
            }
            Payload::Announce { snapshot: None } => None,
        };
        if let Some((clip_id, position_ms)) = started {
            let duration = catalog.duration_ms(clip_id).ok_or_else(|| EngineError::UnknownClip(clip_id.clone()))?;
            if position_ms >= duration {
                return Err(EngineError::InvalidPosition { clip_id: clip_id.clone(), position_ms });
            }
        }
        if msg.seq <= self.last_applied_peer_seq {
            return Ok(ReceiveOutcome::Stale);
        }
        self.peer_model = started.map(|(clip_id, position_ms)| PlaybackRecord {
            clip_id: clip_id.clone(),
            start_ms: receive_ms - position_ms as Millis - config.latency_compensation_ms as Millis,
            seq: msg.seq,
        });
        self.last_applied_peer_seq = msg.seq;
        Ok(ReceiveOutcome::Applied)
    }

    fn pending_change_announce_ms(&self, config: &ProtocolConfig) -> Option<Millis> {
        let changed = self.last_change_ms?;
        (self.change_announces_sent < config.change_announces)
            .then(|| changed + (u64::from(self.change_announces_sent) + 1) as Millis * config.change_announce_spacing_ms() as Millis)
    }

    /// Earliest time at which [`DeviceState::due_announce`] will produce a message.
    pub fn next_announce_ms(&self, config: &ProtocolConfig) -> Millis {
        let periodic = self.last_periodic_announce_ms + config.announce_interval_ms as Millis;
        match self.pending_change_announce_ms(config) {
            Some(t) => t.min(periodic),
            None => periodic,
        }
    }

    /// Emits an Announce snapshot if one is due at `now_ms`.
    pub fn due_announce(
        &mut self,
        catalog: &Catalog,
        now_ms: Millis,
        config: &ProtocolConfig,
    ) -> Result<Option<ControlMessage>, EngineError> {
        let interval = config.announce_interval_ms as Millis;
        let periodic_due = now_ms - self.last_periodic_announce_ms >= interval;
        let mut change_due = false;
        while self.pending_change_announce_ms(config).is_some_and(|t| t <= now_ms) {
            self.change_announces_sent += 1;
            change_due = true;
        }
        if !periodic_due && !change_due {
            return Ok(None);
        }
        if periodic_due {
            // stay on the fixed grid even if a tick was skipped
            self.last_periodic_announce_ms += (now_ms - self.last_periodic_announce_ms) / interval * interval;
        }
        let snapshot = self.own_playing(catalog, now_ms)?.map(|(clip_id, position_ms)| Snapshot { clip_id: clip_id.clone(), position_ms });
        Ok(Some(self.message(now_ms, Payload::Announce { snapshot })))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DirectionReport {
    /// Model and actual agree on the clip, or are both idle.
    pub matches: bool,
    /// |estimated start − actual start| when both are playing the same clip.
    pub position_error_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DivergenceReport {
    pub a_models_b: DirectionReport,
    pub b_models_a: DirectionReport,
}

impl DivergenceReport {
    pub fn all_match(&self) -> bool {
        self.a_models_b.matches && self.b_models_a.matches
    }
}

fn direction(observer: &DeviceState, actual: &DeviceState, catalog: &Catalog, now_ms: Millis) -> Result<DirectionReport, EngineError> {
    let active = |rec: &Option<PlaybackRecord>| -> Result<Option<PlaybackRecord>, EngineError> {
        match rec {
            Some(r) if r.position_at(catalog, now_ms)?.is_some() => Ok(Some(r.clone())),
            _ => Ok(None),
        }
    };
    let model = active(&observer.peer_model)?;
    let truth = active(&actual.own)?;
    Ok(match (model, truth) {
        (None, None) => DirectionReport { matches: true, position_error_ms: None },
        (Some(m), Some(t)) if m.clip_id == t.clip_id => {
            DirectionReport { matches: true, position_error_ms: Some(m.start_ms.abs_diff(t.start_ms)) }
        }
        _ => DirectionReport { matches: false, position_error_ms: None },
    })
}

/// Compares each device's model of its companion with the companion's actual playback.
pub fn peer_divergence(a: &DeviceState, b: &DeviceState, catalog: &Catalog, now_ms: Millis) -> Result<DivergenceReport, EngineError> {
    Ok(DivergenceReport { a_models_b: direction(a, b, catalog, now_ms)?, b_models_a: direction(b, a, catalog, now_ms)? })
}

/// Datagram encoding: one JSON object per message.
pub mod wire {
    use super::*;

    #[derive(Debug, Error)]
    pub enum WireError {
        #[error("malformed datagram: {0}")]
        Malformed(#[from] serde_json::Error),
        #[error("{kind} message is missing {field}")]
        MissingField { kind: &'static str, field: &'static str },
    }

    #[derive(Serialize, Deserialize)]
    struct WireMessage {
        sender: DeviceId,
        seq: u64,
        sent_at_ms: Millis,
        kind: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clip_id: Option<ClipId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position_ms: Option<u64>,
    }

    pub fn encode(msg: &ControlMessage) -> String {
        let (clip_id, position_ms) = match &msg.payload {
            Payload::Start { clip_id, position_ms } => (Some(clip_id.clone()), Some(*position_ms)),
            Payload::Stop { clip_id } => (Some(clip_id.clone()), None),
            Payload::Announce { snapshot: Some(s) } => (Some(s.clip_id.clone()), Some(s.position_ms)),
            Payload::Announce { snapshot: None } => (None, None),
        };
        let wire = WireMessage {
            sender: msg.sender.clone(),
            seq: msg.seq,
            sent_at_ms: msg.sent_at_ms,
            kind: msg.payload.kind().to_owned(),
            clip_id,
            position_ms,
        };
        serde_json::to_string(&wire).expect("wire message serializes")
    }

    /// Decodes datagrams, counting (and dropping) unknown message kinds.
    #[derive(Debug, Default)]
    pub struct Decoder {
        pub unknown_kinds: u64,
    }

    impl Decoder {
        pub fn decode(&mut self, datagram: &str) -> Result<Option<ControlMessage>, WireError> {
            let w: WireMessage = serde_json::from_str(datagram)?;
            let payload = match w.kind.as_str() {
                "start" => Payload::Start {
                    clip_id: w.clip_id.ok_or(WireError::MissingField { kind: "start", field: "clip_id" })?,
                    position_ms: w.position_ms.ok_or(WireError::MissingField { kind: "start", field: "position_ms" })?,
                },
                "stop" => Payload::Stop { clip_id: w.clip_id.ok_or(WireError::MissingField { kind: "stop", field: "clip_id" })? },
                "announce" => Payload::Announce {
                    snapshot: match w.clip_id {
                        Some(clip_id) => Some(Snapshot {
                            clip_id,
                            position_ms: w.position_ms.ok_or(WireError::MissingField { kind: "announce", field: "position_ms" })?,
                        }),
                        None => None,
                    },
                },
                _ => {
                    self.unknown_kinds += 1;
                    return Ok(None);
                }
            };
            Ok(Some(ControlMessage { sender: w.sender, seq: w.seq, sent_at_ms: w.sent_at_ms, payload }))
        }
    }
}
