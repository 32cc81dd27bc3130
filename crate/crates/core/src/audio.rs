//! Per-device playback bookkeeping and the render rule deciding what a
//! device's earphone carries at any instant.
//!
//! A device plays its own (personal) clip in preference to anything else.
//! When idle it plays the companion's clip, joined mid-way at the
//! companion's position, at the eavesdrop gain and marked for reverb.
//! Clips are never mixed.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TapOutcome, DEFAULT_TAP_TIP_DURATION_MS};
use crate::error::EngineError;
use crate::geometry::Point;
use crate::ids::{ClipId, DeviceId, Millis, WallId};
use crate::protocol::{ControlMessage, Payload};

pub const DEFAULT_QUIET_GAIN: f64 = 0.5;
/// Gain of personal clips; `Loud` eavesdropping uses the same value.
pub const PERSONAL_GAIN: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EavesdropLevel {
    Off,
    #[default]
    Quiet,
    Loud,
}

impl EavesdropLevel {
    pub const ALL: [EavesdropLevel; 3] = [EavesdropLevel::Off, EavesdropLevel::Quiet, EavesdropLevel::Loud];

    pub fn gain(self, quiet_gain: f64) -> f64 {
        match self {
            EavesdropLevel::Off => 0.0,
            EavesdropLevel::Quiet => quiet_gain,
            EavesdropLevel::Loud => PERSONAL_GAIN,
        }
    }
}

/// Listener-side settings of a guidebook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidebookConfig {
    /// Must lie strictly between 0 and 1.
    pub quiet_gain: f64,
    pub tap_tip_duration_ms: u64,
}

impl Default for GuidebookConfig {
    fn default() -> Self {
        Self { quiet_gain: DEFAULT_QUIET_GAIN, tap_tip_duration_ms: DEFAULT_TAP_TIP_DURATION_MS }
    }
}

impl GuidebookConfig {
    pub fn is_valid(&self) -> bool {
        self.quiet_gain > 0.0 && self.quiet_gain < 1.0
    }
}

/// A clip playing (or estimated to be playing) since `start_ms`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybackRecord {
    pub clip_id: ClipId,
    pub start_ms: Millis,
    pub seq: u64,
}

impl PlaybackRecord {
    /// Position at `now_ms`, or `None` once the clip has run out (or not yet begun).
    pub fn position_at(&self, catalog: &Catalog, now_ms: Millis) -> Result<Option<u64>, EngineError> {
        let duration = catalog.duration_ms(&self.clip_id).ok_or_else(|| EngineError::UnknownClip(self.clip_id.clone()))?;
        let elapsed = now_ms - self.start_ms;
        Ok((elapsed >= 0 && (elapsed as u64) < duration).then_some(elapsed as u64))
    }

    pub fn end_ms(&self, catalog: &Catalog) -> Option<Millis> {
        catalog.duration_ms(&self.clip_id).map(|d| self.start_ms + d as Millis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Personal,
    Eavesdropped,
    /// Companion's clip heard through a speaker (open-air comparison mode).
    OpenAir,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AudibleState {
    #[default]
    Silence,
    Playing {
        clip_id: ClipId,
        position_ms: u64,
        gain: f64,
        source: Source,
        reverb: bool,
    },
}

impl AudibleState {
    pub fn clip_id(&self) -> Option<&ClipId> {
        match self {
            AudibleState::Silence => None,
            AudibleState::Playing { clip_id, .. } => Some(clip_id),
        }
    }

    pub fn source(&self) -> Option<Source> {
        match self {
            AudibleState::Silence => None,
            AudibleState::Playing { source, .. } => Some(*source),
        }
    }

    /// The same state observed `elapsed_ms` later, assuming nothing changed.
    pub fn advanced(&self, elapsed_ms: u64) -> AudibleState {
        match self {
            AudibleState::Silence => AudibleState::Silence,
            AudibleState::Playing { clip_id, position_ms, gain, source, reverb } => AudibleState::Playing {
                clip_id: clip_id.clone(),
                position_ms: position_ms + elapsed_ms,
                gain: *gain,
                source: *source,
                reverb: *reverb,
            },
        }
    }

    /// True when `self` at `t_ms` is `earlier` (observed at `earlier_t_ms`)
    /// simply continuing to play.
    pub fn continues(&self, earlier: &AudibleState, earlier_t_ms: Millis, t_ms: Millis) -> bool {
        t_ms >= earlier_t_ms && *self == earlier.advanced((t_ms - earlier_t_ms) as u64)
    }
}

/// One visitor's guidebook.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceState {
    pub device_id: DeviceId,
    pub peer_id: DeviceId,
    pub current_wall_id: WallId,
    pub own: Option<PlaybackRecord>,
    pub peer_model: Option<PlaybackRecord>,
    pub level: EavesdropLevel,
    pub tap_tip_expiry_ms: Option<Millis>,
    pub(crate) next_send_seq: u64,
    pub(crate) last_applied_peer_seq: u64,
    pub(crate) last_periodic_announce_ms: Millis,
    pub(crate) last_change_ms: Option<Millis>,
    pub(crate) change_announces_sent: u32,
}

impl DeviceState {
    pub fn new(device_id: DeviceId, peer_id: DeviceId, wall: WallId) -> Self {
        Self {
            device_id,
            peer_id,
            current_wall_id: wall,
            own: None,
            peer_model: None,
            level: EavesdropLevel::default(),
            tap_tip_expiry_ms: None,
            next_send_seq: 1,
            last_applied_peer_seq: 0,
            last_periodic_announce_ms: 0,
            last_change_ms: None,
            change_announces_sent: 0,
        }
    }

    pub fn next_send_seq(&self) -> u64 {
        self.next_send_seq
    }

    pub fn last_applied_peer_seq(&self) -> u64 {
        self.last_applied_peer_seq
    }

    pub(crate) fn take_seq(&mut self) -> u64 {
        let seq = self.next_send_seq;
        self.next_send_seq += 1;
        seq
    }

    pub(crate) fn message(&mut self, now_ms: Millis, payload: Payload) -> ControlMessage {
        ControlMessage { sender: self.device_id.clone(), seq: self.take_seq(), sent_at_ms: now_ms, payload }
    }

    /// Own clip and its position, if one is playing at `now_ms`.
    pub fn own_playing(&self, catalog: &Catalog, now_ms: Millis) -> Result<Option<(&ClipId, u64)>, EngineError> {
        match &self.own {
            Some(rec) => Ok(rec.position_at(catalog, now_ms)?.map(|pos| (&rec.clip_id, pos))),
            None => Ok(None),
        }
    }

    /// What this device's earphone carries at `now_ms`.
    pub fn render(&self, catalog: &Catalog, now_ms: Millis, config: &GuidebookConfig) -> Result<AudibleState, EngineError> {
        if let Some((clip_id, position_ms)) = self.own_playing(catalog, now_ms)? {
            return Ok(AudibleState::Playing {
                clip_id: clip_id.clone(),
                position_ms,
                gain: PERSONAL_GAIN,
                source: Source::Personal,
                reverb: false,
            });
        }
        if let Some(peer) = &self.peer_model {
            if let Some(position_ms) = peer.position_at(catalog, now_ms)? {
                if self.level != EavesdropLevel::Off {
                    return Ok(AudibleState::Playing {
                        clip_id: peer.clip_id.clone(),
                        position_ms,
                        gain: self.level.gain(config.quiet_gain),
                        source: Source::Eavesdropped,
                        reverb: true,
                    });
                }
            }
        }
        Ok(AudibleState::Silence)
    }

    /// Open-air comparison: the companion's actual clip is audible through
    /// a speaker at full gain, without reverb. Own clips still take priority.
    pub fn render_open_air(&self, companion: &DeviceState, catalog: &Catalog, now_ms: Millis) -> Result<AudibleState, EngineError> {
        if let Some((clip_id, position_ms)) = self.own_playing(catalog, now_ms)? {
            return Ok(AudibleState::Playing {
                clip_id: clip_id.clone(),
                position_ms,
                gain: PERSONAL_GAIN,
                source: Source::Personal,
                reverb: false,
            });
        }
        if let Some((clip_id, position_ms)) = companion.own_playing(catalog, now_ms)? {
            return Ok(AudibleState::Playing {
                clip_id: clip_id.clone(),
                position_ms,
                gain: PERSONAL_GAIN,
                source: Source::OpenAir,
                reverb: false,
            });
        }
        Ok(AudibleState::Silence)
    }

    /// Starts (or replaces) the personal clip. Sharing is implicit: the
    /// returned Start message is what the companion eavesdrops on.
    pub fn start_personal(&mut self, catalog: &Catalog, clip_id: &ClipId, now_ms: Millis) -> Result<ControlMessage, EngineError> {
        if catalog.clip(clip_id).is_none() {
            return Err(EngineError::UnknownClip(clip_id.clone()));
        }
        let msg = self.message(now_ms, Payload::Start { clip_id: clip_id.clone(), position_ms: 0 });
        self.own = Some(PlaybackRecord { clip_id: clip_id.clone(), start_ms: now_ms, seq: msg.seq });
        self.mark_changed(now_ms);
        Ok(msg)
    }

    pub fn stop_personal(&mut self, catalog: &Catalog, now_ms: Millis) -> Result<ControlMessage, EngineError> {
        let clip_id = match self.own_playing(catalog, now_ms)? {
            Some((clip_id, _)) => clip_id.clone(),
            None => return Err(EngineError::NotPlaying),
        };
        self.own = None;
        let msg = self.message(now_ms, Payload::Stop { clip_id });
        self.mark_changed(now_ms);
        Ok(msg)
    }

    /// Eavesdrop level is private to the listener; nothing is sent.
    pub fn set_level(&mut self, level: EavesdropLevel) {
        self.level = level;
    }

    /// Changes the displayed wall. Playback continues.
    pub fn switch_wall(&mut self, catalog: &Catalog, wall_id: &WallId) -> Result<(), EngineError> {
        if catalog.wall(wall_id).is_none() {
            return Err(EngineError::UnknownWall(wall_id.clone()));
        }
        self.current_wall_id = wall_id.clone();
        Ok(())
    }

    /// A tap on `wall_id` (which becomes the displayed wall). A hit starts
    /// the target's clip; a miss arms tap tips.
    pub fn tap(
        &mut self,
        catalog: &Catalog,
        wall_id: &WallId,
        point: Point,
        now_ms: Millis,
        config: &GuidebookConfig,
    ) -> Result<(TapOutcome, Option<ControlMessage>), EngineError> {
        let wall = catalog.wall(wall_id).ok_or_else(|| EngineError::UnknownWall(wall_id.clone()))?;
        let outcome = wall.resolve_tap(point, now_ms, config.tap_tip_duration_ms)?;
        self.current_wall_id = wall_id.clone();
        let msg = match &outcome {
            TapOutcome::Hit { clip_id, .. } => Some(self.start_personal(catalog, clip_id, now_ms)?),
            TapOutcome::Miss { tip_expiry_ms, .. } => {
                self.tap_tip_expiry_ms = Some(*tip_expiry_ms);
                None
            }
        };
        Ok((outcome, msg))
    }

    fn mark_changed(&mut self, now_ms: Millis) {
        self.last_change_ms = Some(now_ms);
        self.change_announces_sent = 0;
    }
}
