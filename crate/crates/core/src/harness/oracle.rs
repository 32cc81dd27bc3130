//! Brute-force reference for [`run_scenario`](super::run_scenario).
//!
//! Nothing here is incremental. Every sample recomputes each device's state
//! from the complete scenario and delivery history:
//!
//! * own playback is a fold over that device's events up to the sample;
//! * the model of the companion is whatever the highest-sequence message
//!   delivered so far says (stale messages can never win);
//! * the audible state follows directly from those two and the level.
//!
//! The send schedule (which messages exist, their sequence numbers and the
//! order they reach the seeded channel) is derived from the scenario alone,
//! so the resulting delivery schedule is the one the engine sees.

use serde::Serialize;

use crate::audio::EavesdropLevel;
use crate::audio::{AudibleState, Source};
use crate::catalog::Catalog;
use crate::geometry::Point;
use crate::ids::{ClipId, DeviceId, Millis};
use crate::protocol::{ControlMessage, Payload, Snapshot};
use crate::simnet::{DeliveryEvent, SimNet};

use super::scenario::{pair_ids, Action, Mode, Scenario, ScenarioError};
use super::timeline::{ChangePoint, Timeline, Track};

pub const DEFAULT_STEP_MS: u64 = 10;

struct OwnClip {
    clip_id: ClipId,
    start_ms: Millis,
}

/// Own clip after applying the first `count` events of `device` (in file order).
fn own_after(s: &Scenario, catalog: &Catalog, device: &DeviceId, count: usize) -> Option<OwnClip> {
    let mut own: Option<OwnClip> = None;
    for ev in s.events.iter().filter(|e| &e.device == device).take(count) {
        match &ev.action {
            Action::Tap { wall_id, x, y } => {
                let wall = catalog.wall(wall_id)?;
                if let Ok(Some(target)) = wall.hit_test(Point::new(*x, *y)) {
                    own = Some(OwnClip { clip_id: target.clip_id.clone(), start_ms: ev.at_ms });
                }
            }
            Action::StopPersonal => {
                if own.as_ref().is_some_and(|o| active(catalog, &o.clip_id, o.start_ms, ev.at_ms)) {
                    own = None;
                }
            }
            Action::SetLevel { .. } | Action::SwitchWall { .. } => {}
        }
    }
    own
}

fn active(catalog: &Catalog, clip: &ClipId, start: Millis, t: Millis) -> bool {
    let dur = catalog.duration_ms(clip).unwrap_or(0) as Millis;
    start <= t && t < start + dur
}

fn own_at(s: &Scenario, catalog: &Catalog, device: &DeviceId, t: Millis) -> Option<OwnClip> {
    let count = s.events.iter().filter(|e| &e.device == device && e.at_ms <= t).count();
    own_after(s, catalog, device, count).filter(|o| active(catalog, &o.clip_id, o.start_ms, t))
}

fn level_at(s: &Scenario, device: &DeviceId, t: Millis) -> EavesdropLevel {
    s.events
        .iter()
        .rev()
        .filter(|e| &e.device == device && e.at_ms <= t)
        .find_map(|e| match e.action {
            Action::SetLevel { level } => Some(level),
            _ => None,
        })
        .unwrap_or_default()
}

/// A message in the global send order: (time, class, tie, device index, payload).
/// Class 1 = scenario event (tie: file index), class 2 = announce timer (tie: device).
type Send = (Millis, u8, usize, usize, Payload);

fn sends(s: &Scenario, catalog: &Catalog) -> Vec<Send> {
    let ids = pair_ids();
    let interval = s.protocol.announce_interval_ms as Millis;
    let spacing = s.protocol.change_announce_spacing_ms() as Millis;
    let mut out = Vec::new();
    for (d, id) in ids.iter().enumerate() {
        let mut changes = Vec::new();
        let mut nth = 0;
        for (file_idx, ev) in s.events.iter().enumerate() {
            if &ev.device != id {
                continue;
            }
            let before = own_after(s, catalog, id, nth);
            nth += 1;
            match &ev.action {
                Action::Tap { wall_id, x, y } => {
                    let hit = catalog.wall(wall_id).and_then(|w| w.hit_test(Point::new(*x, *y)).ok().flatten());
                    if let Some(target) = hit {
                        out.push((ev.at_ms, 1, file_idx, d, Payload::Start { clip_id: target.clip_id.clone(), position_ms: 0 }));
                        changes.push(ev.at_ms);
                    }
                }
                Action::StopPersonal => {
                    if let Some(o) = before.filter(|o| active(catalog, &o.clip_id, o.start_ms, ev.at_ms)) {
                        out.push((ev.at_ms, 1, file_idx, d, Payload::Stop { clip_id: o.clip_id }));
                        changes.push(ev.at_ms);
                    }
                }
                _ => {}
            }
        }
        let mut times: Vec<Millis> = (1..).map(|k| k * interval).take_while(|&t| t <= s.end_ms).collect();
        for (j, &c) in changes.iter().enumerate() {
            let next_change = changes.get(j + 1).copied();
            for m in 1..=Millis::from(s.protocol.change_announces) {
                let t = c + m * spacing;
                if t <= s.end_ms && next_change.is_none_or(|n| t < n) {
                    times.push(t);
                }
            }
        }
        times.sort_unstable();
        times.dedup();
        for t in times {
            let snapshot = own_at(s, catalog, id, t).map(|o| Snapshot { clip_id: o.clip_id, position_ms: (t - o.start_ms) as u64 });
            out.push((t, 2, d, d, Payload::Announce { snapshot }));
        }
    }
    out.sort_by_key(|m| (m.0, m.1, m.2));
    out
}

fn deliveries(s: &Scenario, catalog: &Catalog) -> Result<Vec<DeliveryEvent>, ScenarioError> {
    let ids = pair_ids();
    let mut net = SimNet::new(s.network.clone())?;
    let mut seqs = [0u64; 2];
    let mut out = Vec::new();
    for (t, _, _, d, payload) in sends(s, catalog) {
        seqs[d] += 1;
        let msg = ControlMessage { sender: ids[d].clone(), seq: seqs[d], sent_at_ms: t, payload };
        out.extend(net.send(&msg, &ids[1 - d], t));
    }
    Ok(out)
}

/// The companion's clip as seen by `device` at `t`: start estimate from the
/// newest delivered message.
fn peer_at(s: &Scenario, deliveries: &[DeliveryEvent], device: &DeviceId, t: Millis) -> Option<OwnClip> {
    let newest = deliveries
        .iter()
        .filter(|d| &d.recipient == device && d.deliver_at_ms <= t)
        .min_by_key(|d| (std::cmp::Reverse(d.msg.seq), d.deliver_at_ms, d.index))?;
    let comp = s.protocol.latency_compensation_ms as Millis;
    match &newest.msg.payload {
        Payload::Start { clip_id, position_ms } | Payload::Announce { snapshot: Some(Snapshot { clip_id, position_ms }) } => {
            Some(OwnClip { clip_id: clip_id.clone(), start_ms: newest.deliver_at_ms - *position_ms as Millis - comp })
        }
        Payload::Stop { .. } | Payload::Announce { snapshot: None } => None,
    }
}

fn playing(clip: OwnClip, t: Millis, gain: f64, source: Source, reverb: bool) -> AudibleState {
    AudibleState::Playing { clip_id: clip.clip_id, position_ms: (t - clip.start_ms) as u64, gain, source, reverb }
}

fn sample(s: &Scenario, catalog: &Catalog, deliveries: &[DeliveryEvent], d: usize, t: Millis) -> AudibleState {
    let ids = pair_ids();
    let me = &ids[d];
    if let Some(own) = own_at(s, catalog, me, t) {
        return playing(own, t, 1.0, Source::Personal, false);
    }
    match s.mode {
        Mode::Openair => match own_at(s, catalog, &ids[1 - d], t) {
            Some(other) => playing(other, t, 1.0, Source::OpenAir, false),
            None => AudibleState::Silence,
        },
        Mode::Eavesdrop => {
            let gain = match level_at(s, me, t) {
                EavesdropLevel::Off => return AudibleState::Silence,
                EavesdropLevel::Quiet => s.guidebook.quiet_gain,
                EavesdropLevel::Loud => 1.0,
            };
            match peer_at(s, deliveries, me, t).filter(|p| active(catalog, &p.clip_id, p.start_ms, t)) {
                Some(peer) => playing(peer, t, gain, Source::Eavesdropped, true),
                None => AudibleState::Silence,
            }
        }
    }
}

/// Sample times: every `step_ms` from 0, plus `end_ms`.
pub fn sample_times(end_ms: Millis, step_ms: u64) -> Vec<Millis> {
    let mut times: Vec<Millis> = (0..=end_ms).step_by(step_ms.max(1) as usize).collect();
    if times.last() != Some(&end_ms) {
        times.push(end_ms);
    }
    times
}

/// Sampled re-simulation producing change points at sample resolution.
pub fn oracle_run(scenario: &Scenario, catalog: &Catalog, step_ms: u64) -> Result<Timeline, ScenarioError> {
    if step_ms == 0 {
        return Err(ScenarioError::Invalid("oracle step must be positive".into()));
    }
    scenario.validate(catalog)?;
    let schedule = if scenario.mode == Mode::Eavesdrop { deliveries(scenario, catalog)? } else { Vec::new() };
    let ids = pair_ids();
    let mut tracks = [Track::new(ids[0].clone()), Track::new(ids[1].clone())];
    for t in sample_times(scenario.end_ms, step_ms) {
        for (d, track) in tracks.iter_mut().enumerate() {
            let state = sample(scenario, catalog, &schedule, d, t);
            let last = track.points.last().expect("tracks start with silence");
            if !state.continues(&last.state, last.t_ms, t) {
                track.points.push(ChangePoint { t_ms: t, state });
            }
        }
    }
    Ok(Timeline { tracks: Vec::from(tracks), messages: Vec::new() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub device: DeviceId,
    pub t_ms: Millis,
    pub engine: AudibleState,
    pub oracle: AudibleState,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OracleComparison {
    pub samples: usize,
    pub mismatches: Vec<Mismatch>,
    /// Largest lag of an oracle change point behind the engine change it reflects.
    pub max_change_offset_ms: Millis,
}

impl OracleComparison {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares the engine's timeline with the oracle's at every sample time.
pub fn compare(engine: &Timeline, oracle: &Timeline, end_ms: Millis, step_ms: u64) -> OracleComparison {
    let mut out = OracleComparison::default();
    for (et, ot) in engine.tracks.iter().zip(&oracle.tracks) {
        for t in sample_times(end_ms, step_ms) {
            out.samples += 1;
            let (e, o) = (et.state_at(t), ot.state_at(t));
            if e != o {
                out.mismatches.push(Mismatch { device: et.device.clone(), t_ms: t, engine: e, oracle: o });
            }
        }
        for p in ot.points.iter().skip(1) {
            let idx = et.points.partition_point(|q| q.t_ms <= p.t_ms);
            if let Some(q) = idx.checked_sub(1).map(|i| &et.points[i]) {
                out.max_change_offset_ms = out.max_change_offset_ms.max(p.t_ms - q.t_ms);
            }
        }
    }
    out
}

/// Runs both the engine and the oracle and compares them.
pub fn oracle_check(scenario: &Scenario, catalog: &Catalog, step_ms: u64) -> Result<OracleComparison, ScenarioError> {
    let engine = super::engine::run_scenario(scenario, catalog)?;
    let oracle = oracle_run(scenario, catalog, step_ms)?;
    Ok(compare(&engine, &oracle, scenario.end_ms, step_ms))
}
