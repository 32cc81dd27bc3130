use serde::Serialize;

use crate::audio::AudibleState;
use crate::ids::{DeviceId, Millis};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangePoint {
    pub t_ms: Millis,
    pub state: AudibleState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub device: DeviceId,
    /// First entry is Silence at 0; each later entry differs from its predecessor.
    pub points: Vec<ChangePoint>,
}

impl Track {
    pub fn new(device: DeviceId) -> Self {
        Self { device, points: vec![ChangePoint { t_ms: 0, state: AudibleState::Silence }] }
    }

    /// Rendered state at `t_ms`, extrapolating the position of a playing clip.
    pub fn state_at(&self, t_ms: Millis) -> AudibleState {
        let idx = self.points.partition_point(|p| p.t_ms <= t_ms);
        match idx.checked_sub(1).map(|i| &self.points[i]) {
            Some(p) => p.state.advanced((t_ms - p.t_ms) as u64),
            None => AudibleState::Silence,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageEvent {
    Sent,
    Dropped,
    Delivered,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageRecord {
    pub t_ms: Millis,
    pub event: MessageEvent,
    pub from: DeviceId,
    pub to: DeviceId,
    pub seq: u64,
    pub kind: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timeline {
    pub tracks: Vec<Track>,
    pub messages: Vec<MessageRecord>,
}

#[derive(Serialize)]
struct Line<'a> {
    t_ms: Millis,
    device: &'a DeviceId,
    state: &'a AudibleState,
}

impl Timeline {
    pub fn track(&self, device: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.device.as_str() == device)
    }

    /// One JSON object per change point, ordered by time then device.
    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<(Millis, usize, usize)> = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            lines.extend(track.points.iter().enumerate().map(|(pi, p)| (p.t_ms, ti, pi)));
        }
        lines.sort();
        let mut out = String::new();
        for (_, ti, pi) in lines {
            let track = &self.tracks[ti];
            let p = &track.points[pi];
            out.push_str(&serde_json::to_string(&Line { t_ms: p.t_ms, device: &track.device, state: &p.state }).expect("serializes"));
            out.push('\n');
        }
        out
    }
}
