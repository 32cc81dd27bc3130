//! WebSocket message schema. Every frame is one JSON object in one text message.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sottovoce_core::harness::Action;
use sottovoce_core::{AudibleState, ClipId, EavesdropLevel, Millis, Point, TapOutcome, TargetId, WallId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

impl Slot {
    pub const fn index(self) -> usize {
        match self {
            Slot::A => 0,
            Slot::B => 1,
        }
    }

    pub const fn from_index(i: usize) -> Slot {
        if i == 0 {
            Slot::A
        } else {
            Slot::B
        }
    }

    pub const fn device(self) -> &'static str {
        match self {
            Slot::A => "A",
            Slot::B => "B",
        }
    }
}

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum ClientCommand {
    Join { session: String, slot: Slot },
    Tap { wall_id: WallId, x: f64, y: f64 },
    SetLevel { level: EavesdropLevel },
    SwitchWall { wall_id: WallId },
    Stop,
}

impl ClientCommand {
    /// The engine action for a gesture; `None` for `join`.
    pub fn action(&self) -> Option<Action> {
        Some(match self {
            ClientCommand::Join { .. } => return None,
            ClientCommand::Tap { wall_id, x, y } => Action::Tap { wall_id: wall_id.clone(), x: *x, y: *y },
            ClientCommand::SetLevel { level } => Action::SetLevel { level: *level },
            ClientCommand::SwitchWall { wall_id } => Action::SwitchWall { wall_id: wall_id.clone() },
            ClientCommand::Stop => Action::StopPersonal,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TapAck {
    Hit { target_id: TargetId, clip_id: ClipId },
    Miss { outlines: Vec<Vec<Point>>, expires_ms: Millis },
}

impl From<TapOutcome> for TapAck {
    fn from(outcome: TapOutcome) -> Self {
        match outcome {
            TapOutcome::Hit { target_id, clip_id } => TapAck::Hit { target_id, clip_id },
            TapOutcome::Miss { tip_outlines, tip_expiry_ms } => TapAck::Miss { outlines: tip_outlines, expires_ms: tip_expiry_ms },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Ack {
    Tap {
        #[serde(flatten)]
        outcome: TapAck,
    },
    SetLevel {
        level: EavesdropLevel,
    },
    SwitchWall {
        wall_id: WallId,
    },
    /// `stopped` is false when nothing personal was playing.
    Stop {
        stopped: bool,
    },
}

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Catalog { session: String, slot: Slot, checksum: String, wall_id: WallId, tick_ms: u64, catalog: Value },
    Ack(Ack),
    Audible { t_ms: Millis, state: AudibleState },
    Tips { outlines: Vec<Vec<Point>>, expires_ms: Millis },
    Error { reason: String },
}

impl ServerFrame {
    pub fn error(reason: impl Into<String>) -> Self {
        ServerFrame::Error { reason: reason.into() }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sottovoce_core::Source;

    fn round_trip(frame: ServerFrame, text: &str) {
        assert_eq!(frame.to_text(), text);
        assert_eq!(serde_json::from_str::<ServerFrame>(text).unwrap(), frame);
    }

    #[test]
    fn command_schema() {
        let cases = [
            (r#"{"cmd":"join","session":"s1","slot":"A"}"#, ClientCommand::Join { session: "s1".into(), slot: Slot::A }),
            (r#"{"cmd":"tap","wall_id":"w","x":1.5,"y":2.0}"#, ClientCommand::Tap { wall_id: "w".into(), x: 1.5, y: 2.0 }),
            (r#"{"cmd":"set_level","level":"loud"}"#, ClientCommand::SetLevel { level: EavesdropLevel::Loud }),
            (r#"{"cmd":"switch_wall","wall_id":"w2"}"#, ClientCommand::SwitchWall { wall_id: "w2".into() }),
            (r#"{"cmd":"stop"}"#, ClientCommand::Stop),
        ];
        for (text, cmd) in cases {
            assert_eq!(serde_json::from_str::<ClientCommand>(text).unwrap(), cmd);
            assert_eq!(serde_json::to_string(&cmd).unwrap(), text);
        }
        for bad in [r#"{"cmd":"dance"}"#, r#"{"cmd":"tap","x":1,"y":2}"#, r#"{"cmd":"join","session":"s","slot":"C"}"#] {
            assert!(serde_json::from_str::<ClientCommand>(bad).is_err());
        }
    }

    #[test]
    fn frame_schema() {
        round_trip(
            ServerFrame::Ack(Ack::Tap { outcome: TapAck::Hit { target_id: "t1".into(), clip_id: "c1".into() } }),
            r#"{"type":"ack","cmd":"tap","outcome":"hit","target_id":"t1","clip_id":"c1"}"#,
        );
        round_trip(
            ServerFrame::Ack(Ack::Tap {
                outcome: TapAck::Miss {
                    outlines: vec![vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]],
                    expires_ms: 2500,
                },
            }),
            r#"{"type":"ack","cmd":"tap","outcome":"miss","outlines":[[[0.0,0.0],[1.0,0.0],[0.0,1.0]]],"expires_ms":2500}"#,
        );
        round_trip(ServerFrame::Ack(Ack::Stop { stopped: false }), r#"{"type":"ack","cmd":"stop","stopped":false}"#);
        round_trip(
            ServerFrame::Audible {
                t_ms: 120,
                state: AudibleState::Playing {
                    clip_id: "c2".into(),
                    position_ms: 40,
                    gain: 0.5,
                    source: Source::Eavesdropped,
                    reverb: true,
                },
            },
            r#"{"type":"audible","t_ms":120,"state":{"kind":"playing","clip_id":"c2","position_ms":40,"gain":0.5,"source":"eavesdropped","reverb":true}}"#,
        );
        round_trip(
            ServerFrame::Audible { t_ms: 0, state: AudibleState::Silence },
            r#"{"type":"audible","t_ms":0,"state":{"kind":"silence"}}"#,
        );
        round_trip(ServerFrame::Tips { outlines: vec![], expires_ms: 9 }, r#"{"type":"tips","outlines":[],"expires_ms":9}"#);
        round_trip(ServerFrame::error("nope"), r#"{"type":"error","reason":"nope"}"#);
    }
}
