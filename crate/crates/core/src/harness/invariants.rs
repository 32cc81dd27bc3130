//! Checks applied at every processed millisecond of a run.

use std::fmt;

use serde::Serialize;

use crate::audio::{AudibleState, EavesdropLevel, Source, PERSONAL_GAIN};
use crate::ids::{DeviceId, Millis};

use super::engine::Simulation;
use super::scenario::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    PersonalAttributes,
    EavesdropAttributes,
    PositionOutOfRange,
    PreemptionFailed,
    SequenceRegressed,
    SkewExceeded,
    OracleMismatch,
    EngineError,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub t_ms: Millis,
    pub device: DeviceId,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} device={} {:?}: {}", self.t_ms, self.device, self.kind, self.detail)
    }
}

/// Tracks sequence counters between checkpoints.
#[derive(Debug, Default)]
pub struct InvariantChecker {
    seqs: Option<[(u64, u64); 2]>,
}

impl InvariantChecker {
    pub fn check(&mut self, sim: &Simulation<'_>, t: Millis, out: &mut Vec<Violation>) {
        let catalog = sim.catalog();
        let cfg = sim.config();
        let devices = sim.devices();
        let mut push = |i: usize, kind: ViolationKind, detail: String| {
            out.push(Violation { t_ms: t, device: devices[i].device_id.clone(), kind, detail });
        };

        for (i, (_, state)) in sim.rendered().iter().enumerate() {
            let state = state.advanced((t - sim.rendered()[i].0) as u64);
            let dev = &devices[i];
            if let AudibleState::Playing { clip_id, position_ms, gain, source, reverb } = &state {
                match catalog.duration_ms(clip_id) {
                    Some(d) if *position_ms < d => {}
                    _ => push(i, ViolationKind::PositionOutOfRange, format!("{clip_id} at {position_ms} ms")),
                }
                match source {
                    Source::Personal => {
                        if *gain != PERSONAL_GAIN || *reverb {
                            push(i, ViolationKind::PersonalAttributes, format!("gain {gain}, reverb {reverb}"));
                        }
                    }
                    Source::Eavesdropped => {
                        let expected = dev.level.gain(cfg.guidebook.quiet_gain);
                        if !*reverb || dev.level == EavesdropLevel::Off || *gain != expected || cfg.mode != Mode::Eavesdrop {
                            push(i, ViolationKind::EavesdropAttributes, format!("gain {gain}, level {:?}, reverb {reverb}", dev.level));
                        }
                    }
                    Source::OpenAir => {
                        if cfg.mode != Mode::Openair || *gain != PERSONAL_GAIN || *reverb {
                            push(i, ViolationKind::EavesdropAttributes, format!("open-air audio with gain {gain}"));
                        }
                    }
                }
            }
            match dev.own_playing(catalog, t) {
                Ok(Some((clip, _))) if state.source() != Some(Source::Personal) || state.clip_id() != Some(clip) => {
                    push(i, ViolationKind::PreemptionFailed, format!("own {clip} playing but rendered {state:?}"));
                }
                Ok(_) => {}
                Err(e) => push(i, ViolationKind::EngineError, e.to_string()),
            }
        }

        let now = [0, 1].map(|i| (devices[i].next_send_seq(), devices[i].last_applied_peer_seq()));
        if let Some(prev) = self.seqs {
            for i in 0..2 {
                if now[i].0 < prev[i].0 || now[i].1 < prev[i].1 {
                    push(i, ViolationKind::SequenceRegressed, format!("{:?} -> {:?}", prev[i], now[i]));
                }
            }
        }
        self.seqs = Some(now);

        // bounded skew on a loss-free channel, once the listener's model reflects
        // the companion's current clip
        if cfg.mode == Mode::Eavesdrop && cfg.network.loss_probability == 0.0 {
            let bound = cfg.network.delay_max_ms + cfg.protocol.latency_compensation_ms + cfg.protocol.position_tolerance_ms;
            for i in 0..2 {
                let (listener, speaker) = (&devices[i], &devices[1 - i]);
                let (Some(model), Some(own)) = (&listener.peer_model, &speaker.own) else { continue };
                if model.seq < own.seq || model.clip_id != own.clip_id {
                    continue;
                }
                let heard = sim.rendered()[i].1.advanced((t - sim.rendered()[i].0) as u64);
                let said = sim.rendered()[1 - i].1.advanced((t - sim.rendered()[1 - i].0) as u64);
                if let (
                    AudibleState::Playing { source: Source::Eavesdropped, position_ms: p, clip_id: c, .. },
                    AudibleState::Playing { source: Source::Personal, position_ms: q, clip_id: d, .. },
                ) = (&heard, &said)
                {
                    if c == d && p.abs_diff(*q) > bound {
                        push(i, ViolationKind::SkewExceeded, format!("{c}: {p} vs {q} ms, bound {bound}"));
                    }
                }
            }
        }
    }
}
