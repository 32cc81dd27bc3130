use serde::Serialize;

use crate::audio::{AudibleState, EavesdropLevel, Source};
use crate::ids::Millis;

use super::scenario::{pair_ids, Action, Scenario};
use super::timeline::Timeline;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharingStats {
    /// Fraction of the session during which both devices had eavesdropping on.
    pub mutual_eavesdrop_fraction: f64,
    /// Time both devices rendered the same clip.
    pub simultaneous_listening_ms: u64,
    /// Per device (A, B): time spent hearing the companion's clip.
    pub eavesdrop_listen_ms: [u64; 2],
}

/// Piecewise-constant level per device over `[0, end_ms)`.
fn level_changes(scenario: &Scenario, device: usize) -> Vec<(Millis, EavesdropLevel)> {
    let id = &pair_ids()[device];
    let mut out = vec![(0, EavesdropLevel::default())];
    for ev in scenario.events.iter().filter(|e| &e.device == id) {
        if let Action::SetLevel { level } = ev.action {
            out.push((ev.at_ms, level));
        }
    }
    out
}

fn value_at<T: Copy>(changes: &[(Millis, T)], t: Millis) -> T {
    let idx = changes.partition_point(|(at, _)| *at <= t);
    changes[idx.saturating_sub(1)].1
}

pub fn compute_stats(timeline: &Timeline, scenario: &Scenario) -> SharingStats {
    let end = scenario.end_ms;
    let levels = [level_changes(scenario, 0), level_changes(scenario, 1)];

    // every instant at which any integrand can change
    let mut cuts: Vec<Millis> = vec![0, end];
    cuts.extend(levels.iter().flatten().map(|(t, _)| *t));
    cuts.extend(timeline.tracks.iter().flat_map(|tr| tr.points.iter().map(|p| p.t_ms)));
    cuts.retain(|&t| (0..=end).contains(&t));
    cuts.sort_unstable();
    cuts.dedup();

    let mut mutual = 0u64;
    let mut together = 0u64;
    let mut eavesdrop = [0u64; 2];
    for w in cuts.windows(2) {
        let (from, to) = (w[0], w[1]);
        let len = (to - from) as u64;
        if levels.iter().all(|l| value_at(l, from) != EavesdropLevel::Off) {
            mutual += len;
        }
        let states: Vec<AudibleState> = timeline.tracks.iter().map(|tr| tr.state_at(from)).collect();
        if states.len() == 2 && states[0].clip_id().is_some() && states[0].clip_id() == states[1].clip_id() {
            together += len;
        }
        for (i, s) in states.iter().enumerate().take(2) {
            if matches!(s.source(), Some(Source::Eavesdropped | Source::OpenAir)) {
                eavesdrop[i] += len;
            }
        }
    }
    SharingStats {
        mutual_eavesdrop_fraction: if end > 0 { mutual as f64 / end as f64 } else { 0.0 },
        simultaneous_listening_ms: together,
        eavesdrop_listen_ms: eavesdrop,
    }
}
