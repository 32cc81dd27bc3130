//! Event-driven execution of a paired session.
//!
//! Work items are processed in global time order. Items sharing a
//! millisecond run as: due deliveries, then scenario events (file order),
//! then announce timers (device A before B). Messages sent with zero delay
//! are delivered within the same millisecond. After each millisecond's
//! items, both devices are rendered and a change point is recorded for any
//! device whose audible state did more than advance in position. Clip
//! expiries are visited as items of their own so that natural endings are
//! recorded at their exact time.

use std::collections::VecDeque;

use crate::audio::{AudibleState, DeviceState, GuidebookConfig};
use crate::catalog::{Catalog, TapOutcome};
use crate::error::EngineError;
use crate::geometry::Point;
use crate::ids::{DeviceId, Millis};
use crate::protocol::{ControlMessage, ProtocolConfig};
use crate::simnet::{NetworkConfig, SimNet};

use super::scenario::{pair_ids, Action, Mode, Scenario, ScenarioError, ScenarioEvent};
use super::timeline::{ChangePoint, MessageEvent, MessageRecord, Timeline, Track};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    pub network: NetworkConfig,
    pub protocol: ProtocolConfig,
    pub guidebook: GuidebookConfig,
}

impl SimConfig {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self { mode: s.mode, network: s.network.clone(), protocol: s.protocol.clone(), guidebook: s.guidebook.clone() }
    }
}

/// Result of applying one scenario event.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionResult {
    Tap(TapOutcome),
    LevelSet,
    WallSwitched,
    Stopped,
    /// Stop requested while idle; nothing happened.
    NotPlaying,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionOutcome {
    pub device_index: usize,
    pub at_ms: Millis,
    pub result: ActionResult,
}

pub struct Simulation<'c> {
    catalog: &'c Catalog,
    config: SimConfig,
    devices: [DeviceState; 2],
    net: SimNet,
    events: VecDeque<ScenarioEvent>,
    now: Millis,
    rendered: [(Millis, AudibleState); 2],
    tracks: Option<[Track; 2]>,
    messages: Option<Vec<MessageRecord>>,
    fresh: Vec<(usize, ChangePoint)>,
    outcomes: Vec<ActionOutcome>,
}

impl<'c> Simulation<'c> {
    /// A simulation that keeps full timelines and a message log.
    pub fn new(catalog: &'c Catalog, config: SimConfig) -> Result<Self, ScenarioError> {
        let net = SimNet::new(config.network.clone())?;
        let wall = catalog.initial_wall().clone();
        let [a, b] = pair_ids();
        Ok(Self {
            catalog,
            devices: [DeviceState::new(a.clone(), b.clone(), wall.clone()), DeviceState::new(b.clone(), a.clone(), wall)],
            net,
            events: VecDeque::new(),
            now: 0,
            rendered: [(0, AudibleState::Silence), (0, AudibleState::Silence)],
            tracks: Some([Track::new(a), Track::new(b)]),
            messages: Some(Vec::new()),
            fresh: Vec::new(),
            outcomes: Vec::new(),
            config,
        })
    }

    /// Drops timeline and message recording; change points are only
    /// available through [`Simulation::take_changes`].
    pub fn streaming(mut self) -> Self {
        self.tracks = None;
        self.messages = None;
        self
    }

    pub fn catalog(&self) -> &'c Catalog {
        self.catalog
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn devices(&self) -> &[DeviceState; 2] {
        &self.devices
    }

    pub fn device_index(&self, id: &DeviceId) -> Option<usize> {
        self.devices.iter().position(|d| &d.device_id == id)
    }

    /// Last recorded audible state per device, with the time it was recorded.
    pub fn rendered(&self) -> &[(Millis, AudibleState); 2] {
        &self.rendered
    }

    pub fn net(&self) -> &SimNet {
        &self.net
    }

    /// Queues an event. Events must arrive in non-decreasing time order and
    /// not earlier than the current clock.
    pub fn schedule(&mut self, event: ScenarioEvent) -> Result<(), ScenarioError> {
        let floor = self.events.back().map_or(self.now, |e| e.at_ms.max(self.now));
        if event.at_ms < floor {
            return Err(ScenarioError::Invalid(format!("event at {} ms scheduled after clock reached {floor} ms", event.at_ms)));
        }
        if self.device_index(&event.device).is_none() {
            return Err(ScenarioError::Invalid(format!("unknown device {}", event.device)));
        }
        self.events.push_back(event);
        Ok(())
    }

    pub fn take_changes(&mut self) -> Vec<(usize, ChangePoint)> {
        std::mem::take(&mut self.fresh)
    }

    pub fn take_outcomes(&mut self) -> Vec<ActionOutcome> {
        std::mem::take(&mut self.outcomes)
    }

    fn eavesdrop(&self) -> bool {
        self.config.mode == Mode::Eavesdrop
    }

    fn next_boundary(&self) -> Option<Millis> {
        self.devices
            .iter()
            .flat_map(|d| [d.own.as_ref(), d.peer_model.as_ref()])
            .flatten()
            .filter_map(|rec| rec.end_ms(self.catalog))
            .filter(|&end| end > self.now)
            .min()
    }

    fn next_item_ms(&self) -> Option<Millis> {
        let mut next = [self.net.next_due_ms(), self.events.front().map(|e| e.at_ms), self.next_boundary()].into_iter().flatten().min();
        if self.eavesdrop() {
            for d in &self.devices {
                let t = d.next_announce_ms(&self.config.protocol);
                next = Some(next.map_or(t, |n| n.min(t)));
            }
        }
        next
    }

    fn log(&mut self, t_ms: Millis, event: MessageEvent, msg: &ControlMessage, to: &DeviceId) {
        if let Some(log) = &mut self.messages {
            log.push(MessageRecord { t_ms, event, from: msg.sender.clone(), to: to.clone(), seq: msg.seq, kind: msg.payload.kind() });
        }
    }

    fn transmit(&mut self, from: usize, msg: ControlMessage, t: Millis) {
        if !self.eavesdrop() {
            return;
        }
        let to = self.devices[1 - from].device_id.clone();
        self.log(t, MessageEvent::Sent, &msg, &to);
        if self.net.send(&msg, &to, t).is_empty() {
            self.log(t, MessageEvent::Dropped, &msg, &to);
        }
    }

    fn apply(&mut self, event: ScenarioEvent, t: Millis) -> Result<(), EngineError> {
        let i = self.device_index(&event.device).expect("device checked on schedule");
        let catalog = self.catalog;
        let result = match event.action {
            Action::Tap { wall_id, x, y } => {
                let (outcome, msg) = self.devices[i].tap(catalog, &wall_id, Point::new(x, y), t, &self.config.guidebook)?;
                if let Some(msg) = msg {
                    self.transmit(i, msg, t);
                }
                ActionResult::Tap(outcome)
            }
            Action::SetLevel { level } => {
                self.devices[i].set_level(level);
                ActionResult::LevelSet
            }
            Action::SwitchWall { wall_id } => {
                self.devices[i].switch_wall(catalog, &wall_id)?;
                ActionResult::WallSwitched
            }
            Action::StopPersonal => match self.devices[i].stop_personal(catalog, t) {
                Ok(msg) => {
                    self.transmit(i, msg, t);
                    ActionResult::Stopped
                }
                Err(EngineError::NotPlaying) => ActionResult::NotPlaying,
                Err(e) => return Err(e),
            },
        };
        self.outcomes.push(ActionOutcome { device_index: i, at_ms: t, result });
        Ok(())
    }

    fn render(&self, i: usize, t: Millis) -> Result<AudibleState, EngineError> {
        match self.config.mode {
            Mode::Eavesdrop => self.devices[i].render(self.catalog, t, &self.config.guidebook),
            Mode::Openair => self.devices[i].render_open_air(&self.devices[1 - i], self.catalog, t),
        }
    }

    /// Processes the next millisecond with pending work, if it is no later
    /// than `limit`. Returns the time processed.
    pub fn step(&mut self, limit: Millis) -> Result<Option<Millis>, EngineError> {
        let t = match self.next_item_ms() {
            Some(t) if t <= limit => t,
            _ => return Ok(None),
        };
        self.now = t;
        loop {
            if let Some(delivery) = self.net.pop_due(t) {
                self.log(t, MessageEvent::Delivered, &delivery.msg, &delivery.recipient);
                let i = self.device_index(&delivery.recipient).expect("recipient is a pair member");
                self.devices[i].on_receive(self.catalog, &delivery.msg, t, &self.config.protocol)?;
                continue;
            }
            if let Some(event) = self.events.pop_front_if(|e| e.at_ms <= t) {
                self.apply(event, t)?;
                continue;
            }
            let mut announced = false;
            if self.eavesdrop() {
                for i in 0..2 {
                    if self.devices[i].next_announce_ms(&self.config.protocol) <= t {
                        announced = true;
                        if let Some(msg) = self.devices[i].due_announce(self.catalog, t, &self.config.protocol)? {
                            self.transmit(i, msg, t);
                        }
                        break;
                    }
                }
            }
            if !announced {
                break;
            }
        }
        for i in 0..2 {
            let state = self.render(i, t)?;
            let (prev_t, prev) = &self.rendered[i];
            if !state.continues(prev, *prev_t, t) {
                let point = ChangePoint { t_ms: t, state: state.clone() };
                if let Some(tracks) = &mut self.tracks {
                    tracks[i].points.push(point.clone());
                }
                self.fresh.push((i, point));
                self.rendered[i] = (t, state);
            }
        }
        Ok(Some(t))
    }

    /// Runs everything due up to and including `t_ms`, then sets the clock to `t_ms`.
    pub fn advance_to(&mut self, t_ms: Millis) -> Result<(), EngineError> {
        while self.step(t_ms)?.is_some() {}
        self.now = self.now.max(t_ms);
        Ok(())
    }

    pub fn into_timeline(self) -> Timeline {
        let tracks = self.tracks.map(Vec::from).unwrap_or_default();
        Timeline { tracks, messages: self.messages.unwrap_or_default() }
    }
}

/// Runs a validated scenario to `end_ms` and returns both devices' timelines.
pub fn run_scenario(scenario: &Scenario, catalog: &Catalog) -> Result<Timeline, ScenarioError> {
    scenario.validate(catalog)?;
    let mut sim = Simulation::new(catalog, SimConfig::from_scenario(scenario))?;
    for ev in &scenario.events {
        sim.schedule(ev.clone())?;
    }
    sim.advance_to(scenario.end_ms)?;
    Ok(sim.into_timeline())
}
