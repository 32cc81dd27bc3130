//! One live session: a single owner task serializes commands and ticks.

use std::sync::Arc;
use std::time::Duration;

use sottovoce_core::harness::{ActionResult, Mode, Scenario, ScenarioEvent, SimConfig, Simulation};
use sottovoce_core::{Catalog, Millis};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{Instant, MissedTickBehavior};

use crate::frames::{Ack, ClientCommand, ServerFrame, Slot, TapAck};
use crate::ServerConfig;

pub(crate) type Outbox = mpsc::UnboundedSender<ServerFrame>;

pub(crate) enum SessionCmd {
    Join { slot: Slot, conn: u64, outbox: Outbox, reply: oneshot::Sender<Result<(), String>> },
    Command { slot: Slot, conn: u64, cmd: ClientCommand },
    Leave { slot: Slot, conn: u64 },
    Recording { reply: oneshot::Sender<Scenario> },
}

struct Binding {
    conn: u64,
    outbox: Outbox,
}

struct Session<'c> {
    id: String,
    config: Arc<ServerConfig>,
    origin: Instant,
    sim: Simulation<'c>,
    slots: [Option<Binding>; 2],
    log: Vec<ScenarioEvent>,
    tips_until: [Option<Millis>; 2],
}

impl<'c> Session<'c> {
    fn now(&self) -> Millis {
        self.origin.elapsed().as_millis() as Millis
    }

    fn send(&self, slot: usize, frame: ServerFrame) {
        if let Some(b) = &self.slots[slot] {
            // a closed outbox means the connection is going away; its Leave follows
            let _ = b.outbox.send(frame);
        }
    }

    fn advance(&mut self, now: Millis) {
        if let Err(e) = self.sim.advance_to(now) {
            tracing::error!(session = %self.id, "engine error: {e}");
        }
        for outcome in self.sim.take_outcomes() {
            let ack = match outcome.result {
                ActionResult::Tap(outcome) => Ack::Tap { outcome: TapAck::from(outcome) },
                ActionResult::LevelSet => Ack::SetLevel { level: self.sim.devices()[outcome.device_index].level },
                ActionResult::WallSwitched => Ack::SwitchWall { wall_id: self.sim.devices()[outcome.device_index].current_wall_id.clone() },
                ActionResult::Stopped => Ack::Stop { stopped: true },
                ActionResult::NotPlaying => Ack::Stop { stopped: false },
            };
            if let Ack::Tap { outcome: TapAck::Miss { outlines, expires_ms } } = &ack {
                self.tips_until[outcome.device_index] = Some(*expires_ms);
                self.send(outcome.device_index, ServerFrame::Tips { outlines: outlines.clone(), expires_ms: *expires_ms });
            }
            self.send(outcome.device_index, ServerFrame::Ack(ack));
        }
        for (i, point) in self.sim.take_changes() {
            self.send(i, ServerFrame::Audible { t_ms: point.t_ms, state: point.state });
        }
        for i in 0..2 {
            if let Some(expires_ms) = self.tips_until[i].filter(|&t| t <= now) {
                self.tips_until[i] = None;
                self.send(i, ServerFrame::Tips { outlines: Vec::new(), expires_ms });
            }
        }
    }

    fn handle(&mut self, cmd: SessionCmd) {
        let now = self.now();
        self.advance(now);
        match cmd {
            SessionCmd::Join { slot, conn, outbox, reply } => {
                let i = slot.index();
                if self.slots[i].is_some() {
                    let _ = reply.send(Err(format!("slot {} is taken", slot.device())));
                    return;
                }
                let device = &self.sim.devices()[i];
                let _ = outbox.send(ServerFrame::Catalog {
                    session: self.id.clone(),
                    slot,
                    checksum: self.config.catalog.checksum().to_owned(),
                    wall_id: device.current_wall_id.clone(),
                    tick_ms: self.config.tick_ms,
                    catalog: self.config.catalog.to_value(),
                });
                let (t_ms, state) = self.sim.rendered()[i].clone();
                let _ = outbox.send(ServerFrame::Audible { t_ms, state });
                self.slots[i] = Some(Binding { conn, outbox });
                let _ = reply.send(Ok(()));
            }
            SessionCmd::Leave { slot, conn } => {
                let i = slot.index();
                if self.slots[i].as_ref().is_some_and(|b| b.conn == conn) {
                    self.slots[i] = None;
                    self.tips_until[i] = None;
                }
            }
            SessionCmd::Command { slot, conn, cmd } => {
                let i = slot.index();
                if !self.slots[i].as_ref().is_some_and(|b| b.conn == conn) {
                    return;
                }
                let Some(action) = cmd.action() else {
                    self.send(i, ServerFrame::error("already joined"));
                    return;
                };
                if let Err(reason) = action.check(self.config.catalog.as_ref()) {
                    self.send(i, ServerFrame::error(reason));
                    return;
                }
                // its own millisecond, after anything already rendered
                let at_ms = self.sim.now() + 1;
                let event = ScenarioEvent::new(at_ms, slot.device(), action);
                if let Err(e) = self.sim.schedule(event.clone()) {
                    self.send(i, ServerFrame::error(e.to_string()));
                    return;
                }
                self.log.push(event);
                self.advance(at_ms);
            }
            SessionCmd::Recording { reply } => {
                let _ = reply.send(self.recording(self.sim.now()));
            }
        }
    }

    fn recording(&self, now: Millis) -> Scenario {
        let cfg = self.sim.config();
        Scenario {
            catalog_ref: self.config.catalog_ref.clone(),
            network: cfg.network.clone(),
            protocol: cfg.protocol.clone(),
            guidebook: cfg.guidebook.clone(),
            mode: cfg.mode,
            events: self.log.clone(),
            end_ms: now,
        }
    }
}

/// Runs a session until every handle to it is dropped.
pub(crate) async fn run(id: String, config: Arc<ServerConfig>, mut rx: mpsc::UnboundedReceiver<SessionCmd>) {
    let catalog: &Catalog = &config.catalog.clone();
    let sim_config = SimConfig {
        mode: Mode::Eavesdrop,
        network: config.network.clone(),
        protocol: config.protocol.clone(),
        guidebook: config.guidebook.clone(),
    };
    let sim = match Simulation::new(catalog, sim_config) {
        Ok(sim) => sim.streaming(),
        Err(e) => {
            tracing::error!(session = %id, "cannot start session: {e}");
            return;
        }
    };
    let mut tick = tokio::time::interval(Duration::from_millis(config.tick_ms));
    tick.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut session =
        Session { id, config: config.clone(), origin: Instant::now(), sim, slots: [None, None], log: Vec::new(), tips_until: [None; 2] };
    loop {
        tokio::select! {
            cmd = rx.recv() => match cmd {
                Some(cmd) => session.handle(cmd),
                None => break,
            },
            _ = tick.tick() => {
                let now = session.now();
                session.advance(now);
            }
        }
    }
}
