//! Seeded, deterministic datagram channel between the two devices.
//!
//! Each `send` draws exactly four values from the generator (loss roll,
//! delay, duplicate roll, duplicate delay) whether or not they are used,
//! so the schedule for a given seed depends only on the send order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DeviceId, Millis};
use crate::protocol::ControlMessage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub loss_probability: f64,
    pub delay_min_ms: u64,
    pub delay_max_ms: u64,
    pub duplicate_probability: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    /// Ideal channel: no loss, no delay, no duplicates.
    fn default() -> Self {
        Self { loss_probability: 0.0, delay_min_ms: 0, delay_max_ms: 0, duplicate_probability: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkConfigError {
    #[error("{name} must be within [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("delay_min_ms ({min}) exceeds delay_max_ms ({max})")]
    DelayBounds { min: u64, max: u64 },
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetworkConfigError> {
        for (name, value) in [("loss_probability", self.loss_probability), ("duplicate_probability", self.duplicate_probability)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NetworkConfigError::Probability { name, value });
            }
        }
        if self.delay_min_ms > self.delay_max_ms {
            return Err(NetworkConfigError::DelayBounds { min: self.delay_min_ms, max: self.delay_max_ms });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliveryEvent {
    pub deliver_at_ms: Millis,
    pub msg: ControlMessage,
    pub recipient: DeviceId,
    /// Global insertion order; the tie-break for equal delivery times.
    pub index: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NetworkCounters {
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub delivered: u64,
}

pub struct SimNet {
    config: NetworkConfig,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(Millis, u64)>>,
    pending: std::collections::HashMap<u64, DeliveryEvent>,
    next_index: u64,
    counters: NetworkCounters,
}

impl SimNet {
    pub fn new(config: NetworkConfig) -> Result<Self, NetworkConfigError> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            queue: BinaryHeap::new(),
            pending: Default::default(),
            next_index: 0,
            counters: NetworkCounters::default(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn counters(&self) -> &NetworkCounters {
        &self.counters
    }

    fn schedule(&mut self, deliver_at_ms: Millis, msg: &ControlMessage, recipient: &DeviceId) -> DeliveryEvent {
        let ev = DeliveryEvent { deliver_at_ms, msg: msg.clone(), recipient: recipient.clone(), index: self.next_index };
        self.next_index += 1;
        self.queue.push(Reverse((deliver_at_ms, ev.index)));
        self.pending.insert(ev.index, ev.clone());
        ev
    }

    /// Puts `msg` on the wire. Returns the scheduled deliveries (0, 1 or 2).
    pub fn send(&mut self, msg: &ControlMessage, recipient: &DeviceId, send_ms: Millis) -> Vec<DeliveryEvent> {
        let loss_roll: f64 = self.rng.random();
        let delay = self.rng.random_range(self.config.delay_min_ms..=self.config.delay_max_ms);
        let dup_roll: f64 = self.rng.random();
        let dup_delay = self.rng.random_range(self.config.delay_min_ms..=self.config.delay_max_ms);
        self.counters.sent += 1;

        // `<` so that probability 0 never drops and 1 always drops
        if loss_roll < self.config.loss_probability {
            self.counters.dropped += 1;
            return Vec::new();
        }
        let mut out = vec![self.schedule(send_ms + delay as Millis, msg, recipient)];
        if dup_roll < self.config.duplicate_probability {
            self.counters.duplicated += 1;
            out.push(self.schedule(send_ms + dup_delay as Millis, msg, recipient));
        }
        out
    }

    pub fn next_due_ms(&self) -> Option<Millis> {
        self.queue.peek().map(|Reverse((t, _))| *t)
    }

    /// Removes the earliest event if it is due by `now_ms`.
    pub fn pop_due(&mut self, now_ms: Millis) -> Option<DeliveryEvent> {
        match self.queue.peek() {
            Some(Reverse((t, _))) if *t <= now_ms => {
                let Reverse((_, index)) = self.queue.pop().expect("peeked");
                self.counters.delivered += 1;
                self.pending.remove(&index)
            }
            _ => None,
        }
    }

    /// All events due by `now_ms`, ordered by (delivery time, insertion).
    pub fn drain_due(&mut self, now_ms: Millis) -> Vec<DeliveryEvent> {
        std::iter::from_fn(|| self.pop_due(now_ms)).collect()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Payload;

    fn msg(seq: u64) -> ControlMessage {
        ControlMessage { sender: "A".into(), seq, sent_at_ms: 0, payload: Payload::Announce { snapshot: None } }
    }

    fn net(loss: f64, min: u64, max: u64, dup: f64, seed: u64) -> SimNet {
        SimNet::new(NetworkConfig { loss_probability: loss, delay_min_ms: min, delay_max_ms: max, duplicate_probability: dup, seed })
            .unwrap()
    }

    #[test]
    fn ideal_channel_delivers_once_immediately() {
        let mut n = net(0.0, 0, 0, 0.0, 1);
        let out = n.send(&msg(1), &"B".into(), 500);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].deliver_at_ms, 500);
        assert_eq!(n.drain_due(500), out);
    }

    #[test]
    fn total_loss() {
        let mut n = net(1.0, 0, 10, 1.0, 1);
        assert!((0..100).all(|i| n.send(&msg(i), &"B".into(), 0).is_empty()));
        assert_eq!(n.counters().dropped, 100);
    }

    #[test]
    fn seeded_schedule_replays() {
        let run = || {
            let mut n = net(0.2, 20, 80, 0.1, 99);
            (0..200).flat_map(|i| n.send(&msg(i), &"B".into(), i as Millis * 7)).collect::<Vec<_>>()
        };
        let first = run();
        assert_eq!(first, run());
        assert!(first.iter().all(|e| e.deliver_at_ms >= e.msg.seq as Millis * 7 + 20));
    }

    #[test]
    fn drain_orders_by_time_then_insertion() {
        let mut n = net(0.0, 0, 0, 0.0, 0);
        for (seq, t) in [(1, 5), (2, 3), (3, 9), (4, 3)] {
            n.send(&msg(seq), &"B".into(), t);
        }
        let due: Vec<_> = n.drain_due(6).into_iter().map(|e| (e.deliver_at_ms, e.msg.seq)).collect();
        assert_eq!(due, vec![(3, 2), (3, 4), (5, 1)]);
        assert!(n.drain_due(6).is_empty());
        assert_eq!(n.next_due_ms(), Some(9));
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig { loss_probability: 1.5, ..Default::default() }.validate().is_err());
        assert!(NetworkConfig { delay_min_ms: 10, delay_max_ms: 5, ..Default::default() }.validate().is_err());
        assert!(NetworkConfig::default().validate().is_ok());
    }
}
