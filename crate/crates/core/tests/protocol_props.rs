use proptest::prelude::*;
use sottovoce_core::protocol::{wire, ControlMessage, Payload, ProtocolConfig, Snapshot};
use sottovoce_core::{Catalog, DeviceState};

const CATALOG: &str = include_str!("data/two_clips.json");

fn payload_strategy() -> impl Strategy<Value = Payload> {
    let clip = prop_oneof![Just("c1"), Just("c2"), Just("c7"), Just("story")];
    prop_oneof![
        (clip.clone(), 0u64..5000).prop_map(|(c, p)| Payload::Start { clip_id: c.into(), position_ms: p }),
        clip.clone().prop_map(|c| Payload::Stop { clip_id: c.into() }),
        (clip, 0u64..5000).prop_map(|(c, p)| Payload::Announce { snapshot: Some(Snapshot { clip_id: c.into(), position_ms: p }) }),
        Just(Payload::Announce { snapshot: None }),
    ]
}

fn receiver() -> DeviceState {
    DeviceState::new("A".into(), "B".into(), "w".into())
}

proptest! {
    /// Any delivery order (with duplicates) ends where the newest message says.
    #[test]
    fn any_order_converges_to_newest(
        payloads in prop::collection::vec(payload_strategy(), 1..12),
        receive_times in prop::collection::vec(0i64..100_000, 12),
        order in Just(()).prop_perturb(|_, mut rng| {
            let mut idx: Vec<usize> = (0..24).map(|i| i % 12).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, (rng.next_u32() as usize) % (i + 1));
            }
            idx
        }),
    ) {
        let catalog = Catalog::from_json(CATALOG.as_bytes()).unwrap();
        let cfg = ProtocolConfig::default();
        let msgs: Vec<(ControlMessage, i64)> = payloads
            .iter()
            .enumerate()
            .map(|(i, p)| (ControlMessage { sender: "B".into(), seq: i as u64 + 1, sent_at_ms: 0, payload: p.clone() }, receive_times[i]))
            .collect();

        let mut in_order = receiver();
        for (m, t) in &msgs {
            in_order.on_receive(&catalog, m, *t, &cfg).unwrap();
        }
        let mut shuffled = receiver();
        let mut seen = Vec::new();
        for &i in order.iter().filter(|&&i| i < msgs.len()) {
            let before = shuffled.last_applied_peer_seq();
            shuffled.on_receive(&catalog, &msgs[i].0, msgs[i].1, &cfg).unwrap();
            prop_assert!(shuffled.last_applied_peer_seq() >= before);
            seen.push(i);
        }
        prop_assume!(seen.contains(&(msgs.len() - 1)));
        prop_assert_eq!(&shuffled.peer_model, &in_order.peer_model);
        prop_assert_eq!(shuffled.last_applied_peer_seq(), msgs.len() as u64);
    }

    #[test]
    fn wire_round_trip(payload in payload_strategy(), seq in 1u64..u64::MAX / 2, sent in 0i64..i64::MAX / 2) {
        let msg = ControlMessage { sender: "A".into(), seq, sent_at_ms: sent, payload };
        let mut dec = wire::Decoder::default();
        prop_assert_eq!(dec.decode(&wire::encode(&msg)).unwrap(), Some(msg));
    }
}

#[test]
fn stop_start_delivery_orders_agree() {
    let catalog = Catalog::from_json(CATALOG.as_bytes()).unwrap();
    let cfg = ProtocolConfig::default();
    let start =
        ControlMessage { sender: "B".into(), seq: 4, sent_at_ms: 0, payload: Payload::Start { clip_id: "c2".into(), position_ms: 0 } };
    let stop = ControlMessage { sender: "B".into(), seq: 5, sent_at_ms: 10, payload: Payload::Stop { clip_id: "c2".into() } };
    let mut finals = Vec::new();
    for order in [[&start, &stop], [&stop, &start]] {
        let mut a = receiver();
        for (k, m) in order.into_iter().enumerate() {
            a.on_receive(&catalog, m, 100 + k as i64, &cfg).unwrap();
        }
        finals.push((a.peer_model.clone(), a.last_applied_peer_seq()));
    }
    assert_eq!(finals[0], finals[1]);
    assert_eq!(finals[0], (None, 5));
}

#[test]
fn lost_start_is_healed_by_announce() {
    let catalog = Catalog::from_json(CATALOG.as_bytes()).unwrap();
    let cfg = ProtocolConfig { change_announces: 0, ..Default::default() };
    let mut a = receiver();
    let mut b = DeviceState::new("B".into(), "A".into(), "w".into());
    let _lost = b.start_personal(&catalog, &"c2".into(), 300).unwrap();
    assert!(!sottovoce_core::protocol::peer_divergence(&a, &b, &catalog, 500).unwrap().all_match());
    let announce = b.due_announce(&catalog, 1000, &cfg).unwrap().unwrap();
    a.on_receive(&catalog, &announce, 1000, &cfg).unwrap();
    let report = sottovoce_core::protocol::peer_divergence(&a, &b, &catalog, 1000).unwrap();
    assert!(report.all_match());
    assert_eq!(report.a_models_b.position_error_ms, Some(0));
}

#[test]
fn wire_vocabulary_has_no_audio_payload() {
    // every kind the decoder accepts carries only ids and positions
    let mut dec = wire::Decoder::default();
    for kind in ["start", "stop", "announce"] {
        let text = format!(r#"{{"sender":"A","seq":1,"sent_at_ms":0,"kind":"{kind}","clip_id":"c1","position_ms":0,"audio":"AAAA"}}"#);
        let msg = dec.decode(&text).unwrap().unwrap();
        assert!(!wire::encode(&msg).contains("audio"));
    }
    for kind in ["voice", "audio", "pcm"] {
        let text = format!(r#"{{"sender":"A","seq":1,"sent_at_ms":0,"kind":"{kind}"}}"#);
        assert_eq!(dec.decode(&text).unwrap(), None);
    }
    assert_eq!(dec.unknown_kinds, 3);
}
