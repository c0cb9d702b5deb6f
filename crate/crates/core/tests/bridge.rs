use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use twinlink::bridge::{
    serve, serve_with_capacity, BoolMsg, BridgeError, BridgeMessage, BusClient, JointStateMsg, LoopbackBus, Payload,
    Stamp, WsClient,
};

const INT32: &str = "std_msgs/Int32";

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'Z', '0', '_', ' ', '"', '\\', '\n', 'é', '→', '🦀', '\u{1}'];
    let n = rng.gen_range(0..12);
    (0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn random_f64(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        1 => f64::from_bits(rng.gen::<u64>() & !(0x7ff << 52) | ((rng.gen_range(900u64..1150)) << 52)),
        2 => rng.gen_range(-1e-300..1e-300),
        _ => rng.gen_range(-1e6..1e6f64).round(),
    }
}

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let pick = if depth >= 3 {
        rng.gen_range(0..5)
    } else {
        rng.gen_range(0..7)
    };
    match pick {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => json!(random_f64(rng)),
        3 => json!(rng.gen::<i64>()),
        4 => Value::String(random_string(rng)),
        5 => Value::Array((0..rng.gen_range(0..6)).map(|_| random_value(rng, depth + 1)).collect()),
        _ => {
            let mut m = Map::new();
            for _ in 0..rng.gen_range(0..6) {
                m.insert(random_string(rng), random_value(rng, depth + 1));
            }
            Value::Object(m)
        }
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> BridgeMessage {
    let topic = format!(
        "/{}/{}",
        ["robot1", "robot2", "ue5", "sim"][rng.gen_range(0..4)],
        rng.gen_range(0..100)
    );
    let ty = [
        "sensor_msgs/JointState",
        "std_msgs/Bool",
        "geometry_msgs/TransformStamped",
    ][rng.gen_range(0..3)];
    let mut m = match rng.gen_range(0..5) {
        0 => BridgeMessage::advertise(topic, ty),
        1 => BridgeMessage::unadvertise(topic),
        2 => BridgeMessage::subscribe(topic, ty),
        3 => BridgeMessage::unsubscribe(topic),
        _ => {
            let payload = if rng.gen_bool(0.5) {
                let n = rng.gen_range(0..8);
                let js = JointStateMsg::new(
                    Stamp {
                        secs: rng.gen_range(0..10_000),
                        nsecs: rng.gen_range(0..1_000_000_000),
                    },
                    (0..n).map(|i| format!("joint_{i}")).collect(),
                    (0..n).map(|_| random_f64(rng)).collect(),
                )
                .unwrap();
                js.to_value()
            } else {
                random_value(rng, 0)
            };
            BridgeMessage::publish(topic, payload)
        }
    }
    .unwrap();
    if rng.gen_bool(0.3) {
        m = m.with_id(random_string(rng));
    }
    m
}

#[test]
fn fuzz_corpus_round_trips_with_rosbridge_field_names() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b1d6e);
    let allowed = ["op", "id", "topic", "type", "msg"];
    for i in 0..1000 {
        let m = random_message(&mut rng);
        let text = m.encode();
        assert!(!text.contains('\n'), "message {i} is not single-line");
        assert!(text.starts_with(r#"{"op":""#), "message {i}: op must lead: {text}");
        // independent parser view of the wire bytes
        let v: Value = serde_json::from_str(&text).unwrap();
        let obj = v.as_object().unwrap();
        assert!(obj.keys().all(|k| allowed.contains(&k.as_str())), "{text}");
        assert_eq!(obj["op"], m.op().as_str());
        assert_eq!(obj["topic"], m.topic());
        if let Some(p) = m.payload() {
            assert_eq!(&obj["msg"], p);
        }
        let back = BridgeMessage::decode(text.as_bytes()).unwrap();
        assert_eq!(back, m, "message {i}");
        assert_eq!(back.encode(), text);
    }
}

#[test]
fn floats_keep_at_least_fifteen_significant_digits() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let text = BridgeMessage::publish("/q", json!({ "position": [x] }))
            .unwrap()
            .encode();
        let v: Value = serde_json::from_str(&text).unwrap();
        let back = v["msg"]["position"][0].as_f64().unwrap();
        assert_eq!(back.to_bits(), x.to_bits());
        // any 15-digit rendering would agree with the shortest one to 1e-15 relative
        assert!(((back - x) / x).abs() <= 1e-15);
    }
}

#[test]
fn decode_errors_are_classified() {
    assert_eq!(
        BridgeMessage::decode(br#"{"op":"call_service","topic":"/x"}"#),
        Err(BridgeError::UnsupportedOp("call_service".into()))
    );
    assert!(matches!(
        BridgeMessage::decode(br#"{"op":"subscribe","topic":"/x"}"#),
        Err(BridgeError::MissingField("type"))
    ));
    assert!(matches!(
        BridgeMessage::decode(br#"{"op":"publish","topic":7,"msg":{}}"#),
        Err(BridgeError::Schema { field, .. }) if field == "topic"
    ));
    assert!(matches!(BridgeMessage::decode(b"[1,2]"), Err(BridgeError::Decode(_))));
}

fn publish_int(c: &mut impl BusClient, topic: &str, publisher: usize, seq: usize) {
    c.send(BridgeMessage::publish(topic, json!({ "data": [publisher, seq] })).unwrap())
        .unwrap();
}

fn unpack(m: &BridgeMessage) -> (usize, usize) {
    let d = &m.payload().unwrap()["data"];
    (d[0].as_u64().unwrap() as usize, d[1].as_u64().unwrap() as usize)
}

#[test]
fn loopback_ten_publishers_exactly_once_in_order() {
    let bus = LoopbackBus::new();
    let mut subs: Vec<_> = (0..2).map(|_| bus.client()).collect();
    for s in &mut subs {
        s.subscribe("/joint_states", INT32).unwrap();
    }
    let mut pubs: Vec<_> = (0..10).map(|_| bus.client()).collect();
    for seq in 0..1000 {
        for (p, c) in pubs.iter_mut().enumerate() {
            publish_int(c, "/joint_states", p, seq);
        }
        if seq % 100 == 99 {
            bus.pump();
            for s in &mut subs {
                check_batch(s, 10 * 100, seq + 1 - 100);
            }
        }
    }
    assert_eq!(bus.stats().dropped, 0);
    assert_eq!(bus.stats().delivered, 20_000);
}

fn check_batch(s: &mut impl BusClient, expected: usize, first_seq: usize) {
    let got: Vec<_> = std::iter::from_fn(|| s.try_recv().unwrap())
        .map(|m| unpack(&m))
        .collect();
    assert_eq!(got.len(), expected);
    let mut next = [first_seq; 10];
    for (p, seq) in got {
        assert_eq!(seq, next[p]);
        next[p] += 1;
    }
}

fn recv_all(c: &mut WsClient, n: usize, timeout: Duration) -> Vec<BridgeMessage> {
    let deadline = Instant::now() + timeout;
    let mut out = Vec::with_capacity(n);
    while out.len() < n && Instant::now() < deadline {
        if let Some(m) = c.recv_timeout(Duration::from_millis(50)).unwrap() {
            out.push(m);
        }
    }
    out
}

#[test]
fn websocket_one_publisher_two_subscribers() {
    let server = serve("127.0.0.1:0").unwrap();
    let mut s1 = WsClient::connect(&server.url()).unwrap();
    let mut s2 = WsClient::connect(&server.url()).unwrap();
    s1.subscribe("/joint_states", INT32).unwrap();
    s2.subscribe("/joint_states", INT32).unwrap();
    assert!(server.wait_for_subscribers("/joint_states", 2, Duration::from_secs(5)));
    let mut p = WsClient::connect(&server.url()).unwrap();
    p.advertise("/joint_states", INT32).unwrap();
    for i in 0..200 {
        publish_int(&mut p, "/joint_states", 0, i);
    }
    for s in [&mut s1, &mut s2] {
        let got: Vec<_> = recv_all(s, 200, Duration::from_secs(10)).iter().map(unpack).collect();
        assert_eq!(got, (0..200).map(|i| (0, i)).collect::<Vec<_>>());
        assert!(s.recv_timeout(Duration::from_millis(50)).unwrap().is_none());
    }
}

#[test]
fn websocket_subscriber_disconnect_is_isolated() {
    let server = serve("127.0.0.1:0").unwrap();
    let mut s1 = WsClient::connect(&server.url()).unwrap();
    let mut s2 = WsClient::connect(&server.url()).unwrap();
    s1.subscribe("/capture", "std_msgs/Bool").unwrap();
    s2.subscribe("/capture", "std_msgs/Bool").unwrap();
    assert!(server.wait_for_subscribers("/capture", 2, Duration::from_secs(5)));
    let mut p = WsClient::connect(&server.url()).unwrap();
    p.publish_payload("/capture", &BoolMsg { data: true }).unwrap();
    assert_eq!(recv_all(&mut s1, 1, Duration::from_secs(5)).len(), 1);
    s1.close();
    let deadline = Instant::now() + Duration::from_secs(5);
    while server.subscriber_count("/capture") != 1 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(5));
    }
    assert_eq!(server.subscriber_count("/capture"), 1);
    for _ in 0..50 {
        p.publish_payload("/capture", &BoolMsg { data: false }).unwrap();
    }
    let got = recv_all(&mut s2, 51, Duration::from_secs(10));
    assert_eq!(got.len(), 51);
    assert_eq!(
        BoolMsg::from_value(got[0].payload().unwrap()).unwrap(),
        BoolMsg { data: true }
    );
}

#[test]
fn websocket_ten_publishers_thousand_messages_each() {
    let started = Instant::now();
    // queue sized so no backpressure drops can mask a routing defect
    let server = serve_with_capacity("127.0.0.1:0", 20_000).unwrap();
    let mut subs: Vec<_> = (0..2).map(|_| WsClient::connect(&server.url()).unwrap()).collect();
    for s in &mut subs {
        s.subscribe("/joint_states", INT32).unwrap();
    }
    assert!(server.wait_for_subscribers("/joint_states", 2, Duration::from_secs(5)));
    let url = server.url();
    let handles: Vec<_> = (0..10)
        .map(|p| {
            let url = url.clone();
            std::thread::spawn(move || {
                let mut c = WsClient::connect(&url).unwrap();
                for seq in 0..1000 {
                    publish_int(&mut c, "/joint_states", p, seq);
                }
                c.close();
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    for s in &mut subs {
        let got = recv_all(s, 10_000, Duration::from_secs(20));
        assert_eq!(got.len(), 10_000);
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (p, seq) in got.iter().map(unpack) {
            let e = next.entry(p).or_insert(0);
            assert_eq!(seq, *e, "publisher {p} out of order");
            *e += 1;
        }
        assert!(next.values().all(|&n| n == 1000));
        assert!(s.recv_timeout(Duration::from_millis(100)).unwrap().is_none());
    }
    assert_eq!(server.stats().dropped, 0);
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "took {:?}",
        started.elapsed()
    );
}

#[test]
fn bind_and_connect_failures_are_reported() {
    let server = serve("127.0.0.1:0").unwrap();
    let taken = server.local_addr().to_string();
    assert!(matches!(serve(&taken), Err(BridgeError::Bind(_))));
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    assert!(matches!(
        WsClient::connect(&format!("ws://127.0.0.1:{port}")),
        Err(BridgeError::Connect(_))
    ));
}
