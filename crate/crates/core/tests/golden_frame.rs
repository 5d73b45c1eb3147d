use drivesafe::cpsnet::{decode, encode, Envelope, MsgType, Payload, SafetyNotification};
use drivesafe::domain::{mood_lookup, AffectiveState, Meta};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/safety_notification.hex"
);

fn reference() -> Envelope {
    Envelope::new(
        "driver-01",
        7,
        2100,
        Payload::SafetyNotification(SafetyNotification {
            t_ms: 2100,
            activity: 3,
            meta: Meta::DistractedDriving,
            confidence: 0.75,
            message: "Distracted driving detected: Texting - left".into(),
        }),
    )
}

#[test]
#[ignore = "rewrites the fixture"]
fn regenerate_fixture() {
    std::fs::write(FIXTURE, hex::encode(encode(&reference()).unwrap()) + "\n").unwrap();
}

#[test]
fn fixture_decodes_and_reencodes_identically() {
    let frame = hex::decode(std::fs::read_to_string(FIXTURE).unwrap().trim()).unwrap();
    let env = decode(&frame).unwrap();
    assert_eq!(env.msg_type(), MsgType::SafetyNotification);
    assert_eq!(env, reference());
    assert_eq!(encode(&env).unwrap(), frame);
    assert_eq!(
        u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize,
        frame.len() - 4
    );
}

#[test]
fn mood_grid_matches_reference_table() {
    let text = include_str!("fixtures/mood_grid.tsv");
    let mut seen = 0;
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let state =
            AffectiveState::new(cols[0].parse().unwrap(), cols[1].parse().unwrap()).unwrap();
        assert_eq!(mood_lookup(state).name, cols[2], "{state:?}");
        seen += 1;
    }
    assert_eq!(seen, 81);
}
