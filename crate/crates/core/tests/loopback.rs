mod common;

use std::io::{BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use implauth_core::client::{self, Connection, Sample};
use implauth_core::error::{Error, ErrorCode};
use implauth_core::profile::{build_encrypted_profile, SetupParams};
use implauth_core::service::{Carrier, CarrierConfig, CarrierServer};
use implauth_core::wire::{self, Message};

use common::{case_a, fv};

const BITS: u64 = 256;

fn server(seed: Option<u64>) -> (tempfile::TempDir, SocketAddr, Arc<Carrier>) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = CarrierConfig::new(dir.path().join("store"));
    config.listen = "127.0.0.1:0".into();
    config.seed = seed;
    let (addr, carrier, _) = CarrierServer::bind(&config).and_then(CarrierServer::spawn).unwrap();
    (dir, addr, carrier)
}

fn params() -> SetupParams {
    SetupParams { key_bits: BITS, ..Default::default() }
}

#[test]
fn setup_and_auth_over_tcp() {
    let (dir, addr, carrier) = server(None);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let path = dir.path().join("alice.secret");
    let profile = case_a([3, 5, 7, 11].map(fv).to_vec());
    let secret = client::device_setup(addr, "alice", &profile, &params(), &path, &mut rng).unwrap();

    let sample = case_a([5, 7, 13].map(fv).to_vec());
    let decision = client::device_auth(addr, &secret, Sample::Plain(&sample), &mut rng).unwrap();
    assert_eq!(decision.match_count, 2);
    assert!(decision.accepted);
    assert_eq!(carrier.last_result("alice"), Some(decision));

    let stranger = case_a([1, 2].map(fv).to_vec());
    let decision = client::device_auth(addr, &secret, Sample::Plain(&stranger), &mut rng).unwrap();
    assert_eq!(decision.match_count, 0);
    assert!(!decision.accepted);
}

#[test]
fn unknown_user_and_replayed_session() {
    let (_dir, addr, _) = server(Some(4));
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut conn = Connection::connect(addr).unwrap();
    let err = conn.request(&Message::AuthInit { user_id: "nobody".into(), sample_size: 1 }).unwrap_err();
    assert!(matches!(err, Error::Remote { code: ErrorCode::UnknownUser, .. }), "{err}");

    let (profile, secret) = build_encrypted_profile("bob", &case_a(vec![fv(9)]), &params(), &mut rng).unwrap();
    assert_eq!(conn.request(&Message::StoreProfile { user_id: "bob".into(), profile }).unwrap(), Message::StoreAck);
    let Message::Challenge(ch) = conn.request(&Message::AuthInit { user_id: "bob".into(), sample_size: 1 }).unwrap() else {
        panic!("expected a challenge");
    };
    let entries = implauth_core::auth::device_respond(&secret, &ch, &case_a(vec![fv(9)]), &mut rng).unwrap();
    let response = Message::Response { session_id: ch.session_id, entries };
    assert!(matches!(conn.request(&response).unwrap(), Message::Result(d) if d.match_count == 1));
    let err = conn.request(&response).unwrap_err();
    assert!(matches!(err, Error::Remote { code: ErrorCode::Session, .. }), "{err}");
}

#[test]
fn malformed_frame_keeps_connection_usable() {
    let (_dir, addr, _) = server(None);
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    // Unknown version, then an unknown message type, then a valid request.
    stream.write_all(&[0x09, 0x03, 0, 0, 0, 1, 0xAA]).unwrap();
    stream.write_all(&[0x01, 0x42, 0, 0, 0, 0]).unwrap();
    for _ in 0..2 {
        let reply = wire::read_message(&mut reader).unwrap();
        assert!(matches!(reply, Message::Error { code: ErrorCode::Decode, .. }), "{reply:?}");
    }
    wire::write_message(&mut stream, &Message::AuthInit { user_id: "x".into(), sample_size: 1 }).unwrap();
    let reply = wire::read_message(&mut reader).unwrap();
    assert!(matches!(reply, Message::Error { code: ErrorCode::UnknownUser, .. }));
}

#[test]
fn concurrent_devices() {
    let (dir, addr, carrier) = server(None);
    let handles: Vec<_> = (0..4u64)
        .map(|k| {
            let path = dir.path().join(format!("user{k}.secret"));
            thread::spawn(move || {
                let mut rng = ChaCha20Rng::seed_from_u64(100 + k);
                let user = format!("user{k}");
                let base = 10 * k as u128 + 1;
                let profile = case_a((base..base + 5).map(fv).collect());
                let secret = client::device_setup(addr, &user, &profile, &params(), &path, &mut rng).unwrap();
                let sample = case_a((base + 2..base + 2 + k as u128 + 1).map(fv).collect());
                let d = client::device_auth(addr, &secret, Sample::Plain(&sample), &mut rng).unwrap();
                (user, d.match_count, (k + 1).min(3))
            })
        })
        .collect();
    for h in handles {
        let (user, got, want) = h.join().unwrap();
        assert_eq!(got, want, "{user}");
        assert_eq!(carrier.last_result(&user).unwrap().match_count, want);
    }
    assert_eq!(carrier.pending_sessions(), 0);
}

#[test]
fn failed_setup_writes_no_secret() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("never.secret");
    // Bind and drop a listener to get a port nobody is serving.
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let err = client::device_setup(addr, "zed", &case_a(vec![fv(1)]), &params(), &path, &mut rng);
    assert!(err.is_err());
    assert!(!path.exists());
}
