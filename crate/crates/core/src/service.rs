//! The carrier: a TCP service holding encrypted profiles and running the
//! challenge/score side of the protocol.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::auth::{self, AuthDecision, SessionId, SessionState, DEFAULT_SESSION_TIMEOUT};
use crate::error::{Error, ErrorCode, Result};
use crate::store::ProfileStore;
use crate::wire::{self, Message};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7410";

#[derive(Debug, Clone)]
pub struct CarrierConfig {
    pub listen: String,
    pub store_root: PathBuf,
    pub session_timeout: Duration,
    /// Seeds the session randomness. Test mode only.
    pub seed: Option<u64>,
}

impl CarrierConfig {
    pub fn new(store_root: impl Into<PathBuf>) -> Self {
        Self {
            listen: DEFAULT_LISTEN.to_owned(),
            store_root: store_root.into(),
            session_timeout: DEFAULT_SESSION_TIMEOUT,
            seed: None,
        }
    }
}

struct PendingSession {
    user_id: String,
    state: SessionState,
}

/// Protocol state shared by all connections.
pub struct Carrier {
    store: ProfileStore,
    sessions: Mutex<HashMap<SessionId, PendingSession>>,
    results: Mutex<HashMap<String, AuthDecision>>,
    rng: Mutex<ChaCha20Rng>,
    timeout: Duration,
}

impl Carrier {
    pub fn new(store: ProfileStore, timeout: Duration, seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Self {
            store,
            sessions: Mutex::new(HashMap::new()),
            results: Mutex::new(HashMap::new()),
            rng: Mutex::new(rng),
            timeout,
        }
    }

    pub fn store(&self) -> &ProfileStore {
        &self.store
    }

    /// The most recent decision reached for `user_id`.
    pub fn last_result(&self, user_id: &str) -> Option<AuthDecision> {
        self.results.lock().expect("results lock").get(user_id).copied()
    }

    pub fn pending_sessions(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }

    /// Decodes one raw frame and answers it.
    pub fn handle_frame(&self, bytes: &[u8]) -> Message {
        match wire::decode_frame(bytes) {
            Ok(msg) => self.handle(msg),
            Err(e) => {
                debug!("rejecting malformed frame: {e}");
                error(ErrorCode::Decode, e.to_string())
            }
        }
    }

    pub fn handle(&self, msg: Message) -> Message {
        match msg {
            Message::StoreProfile { user_id, profile } => match self.store.put(&user_id, &profile) {
                Ok(()) => {
                    info!("stored profile of size {} ({})", profile.size, profile.mode);
                    Message::StoreAck
                }
                Err(e) => {
                    warn!("failed to store profile: {e}");
                    error(ErrorCode::Internal, "profile store failure")
                }
            },
            Message::AuthInit { user_id, sample_size } => self.begin(user_id, sample_size),
            Message::Response { session_id, entries } => self.finish(session_id, &entries),
            other => error(ErrorCode::Protocol, format!("{} is not a request", other.name())),
        }
    }

    fn begin(&self, user_id: String, sample_size: u64) -> Message {
        let profile = match self.store.get(&user_id) {
            Ok(Some(p)) => Arc::new(p),
            Ok(None) => return error(ErrorCode::UnknownUser, "unknown user"),
            Err(e) => {
                warn!("failed to load profile: {e}");
                return error(ErrorCode::Internal, "profile store failure");
            }
        };
        let (challenge, state) = {
            let mut rng = self.rng.lock().expect("rng lock");
            auth::carrier_challenge(profile, &mut *rng)
        };
        debug!("session opened, announced sample size {sample_size}");
        let mut sessions = self.sessions.lock().expect("session lock");
        sessions.retain(|_, s| !s.state.is_expired(self.timeout));
        sessions.insert(challenge.session_id, PendingSession { user_id, state });
        Message::Challenge(challenge)
    }

    fn finish(&self, session_id: SessionId, entries: &[auth::AuthResponseEntry]) -> Message {
        // Removing the session is what makes it single-use.
        let Some(pending) = self.sessions.lock().expect("session lock").remove(&session_id) else {
            return error(ErrorCode::Session, "unknown, expired or consumed session");
        };
        if pending.state.is_expired(self.timeout) {
            return error(ErrorCode::Session, Error::SessionExpired.to_string());
        }
        info!("scoring {} response entries", entries.len());
        match auth::carrier_finish(&pending.state, entries) {
            Ok(decision) => {
                self.results.lock().expect("results lock").insert(pending.user_id, decision);
                Message::Result(decision)
            }
            Err(e @ Error::SessionConsumed) => error(ErrorCode::Session, e.to_string()),
            Err(e) => error(ErrorCode::Protocol, e.to_string()),
        }
    }

    /// Serves one connection until the peer closes it.
    pub fn serve_connection(&self, stream: TcpStream) -> Result<()> {
        let peer = stream.peer_addr().ok();
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            let frame = match wire::read_frame_bytes(&mut reader) {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                    // Oversized frame: stream sync is lost, report and close.
                    let _ = wire::write_message(&mut writer, &error(ErrorCode::Decode, e.to_string()));
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let reply = self.handle_frame(&frame);
            wire::write_message(&mut writer, &reply)?;
        }
        debug!("connection from {peer:?} closed");
        Ok(())
    }
}

fn error(code: ErrorCode, message: impl Into<String>) -> Message {
    Message::Error { code, message: message.into() }
}

pub struct CarrierServer {
    listener: TcpListener,
    carrier: Arc<Carrier>,
}

impl CarrierServer {
    pub fn bind(config: &CarrierConfig) -> Result<Self> {
        let store = ProfileStore::open(&config.store_root)?;
        let addr = config
            .listen
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("cannot resolve {}", config.listen)))?;
        let listener = TcpListener::bind(addr)?;
        let carrier = Arc::new(Carrier::new(store, config.session_timeout, config.seed));
        Ok(Self { listener, carrier })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn carrier(&self) -> Arc<Carrier> {
        self.carrier.clone()
    }

    /// Accepts connections forever, one thread per connection.
    pub fn run(self) -> Result<()> {
        info!("carrier listening on {}", self.listener.local_addr()?);
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let carrier = self.carrier.clone();
            thread::spawn(move || {
                if let Err(e) = carrier.serve_connection(stream) {
                    debug!("connection ended with error: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> Result<(SocketAddr, Arc<Carrier>, JoinHandle<Result<()>>)> {
        let addr = self.local_addr()?;
        let carrier = self.carrier();
        let handle = thread::spawn(move || self.run());
        Ok((addr, carrier, handle))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Canonical;
    use crate::profile::{build_encrypted_profile, FeatureSet, FeatureValue, Mode, SetupParams};
    use crate::wire::encode_frame;

    fn carrier() -> (tempfile::TempDir, Carrier) {
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::open(dir.path()).unwrap();
        (dir, Carrier::new(store, DEFAULT_SESSION_TIMEOUT, Some(9)))
    }

    #[test]
    fn unknown_user() {
        let (_d, c) = carrier();
        let reply = c.handle(Message::AuthInit { user_id: "ghost".into(), sample_size: 3 });
        assert!(matches!(reply, Message::Error { code: ErrorCode::UnknownUser, .. }));
    }

    #[test]
    fn malformed_frame_is_decode_error() {
        let (_d, c) = carrier();
        let reply = c.handle_frame(&[0x02, 0x02, 0, 0, 0, 0]);
        assert!(matches!(reply, Message::Error { code: ErrorCode::Decode, .. }));
    }

    #[test]
    fn non_request_is_protocol_error() {
        let (_d, c) = carrier();
        let reply = c.handle_frame(&encode_frame(&Message::StoreAck));
        assert!(matches!(reply, Message::Error { code: ErrorCode::Protocol, .. }));
    }

    #[test]
    fn expired_session() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::open(dir.path()).unwrap();
        let c = Carrier::new(store, Duration::ZERO, Some(1));
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let set = FeatureSet::new(Mode::CaseA, vec![FeatureValue::from_u128(5).unwrap()]).unwrap();
        let params = SetupParams { key_bits: 128, ..Default::default() };
        let (profile, _) = build_encrypted_profile("u", &set, &params, &mut rng).unwrap();
        c.store().put("u", &profile).unwrap();
        let Message::Challenge(ch) = c.handle(Message::AuthInit { user_id: "u".into(), sample_size: 1 }) else {
            panic!("expected challenge");
        };
        thread::sleep(Duration::from_millis(5));
        let reply = c.handle(Message::Response { session_id: ch.session_id, entries: vec![] });
        assert!(matches!(reply, Message::Error { code: ErrorCode::Session, .. }));
        assert_eq!(c.store().get_raw("u").unwrap().unwrap(), profile.to_bytes());
    }
}
