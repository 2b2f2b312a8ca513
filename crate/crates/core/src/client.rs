//! Device side of the network protocol.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::Duration;

use log::info;
use rand::{CryptoRng, RngCore};

use crate::auth::{self, AuthDecision, SimilarityTable};
use crate::codec::Canonical;
use crate::error::{Error, Result};
use crate::profile::{build_encrypted_profile, DeviceSecret, FeatureSet, Mode, SetupParams};
use crate::wire::{self, Message};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

/// One open connection to a carrier.
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let mut last = None;
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, CONNECT_TIMEOUT) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    return Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or_else(|| Error::InvalidInput("address resolved to nothing".into()), Error::from))
    }

    /// Sends `msg` and waits for the reply. Wire errors become [`Error::Remote`].
    pub fn request(&mut self, msg: &Message) -> Result<Message> {
        wire::write_message(&mut self.writer, msg)?;
        match wire::read_message(&mut self.reader)? {
            Message::Error { code, message } => Err(Error::Remote { code, message }),
            reply => Ok(reply),
        }
    }
}

/// What the device authenticates with.
#[derive(Debug, Clone)]
pub enum Sample<'a> {
    Plain(&'a FeatureSet),
    Weighted(&'a FeatureSet, &'a SimilarityTable),
}

/// Builds a profile, uploads it and, once the carrier acknowledges it, writes
/// the device secret to `secret_path` (mode 0600). Nothing is written if any
/// step fails.
pub fn device_setup<R: RngCore + CryptoRng + ?Sized>(
    addr: impl ToSocketAddrs,
    user_id: &str,
    features: &FeatureSet,
    params: &SetupParams,
    secret_path: &Path,
    rng: &mut R,
) -> Result<DeviceSecret> {
    let (profile, secret) = build_encrypted_profile(user_id, features, params, rng)?;
    let mut conn = Connection::connect(addr)?;
    match conn.request(&Message::StoreProfile { user_id: user_id.to_owned(), profile })? {
        Message::StoreAck => {}
        _ => return Err(Error::UnexpectedMessage("StoreAck")),
    }
    write_secret(secret_path, &secret)?;
    info!("profile stored, device secret written to {}", secret_path.display());
    Ok(secret)
}

/// Runs one authentication against the carrier.
pub fn device_auth<R: RngCore + CryptoRng + ?Sized>(
    addr: impl ToSocketAddrs,
    secret: &DeviceSecret,
    sample: Sample<'_>,
    rng: &mut R,
) -> Result<AuthDecision> {
    let set = match sample {
        Sample::Plain(s) | Sample::Weighted(s, _) => s,
    };
    let mut conn = Connection::connect(addr)?;
    let init = Message::AuthInit { user_id: secret.user_id.clone(), sample_size: set.len() as u64 };
    let Message::Challenge(challenge) = conn.request(&init)? else {
        return Err(Error::UnexpectedMessage("Challenge"));
    };
    let entries = match (sample, secret.mode) {
        (Sample::Weighted(s, sim), Mode::CaseB { .. }) => auth::device_respond_weighted(secret, &challenge, s, sim, rng)?,
        (Sample::Plain(s), Mode::CaseB { .. }) => {
            auth::device_respond_weighted(secret, &challenge, s, &SimilarityTable::identity(s.values()), rng)?
        }
        (Sample::Plain(s) | Sample::Weighted(s, _), _) => auth::device_respond(secret, &challenge, s, rng)?,
    };
    match conn.request(&Message::Response { session_id: challenge.session_id, entries })? {
        Message::Result(decision) => Ok(decision),
        _ => Err(Error::UnexpectedMessage("Result")),
    }
}

/// Atomically writes the device secret, readable by the owner only.
pub fn write_secret(path: &Path, secret: &DeviceSecret) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    // NamedTempFile is created with mode 0600 and keeps it across the rename.
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&secret.to_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_secret(path: &Path) -> Result<DeviceSecret> {
    Ok(DeviceSecret::from_bytes(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    #[test]
    fn secret_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/device.secret");
        let secret = DeviceSecret {
            user_id: "carol".into(),
            d: BigUint::from(12345u32),
            r_prime: BigUint::from(678u32),
            mode: Mode::CaseC { features: 3, cap: 4 },
        };
        write_secret(&path, &secret).unwrap();
        assert_eq!(read_secret(&path).unwrap(), secret);
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            assert_eq!(fs::metadata(&path).unwrap().permissions().mode() & 0o777, 0o600);
        }
    }
}
