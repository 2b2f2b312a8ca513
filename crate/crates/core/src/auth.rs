//! The three-message authentication protocol and the decision rules.
//!
//! 1. The carrier raises every stored `Enc(p_i)` to a fresh secret `theta`
//!    and forwards the blinded randomizers `R_i^d` ([`carrier_challenge`]).
//! 2. For each sample value `b` the device picks a unit `r` and sends the
//!    shuffled triples `(Enc(p(b))^(theta d r), (prod R_i^(b^i))^(d r), R'^(r d))`
//!    ([`device_respond`], [`device_respond_weighted`]).
//! 3. The carrier counts the triples with `c * Y^(n theta) = rho^(n theta)`,
//!    which happens exactly when `p(b) = 0`, i.e. `b` is in the profile
//!    ([`carrier_score`]).
//!
//! Powers `b^i` are applied with Horner's rule on raw integers, so no
//! exponent is ever reduced and both sides of the recognition identity see the
//! same exponents the set-up solved for.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::debug;
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use rayon::prelude::*;

use crate::codec::{Canonical, Reader, Writer};
use crate::error::{DecodeError, DecodeErrorKind, Error, Result};
use crate::paillier::PublicKey;
use crate::profile::{DeviceSecret, EncryptedProfile, FeatureSet, FeatureValue, Mode};

pub type SessionId = [u8; 16];

/// Default lifetime of an unanswered challenge.
pub const DEFAULT_SESSION_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthChallenge {
    pub session_id: SessionId,
    pub pk: PublicKey,
    pub powered_coeffs: Vec<BigUint>,
    pub blinded_r: Vec<BigUint>,
    pub mode: Mode,
}

/// Carrier-private state of one authentication attempt. Scoring consumes it.
#[derive(Debug)]
pub struct SessionState {
    id: SessionId,
    theta: BigUint,
    profile: Arc<EncryptedProfile>,
    created: Instant,
    consumed: AtomicBool,
}

impl SessionState {
    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn profile(&self) -> &EncryptedProfile {
        &self.profile
    }

    pub fn created(&self) -> Instant {
        self.created
    }

    pub fn is_expired(&self, timeout: Duration) -> bool {
        self.created.elapsed() > timeout
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed.load(Ordering::SeqCst)
    }
}

/// One shuffled protocol triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthResponseEntry {
    pub cj: BigUint,
    pub upsilon: BigUint,
    pub rho: BigUint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissimilarity {
    Finite { numerator: u64, denominator: u64 },
    Infinite,
}

impl fmt::Display for Dissimilarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dissimilarity::Finite { numerator, denominator: 1 } => write!(f, "{numerator}"),
            Dissimilarity::Finite { numerator, denominator } => write!(f, "{numerator}/{denominator}"),
            Dissimilarity::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthDecision {
    pub match_count: u64,
    pub dissimilarity: Dissimilarity,
    pub accepted: bool,
    pub mode: Mode,
}

impl fmt::Display for AuthDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} matches={} dissimilarity={} mode={}",
            if self.accepted { "ACCEPT" } else { "REJECT" },
            self.match_count,
            self.dissimilarity,
            self.mode
        )
    }
}

/// Integer similarity `l(z, y)` given as an explicit finite table: for each
/// sample value `y`, the values `z` it is similar to and their weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimilarityTable {
    rows: HashMap<FeatureValue, Vec<(FeatureValue, u64)>>,
}

impl SimilarityTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The equality kernel `l(x, x) = 1` over the given values.
    pub fn identity<'a>(values: impl IntoIterator<Item = &'a FeatureValue>) -> Self {
        let mut t = Self::new();
        for v in values {
            t.rows.entry(v.clone()).or_default().push((v.clone(), 1));
        }
        t
    }

    /// Adds `l(z, y) = weight`. Zero weights are not stored.
    pub fn insert(&mut self, y: FeatureValue, z: FeatureValue, weight: u64) {
        if weight == 0 {
            return;
        }
        let row = self.rows.entry(y).or_default();
        match row.iter_mut().find(|(zz, _)| *zz == z) {
            Some(entry) => entry.1 = weight,
            None => row.push((z, weight)),
        }
    }

    /// `l(z, y)`, zero outside the table.
    pub fn weight(&self, z: &FeatureValue, y: &FeatureValue) -> u64 {
        self.rows
            .get(y)
            .and_then(|row| row.iter().find(|(zz, _)| zz == z))
            .map_or(0, |(_, w)| *w)
    }

    pub fn row(&self, y: &FeatureValue) -> Option<&[(FeatureValue, u64)]> {
        self.rows.get(y).map(Vec::as_slice)
    }

    pub fn max_weight(&self) -> u64 {
        self.rows.values().flatten().map(|(_, w)| *w).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Step 1: fresh `theta` in `[1, n)` and the powered coefficients.
pub fn carrier_challenge<R: RngCore + CryptoRng + ?Sized>(
    profile: Arc<EncryptedProfile>,
    rng: &mut R,
) -> (AuthChallenge, SessionState) {
    let theta = rng.gen_biguint_range(&BigUint::one(), profile.pk.n());
    let mut session_id = SessionId::default();
    rng.fill_bytes(&mut session_id);
    carrier_challenge_with_theta(profile, theta, session_id).expect("theta drawn in range")
}

/// [`carrier_challenge`] with `theta` and the session id supplied.
pub fn carrier_challenge_with_theta(
    profile: Arc<EncryptedProfile>,
    theta: BigUint,
    session_id: SessionId,
) -> Result<(AuthChallenge, SessionState)> {
    if theta.is_zero() || &theta >= profile.pk.n() {
        return Err(Error::InvalidInput("theta must lie in [1, n)".into()));
    }
    let n2 = profile.pk.n_squared();
    let powered_coeffs = profile.enc_coeffs.par_iter().map(|c| c.value().modpow(&theta, n2)).collect();
    let challenge = AuthChallenge {
        session_id,
        pk: profile.pk.clone(),
        powered_coeffs,
        blinded_r: profile.blinded_r.clone(),
        mode: profile.mode,
    };
    let state = SessionState { id: session_id, theta, profile, created: Instant::now(), consumed: AtomicBool::new(false) };
    Ok((challenge, state))
}

/// Step 2: one triple per sample value, in random order.
pub fn device_respond<R: RngCore + CryptoRng + ?Sized>(
    secret: &DeviceSecret,
    challenge: &AuthChallenge,
    sample: &FeatureSet,
    rng: &mut R,
) -> Result<Vec<AuthResponseEntry>> {
    check_modes(secret, challenge, sample)?;
    if sample.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let points: Vec<&BigUint> = sample.values().iter().map(FeatureValue::value).collect();
    respond_at(secret, challenge, &points, rng)
}

/// Step 2': `l_z = sum_y l(z, y)` triples for every `z` similar to the sample.
pub fn device_respond_weighted<R: RngCore + CryptoRng + ?Sized>(
    secret: &DeviceSecret,
    challenge: &AuthChallenge,
    sample: &FeatureSet,
    sim: &SimilarityTable,
    rng: &mut R,
) -> Result<Vec<AuthResponseEntry>> {
    check_modes(secret, challenge, sample)?;
    let Mode::CaseB { max_weight } = secret.mode else {
        return Err(Error::ModeMismatch { expected: Mode::CaseB { max_weight: 0 }, actual: secret.mode });
    };
    if sample.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let expanded = expand_weighted(sample, sim, max_weight)?;
    let points: Vec<&BigUint> = expanded
        .iter()
        .flat_map(|(z, &count)| std::iter::repeat(z.value()).take(count as usize))
        .collect();
    debug!("weighted response: {} distinct values, {} triples", expanded.len(), points.len());
    respond_at(secret, challenge, &points, rng)
}

/// The multiset `{z: l_z}` with `l_z = sum_{y in sample} l(z, y) > 0`, in
/// ascending order of `z`. Every weight must lie in `[1, max_weight]` and
/// every sample value needs a table row.
pub fn expand_weighted(sample: &FeatureSet, sim: &SimilarityTable, max_weight: u64) -> Result<BTreeMap<FeatureValue, u64>> {
    let mut totals: BTreeMap<FeatureValue, u64> = BTreeMap::new();
    for y in sample.values() {
        let row = sim.row(y).ok_or(Error::SimilarityMissing)?;
        for (z, w) in row {
            if *w == 0 || *w > max_weight {
                return Err(Error::InvalidWeight { weight: *w, max: max_weight });
            }
            *totals.entry(z.clone()).or_default() += w;
        }
    }
    Ok(totals)
}

fn check_modes(secret: &DeviceSecret, challenge: &AuthChallenge, sample: &FeatureSet) -> Result<()> {
    if challenge.mode != secret.mode {
        return Err(Error::ModeMismatch { expected: secret.mode, actual: challenge.mode });
    }
    if sample.mode() != secret.mode {
        return Err(Error::ModeMismatch { expected: secret.mode, actual: sample.mode() });
    }
    let pk = &challenge.pk;
    if challenge.powered_coeffs.len() != challenge.blinded_r.len() {
        return Err(Error::LengthMismatch(challenge.powered_coeffs.len(), challenge.blinded_r.len()));
    }
    if challenge.powered_coeffs.len() < 2 {
        return Err(Error::InvalidInput("challenge carries no polynomial".into()));
    }
    let all_units = challenge.powered_coeffs.iter().chain(&challenge.blinded_r).all(|v| pk.is_unit_mod_n_squared(v));
    if !all_units {
        return Err(Error::InvalidInput("challenge value is not a unit modulo n^2".into()));
    }
    if secret.d.is_zero() || &secret.d >= pk.n() || !pk.is_unit_mod_n_squared(&secret.r_prime) {
        return Err(Error::InvalidInput("device secret does not fit the challenge key".into()));
    }
    Ok(())
}

fn respond_at<R: RngCore + CryptoRng + ?Sized>(
    secret: &DeviceSecret,
    challenge: &AuthChallenge,
    points: &[&BigUint],
    rng: &mut R,
) -> Result<Vec<AuthResponseEntry>> {
    let pk = &challenge.pk;
    // All randomness is drawn up front so the output is a function of the
    // rng stream alone, independent of the thread pool.
    let blinds: Vec<BigUint> = points.iter().map(|_| pk.random_unit_mod_n_squared(rng)).collect();
    let mut entries: Vec<AuthResponseEntry> = points
        .par_iter()
        .zip(blinds.par_iter())
        .map(|(b, r)| build_entry(secret, challenge, b, r))
        .collect();
    entries.shuffle(rng);
    Ok(entries)
}

fn build_entry(secret: &DeviceSecret, challenge: &AuthChallenge, b: &BigUint, r: &BigUint) -> AuthResponseEntry {
    let n2 = challenge.pk.n_squared();
    let dr = &secret.d * r;
    let cj = horner(&challenge.powered_coeffs, b, n2).modpow(&dr, n2);
    let upsilon = horner(&challenge.blinded_r, b, n2).modpow(r, n2);
    let rho = secret.r_prime.modpow(&dr, n2);
    AuthResponseEntry { cj, upsilon, rho }
}

/// `prod_i bases[i]^(x^i) mod m`, evaluated as
/// `(...((B_s^x * B_{s-1})^x * B_{s-2})...)^x * B_0`.
pub(crate) fn horner(bases: &[BigUint], x: &BigUint, m: &BigUint) -> BigUint {
    let (last, rest) = bases.split_last().expect("nonempty bases");
    rest.iter().rev().fold(last % m, |acc, b| (acc.modpow(x, m) * b) % m)
}

/// Step 3: counts recognized triples and consumes the session.
pub fn carrier_score(session: &SessionState, entries: &[AuthResponseEntry]) -> Result<u64> {
    if session.consumed.swap(true, Ordering::SeqCst) {
        return Err(Error::SessionConsumed);
    }
    if entries.is_empty() {
        return Err(Error::EmptyResponse);
    }
    let pk = &session.profile.pk;
    if let Some(bad) = entries.iter().position(|e| {
        !(pk.is_unit_mod_n_squared(&e.cj) && pk.is_unit_mod_n_squared(&e.upsilon) && pk.is_unit_mod_n_squared(&e.rho))
    }) {
        return Err(Error::InvalidEntry(bad));
    }
    let n2 = pk.n_squared();
    let exponent = pk.n() * &session.theta;
    let matches = entries
        .par_iter()
        .filter(|e| {
            let lhs = (&e.cj * e.upsilon.modpow(&exponent, n2)) % n2;
            lhs == e.rho.modpow(&exponent, n2)
        })
        .count();
    debug!("session scored: {} of {} triples recognized", matches, entries.len());
    Ok(matches as u64)
}

/// Turns a match count into a decision.
///
/// Cases A and B: dissimilarity `1 / count` (infinite at zero), accept when
/// `count >= threshold`. Case C: L1 distance `|X| + |Y| - 2 count`, accept
/// when it is at most `threshold`.
pub fn decide(match_count: u64, mode: Mode, profile_size: u64, sample_size: u64, threshold: u64) -> Result<AuthDecision> {
    if threshold == 0 {
        return Err(Error::InvalidThreshold);
    }
    let (dissimilarity, accepted) = match mode {
        Mode::CaseA | Mode::CaseB { .. } => {
            let d = if match_count == 0 {
                Dissimilarity::Infinite
            } else {
                Dissimilarity::Finite { numerator: 1, denominator: match_count }
            };
            (d, match_count >= threshold)
        }
        Mode::CaseC { .. } => {
            let l1 = profile_size as i128 + sample_size as i128 - 2 * match_count as i128;
            if l1 < 0 {
                return Err(Error::NegativeDistance(l1));
            }
            let l1 = l1 as u64;
            (Dissimilarity::Finite { numerator: l1, denominator: 1 }, l1 <= threshold)
        }
    };
    Ok(AuthDecision { match_count, dissimilarity, accepted, mode })
}

/// Scores `entries` against `session` and applies the profile's decision rule.
pub fn carrier_finish(session: &SessionState, entries: &[AuthResponseEntry]) -> Result<AuthDecision> {
    let count = carrier_score(session, entries)?;
    let profile = session.profile();
    decide(count, profile.mode, profile.size, entries.len() as u64, profile.threshold)
}

impl Canonical for AuthChallenge {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.session_id);
        self.pk.encode(w);
        w.uints(self.powered_coeffs.iter());
        w.uints(self.blinded_r.iter());
        self.mode.encode(w);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let session_id = decode_session_id(r)?;
        let pk = PublicKey::decode(r)?;
        let powered_coeffs = r.uints()?;
        let blinded_r = r.uints()?;
        let mode = Mode::decode(r)?;
        Ok(AuthChallenge { session_id, pk, powered_coeffs, blinded_r, mode })
    }
}

pub(crate) fn decode_session_id(r: &mut Reader<'_>) -> Result<SessionId, DecodeError> {
    let at = r.position();
    let raw = r.bytes()?;
    raw.try_into()
        .map_err(|_| DecodeError { position: at, kind: DecodeErrorKind::InvalidValue("session id must be 16 bytes") })
}

impl Canonical for AuthResponseEntry {
    fn encode(&self, w: &mut Writer) {
        w.uint(&self.cj);
        w.uint(&self.upsilon);
        w.uint(&self.rho);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(AuthResponseEntry { cj: r.uint()?, upsilon: r.uint()?, rho: r.uint()? })
    }
}

impl Canonical for AuthDecision {
    fn encode(&self, w: &mut Writer) {
        w.u64_uint(self.match_count);
        match self.dissimilarity {
            Dissimilarity::Infinite => w.u8(0x00),
            Dissimilarity::Finite { numerator, denominator } => {
                w.u8(0x01);
                w.u64_uint(numerator);
                w.u64_uint(denominator);
            }
        }
        w.u8(self.accepted as u8);
        self.mode.encode(w);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let match_count = r.u64_uint()?;
        let at = r.position();
        let dissimilarity = match r.u8()? {
            0x00 => Dissimilarity::Infinite,
            0x01 => Dissimilarity::Finite { numerator: r.u64_uint()?, denominator: r.u64_uint()? },
            t => return Err(DecodeError { position: at, kind: DecodeErrorKind::UnknownTag(t) }),
        };
        let at = r.position();
        let accepted = match r.u8()? {
            0 => false,
            1 => true,
            t => return Err(DecodeError { position: at, kind: DecodeErrorKind::UnknownTag(t) }),
        };
        let mode = Mode::decode(r)?;
        Ok(AuthDecision { match_count, dissimilarity, accepted, mode })
    }
}
