//! C ABI over `implauth-core`.
//!
//! Every object crosses the boundary as an opaque pointer that must be
//! released with its matching `*_free` function. Functions return an
//! [`ImplauthStatus`]; on failure a description is available from
//! [`implauth_last_error`] on the same thread. Byte buffers handed out by the
//! library are released with [`implauth_buffer_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use implauth_core::auth::{self, AuthChallenge, AuthDecision, AuthResponseEntry, Dissimilarity, SessionState, SimilarityTable};
use implauth_core::codec::Canonical;
use implauth_core::error::Error;
use implauth_core::profile::{
    build_encrypted_profile, encode_numeric, DeviceSecret, EncryptedProfile, FeatureSet, FeatureValue, Mode, SetupParams,
    SolverVariant,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplauthStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Decode = 3,
    Crypto = 4,
    Protocol = 5,
    Session = 6,
    Io = 7,
    Panic = 8,
}

pub const IMPLAUTH_MODE_CASE_A: u8 = 1;
pub const IMPLAUTH_MODE_CASE_B: u8 = 2;
pub const IMPLAUTH_MODE_CASE_C: u8 = 3;

pub const IMPLAUTH_SOLVER_CLOSED_FORM: u8 = 0;
pub const IMPLAUTH_SOLVER_GAUSSIAN: u8 = 1;

/// Scoring mode. `max_weight` is used by case B, `features` and `cap` by case C.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ImplauthMode {
    pub kind: u8,
    pub max_weight: u64,
    pub features: u64,
    pub cap: u64,
}

/// Outcome of an authentication. For cases A and B the dissimilarity is
/// `numerator / denominator` (`infinite` when nothing matched); for case C it
/// is the L1 distance in `numerator`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ImplauthDecision {
    pub match_count: u64,
    pub accepted: bool,
    pub infinite: bool,
    pub numerator: u64,
    pub denominator: u64,
}

/// Library-owned bytes.
#[repr(C)]
#[derive(Debug)]
pub struct ImplauthBuffer {
    pub data: *mut u8,
    pub len: usize,
}

pub struct ImplauthRng(ChaCha20Rng);
pub struct ImplauthFeatureSet(FeatureSet);
pub struct ImplauthSimilarity(SimilarityTable);
pub struct ImplauthProfile(EncryptedProfile);
pub struct ImplauthSecret(DeviceSecret);
pub struct ImplauthChallenge(AuthChallenge);
pub struct ImplauthSession(SessionState);
pub struct ImplauthResponse(Vec<AuthResponseEntry>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ImplauthStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Decode(_) => ImplauthStatus::Decode,
            Error::KeySizeTooSmall(_)
            | Error::PrimeSearchExhausted(_)
            | Error::InsecurePrimesRefused
            | Error::InvalidKey(_)
            | Error::PlaintextOutOfRange
            | Error::RandomizerNotUnit
            | Error::MalformedCiphertext
            | Error::TrivialBlinding => ImplauthStatus::Crypto,
            Error::SessionConsumed | Error::SessionExpired => ImplauthStatus::Session,
            Error::ModeMismatch { .. }
            | Error::EmptyResponse
            | Error::InvalidEntry(_)
            | Error::NegativeDistance(_)
            | Error::SimilarityMissing
            | Error::InvalidWeight { .. }
            | Error::Remote { .. }
            | Error::UnexpectedMessage(_) => ImplauthStatus::Protocol,
            Error::Io(_) => ImplauthStatus::Io,
            _ => ImplauthStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(ImplauthStatus::InvalidArgument, msg.to_owned())
}

fn null(name: &str) -> Failure {
    Failure(ImplauthStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ImplauthStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImplauthStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ImplauthStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn mode_from_c(m: &ImplauthMode) -> Result<Mode, Failure> {
    match m.kind {
        IMPLAUTH_MODE_CASE_A => Ok(Mode::CaseA),
        IMPLAUTH_MODE_CASE_B => Ok(Mode::CaseB { max_weight: m.max_weight }),
        IMPLAUTH_MODE_CASE_C => Ok(Mode::CaseC { features: m.features, cap: m.cap }),
        _ => Err(invalid("unknown mode kind")),
    }
}

fn decision_to_c(d: &AuthDecision) -> ImplauthDecision {
    let (infinite, numerator, denominator) = match d.dissimilarity {
        Dissimilarity::Finite { numerator, denominator } => (false, numerator, denominator),
        Dissimilarity::Infinite => (true, 0, 0),
    };
    ImplauthDecision { match_count: d.match_count, accepted: d.accepted, infinite, numerator, denominator }
}

unsafe fn write_buffer(out: *mut ImplauthBuffer, bytes: Vec<u8>) -> Result<(), Failure> {
    let out = deref_mut(out, "output buffer")?;
    let boxed = bytes.into_boxed_slice();
    out.len = boxed.len();
    out.data = Box::into_raw(boxed).cast::<u8>();
    Ok(())
}

/// Message describing the last failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn implauth_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn implauth_buffer_free(buf: ImplauthBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

/// A random generator; deterministic from `seed` when `seeded` is true
/// (tests only), otherwise seeded from the operating system.
#[no_mangle]
pub unsafe extern "C" fn implauth_rng_new(seeded: bool, seed: u64, out: *mut *mut ImplauthRng) -> ImplauthStatus {
    guard(|| {
        let rng = if seeded { ChaCha20Rng::seed_from_u64(seed) } else { ChaCha20Rng::from_entropy() };
        put(out, ImplauthRng(rng))
    })
}

#[no_mangle]
pub unsafe extern "C" fn implauth_rng_free(rng: *mut ImplauthRng) {
    free(rng)
}

/// Feature set from integer values in `[1, 2^64)`.
#[no_mangle]
pub unsafe extern "C" fn implauth_feature_set_from_u64(
    mode: ImplauthMode,
    values: *const u64,
    len: usize,
    out: *mut *mut ImplauthFeatureSet,
) -> ImplauthStatus {
    guard(|| {
        let mode = mode_from_c(&mode)?;
        let values = slice(values, len, "values")?
            .iter()
            .map(|&v| FeatureValue::from_u128(v as u128))
            .collect::<Result<Vec<_>, _>>()?;
        put(out, ImplauthFeatureSet(FeatureSet::new(mode, values)?))
    })
}

/// Feature set from NUL-terminated tokens, each hashed to a feature value.
#[no_mangle]
pub unsafe extern "C" fn implauth_feature_set_from_tokens(
    mode: ImplauthMode,
    tokens: *const *const c_char,
    len: usize,
    out: *mut *mut ImplauthFeatureSet,
) -> ImplauthStatus {
    guard(|| {
        let mode = mode_from_c(&mode)?;
        let raw = slice(tokens, len, "tokens")?
            .iter()
            .map(|&t| deref(t, "token").map(|_| CStr::from_ptr(t).to_bytes()))
            .collect::<Result<Vec<_>, _>>()?;
        put(out, ImplauthFeatureSet(FeatureSet::from_raw(mode, raw)?))
    })
}

/// Pair-encoded numeric vector with per-feature cap `cap` (case C).
#[no_mangle]
pub unsafe extern "C" fn implauth_feature_set_from_numeric(
    values: *const u64,
    len: usize,
    cap: u64,
    out: *mut *mut ImplauthFeatureSet,
) -> ImplauthStatus {
    guard(|| put(out, ImplauthFeatureSet(encode_numeric(slice(values, len, "values")?, cap)?)))
}

#[no_mangle]
pub unsafe extern "C" fn implauth_feature_set_len(set: *const ImplauthFeatureSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn implauth_feature_set_free(set: *mut ImplauthFeatureSet) {
    free(set)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_similarity_new(out: *mut *mut ImplauthSimilarity) -> ImplauthStatus {
    guard(|| put(out, ImplauthSimilarity(SimilarityTable::new())))
}

/// Sets `l(z, y) = weight` for integer features.
#[no_mangle]
pub unsafe extern "C" fn implauth_similarity_insert_u64(
    table: *mut ImplauthSimilarity,
    y: u64,
    z: u64,
    weight: u64,
) -> ImplauthStatus {
    guard(|| {
        let table = deref_mut(table, "table")?;
        table.0.insert(FeatureValue::from_u128(y as u128)?, FeatureValue::from_u128(z as u128)?, weight);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn implauth_similarity_free(table: *mut ImplauthSimilarity) {
    free(table)
}

/// Device set-up. `threshold` 0 selects the mode's default.
#[no_mangle]
pub unsafe extern "C" fn implauth_setup(
    user_id: *const c_char,
    features: *const ImplauthFeatureSet,
    key_bits: u64,
    solver: u8,
    threshold: u64,
    rng: *mut ImplauthRng,
    out_profile: *mut *mut ImplauthProfile,
    out_secret: *mut *mut ImplauthSecret,
) -> ImplauthStatus {
    guard(|| {
        deref(user_id, "user_id")?;
        let user_id = CStr::from_ptr(user_id).to_str().map_err(|_| invalid("user_id is not UTF-8"))?;
        let features = deref(features, "features")?;
        let rng = deref_mut(rng, "rng")?;
        let solver = match solver {
            IMPLAUTH_SOLVER_CLOSED_FORM => SolverVariant::ClosedForm,
            IMPLAUTH_SOLVER_GAUSSIAN => SolverVariant::Gaussian,
            _ => return Err(invalid("unknown solver")),
        };
        if out_profile.is_null() || out_secret.is_null() {
            return Err(null("output pointer"));
        }
        let params = SetupParams { key_bits, solver, threshold: (threshold > 0).then_some(threshold) };
        let (profile, secret) = build_encrypted_profile(user_id, &features.0, &params, &mut rng.0)?;
        put(out_profile, ImplauthProfile(profile))?;
        put(out_secret, ImplauthSecret(secret))
    })
}

unsafe fn serialize<T, I: Canonical>(obj: *const T, inner: impl FnOnce(&T) -> &I, out: *mut ImplauthBuffer) -> ImplauthStatus {
    guard(|| write_buffer(out, inner(deref(obj, "object")?).to_bytes()))
}

unsafe fn deserialize<T, I: Canonical>(data: *const u8, len: usize, wrap: impl FnOnce(I) -> T, out: *mut *mut T) -> ImplauthStatus {
    guard(|| {
        let value = I::from_bytes(slice(data, len, "data")?).map_err(Error::from)?;
        put(out, wrap(value))
    })
}

/// Canonical encoding of the carrier record.
#[no_mangle]
pub unsafe extern "C" fn implauth_profile_serialize(profile: *const ImplauthProfile, out: *mut ImplauthBuffer) -> ImplauthStatus {
    serialize(profile, |p| &p.0, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_profile_deserialize(data: *const u8, len: usize, out: *mut *mut ImplauthProfile) -> ImplauthStatus {
    deserialize(data, len, ImplauthProfile, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_profile_free(profile: *mut ImplauthProfile) {
    free(profile)
}

/// Canonical encoding of the device secret: user id, `d`, `R'` and mode.
#[no_mangle]
pub unsafe extern "C" fn implauth_secret_serialize(secret: *const ImplauthSecret, out: *mut ImplauthBuffer) -> ImplauthStatus {
    serialize(secret, |s| &s.0, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_secret_deserialize(data: *const u8, len: usize, out: *mut *mut ImplauthSecret) -> ImplauthStatus {
    deserialize(data, len, ImplauthSecret, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_secret_free(secret: *mut ImplauthSecret) {
    free(secret)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_challenge_serialize(
    challenge: *const ImplauthChallenge,
    out: *mut ImplauthBuffer,
) -> ImplauthStatus {
    serialize(challenge, |c| &c.0, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_challenge_deserialize(
    data: *const u8,
    len: usize,
    out: *mut *mut ImplauthChallenge,
) -> ImplauthStatus {
    deserialize(data, len, ImplauthChallenge, out)
}

#[no_mangle]
pub unsafe extern "C" fn implauth_challenge_free(challenge: *mut ImplauthChallenge) {
    free(challenge)
}

/// Carrier step: a fresh challenge for `profile` and the private session
/// state needed to score the answer.
#[no_mangle]
pub unsafe extern "C" fn implauth_challenge_new(
    profile: *const ImplauthProfile,
    rng: *mut ImplauthRng,
    out_challenge: *mut *mut ImplauthChallenge,
    out_session: *mut *mut ImplauthSession,
) -> ImplauthStatus {
    guard(|| {
        let profile = deref(profile, "profile")?;
        let rng = deref_mut(rng, "rng")?;
        if out_challenge.is_null() || out_session.is_null() {
            return Err(null("output pointer"));
        }
        let (challenge, session) = auth::carrier_challenge(Arc::new(profile.0.clone()), &mut rng.0);
        put(out_challenge, ImplauthChallenge(challenge))?;
        put(out_session, ImplauthSession(session))
    })
}

#[no_mangle]
pub unsafe extern "C" fn implauth_session_free(session: *mut ImplauthSession) {
    free(session)
}

/// Device step. With a non-null `similarity` the weighted (case B) response
/// is built.
#[no_mangle]
pub unsafe extern "C" fn implauth_respond(
    secret: *const ImplauthSecret,
    challenge: *const ImplauthChallenge,
    sample: *const ImplauthFeatureSet,
    similarity: *const ImplauthSimilarity,
    rng: *mut ImplauthRng,
    out: *mut *mut ImplauthResponse,
) -> ImplauthStatus {
    guard(|| {
        let secret = &deref(secret, "secret")?.0;
        let challenge = &deref(challenge, "challenge")?.0;
        let sample = &deref(sample, "sample")?.0;
        let rng = &mut deref_mut(rng, "rng")?.0;
        let entries = match similarity.as_ref() {
            Some(sim) => auth::device_respond_weighted(secret, challenge, sample, &sim.0, rng)?,
            None => auth::device_respond(secret, challenge, sample, rng)?,
        };
        put(out, ImplauthResponse(entries))
    })
}

#[no_mangle]
pub unsafe extern "C" fn implauth_response_len(response: *const ImplauthResponse) -> usize {
    response.as_ref().map_or(0, |r| r.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn implauth_response_free(response: *mut ImplauthResponse) {
    free(response)
}

/// Carrier step: number of recognized response entries. Consumes the session.
#[no_mangle]
pub unsafe extern "C" fn implauth_score(
    session: *const ImplauthSession,
    response: *const ImplauthResponse,
    out_count: *mut u64,
) -> ImplauthStatus {
    guard(|| {
        let session = deref(session, "session")?;
        let response = deref(response, "response")?;
        let out = deref_mut(out_count, "out_count")?;
        *out = auth::carrier_score(&session.0, &response.0)?;
        Ok(())
    })
}

/// Carrier step: scores the response and applies the stored decision rule.
/// Consumes the session.
#[no_mangle]
pub unsafe extern "C" fn implauth_finish(
    session: *const ImplauthSession,
    response: *const ImplauthResponse,
    out: *mut ImplauthDecision,
) -> ImplauthStatus {
    guard(|| {
        let session = deref(session, "session")?;
        let response = deref(response, "response")?;
        let out = deref_mut(out, "out")?;
        *out = decision_to_c(&auth::carrier_finish(&session.0, &response.0)?);
        Ok(())
    })
}

/// The decision rule alone.
#[no_mangle]
pub unsafe extern "C" fn implauth_decide(
    match_count: u64,
    mode: ImplauthMode,
    profile_size: u64,
    sample_size: u64,
    threshold: u64,
    out: *mut ImplauthDecision,
) -> ImplauthStatus {
    guard(|| {
        let mode = mode_from_c(&mode)?;
        let out = deref_mut(out, "out")?;
        *out = decision_to_c(&auth::decide(match_count, mode, profile_size, sample_size, threshold)?);
        Ok(())
    })
}
