//! Device-side set-up: turning a plaintext feature set into the encrypted
//! profile the carrier stores and the small secret the device keeps.
//!
//! The profile `{a_1, ..., a_s}` becomes the monic polynomial
//! `p(x) = prod (x - a_j)`, whose coefficients are Paillier-encrypted. The
//! encryption randomizers `r_i` are replaced on the carrier side by
//! `R_i = r'_i / r_i`, where the `r'_i` satisfy
//!
//! ```text
//! r'_0 * r'_1^(a_j) * r'_2^(a_j^2) * ... * r'_s^(a_j^s) = R'  (mod n^2)   for every root a_j
//! ```
//!
//! and the device keeps only `(d, R')`. Every other intermediate is dropped
//! before [`build_encrypted_profile`] returns.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::codec::{Canonical, Reader, Writer};
use crate::error::{DecodeError, DecodeErrorKind, Error, Result};
use crate::paillier::{self, Ciphertext, PublicKey, SecretKey};
use crate::vandermonde;

/// Longest accepted user identifier, in bytes of UTF-8.
pub const MAX_USER_ID_LEN: usize = 256;

/// Which dissimilarity the profile is scored with, plus its public parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Independent nominal features, scored by intersection size.
    CaseA,
    /// Correlated categorical features, scored by a weighted similarity sum.
    /// `max_weight` is the public upper bound of the similarity function.
    CaseB { max_weight: u64 },
    /// Numerical features in `[0, cap]`, scored by L1 distance.
    CaseC { features: u64, cap: u64 },
}

impl Mode {
    pub fn tag(&self) -> u8 {
        match self {
            Mode::CaseA => 0x01,
            Mode::CaseB { .. } => 0x02,
            Mode::CaseC { .. } => 0x03,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::CaseA => "case-a",
            Mode::CaseB { .. } => "case-b",
            Mode::CaseC { .. } => "case-c",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::CaseA => write!(f, "case-a"),
            Mode::CaseB { max_weight } => write!(f, "case-b(L={max_weight})"),
            Mode::CaseC { features, cap } => write!(f, "case-c(t={features}, M={cap})"),
        }
    }
}

impl Canonical for Mode {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.tag());
        match *self {
            Mode::CaseA => {}
            Mode::CaseB { max_weight } => w.u64_uint(max_weight),
            Mode::CaseC { features, cap } => {
                w.u64_uint(features);
                w.u64_uint(cap);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.position();
        match r.u8()? {
            0x01 => Ok(Mode::CaseA),
            0x02 => Ok(Mode::CaseB { max_weight: r.u64_uint()? }),
            0x03 => {
                let features = r.u64_uint()?;
                let cap = r.u64_uint()?;
                Ok(Mode::CaseC { features, cap })
            }
            t => Err(DecodeError { position: at, kind: DecodeErrorKind::UnknownTag(t) }),
        }
    }
}

/// A feature in the integer domain `[1, 2^128]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureValue(BigUint);

impl FeatureValue {
    pub fn new(v: BigUint) -> Result<Self> {
        if v.is_zero() || v > feature_max() {
            return Err(Error::FeatureOutOfRange);
        }
        Ok(Self(v))
    }

    pub fn from_u128(v: u128) -> Result<Self> {
        Self::new(BigUint::from(v))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

fn feature_max() -> BigUint {
    BigUint::one() << 128u32
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Maps a raw nominal feature (tower id, app name, ...) to a feature value:
/// the first 128 bits of its SHA-256 digest, with 0 sent to `2^128`.
pub fn hash_feature(raw: &[u8]) -> Result<FeatureValue> {
    if raw.is_empty() {
        return Err(Error::InvalidInput("empty raw feature".into()));
    }
    let digest = Sha256::digest(raw);
    let v = BigUint::from_bytes_be(&digest[..16]);
    if v.is_zero() {
        return FeatureValue::new(feature_max());
    }
    FeatureValue::new(v)
}

/// A profile or a fresh sample. Values are pairwise distinct; an empty set
/// is representable (an all-zero numeric vector encodes to one) but rejected
/// by set-up and by the authentication protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    mode: Mode,
    values: Vec<FeatureValue>,
}

impl FeatureSet {
    pub fn new(mode: Mode, values: Vec<FeatureValue>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(values.len());
        if !values.iter().all(|v| seen.insert(v)) {
            return Err(Error::DuplicateFeature);
        }
        Ok(Self { mode, values })
    }

    /// Hashes each raw feature; repeated raw features collapse to one value.
    pub fn from_raw<I, B>(mode: Mode, raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut seen = HashSet::new();
        let mut values = Vec::new();
        for item in raw {
            let v = hash_feature(item.as_ref())?;
            if seen.insert(v.clone()) {
                values.push(v);
            }
        }
        Ok(Self { mode, values })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unary pair encoding of a numeric vector: the pair `(i, j)` with
/// `1 <= j <= u_i` becomes `(i - 1) * cap + j`.
pub fn encode_numeric(u: &[u64], cap: u64) -> Result<FeatureSet> {
    if u.is_empty() {
        return Err(Error::InvalidInput("numeric vector is empty".into()));
    }
    if cap == 0 {
        return Err(Error::InvalidInput("per-feature cap must be positive".into()));
    }
    let mut values = Vec::with_capacity(u.iter().map(|&x| x as usize).sum());
    for (i, &ui) in u.iter().enumerate() {
        if ui > cap {
            return Err(Error::NumericAboveCap { index: i, value: ui, cap });
        }
        for j in 1..=ui {
            let v = (i as u128) * (cap as u128) + j as u128;
            values.push(FeatureValue::from_u128(v)?);
        }
    }
    Ok(FeatureSet { mode: Mode::CaseC { features: u.len() as u64, cap }, values })
}

/// Inverse of [`encode_numeric`] on well-formed pair sets.
pub fn decode_numeric(set: &FeatureSet) -> Result<Vec<u64>> {
    let Mode::CaseC { features, cap } = set.mode else {
        return Err(Error::ModeMismatch { expected: Mode::CaseC { features: 0, cap: 0 }, actual: set.mode });
    };
    let mut per_feature: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for v in &set.values {
        let v = u128::try_from(v.value()).map_err(|_| Error::InvalidInput("pair encoding out of range".into()))?;
        let i = ((v - 1) / cap as u128) as u64;
        let j = ((v - 1) % cap as u128) as u64 + 1;
        if i >= features {
            return Err(Error::InvalidInput(format!("pair encoding {v} names feature {}", i + 1)));
        }
        per_feature.entry(i).or_default().push(j);
    }
    let mut u = vec![0u64; features as usize];
    for (i, mut js) in per_feature {
        js.sort_unstable();
        if js.iter().enumerate().any(|(k, &j)| j != k as u64 + 1) {
            return Err(Error::InvalidInput(format!("pairs of feature {} are not 1..=u", i + 1)));
        }
        u[i as usize] = js.len() as u64;
    }
    Ok(u)
}

/// Coefficients `p_0 .. p_s` of `prod (x - a_j)` reduced into `[0, n)`.
pub fn poly_from_roots(features: &FeatureSet, n: &BigUint) -> Result<Vec<BigUint>> {
    let roots: Vec<&BigUint> = features.values.iter().map(FeatureValue::value).collect();
    poly_coefficients(&roots, n)
}

/// Monic polynomial with the given roots, coefficients reduced mod `modulus`.
/// Roots must be nonempty and pairwise distinct modulo `modulus`.
pub(crate) fn poly_coefficients(roots: &[&BigUint], modulus: &BigUint) -> Result<Vec<BigUint>> {
    if roots.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let reduced: Vec<BigUint> = roots.iter().map(|a| *a % modulus).collect();
    let mut seen = HashSet::with_capacity(reduced.len());
    if !reduced.iter().all(|a| seen.insert(a)) {
        return Err(Error::DuplicateFeature);
    }
    // coeffs[k] is the coefficient of x^k; multiply by (x - a) one root at a time.
    let mut coeffs = vec![BigUint::one()];
    for a in &reduced {
        let neg_a = (modulus - a) % modulus;
        let mut next = vec![BigUint::zero(); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] = (&next[k + 1] + c) % modulus;
            next[k] = (&next[k] + c * &neg_a) % modulus;
        }
        coeffs = next;
    }
    Ok(coeffs)
}

/// The randomizers `r'_0 .. r'_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindingSolution {
    r_primes: Vec<BigUint>,
}

impl BlindingSolution {
    pub fn r_primes(&self) -> &[BigUint] {
        &self.r_primes
    }

    /// True when all of `r'_1 .. r'_s` equal one.
    pub fn is_trivial(&self) -> bool {
        self.r_primes[1..].iter().all(One::is_one)
    }
}

/// Set-up solver for the randomizer system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverVariant {
    /// Exponents taken from the profile polynomial itself; `O(s)` modular
    /// powers and no linear algebra.
    #[default]
    ClosedForm,
    /// Fraction-free Gaussian elimination on the generalized Vandermonde
    /// matrix; `O(s^3)` big-integer operations.
    Gaussian,
}

impl fmt::Display for SolverVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverVariant::ClosedForm => "closed-form",
            SolverVariant::Gaussian => "gaussian",
        })
    }
}

impl FromStr for SolverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(SolverVariant::ClosedForm),
            "gaussian" => Ok(SolverVariant::Gaussian),
            other => Err(Error::InvalidInput(format!("unknown solver {other:?}"))),
        }
    }
}

/// Solves the randomizer system by working in exponent space.
///
/// With `N = n * lambda(n)` (the exponent of the unit group mod `n^2`), let
/// `P(x) = prod (x - a_j) mod N`, draw a random unit `w` and a random scale
/// `c`, and set `r'_k = w^(-c P_k)` for `k >= 1` and
/// `r'_0 = R' w^(-c P_0)`. Then at every root the product collapses to
/// `R' w^(-c P(a_j)) = R'` because `P(a_j) = 0 mod N`, for raw integer
/// exponents `a_j^k`.
pub fn solve_blinding<R: RngCore + CryptoRng + ?Sized>(
    features: &FeatureSet,
    r_prime: &BigUint,
    pk: &PublicKey,
    sk: &SecretKey,
    rng: &mut R,
) -> Result<BlindingSolution> {
    let order = sk.group_exponent();
    loop {
        let base = pk.random_unit_mod_n_squared(rng);
        let scale = rng.gen_biguint_range(&BigUint::one(), &order);
        match solve_blinding_with(features, r_prime, pk, sk, &base, &scale) {
            Err(Error::TrivialBlinding) => continue,
            other => return other,
        }
    }
}

/// [`solve_blinding`] with the base `w` and scale `c` supplied. A scale of
/// zero mod `n * lambda(n)`, or any choice yielding `r'_1 = ... = r'_s = 1`,
/// is rejected as the trivial solution.
pub fn solve_blinding_with(
    features: &FeatureSet,
    r_prime: &BigUint,
    pk: &PublicKey,
    sk: &SecretKey,
    base: &BigUint,
    scale: &BigUint,
) -> Result<BlindingSolution> {
    check_unit(pk, r_prime)?;
    check_unit(pk, base)?;
    let order = sk.group_exponent();
    let scale = scale % &order;
    if scale.is_zero() {
        return Err(Error::TrivialBlinding);
    }
    // Reject roots colliding mod n, as the encrypted polynomial does.
    let _ = poly_from_roots(features, pk.n())?;
    let roots: Vec<&BigUint> = features.values.iter().map(FeatureValue::value).collect();
    let exp_coeffs = poly_coefficients(&roots, &order)?;
    let n2 = pk.n_squared();
    let neg_scaled = |p: &BigUint| (&order - (&scale * p) % &order) % &order;
    let mut r_primes = Vec::with_capacity(exp_coeffs.len());
    r_primes.push((r_prime * base.modpow(&neg_scaled(&exp_coeffs[0]), n2)) % n2);
    for p in &exp_coeffs[1..] {
        r_primes.push(base.modpow(&neg_scaled(p), n2));
    }
    let solution = BlindingSolution { r_primes };
    if solution.is_trivial() {
        return Err(Error::TrivialBlinding);
    }
    Ok(solution)
}

/// Solves the randomizer system through the `s x s` generalized Vandermonde
/// matrix `V` with rows `(a_j, ..., a_j^s)`.
///
/// Fraction-free elimination yields the integral `y = det(V) V^{-1} 1`. With
/// a random unit `w` and random `t`, set `r'_k = w^(t y_k)` and
/// `r'_0 = R' w^(-t det(V))`, so each root gives
/// `r'_0 w^(t sum_k y_k a_j^k) = R' w^(-t det + t det) = R'`.
///
/// A zero root or singular matrix falls back to [`solve_blinding`] with a
/// logged warning.
pub fn solve_blinding_gaussian<R: RngCore + CryptoRng + ?Sized>(
    features: &FeatureSet,
    r_prime: &BigUint,
    pk: &PublicKey,
    sk: &SecretKey,
    rng: &mut R,
) -> Result<BlindingSolution> {
    check_unit(pk, r_prime)?;
    let _ = poly_from_roots(features, pk.n())?;
    let roots: Vec<BigInt> = features.values.iter().map(|v| BigInt::from(v.value().clone())).collect();
    if roots.iter().any(Zero::is_zero) {
        warn!("zero root makes the Vandermonde system singular; using the closed-form solver");
        return solve_blinding(features, r_prime, pk, sk, rng);
    }
    let ones = vec![BigInt::one(); roots.len()];
    let Some((det, y)) = vandermonde::solve_scaled(vandermonde::generalized_vandermonde(&roots), ones) else {
        warn!("singular Vandermonde system; using the closed-form solver");
        return solve_blinding(features, r_prime, pk, sk, rng);
    };

    let order = BigInt::from(sk.group_exponent());
    let n2 = pk.n_squared();
    for _ in 0..16 {
        let base = pk.random_unit_mod_n_squared(rng);
        let target = BigInt::from(rng.gen_biguint_range(&BigUint::one(), order.magnitude()));
        let to_exp = |e: BigInt| -> BigUint {
            let (_, mag) = e.mod_floor(&order).into_parts();
            mag
        };
        let mut r_primes = Vec::with_capacity(y.len() + 1);
        let shift = to_exp(-(&target * &det));
        r_primes.push((r_prime * base.modpow(&shift, n2)) % n2);
        for yk in &y {
            r_primes.push(base.modpow(&to_exp(&target * yk), n2));
        }
        let solution = BlindingSolution { r_primes };
        if !solution.is_trivial() {
            return Ok(solution);
        }
    }
    warn!("Gaussian blinding stayed trivial; using the closed-form solver");
    solve_blinding(features, r_prime, pk, sk, rng)
}

fn check_unit(pk: &PublicKey, x: &BigUint) -> Result<()> {
    if !pk.is_unit_mod_n_squared(x) {
        return Err(Error::InvalidInput("value is not a unit modulo n^2".into()));
    }
    Ok(())
}

/// What the carrier stores: the encrypted polynomial and the blinded
/// randomizers `R_i^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedProfile {
    pub pk: PublicKey,
    pub enc_coeffs: Vec<Ciphertext>,
    pub blinded_r: Vec<BigUint>,
    pub size: u64,
    pub mode: Mode,
    pub threshold: u64,
}

impl EncryptedProfile {
    fn validate(&self) -> std::result::Result<(), &'static str> {
        let expected = self.size.checked_add(1).ok_or("profile size overflow")?;
        if self.size == 0 {
            return Err("empty profile");
        }
        if self.enc_coeffs.len() as u64 != expected || self.blinded_r.len() as u64 != expected {
            return Err("coefficient counts disagree with profile size");
        }
        if self.threshold == 0 {
            return Err("threshold must be positive");
        }
        for c in &self.enc_coeffs {
            if self.pk.ciphertext(c.value().clone()).is_err() {
                return Err("coefficient ciphertext out of range");
            }
        }
        if !self.blinded_r.iter().all(|r| self.pk.is_unit_mod_n_squared(r)) {
            return Err("blinded randomizer is not a unit mod n^2");
        }
        Ok(())
    }
}

impl Canonical for EncryptedProfile {
    fn encode(&self, w: &mut Writer) {
        self.pk.encode(w);
        w.uints(self.enc_coeffs.iter().map(Ciphertext::value));
        w.uints(self.blinded_r.iter());
        w.u64_uint(self.size);
        self.mode.encode(w);
        w.u64_uint(self.threshold);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let start = r.position();
        let pk = PublicKey::decode(r)?;
        let n = r.count(5)?;
        let enc_coeffs = (0..n).map(|_| Ciphertext::decode(r)).collect::<Result<Vec<_>, _>>()?;
        let blinded_r = r.uints()?;
        let size = r.u64_uint()?;
        let mode = Mode::decode(r)?;
        let threshold = r.u64_uint()?;
        let profile = EncryptedProfile { pk, enc_coeffs, blinded_r, size, mode, threshold };
        profile
            .validate()
            .map_err(|why| DecodeError { position: start, kind: DecodeErrorKind::InvalidValue(why) })?;
        Ok(profile)
    }
}

/// What the device keeps after set-up: `(d, R')` and public metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceSecret {
    pub user_id: String,
    pub d: BigUint,
    pub r_prime: BigUint,
    pub mode: Mode,
}

impl Canonical for DeviceSecret {
    fn encode(&self, w: &mut Writer) {
        w.str(&self.user_id);
        w.uint(&self.d);
        w.uint(&self.r_prime);
        self.mode.encode(w);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let user_id = r.str(MAX_USER_ID_LEN)?;
        let d = r.uint()?;
        let r_prime = r.uint()?;
        if d.is_zero() || r_prime.is_zero() {
            return Err(r.error(DecodeErrorKind::InvalidValue("zero device secret component")));
        }
        let mode = Mode::decode(r)?;
        Ok(DeviceSecret { user_id, d, r_prime, mode })
    }
}

#[derive(Debug, Clone)]
pub struct SetupParams {
    pub key_bits: u64,
    pub solver: SolverVariant,
    /// Carrier-side decision threshold; `None` picks [`default_threshold`].
    pub threshold: Option<u64>,
}

impl Default for SetupParams {
    fn default() -> Self {
        Self { key_bits: paillier::DEFAULT_KEY_BITS, solver: SolverVariant::ClosedForm, threshold: None }
    }
}

/// Deployment default: `ceil(s / 2)` matches for Cases A and B,
/// `ceil(t * M / 4)` L1 distance for Case C.
pub fn default_threshold(mode: Mode, profile_size: u64) -> u64 {
    match mode {
        Mode::CaseA | Mode::CaseB { .. } => profile_size.div_ceil(2).max(1),
        Mode::CaseC { features, cap } => (features * cap).div_ceil(4).max(1),
    }
}

/// Every value computed during set-up, lent to an inspector before it is
/// dropped. Only tests and audits should look at this.
#[derive(Debug)]
pub struct SetupTranscript<'a> {
    pub features: &'a FeatureSet,
    pub pk: &'a PublicKey,
    pub sk: &'a SecretKey,
    pub coefficients: &'a [BigUint],
    pub randomizers: &'a [BigUint],
    pub blinding: &'a BlindingSolution,
    pub unblinded_r: &'a [BigUint],
    pub r_prime: &'a BigUint,
    pub d: &'a BigUint,
}

/// Runs the whole device set-up and returns the carrier record together with
/// the device secret. The Paillier secret key and all intermediates are
/// dropped before returning.
pub fn build_encrypted_profile<R: RngCore + CryptoRng + ?Sized>(
    user_id: &str,
    features: &FeatureSet,
    params: &SetupParams,
    rng: &mut R,
) -> Result<(EncryptedProfile, DeviceSecret)> {
    build_encrypted_profile_inspected(user_id, features, params, rng, |_| {})
}

/// [`build_encrypted_profile`], lending the full set-up transcript to
/// `inspect` just before the intermediates are dropped.
pub fn build_encrypted_profile_inspected<R, F>(
    user_id: &str,
    features: &FeatureSet,
    params: &SetupParams,
    rng: &mut R,
    inspect: F,
) -> Result<(EncryptedProfile, DeviceSecret)>
where
    R: RngCore + CryptoRng + ?Sized,
    F: FnOnce(&SetupTranscript<'_>),
{
    if user_id.is_empty() || user_id.len() > MAX_USER_ID_LEN {
        return Err(Error::InvalidInput(format!("user id must be 1..={MAX_USER_ID_LEN} bytes")));
    }
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let (pk, sk) = paillier::keygen(params.key_bits, rng)?;
    let coefficients = poly_from_roots(features, pk.n())?;

    let mut enc_coeffs = Vec::with_capacity(coefficients.len());
    let mut randomizers = Vec::with_capacity(coefficients.len());
    for p in &coefficients {
        let (c, r) = pk.encrypt(p, rng)?;
        enc_coeffs.push(c);
        randomizers.push(r);
    }

    let r_prime = pk.random_unit_mod_n_squared(rng);
    let blinding = match params.solver {
        SolverVariant::ClosedForm => solve_blinding(features, &r_prime, &pk, &sk, rng)?,
        SolverVariant::Gaussian => solve_blinding_gaussian(features, &r_prime, &pk, &sk, rng)?,
    };

    let n2 = pk.n_squared();
    let unblinded_r = blinding
        .r_primes
        .iter()
        .zip(&randomizers)
        .map(|(rp, r)| {
            let inv = r.modinv(n2).ok_or(Error::RandomizerNotUnit)?;
            Ok((rp * inv) % n2)
        })
        .collect::<Result<Vec<_>>>()?;

    let d = rng.gen_biguint_range(&BigUint::one(), pk.n());
    let blinded_r = unblinded_r.iter().map(|r| r.modpow(&d, n2)).collect();

    inspect(&SetupTranscript {
        features,
        pk: &pk,
        sk: &sk,
        coefficients: &coefficients,
        randomizers: &randomizers,
        blinding: &blinding,
        unblinded_r: &unblinded_r,
        r_prime: &r_prime,
        d: &d,
    });

    let size = features.len() as u64;
    let mode = features.mode();
    let threshold = params.threshold.unwrap_or_else(|| default_threshold(mode, size));
    if threshold == 0 {
        return Err(Error::InvalidThreshold);
    }
    let profile = EncryptedProfile { pk, enc_coeffs, blinded_r, size, mode, threshold };
    let secret = DeviceSecret { user_id: user_id.to_owned(), d, r_prime, mode };
    Ok((profile, secret))
}

/// Checks the randomizer system at every root, with raw integer exponents.
pub fn blinding_holds(solution: &BlindingSolution, roots: &[FeatureValue], r_prime: &BigUint, n_squared: &BigUint) -> bool {
    roots.iter().all(|a| {
        let mut acc = solution.r_primes[0].clone() % n_squared;
        let mut power = a.value().clone();
        for rk in &solution.r_primes[1..] {
            acc = (acc * rk.modpow(&power, n_squared)) % n_squared;
            power *= a.value();
        }
        &acc == r_prime
    })
}
