//! Paillier encryption with generator `g = 1 + n`.
//!
//! Only the pieces the authentication protocol needs are provided: key
//! generation, encryption that hands back its randomizer, decryption, and the
//! two homomorphisms (ciphertext product adds plaintexts, ciphertext power
//! scales them).

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use crate::codec::{Canonical, Reader, Writer};
use crate::error::{DecodeError, DecodeErrorKind, Error, Result};

/// Miller-Rabin rounds used for every primality decision.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Default modulus size, matching the reference experiment.
pub const DEFAULT_KEY_BITS: u64 = 1024;

const MIN_KEY_BITS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
}

/// A Paillier ciphertext, an integer in `[1, n^2)` not divisible by `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(BigUint);

impl PublicKey {
    /// Rebuilds a public key from its modulus. The modulus is only checked
    /// for shape (odd, at least 15); its factorization is not verified.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n < BigUint::from(15u8) || n.is_even() {
            return Err(Error::InvalidKey("modulus must be an odd composite >= 15"));
        }
        let g = &n + 1u8;
        let n_squared = &n * &n;
        Ok(Self { n, g, n_squared })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Encrypts `m` under a fresh randomizer and returns both.
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<(Ciphertext, BigUint)> {
        let r = self.random_unit_mod_n(rng);
        let c = self.encrypt_with(m, &r)?;
        Ok((c, r))
    }

    /// Computes `(1 + m n) r^n mod n^2`.
    pub fn encrypt_with(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if m >= &self.n {
            return Err(Error::PlaintextOutOfRange);
        }
        if r.is_zero() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(Error::RandomizerNotUnit);
        }
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext((gm * rn) % &self.n_squared))
    }

    pub fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
        Ciphertext((&c1.0 * &c2.0) % &self.n_squared)
    }

    /// `c^k mod n^2`, which decrypts to `k m mod n`. `k` may exceed `n`.
    pub fn scalar_pow(&self, c: &Ciphertext, k: &BigUint) -> Ciphertext {
        Ciphertext(c.0.modpow(k, &self.n_squared))
    }

    /// Checks the ciphertext range invariant against this key.
    pub fn ciphertext(&self, value: BigUint) -> Result<Ciphertext> {
        if value.is_zero() || value >= self.n_squared || (&value % &self.n).is_zero() {
            return Err(Error::MalformedCiphertext);
        }
        Ok(Ciphertext(value))
    }

    /// Uniform element of `[1, n)` coprime to `n`.
    pub fn random_unit_mod_n<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        random_unit(&self.n, &self.n, rng)
    }

    /// Uniform element of `[1, n^2)` coprime to `n`.
    pub fn random_unit_mod_n_squared<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        random_unit(&self.n_squared, &self.n, rng)
    }

    pub fn is_unit_mod_n_squared(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.n_squared && x.gcd(&self.n).is_one()
    }
}

fn random_unit<R: RngCore + CryptoRng + ?Sized>(bound: &BigUint, n: &BigUint, rng: &mut R) -> BigUint {
    let one = BigUint::one();
    loop {
        let r = rng.gen_biguint_range(&one, bound);
        if r.gcd(n).is_one() {
            return r;
        }
    }
}

impl SecretKey {
    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// Carmichael function of `n`, `lcm(p - 1, q - 1)`.
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// Exponent of the unit group modulo `n^2`, i.e. `n * lambda(n)`.
    /// Exponent arithmetic on units mod `n^2` may be reduced modulo this.
    pub fn group_exponent(&self) -> BigUint {
        &self.p * &self.q * &self.lambda
    }

    /// `L(c^lambda mod n^2) * mu mod n` with `L(u) = (u - 1) / n`.
    pub fn decrypt(&self, pk: &PublicKey, c: &Ciphertext) -> Result<BigUint> {
        let c = &c.0;
        if c.is_zero() || c >= &pk.n_squared || (c % &pk.n).is_zero() {
            return Err(Error::MalformedCiphertext);
        }
        let u = c.modpow(&self.lambda, &pk.n_squared);
        let (l, rem) = (u - 1u8).div_rem(&pk.n);
        if !rem.is_zero() {
            return Err(Error::MalformedCiphertext);
        }
        Ok((l * &self.mu) % &pk.n)
    }

    fn from_primes(p: BigUint, q: BigUint) -> Result<(PublicKey, SecretKey)> {
        if p == q {
            return Err(Error::InvalidKey("p and q must differ"));
        }
        if p < BigUint::from(3u8) || q < BigUint::from(3u8) || p.is_even() || q.is_even() {
            return Err(Error::InvalidKey("p and q must be odd primes"));
        }
        let n = &p * &q;
        let lambda = (&p - 1u8).lcm(&(&q - 1u8));
        if !n.gcd(&lambda).is_one() {
            return Err(Error::InvalidKey("gcd(n, lambda(n)) != 1"));
        }
        let mu = lambda.modinv(&n).ok_or(Error::InvalidKey("lambda(n) not invertible mod n"))?;
        let pk = PublicKey::from_modulus(n)?;
        Ok((pk, SecretKey { p, q, lambda, mu }))
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, SecretKey)> {
    if bits < MIN_KEY_BITS {
        return Err(Error::KeySizeTooSmall(bits));
    }
    let p_bits = bits - bits / 2;
    let q_bits = bits / 2;
    for _ in 0..64 {
        let p = random_prime(p_bits, rng)?;
        let q = random_prime(q_bits, rng)?;
        match SecretKey::from_primes(p, q) {
            Ok(keys) => {
                debug_assert_eq!(keys.0.bits(), bits);
                return Ok(keys);
            }
            Err(Error::InvalidKey(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PrimeSearchExhausted(64))
}

/// Builds a key pair from caller-chosen primes. Refused unless
/// `insecure_test_mode` is set; meant for reproducible small examples.
pub fn keygen_from_primes(p: BigUint, q: BigUint, insecure_test_mode: bool) -> Result<(PublicKey, SecretKey)> {
    if !insecure_test_mode {
        return Err(Error::InsecurePrimesRefused);
    }
    let mut rng = rand::rngs::OsRng;
    for x in [&p, &q] {
        if !is_probable_prime(x, MILLER_RABIN_ROUNDS, &mut rng) {
            return Err(Error::InvalidKey("p and q must be odd primes"));
        }
    }
    SecretKey::from_primes(p, q)
}

/// Random prime of exactly `bits` bits with the top two bits set, so that
/// the product of two such primes has exactly the sum of their sizes.
fn random_prime<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    let budget = 200 * bits as usize + 1000;
    for _ in 0..budget {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, MILLER_RABIN_ROUNDS, rng) {
            return Ok(c);
        }
    }
    Err(Error::PrimeSearchExhausted(budget))
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251,
];

/// Trial division by small primes followed by `rounds` Miller-Rabin rounds
/// with random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if n < &BigUint::from(2u8) {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let two = BigUint::from(2u8);
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

impl Canonical for PublicKey {
    fn encode(&self, w: &mut Writer) {
        w.uint(&self.n);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.uint()?;
        PublicKey::from_modulus(n).map_err(|_| r.error(DecodeErrorKind::InvalidValue("Paillier modulus")))
    }
}

impl Canonical for SecretKey {
    fn encode(&self, w: &mut Writer) {
        w.uint(&self.p);
        w.uint(&self.q);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let p = r.uint()?;
        let q = r.uint()?;
        SecretKey::from_primes(p, q)
            .map(|(_, sk)| sk)
            .map_err(|_| r.error(DecodeErrorKind::InvalidValue("Paillier primes")))
    }
}

impl Canonical for Ciphertext {
    fn encode(&self, w: &mut Writer) {
        w.uint(&self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let v = r.uint()?;
        if v.is_zero() {
            return Err(r.error(DecodeErrorKind::InvalidValue("zero ciphertext")));
        }
        Ok(Ciphertext(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn toy() -> (PublicKey, SecretKey) {
        keygen_from_primes(big(3), big(5), true).unwrap()
    }

    #[test]
    fn toy_key_parameters() {
        let (pk, sk) = toy();
        assert_eq!(pk.n(), &big(15));
        assert_eq!(pk.g(), &big(16));
        assert_eq!(sk.lambda(), &big(4));
        // 4 * 4 = 16 = 1 mod 15
        assert_eq!(sk.mu(), &big(4));
        assert_eq!((sk.lambda() * sk.mu()) % pk.n(), big(1));
    }

    #[test]
    fn injected_primes_need_test_mode() {
        assert!(matches!(keygen_from_primes(big(3), big(5), false), Err(Error::InsecurePrimesRefused)));
        assert!(matches!(keygen_from_primes(big(3), big(3), true), Err(Error::InvalidKey(_))));
        assert!(matches!(keygen_from_primes(big(3), big(9), true), Err(Error::InvalidKey(_))));
    }

    #[test]
    fn toy_encryption_matches_direct_evaluation() {
        let (pk, sk) = toy();
        let c = pk.encrypt_with(&big(7), &big(2)).unwrap();
        // (1 + 7*15) * 2^15 mod 225, evaluated independently
        assert_eq!(c.value(), &big(83));
        assert_eq!(sk.decrypt(&pk, &c).unwrap(), big(7));
    }

    #[test]
    fn zero_plaintext_and_unit_randomizer() {
        let (pk, sk) = toy();
        let r = big(2);
        let c = pk.encrypt_with(&big(0), &r).unwrap();
        assert_eq!(c.value(), &r.modpow(pk.n(), pk.n_squared()));
        assert_eq!(sk.decrypt(&pk, &pk.ciphertext(big(1)).unwrap()).unwrap(), big(0));
    }

    #[test]
    fn encrypt_rejects_bad_inputs() {
        let (pk, _) = toy();
        assert!(matches!(pk.encrypt_with(&big(15), &big(2)), Err(Error::PlaintextOutOfRange)));
        assert!(matches!(pk.encrypt_with(&big(1), &big(3)), Err(Error::RandomizerNotUnit)));
        assert!(matches!(pk.encrypt_with(&big(1), &big(0)), Err(Error::RandomizerNotUnit)));
    }

    #[test]
    fn malformed_ciphertext_rejected() {
        let (pk, sk) = toy();
        assert!(matches!(pk.ciphertext(big(30)), Err(Error::MalformedCiphertext)));
        assert!(matches!(pk.ciphertext(big(0)), Err(Error::MalformedCiphertext)));
        // 3 is not a unit mod 15: c^lambda - 1 is not divisible by n
        let c = Ciphertext(big(3));
        assert!(matches!(sk.decrypt(&pk, &c), Err(Error::MalformedCiphertext)));
    }

    #[test]
    fn homomorphisms_on_small_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (pk, sk) = keygen(64, &mut rng).unwrap();
        let (c3, _) = pk.encrypt(&big(3), &mut rng).unwrap();
        let (c4, _) = pk.encrypt(&big(4), &mut rng).unwrap();
        assert_eq!(sk.decrypt(&pk, &pk.add(&c3, &c4)).unwrap(), big(7));
        let (c2, _) = pk.encrypt(&big(2), &mut rng).unwrap();
        assert_eq!(sk.decrypt(&pk, &pk.scalar_pow(&c2, &big(3))).unwrap(), big(6));
        let zero = pk.scalar_pow(&c2, &big(0));
        assert_eq!(zero.value(), &big(1));
        assert_eq!(sk.decrypt(&pk, &zero).unwrap(), big(0));
    }

    #[test]
    fn keygen_bit_lengths() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for bits in [16, 17, 33, 64, 128] {
            let (pk, _) = keygen(bits, &mut rng).unwrap();
            assert_eq!(pk.bits(), bits);
        }
        assert!(matches!(keygen(15, &mut rng), Err(Error::KeySizeTooSmall(15))));
    }

    #[test]
    fn generator_has_order_n() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (pk, _) = keygen(64, &mut rng).unwrap();
        let one = BigUint::one();
        assert_eq!(pk.g().modpow(pk.n(), pk.n_squared()), one);
        assert_ne!(pk.g().modpow(&big(1), pk.n_squared()), one);
        assert_ne!(pk.g().modpow(&big(2), pk.n_squared()), one);
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for v in 0u64..3000 {
            let naive = v >= 2 && (2..v).take_while(|d| d * d <= v).all(|d| v % d != 0);
            assert_eq!(is_probable_prime(&big(v), 20, &mut rng), naive, "{v}");
        }
        // Carmichael numbers
        for v in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&big(v), 20, &mut rng));
        }
    }

    #[test]
    fn key_serialization_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (pk, sk) = keygen(128, &mut rng).unwrap();
        assert_eq!(PublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(SecretKey::from_bytes(&sk.to_bytes()).unwrap(), sk);
    }
}
