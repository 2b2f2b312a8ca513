//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use std::cell::Cell;

use implauth_core::harness::oracle::oracle_blinding_system;
use implauth_core::profile::{
    blinding_holds, build_encrypted_profile_inspected, DeviceSecret, EncryptedProfile, FeatureSet, FeatureValue, Mode,
    SetupParams, SolverVariant,
};
use num_bigint::{BigUint, RandBigInt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub fn fv(v: u128) -> FeatureValue {
    FeatureValue::from_u128(v).unwrap()
}

/// Uniform feature in `[1, 2^128]`.
pub fn random_feature(rng: &mut ChaCha20Rng) -> FeatureValue {
    FeatureValue::new(rng.gen_biguint(128) + 1u8).unwrap()
}

/// A profile of `s` random 128-bit values and a sample of `t` values, of
/// which a random number are drawn from the profile.
pub fn overlapping_sets(rng: &mut ChaCha20Rng, s: usize, t: usize) -> (Vec<FeatureValue>, Vec<FeatureValue>) {
    let profile: Vec<FeatureValue> = (0..s).map(|_| random_feature(rng)).collect();
    let shared = rng.gen_range(0..=s.min(t));
    let mut sample: Vec<FeatureValue> = profile.choose_multiple(rng, shared).cloned().collect();
    while sample.len() < t {
        let v = random_feature(rng);
        if !sample.contains(&v) {
            sample.push(v);
        }
    }
    sample.shuffle(rng);
    (profile, sample)
}

pub fn solver_for(i: usize) -> SolverVariant {
    if i % 2 == 0 {
        SolverVariant::ClosedForm
    } else {
        SolverVariant::Gaussian
    }
}

/// Outcome of checking the randomizer system for one generated profile.
#[derive(Debug, Clone, Copy)]
pub struct BlindingCheck {
    pub solver: SolverVariant,
    pub holds: bool,
}

/// Set-up that also checks the randomizer system on the transcript, both
/// with the independent oracle and with the library's own check.
pub fn setup_checked(
    user: &str,
    set: &FeatureSet,
    key_bits: u64,
    solver: SolverVariant,
    rng: &mut ChaCha20Rng,
) -> (EncryptedProfile, DeviceSecret, BlindingCheck) {
    let params = SetupParams { key_bits, solver, threshold: None };
    let holds = Cell::new(false);
    let (profile, secret) = build_encrypted_profile_inspected(user, set, &params, rng, |tr| {
        let roots: Vec<BigUint> = tr.features.values().iter().map(|v| v.value().clone()).collect();
        let n2 = tr.pk.n_squared();
        let oracle = oracle_blinding_system(tr.blinding.r_primes(), &roots, tr.r_prime, n2);
        let library = blinding_holds(tr.blinding, tr.features.values(), tr.r_prime, n2);
        holds.set(oracle && library);
    })
    .expect("set-up");
    (profile, secret, BlindingCheck { solver, holds: holds.get() })
}

pub fn case_a(values: Vec<FeatureValue>) -> FeatureSet {
    FeatureSet::new(Mode::CaseA, values).unwrap()
}
