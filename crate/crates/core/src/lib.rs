//! Privacy-preserving implicit authentication.
//!
//! A device turns its usage profile into a Paillier-encrypted polynomial whose
//! roots are the profile's feature values and hands it to a carrier. Later the
//! device proves how many of its fresh observations are roots, without either
//! side seeing the other's plaintext features.
//!
//! - [`paillier`]: the additively homomorphic cryptosystem.
//! - [`profile`]: set-up, blinding and the stored records.
//! - [`auth`]: challenge, response, scoring and decisions.
//! - [`wire`], [`service`], [`client`]: the framed TCP protocol.
//! - [`harness`]: plaintext oracles and the benchmark driver.

pub mod auth;
pub mod client;
pub mod codec;
pub mod error;
pub mod harness;
pub mod inputs;
pub mod paillier;
pub mod profile;
pub mod service;
pub mod store;
pub mod vandermonde;
pub mod wire;

pub use error::{Error, Result};
