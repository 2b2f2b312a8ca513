//! Test and measurement support: plaintext reference implementations of the
//! scores the protocol computes under encryption, and the benchmark driver.

pub mod bench;
pub mod oracle;
