//! Privacy-preserving dot product of two binary vectors.
//!
//! Two clients hold bit vectors `a` and `b`; a master learns `y = a . b` and
//! nothing else. The AND of two bits is `((a + b) - ((a + b) mod 2)) / 2`, so
//! the dot product splits into a sum (computed on additively masked shares in
//! a prime field) and a XOR (computed with a three-party oblivious transfer).
//!
//! * [`field`]: prime-field arithmetic and rejection sampling.
//! * [`doma`]: the plaintext identity and brute-force oracles.
//! * [`triot`]: the three-party oblivious transfer.
//! * [`protocol`]: party state machines, messages and session runner.
//! * [`harness`]: simulated network, labeled randomness, transcripts.
//! * [`audit`]: exact view-distribution checks by exhaustive enumeration.
//! * [`selftest`]: oracle sweeps used by the command-line tool.

pub mod audit;
pub mod doma;
pub mod error;
pub mod field;
pub mod harness;
pub mod protocol;
pub mod selftest;
pub mod triot;

pub use doma::BitVector;
pub use error::{Error, Result};
pub use field::{FieldElement, FieldVector, Modulus};
