//! Simulated network, randomness provider and transcript capture.

pub mod network;
pub mod rng;
pub mod transcript;

pub use network::{deliver_until_quiescent, run_threaded, Party, Scheduler};
pub use rng::{derive_stream, Assignment, RandomnessSource, SeedMaterial, StreamKey, StreamLabel};
pub use transcript::{project_view, DumpMode, Transcript, View};
