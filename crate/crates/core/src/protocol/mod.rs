//! The two-client binary dot product protocol.

pub mod config;
pub mod message;
pub mod parties;
pub mod session;

pub use config::{Fault, SessionConfig};
pub use message::{PartyId, ProtocolMessage, StepTag};
pub use parties::{master_finalize, master_sum_shares, MasterState, W1State, W2State};
pub use session::{
    execute_session, execute_xor_phase, run_session, run_session_threaded, SessionRun,
};
