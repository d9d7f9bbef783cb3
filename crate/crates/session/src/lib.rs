//! Multi-participant sessions over HTTP.
//!
//! Guests poll for their next query and post answers; the secret participant
//! only ever posts a piece choice. Nothing the secret participant submits
//! reaches the partition phase.

pub mod http;
pub mod session;
pub mod store;

pub use http::{router, serve};
pub use session::{Event, Participant, Phase, Session, SessionConfig, SessionError, SessionResult};
pub use store::{read_log, SessionStore, Snapshot, StoreError};
