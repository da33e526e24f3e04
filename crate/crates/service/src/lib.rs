//! Live session service: phase tracking, per-tick classification, session
//! logging and a WebSocket event stream for operator clients.

pub mod bus;
pub mod classify;
pub mod runner;
pub mod server;
pub mod session;
pub mod source;
pub mod wire;

pub use bus::{EventBus, Subscription};
pub use classify::{classify_file, ClassifyError, ClassifyReport};
pub use runner::{run_session, Control, RunOptions, RunSummary};
pub use server::{Server, ServerConfig, ServerHandle, SourceKind};
pub use session::{Session, SessionError};
pub use wire::{Command, Event};
