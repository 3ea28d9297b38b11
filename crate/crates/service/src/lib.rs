//! HTTP service and command line for analysis sessions.

pub mod cli;
pub mod http;
pub mod logs;
pub mod session;

pub use http::{router, serve};
pub use session::{AppConfig, AppState, Session, SessionSpec};
