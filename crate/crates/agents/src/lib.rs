//! The two agents of an analysis session and the turn that connects them.
//!
//! A turn sends the question to the engineer, which answers with a script.
//! The script is parsed, verified and run against the session log; failures
//! are fed back until a script succeeds or the iteration limit is hit. The
//! artifacts the script saved are then digested for the analyst, whose
//! block-structured answer becomes the [`Report`].

pub mod analyst;
pub mod digest;
pub mod engineer;
pub mod events;
pub mod prompts;
pub mod provider;
pub mod report;
pub mod state;
mod turn;

pub use analyst::{analyst_loop, parse_blocks};
pub use digest::{summarize, summarize_artifact, summarize_table};
pub use engineer::{engineer_loop, EngineerError, EngineerSuccess};
pub use events::{is_valid_sequence, ProgressEvent, ProgressKind};
pub use prompts::{build_analyst_prompt, build_engineer_prompt, extract_fenced};
pub use provider::{
    provider_from_config, request_body, ChatMessage, MockProvider, Provider, ProviderConfig, ProviderError,
    RemoteProvider, Role,
};
pub use report::{Report, ReportBlock, ReportStatus};
pub use state::{LoopLimits, SharedState, TurnOptions, DEFAULT_ROW_THRESHOLD};
pub use turn::{run_turn, TurnError};
