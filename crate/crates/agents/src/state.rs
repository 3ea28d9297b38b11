use pmax_core::event_log::LogAbstraction;
use pmax_core::script::Script;
use serde::{Deserialize, Serialize};

use crate::provider::ChatMessage;

/// Memory shared by the two agents of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedState {
    pub engineer_history: Vec<ChatMessage>,
    pub analyst_history: Vec<ChatMessage>,
    /// `(artifact id, creating turn)` in creation order.
    pub artifact_index: Vec<(String, u32)>,
    /// Completed turns.
    pub turn: u32,
    pub abstraction: LogAbstraction,
    pub last_script: Option<Script>,
}

impl SharedState {
    pub fn new(abstraction: LogAbstraction) -> Self {
        SharedState {
            engineer_history: Vec::new(),
            analyst_history: Vec::new(),
            artifact_index: Vec::new(),
            turn: 0,
            abstraction,
            last_script: None,
        }
    }

    pub fn artifact_ids(&self) -> Vec<String> {
        self.artifact_index.iter().map(|(id, _)| id.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopLimits {
    pub engineer_max_iters: u32,
    pub analyst_max_iters: u32,
}

impl Default for LoopLimits {
    fn default() -> Self {
        LoopLimits {
            engineer_max_iters: 3,
            analyst_max_iters: 2,
        }
    }
}

impl LoopLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.engineer_max_iters == 0 {
            return Err("engineer_max_iters: must be at least 1".into());
        }
        if self.analyst_max_iters == 0 {
            return Err("analyst_max_iters: must be at least 1".into());
        }
        Ok(())
    }
}

/// Tables with at most this many rows reach the analyst verbatim.
pub const DEFAULT_ROW_THRESHOLD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurnOptions {
    #[serde(flatten)]
    pub limits: LoopLimits,
    pub row_threshold: usize,
}

impl Default for TurnOptions {
    fn default() -> Self {
        TurnOptions {
            limits: LoopLimits::default(),
            row_threshold: DEFAULT_ROW_THRESHOLD,
        }
    }
}
