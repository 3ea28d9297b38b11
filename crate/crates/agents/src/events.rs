use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgressKind {
    EngineerIterationStarted,
    ScriptGenerated,
    VerificationResult,
    ExecutionResult,
    AnalystIterationStarted,
    ReportReady,
    Error,
}

impl ProgressKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProgressKind::EngineerIterationStarted => "engineer-iteration-started",
            ProgressKind::ScriptGenerated => "script-generated",
            ProgressKind::VerificationResult => "verification-result",
            ProgressKind::ExecutionResult => "execution-result",
            ProgressKind::AnalystIterationStarted => "analyst-iteration-started",
            ProgressKind::ReportReady => "report-ready",
            ProgressKind::Error => "error",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, ProgressKind::ReportReady | ProgressKind::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub kind: ProgressKind,
    pub turn: u32,
    pub payload: Value,
}

/// Whether `kinds` is a run of the turn state machine: engineer iterations
/// (each started, then a script, a verification and, if that passed, an
/// execution), then analyst iterations, then one terminal event.
pub fn is_valid_sequence(kinds: &[ProgressKind]) -> bool {
    use ProgressKind::*;
    #[derive(PartialEq)]
    enum S {
        Start,
        Started,
        Script,
        Verified,
        Executed,
        Analyst,
        Done,
    }
    let mut s = S::Start;
    for k in kinds {
        s = match (s, k) {
            (S::Done, _) => return false,
            (_, Error) => S::Done,
            (S::Start | S::Verified | S::Executed, EngineerIterationStarted) => S::Started,
            (S::Started, ScriptGenerated) => S::Script,
            (S::Script, VerificationResult) => S::Verified,
            (S::Verified, ExecutionResult) => S::Executed,
            (S::Executed | S::Analyst, AnalystIterationStarted) => S::Analyst,
            // failed engineer loop ends straight in a degraded report
            (S::Verified | S::Executed | S::Analyst, ReportReady) => S::Done,
            _ => return false,
        };
    }
    s == S::Done
}
