use pmax_core::artifacts::ArtifactError;
use pmax_core::script::Environment;
use serde_json::json;
use thiserror::Error;

use crate::analyst::{analyst_loop, history_stub};
use crate::digest::summarize_artifact;
use crate::engineer::{engineer_loop, EngineerError};
use crate::events::{ProgressEvent, ProgressKind};
use crate::prompts::build_analyst_prompt;
use crate::provider::{Provider, ProviderError};
use crate::report::{Report, ReportBlock, ReportStatus};
use crate::state::{SharedState, TurnOptions};

#[derive(Debug, Error)]
pub enum TurnError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] ArtifactError),
}

/// One question, end to end. `base` holds the session's uploaded log and
/// artifact store; scripts run in forks of it and only the successful
/// attempt's artifacts are kept.
pub fn run_turn(
    state: &mut SharedState,
    question: &str,
    provider: &dyn Provider,
    options: &TurnOptions,
    base: &mut Environment,
    emit: &mut dyn FnMut(ProgressEvent),
) -> Result<Report, TurnError> {
    let turn = state.turn + 1;
    base.turn = turn;
    let result = run_phases(state, question, provider, options, base, emit);
    match result {
        Ok(report) => {
            state.turn = turn;
            emit(ProgressEvent {
                kind: ProgressKind::ReportReady,
                turn,
                payload: serde_json::to_value(&report).expect("report serializes"),
            });
            Ok(report)
        }
        Err(e) => {
            emit(ProgressEvent {
                kind: ProgressKind::Error,
                turn,
                payload: json!({ "message": e.to_string() }),
            });
            Err(e)
        }
    }
}

fn run_phases(
    state: &mut SharedState,
    question: &str,
    provider: &dyn Provider,
    options: &TurnOptions,
    base: &mut Environment,
    emit: &mut dyn FnMut(ProgressEvent),
) -> Result<Report, TurnError> {
    let turn = base.turn;
    let success = match engineer_loop(state, question, provider, &options.limits, base, emit) {
        Ok(s) => s,
        Err(EngineerError::Provider(e)) => return Err(e.into()),
        Err(EngineerError::ExhaustedIterations {
            iterations, feedback, ..
        }) => {
            // the analyst never ran, but later turns should know this one happened
            state.analyst_history.push(history_stub(question, &[]));
            return Ok(Report {
                turn,
                question: question.to_string(),
                status: ReportStatus::Degraded,
                blocks: vec![ReportBlock::Text {
                    content: format!(
                        "No results could be computed for this question: the analysis script still failed \
                         after {iterations} attempts.\n\nFinal diagnostics:\n{feedback}"
                    ),
                }],
            });
        }
    };
    base.store.adopt(success.env.store)?;
    let new: Vec<_> = base.store.list_since(turn - 1);
    let new_ids: Vec<String> = new.iter().map(|a| a.id.clone()).collect();
    let digests: Vec<String> = new.iter().map(|a| summarize_artifact(a, options.row_threshold)).collect();
    state
        .artifact_index
        .extend(new_ids.iter().map(|id| (id.clone(), turn)));
    let prompt = build_analyst_prompt(state, question, &digests, &state.artifact_ids());
    Ok(analyst_loop(
        state,
        prompt,
        provider,
        &base.store,
        &new_ids,
        &options.limits,
        question,
        emit,
    )?)
}
