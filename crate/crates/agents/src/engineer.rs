//! Script synthesis with the self-correction loop.

use pmax_core::script::{
    execute, parse_script, registry, registry_manifest, verify, Environment, ExecutionOutcome, Origin, Script,
};
use serde_json::json;
use thiserror::Error;

use crate::events::{ProgressEvent, ProgressKind};
use crate::prompts::{build_engineer_prompt, extract_fenced, SCRIPT_FENCE};
use crate::provider::{ChatMessage, Provider, ProviderError};
use crate::state::{LoopLimits, SharedState};

#[derive(Debug)]
pub struct EngineerSuccess {
    pub script: Script,
    pub outcome: ExecutionOutcome,
    /// The environment the successful attempt ran in.
    pub env: Environment,
    pub iterations: u32,
}

#[derive(Debug, Error)]
pub enum EngineerError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no working script after {iterations} iterations; last feedback:\n{feedback}")]
    ExhaustedIterations {
        iterations: u32,
        /// Diagnostics or traceback of the final attempt.
        feedback: String,
        last_outcome: Option<ExecutionOutcome>,
    },
}

fn retry_note() -> String {
    format!("Reply with the complete corrected script in a single ```{SCRIPT_FENCE} block.")
}

/// Runs up to `limits.engineer_max_iters` attempts. Each verified script
/// runs in a fresh fork of `base`, so a failed attempt leaves nothing
/// behind.
pub fn engineer_loop(
    state: &mut SharedState,
    question: &str,
    provider: &dyn Provider,
    limits: &LoopLimits,
    base: &Environment,
    emit: &mut dyn FnMut(ProgressEvent),
) -> Result<EngineerSuccess, EngineerError> {
    let turn = base.turn;
    let mut prompt = build_engineer_prompt(state, question, &registry_manifest());
    let mut exchange = vec![prompt.pop().expect("prompt ends with the question")];
    let mut event = |kind, payload| emit(ProgressEvent { kind, turn, payload });
    let mut feedback = String::new();
    let mut last_outcome = None;
    for iteration in 1..=limits.engineer_max_iters {
        event(ProgressKind::EngineerIterationStarted, json!({ "iteration": iteration }));
        let mut messages = prompt.clone();
        messages.extend(exchange.iter().cloned());
        let reply = match provider.complete(&messages) {
            Ok(r) => r,
            Err(e) => {
                state.engineer_history.extend(exchange);
                return Err(e.into());
            }
        };
        exchange.push(ChatMessage::assistant(reply.clone()));
        let source = extract_fenced(&reply);
        event(
            ProgressKind::ScriptGenerated,
            json!({ "iteration": iteration, "script": source }),
        );
        let diagnostics: Vec<String> = match &source {
            None => vec![format!("no fenced ```{SCRIPT_FENCE} block found in the reply")],
            Some(src) => match parse_script(src) {
                Err(e) => vec![e.to_string()],
                Ok(ast) => {
                    let report = verify(&ast, &registry());
                    if report.ok {
                        event(
                            ProgressKind::VerificationResult,
                            json!({ "iteration": iteration, "ok": true, "diagnostics": [] }),
                        );
                        let mut env = base.fork();
                        let outcome = execute(&ast, &mut env);
                        event(
                            ProgressKind::ExecutionResult,
                            json!({
                                "iteration": iteration,
                                "status": outcome.status,
                                "artifacts": outcome.artifacts_created,
                                "trace": outcome.trace,
                                "error": outcome.error.as_ref().map(|e| e.to_string()),
                            }),
                        );
                        if outcome.is_success() {
                            let script = Script {
                                source: src.clone(),
                                origin: Origin::EngineerGenerated,
                            };
                            state.engineer_history.extend(exchange);
                            state.last_script = Some(script.clone());
                            return Ok(EngineerSuccess {
                                script,
                                outcome,
                                env,
                                iterations: iteration,
                            });
                        }
                        let traceback = outcome.error.as_ref().map(|e| e.to_string()).unwrap_or_default();
                        feedback = format!("The script failed during execution:\n{traceback}");
                        last_outcome = Some(outcome);
                        if iteration < limits.engineer_max_iters {
                            exchange.push(ChatMessage::user(format!("{feedback}\n{}", retry_note())));
                        }
                        continue;
                    }
                    report.diagnostics.iter().map(|d| d.to_string()).collect()
                }
            },
        };
        event(
            ProgressKind::VerificationResult,
            json!({ "iteration": iteration, "ok": false, "diagnostics": diagnostics }),
        );
        feedback = format!("The script was rejected before execution:\n{}", diagnostics.join("\n"));
        if iteration < limits.engineer_max_iters {
            exchange.push(ChatMessage::user(format!("{feedback}\n{}", retry_note())));
        }
    }
    state.engineer_history.extend(exchange);
    Err(EngineerError::ExhaustedIterations {
        iterations: limits.engineer_max_iters,
        feedback,
        last_outcome,
    })
}
