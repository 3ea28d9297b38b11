//! Report synthesis with schema validation.

use pmax_core::artifacts::ArtifactStore;
use serde_json::json;

use crate::events::{ProgressEvent, ProgressKind};
use crate::provider::{ChatMessage, Provider, ProviderError};
use crate::report::{Report, ReportBlock, ReportStatus};
use crate::state::{LoopLimits, SharedState};

/// Parses an analyst reply into blocks and checks them against `store`.
/// The error text is what the analyst sees on retry.
pub fn parse_blocks(reply: &str, store: &ArtifactStore) -> Result<Vec<ReportBlock>, String> {
    let body = crate::prompts::extract_fenced(reply).unwrap_or_else(|| reply.to_string());
    let (Some(lo), Some(hi)) = (body.find('['), body.rfind(']')) else {
        return Err("the reply is not a JSON array of blocks".into());
    };
    if hi < lo {
        return Err("the reply is not a JSON array of blocks".into());
    }
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(&body[lo..=hi]).map_err(|e| format!("the reply is not a valid JSON array: {e}"))?;
    if raw.is_empty() {
        return Err("the report must contain at least one block".into());
    }
    let mut blocks = Vec::with_capacity(raw.len());
    let mut problems = Vec::new();
    for (i, v) in raw.into_iter().enumerate() {
        match serde_json::from_value::<ReportBlock>(v) {
            Err(e) => problems.push(format!("block {}: {e}", i + 1)),
            Ok(ReportBlock::Text { content }) if content.trim().is_empty() => {
                problems.push(format!("block {}: text content is empty", i + 1))
            }
            Ok(ReportBlock::Artifact { artifact_id }) if !store.contains(&artifact_id) => problems.push(format!(
                "block {} references artifact id {artifact_id}, which does not exist",
                i + 1
            )),
            Ok(b) => blocks.push(b),
        }
    }
    if problems.is_empty() {
        Ok(blocks)
    } else {
        let valid: Vec<&str> = store.all().map(|a| a.id.as_str()).collect();
        problems.push(format!("valid artifact ids: {}", if valid.is_empty() { "(none)".into() } else { valid.join(", ") }));
        Err(problems.join("\n"))
    }
}

/// The exchange kept in the analyst history for a turn. Digests are
/// replaced by the ids they described so later turns only see new data.
pub(crate) fn history_stub(question: &str, new_ids: &[String]) -> ChatMessage {
    ChatMessage::user(format!(
        "[QUESTION FOR THE ANALYST]\n{}\n\n[ARTIFACTS OF THIS QUESTION]\n{}",
        question.trim(),
        if new_ids.is_empty() { "(none)".into() } else { new_ids.join(", ") }
    ))
}

/// Up to `limits.analyst_max_iters` attempts; afterwards a fallback report
/// listing `new_ids` is returned.
#[allow(clippy::too_many_arguments)]
pub fn analyst_loop(
    state: &mut SharedState,
    mut prompt: Vec<ChatMessage>,
    provider: &dyn Provider,
    store: &ArtifactStore,
    new_ids: &[String],
    limits: &LoopLimits,
    question: &str,
    emit: &mut dyn FnMut(ProgressEvent),
) -> Result<Report, ProviderError> {
    let turn = state.turn + 1;
    let first = prompt.pop().expect("prompt ends with the question");
    let mut exchange = vec![first];
    let mut kept = vec![history_stub(question, new_ids)];
    let mut last_error = String::new();
    for iteration in 1..=limits.analyst_max_iters {
        emit(ProgressEvent {
            kind: ProgressKind::AnalystIterationStarted,
            turn,
            payload: json!({ "iteration": iteration }),
        });
        let mut messages = prompt.clone();
        messages.extend(exchange.iter().cloned());
        let reply = match provider.complete(&messages) {
            Ok(r) => r,
            Err(e) => {
                state.analyst_history.extend(kept);
                return Err(e);
            }
        };
        exchange.push(ChatMessage::assistant(reply.clone()));
        kept.push(ChatMessage::assistant(reply.clone()));
        match parse_blocks(&reply, store) {
            Ok(blocks) => {
                state.analyst_history.extend(kept);
                return Ok(Report {
                    turn,
                    question: question.to_string(),
                    status: ReportStatus::Complete,
                    blocks,
                });
            }
            Err(e) => {
                last_error = e;
                if iteration < limits.analyst_max_iters {
                    let msg = ChatMessage::user(format!(
                        "The report was rejected:\n{last_error}\nReply with the corrected JSON array only."
                    ));
                    exchange.push(msg.clone());
                    kept.push(msg);
                }
            }
        }
    }
    state.analyst_history.extend(kept);
    let mut blocks = vec![ReportBlock::Text {
        content: format!(
            "The analyst did not produce a valid report after {} attempts (last problem: {}). \
             The artifacts created for this question are listed below.",
            limits.analyst_max_iters,
            last_error.lines().next().unwrap_or("unknown")
        ),
    }];
    blocks.extend(new_ids.iter().map(|id| ReportBlock::Artifact { artifact_id: id.clone() }));
    Ok(Report {
        turn,
        question: question.to_string(),
        status: ReportStatus::Degraded,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pmax_core::artifacts::Payload;
    use pmax_core::event_log::ColumnType;
    use pmax_core::table::Table;

    fn store() -> ArtifactStore {
        let mut s = ArtifactStore::new();
        s.save(Payload::Table(Table::with_columns(&[("a", ColumnType::String)])), "t", 1)
            .unwrap();
        s
    }

    #[test]
    fn block_validation() {
        let s = store();
        let ok = parse_blocks(
            "```json\n[{\"kind\":\"text\",\"content\":\"x\"},{\"kind\":\"artifact\",\"artifact_id\":\"art-1\"}]\n```",
            &s,
        )
        .unwrap();
        assert_eq!(ok.len(), 2);
        let e = parse_blocks(r#"[{"kind":"artifact","artifact_id":"art-99"}]"#, &s).unwrap_err();
        assert!(e.contains("art-99") && e.contains("valid artifact ids: art-1"));
        assert!(parse_blocks("just prose", &s).is_err());
        assert!(parse_blocks("[]", &s).unwrap_err().contains("at least one"));
        assert!(parse_blocks(r#"[{"kind":"text","content":"  "}]"#, &s).is_err());
        assert!(parse_blocks(r#"[{"kind":"chart","id":"x"}]"#, &s).unwrap_err().starts_with("block 1"));
    }
}
