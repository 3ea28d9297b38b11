//! Prompt construction for both agents.

use std::fmt::Write as _;

use crate::provider::ChatMessage;
use crate::state::SharedState;

pub const SCRIPT_FENCE: &str = "pma";

/// System prompt for the engineer followed by its prior-turn history and
/// the new question.
pub fn build_engineer_prompt(state: &SharedState, question: &str, manifest: &str) -> Vec<ChatMessage> {
    let roles = &state.abstraction.roles;
    let mut sys = String::new();
    sys.push_str(
        "You are a data engineer specialized in process mining. You answer questions about an event log \
         by writing analysis scripts; you never write the final report yourself.\n\n",
    );
    sys.push_str(
        "The event log is already loaded in your execution environment as the current log. You never see \
         its rows: your script runs next to the data and only its saved results are passed on.\n\n",
    );
    sys.push_str("[LOG ABSTRACTION]\n");
    sys.push_str(&state.abstraction.to_prompt_text());
    sys.push_str("\n[COLUMN ROLES]\n");
    let _ = writeln!(sys, "case id: {}", roles.case_id);
    let _ = writeln!(sys, "activity: {}", roles.activity);
    let _ = writeln!(sys, "timestamp: {}", roles.timestamp);
    if let Some(r) = &roles.resource {
        let _ = writeln!(sys, "resource: {r}");
    }
    sys.push_str("\n[API]\n");
    sys.push_str(manifest);
    let _ = write!(
        sys,
        "\nAnswer with exactly one fenced code block (```{SCRIPT_FENCE}) holding the complete script. \
         Text outside the block is ignored."
    );
    let mut out = vec![ChatMessage::system(sys)];
    out.extend(state.engineer_history.iter().cloned());
    out.push(engineer_question(question));
    out
}

pub(crate) fn engineer_question(question: &str) -> ChatMessage {
    ChatMessage::user(format!("[QUESTION FOR THE ENGINEER]\n{}", question.trim()))
}

/// System prompt for the analyst, its prior history, and the question with
/// digests of this turn's artifacts.
pub fn build_analyst_prompt(
    state: &SharedState,
    question: &str,
    digests: &[String],
    catalog: &[String],
) -> Vec<ChatMessage> {
    let mut sys = String::new();
    sys.push_str(
        "You are a process analyst. You turn analysis results into a concise, evidence-based report for a \
         business user. Base every statement on the artifacts you are given.\n\n",
    );
    sys.push_str(
        "[OUTPUT FORMAT]\nReply with a JSON array of blocks and nothing else. Each block is either\n\
         {\"kind\": \"text\", \"content\": \"<markdown>\"} or {\"kind\": \"artifact\", \"artifact_id\": \"<id>\"}.\n\
         Use artifact blocks to place tables, charts and models in the report. At least one block is required.\n\n",
    );
    sys.push_str("[VALID ARTIFACT IDS]\n");
    if catalog.is_empty() {
        sys.push_str("(none)\n");
    } else {
        let _ = writeln!(sys, "{}", catalog.join(", "));
    }
    let mut out = vec![ChatMessage::system(sys)];
    out.extend(state.analyst_history.iter().cloned());
    let mut user = format!("[QUESTION FOR THE ANALYST]\n{}\n\n[NEW ARTIFACTS]\n", question.trim());
    if digests.is_empty() {
        user.push_str("(no artifacts were created for this question)\n");
    }
    for d in digests {
        user.push_str(d);
        user.push('\n');
    }
    out.push(ChatMessage::user(user));
    out
}

/// Body of the first fenced block, ignoring its info string.
pub fn extract_fenced(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim_end().to_string())
}
