//! Analyst reports.

use std::fmt::Write as _;

use pmax_core::artifacts::ArtifactStore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReportBlock {
    Text { content: String },
    Artifact { artifact_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Complete,
    /// Produced by a fallback path rather than a validated analyst answer.
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub turn: u32,
    pub question: String,
    pub status: ReportStatus,
    pub blocks: Vec<ReportBlock>,
}

impl Report {
    pub fn artifact_ids(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().filter_map(|b| match b {
            ReportBlock::Artifact { artifact_id } => Some(artifact_id.as_str()),
            ReportBlock::Text { .. } => None,
        })
    }

    /// Every artifact block names an artifact in `store`.
    pub fn is_grounded(&self, store: &ArtifactStore) -> bool {
        self.artifact_ids().all(|id| store.contains(id))
    }

    /// Wire form: a JSON array of blocks.
    pub fn blocks_json(&self) -> String {
        serde_json::to_string_pretty(&self.blocks).expect("blocks serialize")
    }

    /// Markdown rendering. `link` maps an artifact id to a link target.
    pub fn to_markdown(&self, store: &ArtifactStore, link: impl Fn(&str) -> Option<String>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}\n", self.question.trim());
        for b in &self.blocks {
            match b {
                ReportBlock::Text { content } => {
                    let _ = writeln!(out, "{}\n", content.trim_end());
                }
                ReportBlock::Artifact { artifact_id } => {
                    let desc = store
                        .get(artifact_id)
                        .map(|a| format!("{} ({})", a.description, a.kind().as_str()))
                        .unwrap_or_else(|| "missing artifact".into());
                    match link(artifact_id) {
                        Some(target) => {
                            let _ = writeln!(out, "**{artifact_id}**: [{desc}]({target})\n");
                        }
                        None => {
                            let _ = writeln!(out, "**{artifact_id}**: {desc}\n");
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_wire_format() {
        let r = Report {
            turn: 1,
            question: "q".into(),
            status: ReportStatus::Complete,
            blocks: vec![
                ReportBlock::Text { content: "hi".into() },
                ReportBlock::Artifact { artifact_id: "art-1".into() },
            ],
        };
        let v: serde_json::Value = serde_json::from_str(&r.blocks_json()).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"kind": "text", "content": "hi"}, {"kind": "artifact", "artifact_id": "art-1"}])
        );
        assert!(!r.is_grounded(&ArtifactStore::new()));
    }

    #[test]
    fn unknown_block_kinds_are_rejected() {
        assert!(serde_json::from_str::<ReportBlock>(r#"{"kind":"image","url":"x"}"#).is_err());
        assert!(serde_json::from_str::<ReportBlock>(r#"{"kind":"text","content":"a","extra":1}"#).is_err());
    }
}
