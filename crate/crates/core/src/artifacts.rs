//! Session-scoped, append-only artifact storage.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::{petri_to_dot, petri_to_pnml, PetriNet};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArtifactError {
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("unknown artifact {0}")]
    UnknownArtifact(String),
    #[error("format {format} is not available for {kind} artifacts")]
    UnsupportedFormat { kind: ArtifactKind, format: ExportFormat },
    #[error("artifact directory: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Table,
    Chart,
    PetriNet,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Table => "table",
            ArtifactKind::Chart => "chart",
            ArtifactKind::PetriNet => "petri-net",
        }
    }
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Bar,
    Line,
    Scatter,
    Histogram,
    Box,
}

impl Mark {
    pub const ALL: [Mark; 5] = [Mark::Bar, Mark::Line, Mark::Scatter, Mark::Histogram, Mark::Box];

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Scatter => "scatter",
            Mark::Histogram => "histogram",
            Mark::Box => "box",
        }
    }
}

/// Declarative chart over an embedded table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub mark: Mark,
    pub data: Table,
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl ChartSpec {
    pub fn validate(&self) -> Result<(), ArtifactError> {
        for col in std::iter::once(&self.x).chain(&self.y) {
            if self.data.column_index(col).is_none() {
                return Err(ArtifactError::InvalidPayload(format!("chart column `{col}` is not in its table")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Table(Table),
    Chart(ChartSpec),
    PetriNet(PetriNet),
}

impl Payload {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Payload::Table(_) => ArtifactKind::Table,
            Payload::Chart(_) => ArtifactKind::Chart,
            Payload::PetriNet(_) => ArtifactKind::PetriNet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub id: String,
    pub description: String,
    pub turn: u32,
    pub payload: Payload,
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        self.payload.kind()
    }

    pub fn meta(&self) -> ArtifactMeta {
        ArtifactMeta {
            id: self.id.clone(),
            kind: self.kind(),
            description: self.description.clone(),
            turn: self.turn,
        }
    }
}

/// Listing entry without the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub id: String,
    pub kind: ArtifactKind,
    pub description: String,
    pub turn: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
    Dot,
    Pnml,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "json" => Some(ExportFormat::Json),
            "dot" => Some(ExportFormat::Dot),
            "pnml" | "xml" => Some(ExportFormat::Pnml),
            _ => None,
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv; charset=utf-8",
            ExportFormat::Json => "application/json",
            ExportFormat::Dot => "text/vnd.graphviz; charset=utf-8",
            ExportFormat::Pnml => "application/xml",
        }
    }

    /// Default format for each kind.
    pub fn native(kind: ArtifactKind) -> Self {
        match kind {
            ArtifactKind::Table => ExportFormat::Csv,
            ArtifactKind::Chart => ExportFormat::Json,
            ArtifactKind::PetriNet => ExportFormat::Dot,
        }
    }
}

impl std::fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
            ExportFormat::Dot => "dot",
            ExportFormat::Pnml => "pnml",
        })
    }
}

pub fn export_artifact(artifact: &Artifact, format: ExportFormat) -> Result<Vec<u8>, ArtifactError> {
    let text = match (&artifact.payload, format) {
        (Payload::Table(t), ExportFormat::Csv) => t.to_csv(),
        (Payload::Chart(c), ExportFormat::Json) => serde_json::to_string_pretty(c).expect("chart serializes"),
        (Payload::PetriNet(n), ExportFormat::Dot) => petri_to_dot(n),
        (Payload::PetriNet(n), ExportFormat::Pnml) => petri_to_pnml(n),
        (p, format) => {
            return Err(ArtifactError::UnsupportedFormat {
                kind: p.kind(),
                format,
            })
        }
    };
    Ok(text.into_bytes())
}

#[derive(Serialize, Deserialize)]
struct Envelope<'a> {
    id: &'a str,
    kind: ArtifactKind,
    description: &'a str,
    turn: u32,
    payload_file: String,
}

/// Name of the payload file next to an artifact's envelope.
pub fn payload_file(a: &Artifact) -> String {
    match a.kind() {
        ArtifactKind::Table => format!("{}.csv", a.id),
        ArtifactKind::Chart => format!("{}.chart.json", a.id),
        ArtifactKind::PetriNet => format!("{}.dot", a.id),
    }
}

fn write_mirror(dir: &Path, a: &Artifact) -> Result<(), ArtifactError> {
    let io = |e: std::io::Error| ArtifactError::Io(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    let file = payload_file(a);
    let bytes = export_artifact(a, ExportFormat::native(a.kind()))?;
    fs::write(dir.join(&file), bytes).map_err(io)?;
    let env = Envelope {
        id: &a.id,
        kind: a.kind(),
        description: &a.description,
        turn: a.turn,
        payload_file: file,
    };
    let json = serde_json::to_string_pretty(&env).expect("envelope serializes");
    fs::write(dir.join(format!("{}.json", a.id)), json).map_err(io)
}

/// Append-only store. Ids are `art-<n>` with `n` increasing for the whole
/// session, across forks.
#[derive(Debug)]
pub struct ArtifactStore {
    artifacts: Vec<Arc<Artifact>>,
    counter: Arc<AtomicU64>,
    mirror: Option<PathBuf>,
}

impl Default for ArtifactStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ArtifactStore {
    pub fn new() -> Self {
        ArtifactStore {
            artifacts: Vec::new(),
            counter: Arc::new(AtomicU64::new(0)),
            mirror: None,
        }
    }

    /// Store that also writes every artifact under `dir`.
    pub fn with_mirror(dir: impl Into<PathBuf>) -> Self {
        ArtifactStore {
            mirror: Some(dir.into()),
            ..Self::new()
        }
    }

    pub fn save(&mut self, payload: Payload, description: &str, turn: u32) -> Result<String, ArtifactError> {
        if description.trim().is_empty() {
            return Err(ArtifactError::InvalidPayload("description must not be empty".into()));
        }
        if let Payload::Chart(c) = &payload {
            c.validate()?;
        }
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let artifact = Artifact {
            id: format!("art-{n}"),
            description: description.to_string(),
            turn,
            payload,
        };
        if let Some(dir) = &self.mirror {
            write_mirror(dir, &artifact)?;
        }
        let id = artifact.id.clone();
        self.artifacts.push(Arc::new(artifact));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.id == id).map(|a| a.as_ref())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.artifacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }

    pub fn all(&self) -> impl Iterator<Item = &Artifact> {
        self.artifacts.iter().map(|a| a.as_ref())
    }

    /// Artifacts created after `turn`, in id order.
    pub fn list_since(&self, turn: u32) -> Vec<&Artifact> {
        self.all().filter(|a| a.turn > turn).collect()
    }

    pub fn export(&self, id: &str, format: ExportFormat) -> Result<Vec<u8>, ArtifactError> {
        let a = self.get(id).ok_or_else(|| ArtifactError::UnknownArtifact(id.to_string()))?;
        export_artifact(a, format)
    }

    /// Scratch copy sharing the id counter and no mirror. Saves into a fork
    /// only become part of this store through [`ArtifactStore::adopt`].
    pub fn fork(&self) -> ArtifactStore {
        ArtifactStore {
            artifacts: self.artifacts.clone(),
            counter: Arc::clone(&self.counter),
            mirror: None,
        }
    }

    /// Take over everything a fork of this store added.
    pub fn adopt(&mut self, fork: ArtifactStore) -> Result<(), ArtifactError> {
        if !Arc::ptr_eq(&self.counter, &fork.counter) || fork.artifacts.len() < self.artifacts.len() {
            return Err(ArtifactError::InvalidPayload("not a fork of this store".into()));
        }
        let added = fork.artifacts[self.artifacts.len()..].to_vec();
        for a in &added {
            if let Some(dir) = &self.mirror {
                write_mirror(dir, a)?;
            }
        }
        self.artifacts.extend(added);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{ColumnType, Value};
    use crate::mining::{tree_to_petri, ProcessTree};

    fn table() -> Table {
        let mut t = Table::with_columns(&[("activity", ColumnType::String), ("count", ColumnType::Integer)]);
        t.push(vec![Value::from("a"), Value::Int(3)]);
        t.push(vec![Value::from("b, c"), Value::Int(1)]);
        t
    }

    fn chart(y: &str) -> ChartSpec {
        ChartSpec {
            mark: Mark::Bar,
            data: table(),
            x: "activity".into(),
            y: Some(y.into()),
            title: None,
        }
    }

    #[test]
    fn ids_count_up_from_one() {
        let mut s = ArtifactStore::new();
        assert_eq!(s.save(Payload::Table(table()), "t", 1).unwrap(), "art-1");
        assert_eq!(s.save(Payload::Table(table()), "t", 1).unwrap(), "art-2");
    }

    #[test]
    fn invalid_payloads_are_rejected() {
        let mut s = ArtifactStore::new();
        assert!(matches!(s.save(Payload::Chart(chart("missing")), "c", 1), Err(ArtifactError::InvalidPayload(_))));
        assert!(matches!(s.save(Payload::Table(table()), "  ", 1), Err(ArtifactError::InvalidPayload(_))));
        assert!(s.is_empty());
        // Rejections do not consume ids.
        assert_eq!(s.save(Payload::Table(table()), "t", 1).unwrap(), "art-1");
    }

    #[test]
    fn list_since_partitions_by_turn() {
        let mut s = ArtifactStore::new();
        s.save(Payload::Table(table()), "a", 1).unwrap();
        s.save(Payload::Table(table()), "b", 2).unwrap();
        s.save(Payload::Table(table()), "c", 1).unwrap();
        s.save(Payload::Table(table()), "d", 2).unwrap();
        let ids = |v: Vec<&Artifact>| v.into_iter().map(|a| a.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(s.list_since(0)).len(), 4);
        assert_eq!(ids(s.list_since(1)), ["art-2", "art-4"]);
        assert!(s.list_since(2).is_empty());
        for turn in 0..3 {
            let after = s.list_since(turn).len();
            let before = s.all().filter(|a| a.turn <= turn).count();
            assert_eq!(after + before, s.len());
        }
    }

    #[test]
    fn exports_match_their_sources() {
        let mut s = ArtifactStore::new();
        let net = tree_to_petri(&ProcessTree::seq(vec![ProcessTree::activity("a"), ProcessTree::activity("b")]));
        let t = s.save(Payload::Table(table()), "t", 1).unwrap();
        let c = s.save(Payload::Chart(chart("count")), "c", 1).unwrap();
        let n = s.save(Payload::PetriNet(net.clone()), "n", 1).unwrap();
        let csv = String::from_utf8(s.export(&t, ExportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv, "activity,count\na,3\n\"b, c\",1\n");
        assert_eq!(s.export(&n, ExportFormat::Dot).unwrap(), petri_to_dot(&net).into_bytes());
        let back: ChartSpec = serde_json::from_slice(&s.export(&c, ExportFormat::Json).unwrap()).unwrap();
        assert_eq!(back, chart("count"));
        assert_eq!(s.export(&c, ExportFormat::Json).unwrap(), s.export(&c, ExportFormat::Json).unwrap());
        assert!(matches!(s.export(&t, ExportFormat::Dot), Err(ArtifactError::UnsupportedFormat { .. })));
        assert!(matches!(s.export("art-9", ExportFormat::Csv), Err(ArtifactError::UnknownArtifact(_))));
    }

    #[test]
    fn forks_share_the_counter() {
        let mut s = ArtifactStore::new();
        s.save(Payload::Table(table()), "a", 1).unwrap();
        let mut failed = s.fork();
        failed.save(Payload::Table(table()), "discarded", 1).unwrap();
        let mut ok = s.fork();
        let id = ok.save(Payload::Table(table()), "kept", 1).unwrap();
        assert_eq!(id, "art-3");
        s.adopt(ok).unwrap();
        assert_eq!(s.all().map(|a| a.id.as_str()).collect::<Vec<_>>(), ["art-1", "art-3"]);
        assert!(s.adopt(ArtifactStore::new()).is_err());
    }

    #[test]
    fn mirror_writes_envelope_and_payload() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ArtifactStore::with_mirror(dir.path().join("artifacts"));
        s.save(Payload::Table(table()), "t", 1).unwrap();
        let mut f = s.fork();
        f.save(Payload::Chart(chart("count")), "c", 1).unwrap();
        assert!(!dir.path().join("artifacts/art-2.json").exists());
        s.adopt(f).unwrap();
        let env: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("artifacts/art-2.json")).unwrap()).unwrap();
        assert_eq!(env["payload_file"], "art-2.chart.json");
        assert_eq!(env["kind"], "chart");
        assert!(dir.path().join("artifacts/art-1.csv").exists());
    }
}
