//! The closed set of callable functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::event_log::{ColumnType, Value};
use crate::table::Table;

/// Static types of script values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemType {
    /// Any string.
    Str,
    /// String holding an ISO-8601 timestamp.
    TimestampStr,
    /// String holding a filter predicate.
    Predicate,
    /// Whole number of at least 1.
    Count,
    Number,
    Table,
    Chart,
    ArtifactRef,
    Unit,
}

impl SemType {
    pub fn as_str(self) -> &'static str {
        match self {
            SemType::Str => "str",
            SemType::TimestampStr => "timestamp",
            SemType::Predicate => "predicate",
            SemType::Count => "int",
            SemType::Number => "number",
            SemType::Table => "table",
            SemType::Chart => "chart",
            SemType::ArtifactRef => "artifact",
            SemType::Unit => "none",
        }
    }

    /// Name in function signatures; refined strings show as `str`.
    pub fn surface(self) -> &'static str {
        match self {
            SemType::TimestampStr | SemType::Predicate => "str",
            other => other.as_str(),
        }
    }

    /// Whether a value of type `self` may be passed where `want` is expected.
    /// Refined string and number types are checked on the literal itself.
    pub fn fits(self, want: SemType) -> bool {
        self == want
            || matches!(
                (self, want),
                (SemType::Str, SemType::TimestampStr | SemType::Predicate) | (SemType::Number, SemType::Count)
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Effect {
    FilterMutatesCurrentLog,
    ComputesTable,
    UpdatesModelState,
    PersistsArtifact,
    BuildsChart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    Filtering,
    AbstractionAndSummarization,
    MiningAndConformance,
    VisualizationAndPersistence,
    Charts,
}

impl Category {
    fn heading(self) -> &'static str {
        match self {
            Category::Filtering => "FILTERING",
            Category::AbstractionAndSummarization => "ABSTRACTION & SUMMARIZATION",
            Category::MiningAndConformance => "MINING & CONFORMANCE",
            Category::VisualizationAndPersistence => "VISUALIZATION & PERSISTENCE",
            Category::Charts => "CHART BUILDERS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: &'static str,
    pub ty: SemType,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegistryFunction {
    pub namespace: &'static str,
    pub name: &'static str,
    pub params: Vec<Param>,
    pub returns: SemType,
    pub effect: Effect,
    pub category: Category,
    pub doc: &'static str,
}

impl RegistryFunction {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.namespace, self.name)
    }

    pub fn required(&self) -> usize {
        self.params.iter().filter(|p| !p.optional).count()
    }

    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| format!("{}{}: {}", p.name, if p.optional { "?" } else { "" }, p.ty.surface()))
            .collect();
        format!("{}({}) -> {}", self.qualified(), params.join(", "), self.returns.surface())
    }
}

const fn req(name: &'static str, ty: SemType) -> Param {
    Param { name, ty, optional: false }
}

const fn opt(name: &'static str, ty: SemType) -> Param {
    Param { name, ty, optional: true }
}

fn f(
    namespace: &'static str,
    name: &'static str,
    params: &[Param],
    returns: SemType,
    effect: Effect,
    category: Category,
    doc: &'static str,
) -> RegistryFunction {
    RegistryFunction {
        namespace,
        name,
        params: params.to_vec(),
        returns,
        effect,
        category,
        doc,
    }
}

pub fn registry() -> Vec<RegistryFunction> {
    use Category::*;
    use Effect::*;
    use SemType::*;
    let chart_params = [req("table", Table), req("x", Str), opt("y", Str), opt("title", Str)];
    let mut out = vec![
        f("api", "filter_time_range", &[req("start", TimestampStr), req("end", TimestampStr)], Unit, FilterMutatesCurrentLog, Filtering,
          "Temporal subsetting: keep events with start <= timestamp <= end"),
        f("api", "filter_attribute", &[req("column", Str), req("value", Str)], Unit, FilterMutatesCurrentLog, Filtering,
          "Attribute-based filtering: keep cases with an event whose column equals value"),
        f("api", "filter_pandas_query", &[req("query", Predicate)], Unit, FilterMutatesCurrentLog, Filtering,
          "Complex logic, e.g. \"amount > 500\": keep events matching the predicate"),
        f("api", "get_dfg_summary", &[], Table, ComputesTable, AbstractionAndSummarization,
          "Markovian/DFG abstraction: directly-follows edges with counts plus start and end activities"),
        f("api", "get_model_summary", &[], Table, ComputesTable, AbstractionAndSummarization,
          "Petri net abstraction: places, transitions, arcs and labels of the current model"),
        f("api", "get_variant_summary", &[opt("top_n", Count)], Table, ComputesTable, AbstractionAndSummarization,
          "Unique sequence analysis: most frequent variants with durations (top_n defaults to 20)"),
        f("api", "get_case_summary", &[], Table, ComputesTable, AbstractionAndSummarization,
          "Pattern and outlier detection: one row per case with size, times, duration and variant"),
        f("api", "discover_process_model", &[], Unit, UpdatesModelState, MiningAndConformance,
          "Updates state with a Petri net discovered from the current log"),
        f("api", "cc_alignments", &[], Table, ComputesTable, MiningAndConformance,
          "Alignment conformance of the current log against the model; returns (fitness, precision, f1)"),
        f("api", "cc_token_based_replay", &[], Table, ComputesTable, MiningAndConformance,
          "Token-replay conformance of the current log against the model; returns (fitness, precision, f1)"),
        f("api", "save_pnet", &[opt("desc", Str)], ArtifactRef, PersistsArtifact, VisualizationAndPersistence,
          "Exports the current Petri net as an artifact"),
        f("api", "save_visualization", &[req("chart", Chart), req("desc", Str)], ArtifactRef, PersistsArtifact, VisualizationAndPersistence,
          "Persists a chart built with chart.*; the chart carries its data"),
        f("api", "save_dataframe", &[req("df", Table), req("desc", Str)], ArtifactRef, PersistsArtifact, VisualizationAndPersistence,
          "Persists a result or intermediate table"),
    ];
    for (name, doc) in [
        ("bar", "Bar chart of y per x"),
        ("line", "Line chart of y over x"),
        ("scatter", "Scatter plot of y against x"),
        ("histogram", "Histogram of x"),
        ("box", "Box plot of y grouped by x, or of x alone"),
    ] {
        out.push(f("chart", name, &chart_params, Chart, BuildsChart, Charts, doc));
    }
    out
}

pub fn lookup(namespace: &str, name: &str) -> Option<RegistryFunction> {
    registry().into_iter().find(|f| f.namespace == namespace && f.name == name)
}

pub const OPERATIONAL_RULES: [&str; 4] = [
    "ONLY THE REGISTRY: call nothing but the functions listed above; there are no imports, loops or branches.",
    "PERSISTENCE: results reach the user only through api.save_dataframe, api.save_visualization and api.save_pnet; no file or network access exists.",
    "SPARSE CHARTS: build a chart only where it answers the question.",
    "SELF-CONTAINED: one statement per line, each value bound with `let` before it is used.",
];

/// Text embedded in the engineer prompt.
pub fn registry_manifest() -> String {
    let reg = registry();
    let mut out = String::new();
    let mut current = None;
    for func in &reg {
        if current != Some(func.category) {
            if current.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "[CATEGORY: {}]", func.category.heading());
            current = Some(func.category);
        }
        let _ = writeln!(out, "- {}  # {}", func.signature(), func.doc);
    }
    out.push_str("\n[OPERATIONAL RULES]\n");
    for (i, r) in OPERATIONAL_RULES.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, r);
    }
    out
}

/// Machine-readable listing: one row per function.
pub fn registry_table() -> Table {
    let mut t = Table::with_columns(&[
        ("function", ColumnType::String),
        ("signature", ColumnType::String),
        ("effect", ColumnType::String),
        ("doc", ColumnType::String),
    ]);
    for func in registry() {
        let effect = serde_json::to_value(func.effect).expect("effect serializes");
        t.push(vec![
            Value::Str(func.qualified()),
            Value::Str(func.signature()),
            Value::Str(effect.as_str().unwrap_or_default().to_string()),
            Value::from(func.doc),
        ]);
    }
    t
}
