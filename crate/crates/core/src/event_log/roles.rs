use serde::{Deserialize, Serialize};

use super::{Column, ColumnType, LogError, Result};

pub const XES_CASE_ID: &str = "case:concept:name";
pub const XES_ACTIVITY: &str = "concept:name";
pub const XES_TIMESTAMP: &str = "time:timestamp";
pub const XES_RESOURCE: &str = "org:resource";

/// Which columns carry the process roles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleMap {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
}

impl RoleMap {
    pub fn new(case_id: &str, activity: &str, timestamp: &str) -> Self {
        RoleMap {
            case_id: case_id.to_string(),
            activity: activity.to_string(),
            timestamp: timestamp.to_string(),
            resource: None,
        }
    }

    pub fn xes() -> Self {
        RoleMap::new(XES_CASE_ID, XES_ACTIVITY, XES_TIMESTAMP)
    }

    pub fn with_resource(mut self, resource: &str) -> Self {
        self.resource = Some(resource.to_string());
        self
    }
}

/// Candidate tiers per role; the first non-empty tier wins and ties inside a
/// tier go to the earliest column.
type Tier = fn(&str, ColumnType) -> bool;

const CASE_TIERS: &[Tier] = &[
    |n, _| n == XES_CASE_ID,
    |n, _| matches!(lower(n).as_str(), "case" | "case_id" | "caseid" | "case id" | "case-id"),
    |n, _| lower(n).starts_with("case"),
    |n, _| lower(n).ends_with("id"),
];

const ACTIVITY_TIERS: &[Tier] = &[
    |n, ty| n == XES_ACTIVITY && ty == ColumnType::String,
    |n, _| matches!(lower(n).as_str(), "activity" | "event" | "action"),
    |n, _| {
        let l = lower(n);
        l.contains("activity") || l.starts_with("event") || l.starts_with("action")
    },
];

const RESOURCE_TIERS: &[Tier] = &[
    |n, _| n == XES_RESOURCE,
    |n, _| matches!(lower(n).as_str(), "resource" | "user" | "performer"),
];

fn lower(n: &str) -> String {
    n.to_ascii_lowercase()
}

fn pick(columns: &[Column], tiers: &[Tier], taken: &[&str]) -> Option<String> {
    tiers.iter().find_map(|tier| {
        columns
            .iter()
            .find(|c| !taken.contains(&c.name.as_str()) && tier(&c.name, c.ty))
            .map(|c| c.name.clone())
    })
}

fn pick_timestamp(columns: &[Column]) -> Result<String> {
    let typed: Vec<&Column> = columns.iter().filter(|c| c.ty == ColumnType::Timestamp).collect();
    if let Some(c) = typed.iter().find(|c| c.name == XES_TIMESTAMP) {
        return Ok(c.name.clone());
    }
    if let [only] = typed.as_slice() {
        return Ok(only.name.clone());
    }
    let named: Vec<&&Column> = typed
        .iter()
        .filter(|c| matches!(lower(&c.name).as_str(), "timestamp" | "time" | "ts"))
        .collect();
    if let Some(c) = named.first() {
        return Ok(c.name.clone());
    }
    Err(LogError::AmbiguousRole {
        role: "timestamp",
        candidates: typed.iter().map(|c| c.name.clone()).collect(),
    })
}

/// Binds roles from column names and types alone.
pub fn infer_roles(columns: &[Column]) -> Result<RoleMap> {
    infer_open_roles(columns, [None, None, None, None])
}

/// Inference for the roles left `None` in `fixed`, ordered case id,
/// activity, timestamp, resource. Fixed columns are never picked for
/// another role.
pub(crate) fn infer_open_roles(columns: &[Column], fixed: [Option<String>; 4]) -> Result<RoleMap> {
    let [case_hint, activity_hint, timestamp_hint, resource_hint] = fixed;
    let hinted: Vec<String> = [&case_hint, &activity_hint, &resource_hint]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    let timestamp = match timestamp_hint {
        Some(t) => t,
        None => {
            let free: Vec<Column> = columns.iter().filter(|c| !hinted.contains(&c.name)).cloned().collect();
            pick_timestamp(&free)?
        }
    };
    let mut taken: Vec<&str> = hinted.iter().map(String::as_str).collect();
    taken.push(&timestamp);
    let case_id = match case_hint.clone() {
        Some(c) => c,
        None => pick(columns, CASE_TIERS, &taken).ok_or_else(|| LogError::AmbiguousRole {
            role: "case id",
            candidates: columns.iter().map(|c| c.name.clone()).collect(),
        })?,
    };
    taken.push(&case_id);
    let activity = match activity_hint.clone() {
        Some(a) => a,
        None => pick(columns, ACTIVITY_TIERS, &taken).ok_or_else(|| LogError::AmbiguousRole {
            role: "activity",
            candidates: columns.iter().map(|c| c.name.clone()).collect(),
        })?,
    };
    taken.push(&activity);
    let resource = resource_hint.or_else(|| pick(columns, RESOURCE_TIERS, &taken));
    Ok(RoleMap {
        case_id,
        activity,
        timestamp,
        resource,
    })
}
