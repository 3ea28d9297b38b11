//! Reading event logs from bytes or files.

use std::path::Path;

use pmax_core::event_log::{parse_csv, parse_xes, CsvOptions, EventLog, LogError, RoleHints};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Xes,
}

impl LogFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(LogFormat::Csv),
            "xes" | "xml" => Some(LogFormat::Xes),
            _ => None,
        }
    }

    /// From a file name; anything not ending in `.xes` is read as CSV.
    pub fn from_name(name: &str) -> Self {
        if name.to_ascii_lowercase().ends_with(".xes") {
            LogFormat::Xes
        } else {
            LogFormat::Csv
        }
    }
}

/// Role hints only apply to CSV; XES names its roles itself.
pub fn parse_log(text: &str, format: LogFormat, hints: &RoleHints) -> Result<EventLog, LogError> {
    match format {
        LogFormat::Csv => parse_csv(
            text,
            &CsvOptions {
                hints: hints.clone(),
                ..CsvOptions::default()
            },
        ),
        LogFormat::Xes => parse_xes(text),
    }
}

pub fn read_log(path: &Path) -> Result<EventLog, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_log(&text, LogFormat::from_name(&path.to_string_lossy()), &RoleHints::default())
        .map_err(|e| format!("{}: {e}", path.display()))
}
