use serde::{Deserialize, Serialize};

use super::value::{infer_type, parse_cell, parse_timestamp};
use super::roles::infer_open_roles;
use super::{Column, ColumnType, EventLog, LogError, Result, RoleMap};

/// Column→role hints. A hinted role overrides inference for that role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleHints {
    #[serde(default)]
    pub case_id: Option<String>,
    #[serde(default)]
    pub activity: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub resource: Option<String>,
}

impl RoleHints {
    pub fn is_empty(&self) -> bool {
        self.case_id.is_none()
            && self.activity.is_none()
            && self.timestamp.is_none()
            && self.resource.is_none()
    }

    fn names(&self) -> impl Iterator<Item = &String> {
        [&self.case_id, &self.activity, &self.timestamp, &self.resource]
            .into_iter()
            .flatten()
    }

    /// Completes hints with inferred roles. Only roles left open are
    /// inferred.
    pub fn resolve(&self, columns: &[Column]) -> Result<RoleMap> {
        for name in self.names() {
            if !columns.iter().any(|c| &c.name == name) {
                return Err(LogError::UnknownColumn(name.clone()));
            }
        }
        infer_open_roles(
            columns,
            [
                self.case_id.clone(),
                self.activity.clone(),
                self.timestamp.clone(),
                self.resource.clone(),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub hints: RoleHints,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            hints: RoleHints::default(),
        }
    }
}

fn csv_error(err: csv::Error) -> LogError {
    let (line, message) = match err.position() {
        Some(p) => (p.line() as usize, err.to_string()),
        None => (0, err.to_string()),
    };
    LogError::MalformedDocument {
        line,
        column: 0,
        message,
    }
}

/// Parses delimited text. Column types are inferred over every cell; a
/// hinted timestamp column is parsed strictly.
pub fn parse_csv(text: &str, options: &CsvOptions) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(csv_error)?);
    }
    let (names, data): (Vec<String>, &[csv::StringRecord]) = if options.has_header {
        match records.split_first() {
            Some((head, rest)) => (head.iter().map(|h| h.trim().to_string()).collect(), rest),
            None => (Vec::new(), &[]),
        }
    } else {
        let width = records.first().map_or(0, |r| r.len());
        ((1..=width).map(|i| format!("column_{i}")).collect(), &records[..])
    };
    for (i, rec) in data.iter().enumerate() {
        if rec.len() != names.len() {
            return Err(LogError::RaggedRow {
                row: i,
                found: rec.len(),
                expected: names.len(),
            });
        }
    }

    let mut columns: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(j, name)| Column::new(name.clone(), infer_type(data.iter().map(move |r| &r[j]))))
        .collect();
    if let Some(ts) = &options.hints.timestamp {
        let j = columns
            .iter()
            .position(|c| &c.name == ts)
            .ok_or_else(|| LogError::UnknownColumn(ts.clone()))?;
        for (row, rec) in data.iter().enumerate() {
            if !rec[j].is_empty() && parse_timestamp(&rec[j]).is_none() {
                return Err(LogError::UnparseableTimestamp {
                    column: ts.clone(),
                    row,
                });
            }
        }
        columns[j].ty = ColumnType::Timestamp;
    }
    let roles = options.hints.resolve(&columns)?;

    let rows = data
        .iter()
        .map(|rec| {
            columns
                .iter()
                .zip(rec.iter())
                .map(|(c, raw)| parse_cell(raw, c.ty).expect("type inferred from these cells"))
                .collect()
        })
        .collect();
    EventLog::new(columns, rows, roles)
}

/// RFC-4180 export with a header row; timestamps in ISO-8601.
pub fn write_csv(log: &EventLog) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(log.columns().iter().map(|c| c.name.as_str()))
        .expect("in-memory write");
    for row in log.rows() {
        writer
            .write_record(row.iter().map(|v| v.render()))
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::Value;

    const THREE: &str = "case,activity,time\n\
        1,register,2024-01-01T09:00:00Z\n\
        1,approve,2024-01-01T10:00:00Z\n\
        2,register,2024-01-02T09:00:00+01:00\n";

    #[test]
    fn roles_bind_by_name() {
        let log = parse_csv(THREE, &CsvOptions::default()).unwrap();
        assert_eq!(log.roles(), &RoleMap::new("case", "activity", "time"));
        assert_eq!(log.event_count(), 3);
        assert_eq!(log.case_count(), 2);
        assert_eq!(log.columns()[0].ty, ColumnType::Integer);
    }

    #[test]
    fn single_row_with_explicit_hints() {
        let opts = CsvOptions {
            hints: RoleHints {
                case_id: Some("x".into()),
                activity: Some("y".into()),
                timestamp: Some("z".into()),
                resource: None,
            },
            ..CsvOptions::default()
        };
        let log = parse_csv("x,y,z\nc1,act,2024-05-01\n", &opts).unwrap();
        assert_eq!(log.event_count(), 1);
        assert_eq!(log.rows()[0][0], Value::from("c1"));
    }

    #[test]
    fn bad_timestamp_under_hint() {
        let opts = CsvOptions {
            hints: RoleHints {
                timestamp: Some("time".into()),
                ..RoleHints::default()
            },
            ..CsvOptions::default()
        };
        let err = parse_csv("case,activity,time\n1,a,not-a-date\n", &opts).unwrap_err();
        assert_eq!(
            err,
            LogError::UnparseableTimestamp {
                column: "time".into(),
                row: 0
            }
        );
    }

    #[test]
    fn ragged_rows_report_their_index() {
        let err = parse_csv("case,activity,time\n1,a,2024-01-01\n2,b\n", &CsvOptions::default())
            .unwrap_err();
        assert!(matches!(err, LogError::RaggedRow { row: 1, found: 2, expected: 3 }));
    }

    #[test]
    fn semicolon_delimiter_without_header() {
        let opts = CsvOptions {
            delimiter: b';',
            has_header: false,
            hints: RoleHints {
                case_id: Some("column_1".into()),
                activity: Some("column_2".into()),
                timestamp: Some("column_3".into()),
                resource: None,
            },
        };
        let log = parse_csv("1;a;2024-01-01\n1;b;2024-01-02\n", &opts).unwrap();
        assert_eq!(log.traces()[0].activities, ["a", "b"]);
    }

    #[test]
    fn export_then_parse_round_trips() {
        let log = parse_csv(THREE, &CsvOptions::default()).unwrap();
        let again = parse_csv(&write_csv(&log), &CsvOptions::default()).unwrap();
        assert_eq!(log, again);
    }

    #[test]
    fn partial_hints_infer_only_open_roles() {
        let text = "order,step,at,resource\no1,a,2024-01-01T09:00:00Z,r\no1,b,2024-01-01T10:00:00Z,r\n";
        assert!(matches!(parse_csv(text, &CsvOptions::default()), Err(LogError::AmbiguousRole { .. })));
        let hints = RoleHints {
            case_id: Some("order".into()),
            activity: Some("step".into()),
            ..RoleHints::default()
        };
        let log = parse_csv(text, &CsvOptions { hints, ..CsvOptions::default() }).unwrap();
        assert_eq!(log.roles(), &RoleMap::new("order", "step", "at").with_resource("resource"));
    }
}
