use std::collections::HashSet;

use super::predicate::{bind, Predicate};
use super::value::render_timestamp;
use super::{EventLog, LogError, Result, Timestamp};

/// Keeps events with `start <= t <= end`. Cases without surviving events
/// disappear with them.
pub fn filter_time_range(log: &EventLog, start: Timestamp, end: Timestamp) -> Result<EventLog> {
    if start > end {
        return Err(LogError::InvalidRange {
            start: render_timestamp(&start),
            end: render_timestamp(&end),
        });
    }
    Ok(log.with_rows(|r| {
        let t = log.timestamp(r);
        start <= t && t <= end
    }))
}

/// Case-level: keeps every case having at least one event whose cell in
/// `column` renders to `value`.
pub fn filter_attribute(log: &EventLog, column: &str, value: &str) -> Result<EventLog> {
    let j = log
        .column_index(column)
        .ok_or_else(|| LogError::UnknownColumn(column.to_string()))?;
    let matching: HashSet<String> = (0..log.event_count())
        .filter(|&r| !log.rows()[r][j].is_null() && log.rows()[r][j].render() == value)
        .map(|r| log.case_id(r))
        .collect();
    Ok(log.with_rows(|r| matching.contains(&log.case_id(r))))
}

/// Event-level: keeps events satisfying the predicate.
pub fn filter_query(log: &EventLog, predicate: &Predicate) -> Result<EventLog> {
    let test = bind(predicate, log)?;
    Ok(log.with_rows(|r| test(&log.rows()[r])))
}
