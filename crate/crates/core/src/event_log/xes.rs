use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::roles::{XES_ACTIVITY, XES_CASE_ID, XES_TIMESTAMP};
use super::value::{parse_boolean, parse_integer, parse_real, parse_timestamp};
use super::{Column, ColumnType, EventLog, LogError, Result, RoleMap, Value};

const TRACE_PREFIX: &str = "case:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Log,
    GlobalTrace,
    GlobalEvent,
    Trace,
    Event,
    Other,
}

/// Columns in first-declaration order with unified types.
#[derive(Default)]
struct Schema {
    columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl Schema {
    fn declare(&mut self, name: &str, ty: ColumnType) {
        match self.index.get(name) {
            Some(&i) => {
                let cur = self.columns[i].ty;
                self.columns[i].ty = unify(cur, ty);
            }
            None => {
                self.index.insert(name.to_string(), self.columns.len());
                self.columns.push(Column::new(name, ty));
            }
        }
    }
}

fn unify(a: ColumnType, b: ColumnType) -> ColumnType {
    use ColumnType::*;
    match (a, b) {
        _ if a == b => a,
        (Integer, Real) | (Real, Integer) => Real,
        _ => String,
    }
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

struct Parser<'a> {
    text: &'a str,
    reader: Reader<&'a [u8]>,
}

impl<'a> Parser<'a> {
    fn malformed(&self, message: impl Into<String>) -> LogError {
        let (line, column) = position(self.text, self.reader.buffer_position() as usize);
        LogError::MalformedDocument {
            line,
            column,
            message: message.into(),
        }
    }

    fn attr(&self, e: &BytesStart, name: &[u8]) -> Result<Option<String>> {
        for a in e.attributes() {
            let a = a.map_err(|err| self.malformed(err.to_string()))?;
            if a.key.as_ref() == name {
                let v = a
                    .decode_and_unescape_value(self.reader.decoder())
                    .map_err(|err| self.malformed(err.to_string()))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    }

    /// Typed XES attribute element → (key, value). `None` for containers.
    fn typed_attribute(&self, e: &BytesStart) -> Result<Option<(String, Value)>> {
        let tag = e.name();
        let ty = match tag.as_ref() {
            b"string" | b"id" => ColumnType::String,
            b"date" => ColumnType::Timestamp,
            b"int" => ColumnType::Integer,
            b"float" => ColumnType::Real,
            b"boolean" => ColumnType::Boolean,
            _ => return Ok(None),
        };
        let key = self
            .attr(e, b"key")?
            .ok_or_else(|| self.malformed("attribute element without `key`"))?;
        let raw = self.attr(e, b"value")?.unwrap_or_default();
        let value = match ty {
            ColumnType::String => Some(Value::Str(raw.clone())),
            ColumnType::Timestamp => parse_timestamp(&raw).map(Value::Time),
            ColumnType::Integer => parse_integer(&raw).map(Value::Int),
            ColumnType::Real => parse_real(&raw).or_else(|| raw.parse().ok()).map(Value::Real),
            ColumnType::Boolean => parse_boolean(&raw).map(Value::Bool),
        }
        .ok_or_else(|| self.malformed(format!("invalid {ty} value `{raw}` for key `{key}`")))?;
        Ok(Some((key, value)))
    }
}

fn is_attribute_tag(tag: &[u8]) -> bool {
    matches!(
        tag,
        b"string" | b"id" | b"date" | b"int" | b"float" | b"boolean" | b"list" | b"container"
    )
}

/// Parses an XES document into one row per event. Trace attributes are
/// copied onto each event row under a `case:` prefix.
pub fn parse_xes(text: &str) -> Result<EventLog> {
    let mut p = Parser {
        text,
        reader: Reader::from_str(text),
    };
    p.reader.config_mut().trim_text(true);

    let mut schema = Schema::default();
    let mut stack: Vec<Scope> = Vec::new();
    let mut saw_log = false;
    let mut trace_attrs: Vec<(String, Value)> = Vec::new();
    let mut event_attrs: Vec<(String, Value)> = Vec::new();
    let mut traces_seen = 0usize;
    let mut events_in_trace = 0usize;
    let mut rows: Vec<HashMap<String, Value>> = Vec::new();

    loop {
        let event = p.reader.read_event().map_err(|e| p.malformed(e.to_string()))?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(_) => {
                match stack.pop() {
                    Some(Scope::Event) => {
                        let mut row: HashMap<String, Value> = trace_attrs
                            .iter()
                            .map(|(k, v)| (format!("{TRACE_PREFIX}{k}"), v.clone()))
                            .collect();
                        row.extend(event_attrs.drain(..));
                        for key in [XES_ACTIVITY, XES_TIMESTAMP] {
                            if !row.contains_key(key) {
                                return Err(LogError::MissingMandatoryAttribute {
                                    key: key.to_string(),
                                    context: format!(
                                        "event {} of trace {}",
                                        events_in_trace, traces_seen
                                    ),
                                });
                            }
                        }
                        if !row.contains_key(XES_CASE_ID) {
                            return Err(LogError::MissingMandatoryAttribute {
                                key: "concept:name".to_string(),
                                context: format!("trace {traces_seen}"),
                            });
                        }
                        events_in_trace += 1;
                        rows.push(row);
                    }
                    Some(Scope::Trace) => {
                        trace_attrs.clear();
                        traces_seen += 1;
                    }
                    Some(_) => {}
                    None => return Err(p.malformed("unbalanced closing tag")),
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let e = start.expect("start or empty");
        let parent = stack.last().copied();
        let tag = e.name().as_ref().to_vec();
        let scope = match (parent, tag.as_slice()) {
            (None, b"log") => {
                saw_log = true;
                Scope::Log
            }
            (None, _) => return Err(p.malformed("root element must be <log>")),
            (Some(Scope::Log), b"trace") => {
                events_in_trace = 0;
                Scope::Trace
            }
            (Some(Scope::Trace), b"event") => Scope::Event,
            (Some(Scope::Log), b"global") => match p.attr(&e, b"scope")?.as_deref() {
                Some("trace") => Scope::GlobalTrace,
                None | Some("event") => Scope::GlobalEvent,
                Some(other) => return Err(p.malformed(format!("unknown global scope `{other}`"))),
            },
            (Some(ctx), t) if is_attribute_tag(t) => {
                if let Some((key, value)) = p.typed_attribute(&e)? {
                    let ty = value.column_type().expect("typed attribute values are non-null");
                    match ctx {
                        Scope::GlobalTrace => schema.declare(&format!("{TRACE_PREFIX}{key}"), ty),
                        Scope::GlobalEvent => schema.declare(&key, ty),
                        Scope::Trace => {
                            schema.declare(&format!("{TRACE_PREFIX}{key}"), ty);
                            trace_attrs.push((key, value));
                        }
                        Scope::Event => {
                            schema.declare(&key, ty);
                            event_attrs.push((key, value));
                        }
                        Scope::Log | Scope::Other => {}
                    }
                }
                Scope::Other
            }
            (Some(Scope::Event | Scope::Trace), _) => {
                return Err(p.malformed(format!(
                    "unexpected element <{}>",
                    String::from_utf8_lossy(&tag)
                )))
            }
            _ => Scope::Other,
        };
        if empty {
            // Self-closing: run the same bookkeeping as an immediate close.
            match scope {
                Scope::Event => {
                    return Err(LogError::MissingMandatoryAttribute {
                        key: XES_ACTIVITY.to_string(),
                        context: format!("event {events_in_trace} of trace {traces_seen}"),
                    })
                }
                Scope::Trace => traces_seen += 1,
                _ => {}
            }
        } else {
            stack.push(scope);
        }
    }
    if !saw_log {
        return Err(p.malformed("document has no <log> element"));
    }
    if !stack.is_empty() {
        return Err(p.malformed("unexpected end of document"));
    }

    schema.declare(XES_CASE_ID, ColumnType::String);
    schema.declare(XES_ACTIVITY, ColumnType::String);
    schema.declare(XES_TIMESTAMP, ColumnType::Timestamp);
    let columns = schema.columns;
    let rows = rows
        .into_iter()
        .map(|mut row| {
            columns
                .iter()
                .map(|c| match row.remove(&c.name) {
                    None => Value::Null,
                    Some(v) if v.column_type() == Some(c.ty) => v,
                    Some(v) if c.ty == ColumnType::Real => Value::Real(v.as_f64().unwrap_or(f64::NAN)),
                    Some(v) => Value::Str(v.render()),
                })
                .collect()
        })
        .collect();
    EventLog::new(columns, rows, RoleMap::xes())
}
