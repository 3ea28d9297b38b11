use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Arg, ArgValue, Ast, Call, Expr, Literal};
use super::registry::{RegistryFunction, SemType};
use crate::event_log::predicate::parse_predicate;
use crate::event_log::parse_timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    UnknownFunction,
    ArityMismatch,
    TypeMismatch,
    UnboundIdentifier,
    PredicateSyntax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 0-based statement index.
    pub statement: usize,
    /// 1-based source line.
    pub line: usize,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} (statement {}): {:?}: {}", self.line, self.statement, self.code, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl VerifierReport {
    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("diagnostic serializes") + "\n")
            .collect()
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

#[derive(Clone, Copy)]
struct Binding<'a> {
    /// `None` after a call that failed to check.
    ty: Option<SemType>,
    literal: Option<&'a Literal>,
}

struct Checker<'a> {
    registry: &'a [RegistryFunction],
    scope: HashMap<&'a str, Binding<'a>>,
    out: Vec<Diagnostic>,
    statement: usize,
    line: usize,
}

impl<'a> Checker<'a> {
    fn report(&mut self, code: DiagnosticCode, message: String) {
        self.out.push(Diagnostic {
            statement: self.statement,
            line: self.line,
            code,
            message,
        });
    }

    fn check_literal(&mut self, func: &str, param: &str, lit: &Literal, want: SemType) -> bool {
        use DiagnosticCode::*;
        let ok = match (lit, want) {
            (Literal::Str(_), SemType::Str) | (Literal::Number(_), SemType::Number) => true,
            (Literal::Str(s), SemType::TimestampStr) => {
                let ok = parse_timestamp(s).is_some();
                if !ok {
                    self.report(TypeMismatch, format!("{func}: `{param}` must be an ISO-8601 timestamp, got {s:?}"));
                }
                return ok;
            }
            (Literal::Str(s), SemType::Predicate) => {
                return match parse_predicate(s) {
                    Ok(_) => true,
                    Err(e) => {
                        self.report(PredicateSyntax, format!("{func}: `{param}`: {e}"));
                        false
                    }
                };
            }
            (Literal::Number(n), SemType::Count) => {
                let ok = n.fract() == 0.0 && *n >= 1.0 && *n <= u32::MAX as f64;
                if !ok {
                    self.report(TypeMismatch, format!("{func}: `{param}` must be a whole number >= 1, got {n}"));
                }
                return ok;
            }
            _ => false,
        };
        if !ok {
            let got = match lit {
                Literal::Str(_) => "str",
                Literal::Number(_) => "number",
            };
            self.report(TypeMismatch, format!("{func}: `{param}` expects {}, got {got}", want.as_str()));
        }
        ok
    }

    fn check_arg(&mut self, func: &str, param: &str, value: &'a ArgValue, want: SemType) {
        match value {
            ArgValue::Literal(l) => {
                self.check_literal(func, param, l, want);
            }
            ArgValue::Ident(name) => match self.scope.get(name.as_str()).copied() {
                None => self.report(DiagnosticCode::UnboundIdentifier, format!("`{name}` is not bound by an earlier statement")),
                Some(Binding { ty: None, .. }) => {}
                Some(Binding { ty: Some(ty), literal }) => {
                    if !ty.fits(want) {
                        self.report(
                            DiagnosticCode::TypeMismatch,
                            format!("{func}: `{param}` expects {}, but `{name}` is {}", want.as_str(), ty.as_str()),
                        );
                    } else if let Some(l) = literal {
                        self.check_literal(func, param, l, want);
                    }
                }
            },
        }
    }

    /// Returns the result type when the call checks cleanly.
    fn check_call(&mut self, call: &'a Call) -> Option<SemType> {
        let before = self.out.len();
        let Some(func) = self.registry.iter().find(|f| f.namespace == call.namespace && f.name == call.name) else {
            self.report(DiagnosticCode::UnknownFunction, format!("`{}` is not a registry function", call.qualified()));
            // Identifiers are still checked so that every problem is listed.
            for a in &call.args {
                if let ArgValue::Ident(n) = &a.value {
                    if !self.scope.contains_key(n.as_str()) {
                        self.report(DiagnosticCode::UnboundIdentifier, format!("`{n}` is not bound by an earlier statement"));
                    }
                }
            }
            return None;
        };
        let qualified = func.qualified();
        let sig = func.signature();
        let mut filled: Vec<Option<&'a Arg>> = vec![None; func.params.len()];
        for (i, arg) in call.args.iter().enumerate() {
            let slot = match &arg.name {
                None if i < func.params.len() => Some(i),
                None => None,
                Some(n) => func.params.iter().position(|p| p.name == n),
            };
            match slot {
                None if arg.name.is_none() => {
                    self.report(
                        DiagnosticCode::ArityMismatch,
                        format!("{qualified} takes at most {} arguments, got {}; expected {sig}", func.params.len(), call.args.len()),
                    );
                    break;
                }
                None => self.report(
                    DiagnosticCode::ArityMismatch,
                    format!("{qualified} has no parameter named `{}`; expected {sig}", arg.name.as_deref().unwrap_or_default()),
                ),
                Some(s) if filled[s].is_some() => self.report(
                    DiagnosticCode::ArityMismatch,
                    format!("{qualified}: parameter `{}` given twice; expected {sig}", func.params[s].name),
                ),
                Some(s) => filled[s] = Some(arg),
            }
        }
        let missing: Vec<&str> = func
            .params
            .iter()
            .zip(&filled)
            .filter(|(p, a)| !p.optional && a.is_none())
            .map(|(p, _)| p.name)
            .collect();
        if !missing.is_empty() {
            let names: Vec<&str> = func.params.iter().filter(|p| !p.optional).map(|p| p.name).collect();
            self.report(
                DiagnosticCode::ArityMismatch,
                format!(
                    "{qualified} expects {} argument{} ({}), missing {}; expected {sig}",
                    func.required(),
                    if func.required() == 1 { "" } else { "s" },
                    names.join(", "),
                    missing.join(", ")
                ),
            );
        }
        for (p, a) in func.params.iter().zip(&filled) {
            if let Some(a) = a {
                self.check_arg(&qualified, p.name, &a.value, p.ty);
            }
        }
        // Unplaced positional extras still need their identifiers bound.
        for a in call.args.iter().skip(func.params.len()).filter(|a| a.name.is_none()) {
            if let ArgValue::Ident(n) = &a.value {
                if !self.scope.contains_key(n.as_str()) {
                    self.report(DiagnosticCode::UnboundIdentifier, format!("`{n}` is not bound by an earlier statement"));
                }
            }
        }
        (self.out.len() == before).then_some(func.returns)
    }
}

pub fn verify(ast: &Ast, registry: &[RegistryFunction]) -> VerifierReport {
    let mut c = Checker {
        registry,
        scope: HashMap::new(),
        out: Vec::new(),
        statement: 0,
        line: 0,
    };
    for (i, st) in ast.statements.iter().enumerate() {
        c.statement = i;
        c.line = st.line;
        let binding = match &st.expr {
            Expr::Call(call) => Binding {
                ty: c.check_call(call),
                literal: None,
            },
            Expr::Literal { value } => Binding {
                ty: Some(match value {
                    Literal::Str(_) => SemType::Str,
                    Literal::Number(_) => SemType::Number,
                }),
                literal: Some(value),
            },
        };
        if let Some(name) = &st.binding {
            c.scope.insert(name, binding);
        }
    }
    VerifierReport {
        ok: c.out.is_empty(),
        diagnostics: c.out,
    }
}
