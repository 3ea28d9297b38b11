//! Row predicates for `filter_pandas_query`.
//!
//! ```text
//! expr    := or
//! or      := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | "(" expr ")" | "true" | "false" | compare
//! compare := operand op operand        op ∈ == != < <= > >=
//! operand := column | number | "string" | true | false
//! column  := [A-Za-z_][A-Za-z0-9_:.]* | `any text`
//! ```
//!
//! Comparisons involving a null cell are false. Quoted strings compared
//! against a timestamp column are read as ISO-8601 timestamps.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::parse_timestamp;
use super::{ColumnType, EventLog, LogError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Column(String),
    Number(f64),
    Text(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Const(bool),
    Compare {
        left: Operand,
        op: CompareOp,
        right: Operand,
    },
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicate syntax error at offset {position}: {message}")]
pub struct PredicateSyntax {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Text(String),
    Op(CompareOp),
    LParen,
    RParen,
    And,
    Or,
    Not,
    True,
    False,
}

fn syntax(position: usize, message: impl Into<String>) -> PredicateSyntax {
    PredicateSyntax {
        position,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, PredicateSyntax> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((pos, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Token::RParen));
                i += 1;
            }
            '=' | '!' | '<' | '>' => {
                let next = chars.get(i + 1).map(|&(_, c)| c);
                let (op, len) = match (c, next) {
                    ('=', Some('=')) => (CompareOp::Eq, 2),
                    ('!', Some('=')) => (CompareOp::Ne, 2),
                    ('<', Some('=')) => (CompareOp::Le, 2),
                    ('>', Some('=')) => (CompareOp::Ge, 2),
                    ('<', _) => (CompareOp::Lt, 1),
                    ('>', _) => (CompareOp::Gt, 1),
                    _ => return Err(syntax(pos, format!("unexpected `{c}`"))),
                };
                out.push((pos, Token::Op(op)));
                i += len;
            }
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(pos, "unterminated string literal")),
                        Some(&(_, '\\')) => {
                            match chars.get(i + 1) {
                                Some(&(_, 'n')) => s.push('\n'),
                                Some(&(_, 't')) => s.push('\t'),
                                Some(&(_, e)) => s.push(e),
                                None => return Err(syntax(pos, "unterminated string literal")),
                            }
                            i += 2;
                        }
                        Some(&(_, ch)) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(&(_, ch)) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((pos, Token::Text(s)));
            }
            '`' => {
                let start = i + 1;
                let end = (start..chars.len())
                    .find(|&j| chars[j].1 == '`')
                    .ok_or_else(|| syntax(pos, "unterminated quoted column"))?;
                let name: String = chars[start..end].iter().map(|&(_, c)| c).collect();
                if name.is_empty() {
                    return Err(syntax(pos, "empty column name"));
                }
                out.push((pos, Token::Ident(name)));
                i = end + 1;
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                i += 1;
                while let Some(&(_, ch)) = chars.get(i) {
                    let prev = chars[i - 1].1;
                    if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E'
                        || ((ch == '-' || ch == '+') && (prev == 'e' || prev == 'E'))
                    {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lit: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let n: f64 = lit
                    .parse()
                    .map_err(|_| syntax(pos, format!("invalid number `{lit}`")))?;
                out.push((pos, Token::Number(n)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while let Some(&(_, ch)) = chars.get(i) {
                    if ch.is_alphanumeric() || ch == '_' || ch == ':' || ch == '.' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let tok = match word.as_str() {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    "true" | "True" => Token::True,
                    "false" | "False" => Token::False,
                    _ => Token::Ident(word),
                };
                out.push((pos, tok));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct PredicateParser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    end: usize,
}

impl PredicateParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn or(&mut self) -> Result<Predicate, PredicateSyntax> {
        let mut left = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.bump();
            left = Predicate::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Predicate, PredicateSyntax> {
        let mut left = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.bump();
            left = Predicate::And(Box::new(left), Box::new(self.unary()?));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Predicate, PredicateSyntax> {
        match self.peek() {
            Some(Token::Not) => {
                self.bump();
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            Some(Token::LParen) => {
                self.bump();
                let inner = self.or()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(syntax(self.pos(), "expected `)`")),
                }
            }
            Some(Token::True | Token::False)
                if !matches!(self.tokens.get(self.at + 1), Some((_, Token::Op(_)))) =>
            {
                Ok(Predicate::Const(self.bump() == Some(Token::True)))
            }
            _ => self.compare(),
        }
    }

    fn operand(&mut self) -> Result<Operand, PredicateSyntax> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Ident(n)) => Ok(Operand::Column(n)),
            Some(Token::Number(n)) => Ok(Operand::Number(n)),
            Some(Token::Text(s)) => Ok(Operand::Text(s)),
            Some(Token::True) => Ok(Operand::Bool(true)),
            Some(Token::False) => Ok(Operand::Bool(false)),
            Some(_) => Err(syntax(pos, "expected a column or literal")),
            None => Err(syntax(pos, "unexpected end of predicate, expected a column or literal")),
        }
    }

    fn compare(&mut self) -> Result<Predicate, PredicateSyntax> {
        let left = self.operand()?;
        let pos = self.pos();
        let op = match self.bump() {
            Some(Token::Op(op)) => op,
            _ => return Err(syntax(pos, "expected a comparison operator")),
        };
        let right = self.operand()?;
        Ok(Predicate::Compare { left, op, right })
    }
}

/// Parses predicate text such as `amount > 500 and activity == "pay"`.
pub fn parse_predicate(text: &str) -> Result<Predicate, PredicateSyntax> {
    let tokens = tokenize(text)?;
    let mut p = PredicateParser {
        tokens,
        at: 0,
        end: text.len(),
    };
    if p.peek().is_none() {
        return Err(syntax(0, "empty predicate"));
    }
    let pred = p.or()?;
    if p.peek().is_some() {
        return Err(syntax(p.pos(), "unexpected trailing input"));
    }
    Ok(pred)
}

impl Predicate {
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Const(_) => {}
            Predicate::Compare { left, right, .. } => {
                for o in [left, right] {
                    if let Operand::Column(c) = o {
                        out.push(c);
                    }
                }
            }
            Predicate::Not(p) => p.collect_columns(out),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Numeric,
    Text,
    Time,
    Bool,
}

fn kind_of(ty: ColumnType) -> Kind {
    match ty {
        ColumnType::Integer | ColumnType::Real => Kind::Numeric,
        ColumnType::String => Kind::Text,
        ColumnType::Timestamp => Kind::Time,
        ColumnType::Boolean => Kind::Bool,
    }
}

/// Operand resolved against a schema.
#[derive(Debug, Clone)]
enum Bound {
    Column(usize),
    Literal(Value),
}

#[derive(Debug, Clone)]
enum Compiled {
    Const(bool),
    Compare(Bound, CompareOp, Bound),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
}

fn compile(pred: &Predicate, log: &EventLog) -> Result<Compiled, LogError> {
    Ok(match pred {
        Predicate::Const(b) => Compiled::Const(*b),
        Predicate::Not(p) => Compiled::Not(Box::new(compile(p, log)?)),
        Predicate::And(a, b) => Compiled::And(Box::new(compile(a, log)?), Box::new(compile(b, log)?)),
        Predicate::Or(a, b) => Compiled::Or(Box::new(compile(a, log)?), Box::new(compile(b, log)?)),
        Predicate::Compare { left, op, right } => {
            let column_kind = |o: &Operand| -> Result<Option<(usize, Kind)>, LogError> {
                match o {
                    Operand::Column(name) => {
                        let idx = log
                            .column_index(name)
                            .ok_or_else(|| LogError::UnknownColumn(name.clone()))?;
                        Ok(Some((idx, kind_of(log.columns()[idx].ty))))
                    }
                    _ => Ok(None),
                }
            };
            let lk = column_kind(left)?;
            let rk = column_kind(right)?;
            // A literal takes its meaning from the column on the other side.
            let bind = |o: &Operand, other: Option<(usize, Kind)>| -> Result<(Bound, Kind), LogError> {
                Ok(match o {
                    Operand::Column(_) => unreachable!("columns bound separately"),
                    Operand::Number(n) => (Bound::Literal(Value::Real(*n)), Kind::Numeric),
                    Operand::Bool(b) => (Bound::Literal(Value::Bool(*b)), Kind::Bool),
                    Operand::Text(s) => match other {
                        Some((_, Kind::Time)) => {
                            let t = parse_timestamp(s).ok_or_else(|| {
                                LogError::TypeMismatch(format!(
                                    "`{s}` is not an ISO-8601 timestamp"
                                ))
                            })?;
                            (Bound::Literal(Value::Time(t)), Kind::Time)
                        }
                        _ => (Bound::Literal(Value::Str(s.clone())), Kind::Text),
                    },
                })
            };
            let (lb, lkind) = match lk {
                Some((i, k)) => (Bound::Column(i), k),
                None => bind(left, rk)?,
            };
            let (rb, rkind) = match rk {
                Some((i, k)) => (Bound::Column(i), k),
                None => bind(right, lk)?,
            };
            if lkind != rkind {
                return Err(LogError::TypeMismatch(format!(
                    "`{}` cannot compare {:?} with {:?}",
                    op.symbol(),
                    lkind,
                    rkind
                )
                .to_lowercase()));
            }
            Compiled::Compare(lb, *op, rb)
        }
    })
}

fn eval(c: &Compiled, row: &[Value]) -> bool {
    match c {
        Compiled::Const(b) => *b,
        Compiled::Not(p) => !eval(p, row),
        Compiled::And(a, b) => eval(a, row) && eval(b, row),
        Compiled::Or(a, b) => eval(a, row) || eval(b, row),
        Compiled::Compare(l, op, r) => {
            let get = |b: &'_ Bound| -> Value {
                match b {
                    Bound::Column(i) => row[*i].clone(),
                    Bound::Literal(v) => v.clone(),
                }
            };
            let (a, b) = (get(l), get(r));
            if a.is_null() || b.is_null() {
                return false;
            }
            a.compare(&b).is_some_and(|o| op.holds(o))
        }
    }
}

/// Checks columns and operand types against the log, returning a row test.
pub fn bind(pred: &Predicate, log: &EventLog) -> Result<impl Fn(&[Value]) -> bool, LogError> {
    let compiled = compile(pred, log)?;
    Ok(move |row: &[Value]| eval(&compiled, row))
}

fn write_operand(o: &Operand, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match o {
        Operand::Column(c) => {
            let plain = c.chars().next().is_some_and(|ch| ch.is_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_alphanumeric() || "_:.".contains(ch))
                && !["and", "or", "not", "true", "false", "True", "False"].contains(&c.as_str());
            if plain {
                f.write_str(c)
            } else {
                write!(f, "`{c}`")
            }
        }
        Operand::Number(n) => write!(f, "{n}"),
        Operand::Text(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        Operand::Bool(b) => write!(f, "{b}"),
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Const(b) => write!(f, "{b}"),
            Predicate::Compare { left, op, right } => {
                write_operand(left, f)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(right, f)
            }
            Predicate::Not(p) => write!(f, "not ({p})"),
            Predicate::And(a, b) => write!(f, "({a}) and ({b})"),
            Predicate::Or(a, b) => write!(f, "({a}) or ({b})"),
        }
    }
}
