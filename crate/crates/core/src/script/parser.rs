//! Line-oriented parser.
//!
//! ```text
//! statement := "let" IDENT "=" (call | literal) | call
//! call      := IDENT "." IDENT "(" [arg ("," arg)*] ")"
//! arg       := [IDENT "="] (STRING | NUMBER | IDENT)
//! ```
//!
//! Strings are double-quoted with backslash escapes, `#` starts a comment,
//! and every statement sits on its own line.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Arg, ArgValue, Ast, Call, Expr, Literal, Statement};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at line {}, column {}: expected {}, found {}",
            self.line,
            self.column,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Dot,
    LParen,
    RParen,
    Comma,
    Eq,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Num(_) => "number".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::End => "end of line".into(),
        }
    }
}

struct Lexer<'a> {
    line: usize,
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, col_byte: usize, expected: &[&str], found: &str) -> ParseError {
        ParseError {
            line: self.line,
            column: self.src[..col_byte].chars().count() + 1,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.to_string(),
        }
    }

    fn tokens(&mut self) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut out = Vec::new();
        let bytes = self.src.as_bytes();
        loop {
            while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            if self.pos >= bytes.len() || bytes[self.pos] == b'#' {
                out.push((start, Tok::End));
                return Ok(out);
            }
            let c = self.src[self.pos..].chars().next().unwrap();
            let tok = match c {
                '.' => {
                    self.pos += 1;
                    Tok::Dot
                }
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                ',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                '=' => {
                    self.pos += 1;
                    Tok::Eq
                }
                '"' => self.string(start)?,
                c if c.is_ascii_digit() || c == '-' => self.number(start)?,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                        self.pos += 1;
                    }
                    Tok::Ident(self.src[start..self.pos].to_string())
                }
                c => return Err(self.err(start, &["statement"], &format!("`{c}`"))),
            };
            out.push((start, tok));
        }
    }

    fn string(&mut self, start: usize) -> Result<Tok, ParseError> {
        let mut out = String::new();
        let mut chars = self.src[start + 1..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos = start + 1 + i + 1;
                    return Ok(Tok::Str(out));
                }
                '\\' => match chars.next() {
                    Some((_, '"')) => out.push('"'),
                    Some((_, '\\')) => out.push('\\'),
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, 'r')) => out.push('\r'),
                    Some((j, other)) => {
                        return Err(self.err(start + 1 + j, &["escape sequence"], &format!("`\\{other}`")));
                    }
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err(self.err(self.src.len(), &["closing `\"`"], "end of line"))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let mut end = start;
        if bytes[end] == b'-' {
            end += 1;
        }
        let digits = |mut i: usize| {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let int_end = digits(end);
        if int_end == end {
            return Err(self.err(end, &["digit"], "`-`"));
        }
        end = int_end;
        if end < bytes.len() && bytes[end] == b'.' && end + 1 < bytes.len() && bytes[end + 1].is_ascii_digit() {
            end = digits(end + 1);
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut e = end + 1;
            if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                e += 1;
            }
            let e_end = digits(e);
            if e_end > e {
                end = e_end;
            }
        }
        self.pos = end;
        let n: f64 = self.src[start..end].parse().map_err(|_| self.err(start, &["number"], &self.src[start..end]))?;
        if !n.is_finite() {
            return Err(self.err(start, &["finite number"], &self.src[start..end]));
        }
        Ok(Tok::Num(n))
    }
}

struct LineParser<'a> {
    lexer: Lexer<'a>,
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl LineParser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn fail(&self, expected: &[&str]) -> ParseError {
        let (pos, tok) = &self.toks[self.at];
        self.lexer.err(*pos, expected, &tok.describe())
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, label: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.fail(&[label]))
        }
    }

    fn ident(&mut self, label: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s != "let" => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.fail(&[label])),
        }
    }

    fn statement(&mut self, line: usize) -> Result<Statement, ParseError> {
        if *self.peek() == Tok::Ident("let".into()) {
            self.bump();
            let binding = self.ident("identifier")?;
            self.expect(Tok::Eq, "`=`")?;
            let expr = match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    Expr::Literal { value: Literal::Str(s) }
                }
                Tok::Num(n) => {
                    self.bump();
                    Expr::Literal { value: Literal::Number(n) }
                }
                Tok::Ident(_) => Expr::Call(self.call()?),
                _ => return Err(self.fail(&["call", "string", "number"])),
            };
            self.expect(Tok::End, "end of line")?;
            return Ok(Statement {
                line,
                binding: Some(binding),
                expr,
            });
        }
        let call = self.call()?;
        self.expect(Tok::End, "end of line")?;
        Ok(Statement {
            line,
            binding: None,
            expr: Expr::Call(call),
        })
    }

    fn call(&mut self) -> Result<Call, ParseError> {
        let namespace = self.ident("namespace such as `api`")?;
        self.expect(Tok::Dot, "`.`")?;
        let name = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        let mut named_seen = false;
        if *self.peek() != Tok::RParen {
            loop {
                let arg = self.arg()?;
                if arg.name.is_some() {
                    named_seen = true;
                } else if named_seen {
                    return Err(self.fail(&["named argument"]));
                }
                args.push(arg);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.fail(&["`,`", "`)`"])),
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Call { namespace, name, args })
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let mut name = None;
        if let (Tok::Ident(id), Some((_, Tok::Eq))) = (self.peek().clone(), self.toks.get(self.at + 1)) {
            self.bump();
            self.bump();
            name = Some(id);
        }
        let value = match self.peek().clone() {
            Tok::Str(s) => ArgValue::Literal(Literal::Str(s)),
            Tok::Num(n) => ArgValue::Literal(Literal::Number(n)),
            Tok::Ident(i) if i != "let" => ArgValue::Ident(i),
            _ => return Err(self.fail(&["string", "number", "identifier"])),
        };
        self.bump();
        Ok(Arg { name, value })
    }
}

pub fn parse_script(source: &str) -> Result<Ast, ParseError> {
    let mut statements = Vec::new();
    for (i, text) in source.lines().enumerate() {
        let mut lexer = Lexer {
            line: i + 1,
            src: text,
            pos: 0,
        };
        let toks = lexer.tokens()?;
        if toks.len() == 1 {
            continue;
        }
        let mut p = LineParser { lexer, toks, at: 0 };
        statements.push(p.statement(i + 1)?);
    }
    Ok(Ast { statements })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_call() {
        let ast = parse_script("api.discover_process_model()").unwrap();
        assert_eq!(ast.statements.len(), 1);
        let Expr::Call(c) = &ast.statements[0].expr else { panic!() };
        assert_eq!((c.qualified().as_str(), c.args.len()), ("api.discover_process_model", 0));
    }

    #[test]
    fn empty_and_comment_only_sources() {
        assert!(parse_script("").unwrap().statements.is_empty());
        assert!(parse_script("# nothing\n\n   # here\n").unwrap().statements.is_empty());
    }

    #[test]
    fn binding_then_reference() {
        let ast = parse_script("let x = api.get_variant_summary()\napi.save_dataframe(x, \"variants\")").unwrap();
        assert_eq!(ast.statements.len(), 2);
        assert_eq!(ast.statements[0].binding.as_deref(), Some("x"));
        let Expr::Call(c) = &ast.statements[1].expr else { panic!() };
        assert_eq!(c.args[0].value, ArgValue::Ident("x".into()));
        assert_eq!(ast.statements[1].line, 2);
    }

    #[test]
    fn named_arguments_escapes_and_comments() {
        let ast = parse_script(
            "let c = chart.bar(t, x=\"activity\", y=\"count\", title=\"say \\\"hi\\\"\") # chart\nlet n = -2.5e1",
        )
        .unwrap();
        let Expr::Call(c) = &ast.statements[0].expr else { panic!() };
        assert_eq!(c.args[1].name.as_deref(), Some("x"));
        assert_eq!(c.args[3].value, ArgValue::Literal(Literal::Str("say \"hi\"".into())));
        assert_eq!(ast.statements[1].expr, Expr::Literal { value: Literal::Number(-25.0) });
    }

    #[test]
    fn errors_carry_position_and_expectation() {
        let e = parse_script("api.get_dfg_summary()\napi.filter_attribute(\"a\" \"b\")").unwrap_err();
        assert_eq!((e.line, e.column), (2, 26));
        assert!(e.expected.contains(&"`,`".to_string()));
        let e = parse_script("for x in y:").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_script("api.f(\"open").unwrap_err();
        assert_eq!(e.expected, ["closing `\"`"]);
        assert!(parse_script("\"bare literal\"").is_err());
        assert!(parse_script("api.f(x=1, 2)").is_err());
        assert!(parse_script("import os").is_err());
    }
}
