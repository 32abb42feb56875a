//! Lexer and recursive-descent parser for the circuit text format.

use super::{CircuitAst, RouteSpec, Statement};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(usize),
    Path(String),
    Colon,
    Semi,
    Comma,
    Star,
    Arrow,
    LBracket,
    RBracket,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Path(p) => format!("path `@{p}`"),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Star => "`*`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: [&str; 8] = ["wire", "gate", "slot", "apply", "output", "route", "kraus", "id"];

fn err_at(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, col, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match ch {
            '\n' | ' ' | '\t' | '\r' => {
                chars.next();
                bump(ch, &mut line, &mut col);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
            }
            ':' | ';' | ',' | '*' | '[' | ']' | '(' | ')' => {
                chars.next();
                bump(ch, &mut line, &mut col);
                let tok = match ch {
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '*' => Tok::Star,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                toks.push(Spanned { tok, line: tline, col: tcol });
            }
            '-' => {
                chars.next();
                bump('-', &mut line, &mut col);
                match chars.peek() {
                    Some('>') => {
                        chars.next();
                        bump('>', &mut line, &mut col);
                        toks.push(Spanned { tok: Tok::Arrow, line: tline, col: tcol });
                    }
                    _ => return Err(err_at(tline, tcol, "expected `->`")),
                }
            }
            '@' => {
                chars.next();
                bump('@', &mut line, &mut col);
                let mut path = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == ';' || c == '#' {
                        break;
                    }
                    path.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
                if path.is_empty() {
                    return Err(err_at(tline, tcol, "expected a file path after `@`"));
                }
                toks.push(Spanned { tok: Tok::Path(path), line: tline, col: tcol });
            }
            c if c.is_ascii_digit() => {
                let mut n = 0usize;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n
                            .checked_mul(10)
                            .and_then(|n| n.checked_add(v as usize))
                            .ok_or_else(|| err_at(tline, tcol, "integer literal overflows"))?;
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                toks.push(Spanned { tok: Tok::Int(n), line: tline, col: tcol });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                toks.push(Spanned { tok: Tok::Ident(name), line: tline, col: tcol });
            }
            c => return Err(err_at(tline, tcol, format!("unexpected character `{c}`"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or((self.end_line, self.end_col), |s| (s.line, s.col))
    }

    fn next(&mut self, expected: &str) -> Result<&Spanned> {
        let (line, col) = (self.end_line, self.end_col);
        match self.toks.get(self.pos) {
            Some(s) => {
                self.pos += 1;
                Ok(s)
            }
            None => Err(err_at(line, col, format!("expected {expected}, found end of input"))),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<()> {
        let s = self.next(expected)?;
        if s.tok != tok {
            return Err(err_at(
                s.line,
                s.col,
                format!("expected {expected}, found {}", s.tok.describe()),
            ));
        }
        Ok(())
    }

    fn ident(&mut self, expected: &str) -> Result<String> {
        let s = self.next(expected)?;
        match &s.tok {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => Ok(name.clone()),
            Tok::Ident(name) => Err(err_at(
                s.line,
                s.col,
                format!("keyword `{name}` cannot be used as a name"),
            )),
            other => {
                Err(err_at(s.line, s.col, format!("expected {expected}, found {}", other.describe())))
            }
        }
    }

    fn int(&mut self, expected: &str) -> Result<usize> {
        let s = self.next(expected)?;
        match s.tok {
            Tok::Int(n) => Ok(n),
            ref other => {
                Err(err_at(s.line, s.col, format!("expected {expected}, found {}", other.describe())))
            }
        }
    }

    /// Comma-separated list of items, at least one.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let mut items = vec![item(self)?];
        while matches!(self.peek(), Some(s) if s.tok == Tok::Comma) {
            self.pos += 1;
            items.push(item(self)?);
        }
        Ok(items)
    }

    /// Wire names joined by `*`.
    fn type_expr(&mut self) -> Result<Vec<String>> {
        let mut names = vec![self.ident("a wire name")?];
        while matches!(self.peek(), Some(s) if s.tok == Tok::Star) {
            self.pos += 1;
            names.push(self.ident("a wire name")?);
        }
        Ok(names)
    }

    fn route_spec(&mut self) -> Result<RouteSpec> {
        if matches!(self.peek(), Some(s) if s.tok == Tok::Ident("id".into())) {
            self.pos += 1;
            return Ok(RouteSpec::Id);
        }
        self.expect(Tok::LBracket, "`id` or a route matrix")?;
        let rows = self.list(|p| {
            p.expect(Tok::LBracket, "`[` opening a route row")?;
            let row = p.list(|p| {
                let (line, col) = p.here();
                match p.int("a route entry")? {
                    0 => Ok(false),
                    1 => Ok(true),
                    n => Err(err_at(line, col, format!("route entries must be 0 or 1, found {n}"))),
                }
            })?;
            p.expect(Tok::RBracket, "`]` closing the route row")?;
            Ok(row)
        })?;
        self.expect(Tok::RBracket, "`]` closing the route matrix")?;
        Ok(RouteSpec::Matrix(rows))
    }

    fn statement(&mut self) -> Result<Statement> {
        let s = self.next("a statement")?;
        let (line, col) = (s.line, s.col);
        let keyword = match &s.tok {
            Tok::Ident(k) => k.clone(),
            other => {
                return Err(err_at(line, col, format!("expected a statement, found {}", other.describe())))
            }
        };
        let stmt = match keyword.as_str() {
            "wire" => {
                let name = self.ident("the wire name")?;
                self.expect(Tok::Colon, "`:`")?;
                self.expect(Tok::LBracket, "`[` opening the sector list")?;
                let sectors = self.list(|p| p.int("a sector dimension"))?;
                self.expect(Tok::RBracket, "`]` closing the sector list")?;
                Statement::Wire { name, sectors }
            }
            "gate" | "slot" => {
                let name = self.ident("the declaration name")?;
                self.expect(Tok::Colon, "`:`")?;
                let sig_in = self.type_expr()?;
                self.expect(Tok::Arrow, "`->`")?;
                let sig_out = self.type_expr()?;
                self.expect(Tok::Ident("route".into()), "`route`")?;
                let route = self.route_spec()?;
                if keyword == "slot" {
                    Statement::Slot { name, sig_in, sig_out, route }
                } else {
                    self.expect(Tok::Ident("kraus".into()), "`kraus`")?;
                    let p = self.next("a `@path` payload reference")?;
                    let payload = match &p.tok {
                        Tok::Path(path) => path.clone(),
                        other => {
                            return Err(err_at(
                                p.line,
                                p.col,
                                format!("expected a `@path` payload reference, found {}", other.describe()),
                            ))
                        }
                    };
                    Statement::Gate { name, sig_in, sig_out, route, payload }
                }
            }
            "apply" => {
                let node = self.ident("the gate or slot name")?;
                self.expect(Tok::LParen, "`(`")?;
                let in_wires = self.list(|p| p.ident("a wire name"))?;
                self.expect(Tok::RParen, "`)`")?;
                let out_wires = if matches!(self.peek(), Some(s) if s.tok == Tok::Arrow) {
                    self.pos += 1;
                    self.expect(Tok::LParen, "`(`")?;
                    let outs = self.list(|p| p.ident("a wire name"))?;
                    self.expect(Tok::RParen, "`)`")?;
                    Some(outs)
                } else {
                    None
                };
                Statement::Apply { node, in_wires, out_wires }
            }
            "output" => Statement::Output { wires: self.list(|p| p.ident("a wire name"))? },
            other => {
                return Err(err_at(
                    line,
                    col,
                    format!("expected `wire`, `gate`, `slot`, `apply` or `output`, found `{other}`"),
                ))
            }
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(stmt)
    }
}

/// Parses circuit text into an AST, or fails with 1-based line/column
/// coordinates of the offending token.
pub fn parse(text: &str) -> Result<CircuitAst> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let end_col = text.lines().last().map_or(1, |l| l.chars().count() + 1);
    let mut p = Parser { toks, pos: 0, end_line: lines, end_col };
    if p.peek().is_none() {
        return Err(err_at(1, 1, "expected at least one statement"));
    }
    let mut statements = Vec::new();
    while p.peek().is_some() {
        statements.push(p.statement()?);
    }
    Ok(CircuitAst { statements })
}
