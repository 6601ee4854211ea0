//! Parser for the supported Cypher subset.
//!
//! ```text
//! query     := MATCH pattern [WHERE cond (AND cond)*] RETURN item (',' item)* [LIMIT int] EOF
//! pattern   := node (rel node){0,3}
//! node      := '(' [ident] [':' ident] [props] ')'
//! props     := '{' ident ':' literal (',' ident ':' literal)* '}'
//! rel       := '-' '[' [ident] [':' ident ('|' ident)*] ']' ('->' | '-')
//!            | '<-' '[' [ident] [':' ident ('|' ident)*] ']' '-'
//! cond      := ident '.' ident op literal
//! op        := '=' | '<>' | '<' | '>' | CONTAINS
//! item      := ident ['.' ident] | COUNT '(' (ident | '*') ')'
//! literal   := string | number | TRUE | FALSE
//! ```
//!
//! Keywords are case-insensitive. Anything outside the grammar, including
//! trailing statements after `;`, is a parse error carrying a byte offset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs above this size are rejected before tokenizing.
pub const MAX_QUERY_BYTES: usize = 64 * 1024;
pub const MAX_HOPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Str(String),
    Num(f64),
}

impl Literal {
    pub fn as_text(&self) -> String {
        match self {
            Literal::Str(s) => s.clone(),
            Literal::Num(n) => format_number(*n),
        }
    }
}

pub(crate) fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Contains,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Contains => "CONTAINS",
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "<>" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "CONTAINS" => CmpOp::Contains,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePattern {
    pub var: String,
    pub label: Option<String>,
    pub props: Vec<(String, Literal)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPattern {
    pub var: String,
    pub types: Vec<String>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub var: String,
    pub prop: String,
    pub op: CmpOp,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReturnItem {
    Var(String),
    Prop(String, String),
    /// `count(x)` or `count(*)` (`None`).
    Count(Option<String>),
}

impl ReturnItem {
    pub fn column_name(&self) -> String {
        match self {
            ReturnItem::Var(v) => v.clone(),
            ReturnItem::Prop(v, p) => format!("{v}.{p}"),
            ReturnItem::Count(Some(v)) => format!("count({v})"),
            ReturnItem::Count(None) => "count(*)".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    /// `nodes.len() == rels.len() + 1`; `rels[i]` joins `nodes[i]` and
    /// `nodes[i + 1]`.
    pub nodes: Vec<NodePattern>,
    pub rels: Vec<RelPattern>,
    pub conditions: Vec<Condition>,
    pub returns: Vec<ReturnItem>,
    pub limit: Option<usize>,
}

impl QueryAst {
    pub fn is_rel_var(&self, var: &str) -> bool {
        self.rels.iter().any(|r| r.var == var)
    }

    pub fn is_node_var(&self, var: &str) -> bool {
        self.nodes.iter().any(|n| n.var == var)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Sym(&'static str),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

const SYMBOLS: &[&str] = &["<-", "->", "<>", "(", ")", "[", "]", "{", "}", ":", ",", ".", "-", "|", "=", "<", ">", "*", ";"];

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>> {
        let mut out = Vec::new();
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            let start = self.pos;
            let Some(c) = trimmed.chars().next() else {
                out.push((Tok::Eof, start));
                return Ok(out);
            };
            if c == '\'' || c == '"' {
                let mut value = String::new();
                let mut chars = trimmed.char_indices().skip(1);
                let mut closed = None;
                while let Some((i, ch)) = chars.next() {
                    if ch == '\\' {
                        match chars.next() {
                            Some((_, esc)) => value.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            }),
                            None => break,
                        }
                    } else if ch == c {
                        closed = Some(i);
                        break;
                    } else {
                        value.push(ch);
                    }
                }
                let Some(end) = closed else {
                    return Err(self.err(self.src.len(), "unterminated string"));
                };
                self.pos += end + 1;
                out.push((Tok::Str(value), start));
                continue;
            }
            if c.is_ascii_digit() {
                let len = trimmed
                    .char_indices()
                    .find(|(_, ch)| !(ch.is_ascii_digit() || *ch == '.'))
                    .map(|(i, _)| i)
                    .unwrap_or(trimmed.len());
                // A trailing `.` belongs to a property access, not the number.
                let text = trimmed[..len].trim_end_matches('.');
                let value: f64 = text.parse().map_err(|_| self.err(start, "invalid number"))?;
                self.pos += text.len();
                out.push((Tok::Num(value), start));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let len = trimmed
                    .char_indices()
                    .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_'))
                    .map(|(i, _)| i)
                    .unwrap_or(trimmed.len());
                self.pos += len;
                out.push((Tok::Ident(trimmed[..len].to_string()), start));
                continue;
            }
            if c == '`' {
                let Some(end) = trimmed[1..].find('`') else {
                    return Err(self.err(self.src.len(), "unterminated quoted identifier"));
                };
                self.pos += end + 2;
                out.push((Tok::Ident(trimmed[1..end + 1].to_string()), start));
                continue;
            }
            match SYMBOLS.iter().find(|s| trimmed.starts_with(**s)) {
                Some(sym) => {
                    self.pos += sym.len();
                    out.push((Tok::Sym(sym), start));
                }
                None => return Err(self.err(start, format!("unexpected character {c:?}"))),
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    anon: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Sym(s) => format!("{s:?}"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {s:?}, found {}", self.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {kw}, found {}", self.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected {what}, found {}", self.describe())),
        }
    }

    fn literal(&mut self) -> Result<Literal> {
        let negative = self.is_sym("-");
        if negative {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Str(s) if !negative => {
                self.bump();
                Ok(Literal::Str(s))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Literal::Num(if negative { -n } else { n }))
            }
            Tok::Ident(s) if !negative && (s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("false")) => {
                self.bump();
                Ok(Literal::Str(s.to_ascii_lowercase()))
            }
            _ => self.err(format!("expected a literal, found {}", self.describe())),
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.anon += 1;
        format!("_{prefix}{}", self.anon)
    }

    fn node(&mut self) -> Result<NodePattern> {
        self.expect_sym("(")?;
        let var = match self.peek() {
            Tok::Ident(_) => self.ident("variable")?,
            _ => self.fresh("n"),
        };
        let label = if self.is_sym(":") {
            self.bump();
            Some(self.ident("label")?)
        } else {
            None
        };
        let mut props = Vec::new();
        if self.is_sym("{") {
            self.bump();
            loop {
                let key = self.ident("property name")?;
                self.expect_sym(":")?;
                props.push((key, self.literal()?));
                if self.is_sym(",") {
                    self.bump();
                    continue;
                }
                break;
            }
            self.expect_sym("}")?;
        }
        self.expect_sym(")")?;
        Ok(NodePattern { var, label, props })
    }

    fn rel_body(&mut self) -> Result<(String, Vec<String>)> {
        self.expect_sym("[")?;
        let var = match self.peek() {
            Tok::Ident(_) => self.ident("variable")?,
            _ => self.fresh("r"),
        };
        let mut types = Vec::new();
        if self.is_sym(":") {
            self.bump();
            types.push(self.ident("relationship type")?);
            while self.is_sym("|") {
                self.bump();
                if self.is_sym(":") {
                    self.bump();
                }
                types.push(self.ident("relationship type")?);
            }
        }
        self.expect_sym("]")?;
        Ok((var, types))
    }

    fn rel(&mut self) -> Result<RelPattern> {
        if self.is_sym("<-") {
            self.bump();
            let (var, types) = self.rel_body()?;
            self.expect_sym("-")?;
            return Ok(RelPattern {
                var,
                types,
                direction: Direction::In,
            });
        }
        self.expect_sym("-")?;
        let (var, types) = self.rel_body()?;
        let direction = if self.is_sym("->") {
            self.bump();
            Direction::Out
        } else if self.is_sym("-") {
            self.bump();
            Direction::Both
        } else {
            return self.err(format!("expected \"->\" or \"-\", found {}", self.describe()));
        };
        Ok(RelPattern { var, types, direction })
    }

    fn query(&mut self) -> Result<QueryAst> {
        self.expect_keyword("MATCH")?;
        let mut nodes = vec![self.node()?];
        let mut rels = Vec::new();
        while self.is_sym("-") || self.is_sym("<-") {
            if rels.len() == MAX_HOPS {
                return self.err(format!("at most {MAX_HOPS} relationships per pattern"));
            }
            rels.push(self.rel()?);
            nodes.push(self.node()?);
        }
        let mut seen_rel = std::collections::HashSet::new();
        for r in &rels {
            if !seen_rel.insert(r.var.clone()) || nodes.iter().any(|n| n.var == r.var) {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("variable {} bound twice", r.var),
                });
            }
        }
        // A repeated node variable must agree on its label.
        for (i, n) in nodes.iter().enumerate() {
            for m in &nodes[..i] {
                if m.var == n.var && m.label.is_some() && n.label.is_some() && m.label != n.label {
                    return Err(Error::Parse {
                        offset: 0,
                        message: format!("variable {} has conflicting labels", n.var),
                    });
                }
            }
        }
        let mut conditions = Vec::new();
        if self.is_keyword("WHERE") {
            self.bump();
            loop {
                let at = self.offset();
                let var = self.ident("variable")?;
                if !nodes.iter().any(|n| n.var == var) && !rels.iter().any(|r| r.var == var) {
                    return Err(Error::Parse {
                        offset: at,
                        message: format!("unknown variable {var}"),
                    });
                }
                self.expect_sym(".")?;
                let prop = self.ident("property name")?;
                let op = match self.peek().clone() {
                    Tok::Sym(s) if CmpOp::parse(s).is_some() => {
                        self.bump();
                        CmpOp::parse(s).unwrap_or(CmpOp::Eq)
                    }
                    Tok::Ident(s) if s.eq_ignore_ascii_case("CONTAINS") => {
                        self.bump();
                        CmpOp::Contains
                    }
                    _ => return self.err(format!("expected a comparison operator, found {}", self.describe())),
                };
                let value = self.literal()?;
                conditions.push(Condition { var, prop, op, value });
                if self.is_keyword("AND") {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        self.expect_keyword("RETURN")?;
        let mut returns = Vec::new();
        loop {
            let at = self.offset();
            let item = if self.is_keyword("COUNT") {
                self.bump();
                self.expect_sym("(")?;
                let inner = if self.is_sym("*") {
                    self.bump();
                    None
                } else {
                    Some(self.ident("variable")?)
                };
                self.expect_sym(")")?;
                ReturnItem::Count(inner)
            } else {
                let var = self.ident("return item")?;
                if self.is_sym(".") {
                    self.bump();
                    ReturnItem::Prop(var, self.ident("property name")?)
                } else {
                    ReturnItem::Var(var)
                }
            };
            let var = match &item {
                ReturnItem::Var(v) | ReturnItem::Prop(v, _) | ReturnItem::Count(Some(v)) => Some(v),
                ReturnItem::Count(None) => None,
            };
            if let Some(v) = var {
                if !nodes.iter().any(|n| &n.var == v) && !rels.iter().any(|r| &r.var == v) {
                    return Err(Error::Parse {
                        offset: at,
                        message: format!("unknown variable {v}"),
                    });
                }
            }
            returns.push(item);
            if self.is_sym(",") {
                self.bump();
                continue;
            }
            break;
        }
        let limit = if self.is_keyword("LIMIT") {
            self.bump();
            match self.peek().clone() {
                Tok::Num(n) if n >= 1.0 && n.fract() == 0.0 => {
                    self.bump();
                    Some(n.min(usize::MAX as f64) as usize)
                }
                _ => return self.err(format!("expected a positive integer, found {}", self.describe())),
            }
        } else {
            None
        };
        if *self.peek() != Tok::Eof {
            return self.err(format!("unexpected {} after query", self.describe()));
        }
        Ok(QueryAst {
            nodes,
            rels,
            conditions,
            returns,
            limit,
        })
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst> {
    if text.len() > MAX_QUERY_BYTES {
        return Err(Error::QueryRejected(format!(
            "query of {} bytes exceeds the {MAX_QUERY_BYTES}-byte limit",
            text.len()
        )));
    }
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    Parser { toks, i: 0, anon: 0 }.query()
}
