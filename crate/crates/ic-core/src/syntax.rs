//! Concrete syntax for asserted protocols.
//!
//! ```text
//! S   ::= "end" | IDENT | "rec" IDENT "." S | PFX "." S
//!       | OP "{" LABEL ":" S ("," LABEL ":" S)* "}"
//! PFX ::= "!" IDENT | "?" IDENT | IDENT
//!       | "assert" "(" IDENT ")" | "require" "(" IDENT ")" | "consume" "(" IDENT ")"
//! OP  ::= "+" | "sel" | "bra"
//! ```
//!
//! `.` is right-associative, `//` starts a line comment, identifiers are
//! `[A-Za-z_][A-Za-z0-9_]*`. A bare `IDENT` is a recursion variable; an
//! `IDENT` followed by `.` is a neutral (undirected) action. Keywords are
//! accepted as branch labels, payloads and assertion names, where no
//! ambiguity arises.
//!
//! Protocol files (`.proto-ic`) hold one or more named blocks of the form
//! `protocol NAME = S`.
//!
//! [`parse`] runs the binder renamer and the validator, so a successfully
//! parsed protocol is always validated with pairwise-distinct binders.

use std::collections::BTreeSet;
use std::fmt;

use crate::proto::{Action, ChoiceOp, Protocol, Violation};

/// A piece of protocol source, with an optional origin for diagnostics.
#[derive(Clone, Debug)]
pub struct SourceText {
    pub text: String,
    pub origin: Option<String>,
}

impl SourceText {
    pub fn new(text: impl Into<String>) -> Self {
        SourceText { text: text.into(), origin: None }
    }

    pub fn with_origin(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceText { text: text.into(), origin: Some(origin.into()) }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SyntaxError {
    #[error("{origin}:{line}:{col}: {message}")]
    Parse { origin: String, line: usize, col: usize, message: String },
    #[error("invalid protocol: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    KwEnd,
    KwRec,
    KwSel,
    KwBra,
    KwAssert,
    KwRequire,
    KwConsume,
    KwProtocol,
    Bang,
    Question,
    Dot,
    Comma,
    Colon,
    Eq,
    Plus,
    LBrace,
    RBrace,
    LParen,
    RParen,
}

impl Tok {
    /// The identifier text of a token, for positions where keywords are
    /// allowed to act as plain identifiers (labels, payloads, names).
    fn ident_text(&self) -> Option<&str> {
        match self {
            Tok::Ident(s) => Some(s),
            Tok::KwEnd => Some("end"),
            Tok::KwRec => Some("rec"),
            Tok::KwSel => Some("sel"),
            Tok::KwBra => Some("bra"),
            Tok::KwAssert => Some("assert"),
            Tok::KwRequire => Some("require"),
            Tok::KwConsume => Some("consume"),
            Tok::KwProtocol => Some("protocol"),
            _ => None,
        }
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s}"),
            Tok::Bang => write!(f, "'!'"),
            Tok::Question => write!(f, "'?'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Comma => write!(f, "','"),
            Tok::Colon => write!(f, "':'"),
            Tok::Eq => write!(f, "'='"),
            Tok::Plus => write!(f, "'+'"),
            Tok::LBrace => write!(f, "'{{'"),
            Tok::RBrace => write!(f, "'}}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            other => write!(f, "keyword {}", other.ident_text().unwrap_or("?")),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, chars: src.char_indices().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        next
    }

    fn lex(mut self, origin: &str) -> Result<Vec<Spanned>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            // skip whitespace and // comments
            loop {
                match self.chars.peek() {
                    Some((_, c)) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some((i, '/')) if self.src[*i..].starts_with("//") => {
                        while let Some((_, c)) = self.bump() {
                            if c == '\n' {
                                break;
                            }
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some((start, c)) = self.bump() else { break };
            let tok = match c {
                '!' => Tok::Bang,
                '?' => Tok::Question,
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut end = start + c.len_utf8();
                    while let Some((i, c)) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || *c == '_' {
                            end = i + c.len_utf8();
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match &self.src[start..end] {
                        "end" => Tok::KwEnd,
                        "rec" => Tok::KwRec,
                        "sel" => Tok::KwSel,
                        "bra" => Tok::KwBra,
                        "assert" => Tok::KwAssert,
                        "require" => Tok::KwRequire,
                        "consume" => Tok::KwConsume,
                        "protocol" => Tok::KwProtocol,
                        ident => Tok::Ident(ident.to_string()),
                    }
                }
                other => {
                    return Err(SyntaxError::Parse {
                        origin: origin.to_string(),
                        line,
                        col,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    origin: String,
}

impl Parser {
    fn err(&self, message: String) -> SyntaxError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col + 1)))
            .unwrap_or((1, 1));
        SyntaxError::Parse { origin: self.origin.clone(), line, col, message }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {want}, found {t}"))),
            None => Err(self.err(format!("expected {want}, found end of input"))),
        }
    }

    /// An identifier where keywords are rejected (variables, block names).
    fn strict_ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {t}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    /// An identifier where keywords are allowed (labels, payloads, names).
    fn loose_ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().and_then(|t| t.ident_text().map(str::to_string)) {
            Some(s) => {
                self.pos += 1;
                Ok(s)
            }
            None => match self.peek() {
                Some(t) => Err(self.err(format!("expected {what}, found {t}"))),
                None => Err(self.err(format!("expected {what}, found end of input"))),
            },
        }
    }

    fn protocol(&mut self) -> Result<Protocol, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::KwEnd) => {
                self.pos += 1;
                Ok(Protocol::End)
            }
            Some(Tok::KwRec) => {
                self.pos += 1;
                let var = self.strict_ident("recursion variable")?;
                self.expect(Tok::Dot)?;
                let body = self.protocol()?;
                Ok(Protocol::rec(var, body))
            }
            Some(Tok::Bang) => {
                self.pos += 1;
                let payload = self.loose_ident("payload")?;
                self.expect(Tok::Dot)?;
                Ok(Protocol::prefix(Action::send(payload), self.protocol()?))
            }
            Some(Tok::Question) => {
                self.pos += 1;
                let payload = self.loose_ident("payload")?;
                self.expect(Tok::Dot)?;
                Ok(Protocol::prefix(Action::receive(payload), self.protocol()?))
            }
            Some(t @ (Tok::KwAssert | Tok::KwRequire | Tok::KwConsume)) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let name = self.loose_ident("assertion name")?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Dot)?;
                let cont = self.protocol()?;
                Ok(match t {
                    Tok::KwAssert => Protocol::assert_(name, cont),
                    Tok::KwRequire => Protocol::require(name, cont),
                    _ => Protocol::consume(name, cont),
                })
            }
            Some(t @ (Tok::Plus | Tok::KwSel | Tok::KwBra)) => {
                self.pos += 1;
                let op = match t {
                    Tok::Plus => ChoiceOp::Plain,
                    Tok::KwSel => ChoiceOp::Select,
                    _ => ChoiceOp::Offer,
                };
                self.expect(Tok::LBrace)?;
                let mut branches = Vec::new();
                loop {
                    let label = self.loose_ident("branch label")?;
                    self.expect(Tok::Colon)?;
                    let body = self.protocol()?;
                    branches.push((label, body));
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBrace) => break,
                        Some(t) => return Err(self.err(format!("expected ',' or '}}', found {t}"))),
                        None => {
                            return Err(self.err("expected ',' or '}', found end of input".into()))
                        }
                    }
                }
                Ok(Protocol::Choice(op, branches))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Dot) {
                    self.pos += 1;
                    Ok(Protocol::prefix(Action::neutral(name), self.protocol()?))
                } else {
                    Ok(Protocol::Var(name))
                }
            }
            Some(t) => Err(self.err(format!("expected a protocol, found {t}"))),
            None => Err(self.err("expected a protocol, found end of input".into())),
        }
    }
}

fn origin_of(src: &SourceText) -> String {
    src.origin.clone().unwrap_or_else(|| "<input>".to_string())
}

fn finish(proto: Protocol) -> Result<Protocol, SyntaxError> {
    let mut taken = BTreeSet::new();
    let renamed = proto.freshen_binders(&mut taken);
    let violations = renamed.validate();
    if violations.is_empty() {
        Ok(renamed)
    } else {
        Err(SyntaxError::Validation(violations))
    }
}

/// Parse a single protocol term. The result is renamed apart and validated.
pub fn parse(src: &SourceText) -> Result<Protocol, SyntaxError> {
    let origin = origin_of(src);
    let toks = Lexer::new(&src.text).lex(&origin)?;
    let mut parser = Parser { toks, pos: 0, origin };
    let proto = parser.protocol()?;
    if parser.pos != parser.toks.len() {
        let t = parser.peek().unwrap().clone();
        return Err(parser.err(format!("trailing input after protocol: {t}")));
    }
    finish(proto)
}

/// Convenience wrapper over [`parse`] for string literals.
pub fn parse_str(text: &str) -> Result<Protocol, SyntaxError> {
    parse(&SourceText::new(text))
}

/// Parse a `.proto-ic` file: a sequence of `protocol NAME = S` blocks.
/// Returns the named protocols in file order.
pub fn parse_file(src: &SourceText) -> Result<Vec<(String, Protocol)>, SyntaxError> {
    let origin = origin_of(src);
    let toks = Lexer::new(&src.text).lex(&origin)?;
    let mut parser = Parser { toks, pos: 0, origin };
    let mut out: Vec<(String, Protocol)> = Vec::new();
    while parser.peek().is_some() {
        parser.expect(Tok::KwProtocol)?;
        let name = parser.strict_ident("protocol name")?;
        if out.iter().any(|(n, _)| *n == name) {
            return Err(parser.err(format!("protocol {name} defined twice")));
        }
        parser.expect(Tok::Eq)?;
        let proto = parser.protocol()?;
        out.push((name, finish(proto)?));
    }
    Ok(out)
}

/// Render a protocol in canonical concrete syntax: `parse(print(s)) == s`.
pub fn print(s: &Protocol) -> String {
    let mut out = String::new();
    write_proto(s, &mut out);
    out
}

fn write_proto(s: &Protocol, out: &mut String) {
    match s {
        Protocol::End => out.push_str("end"),
        Protocol::Var(v) => out.push_str(v),
        Protocol::Rec(t, body) => {
            out.push_str("rec ");
            out.push_str(t);
            out.push('.');
            write_proto(body, out);
        }
        Protocol::Prefix(a, c) => {
            out.push_str(&a.to_string());
            out.push('.');
            write_proto(c, out);
        }
        Protocol::Assert(n, c) => {
            out.push_str("assert(");
            out.push_str(n);
            out.push_str(").");
            write_proto(c, out);
        }
        Protocol::Require(n, c) => {
            out.push_str("require(");
            out.push_str(n);
            out.push_str(").");
            write_proto(c, out);
        }
        Protocol::Consume(n, c) => {
            out.push_str("consume(");
            out.push_str(n);
            out.push_str(").");
            write_proto(c, out);
        }
        Protocol::Choice(op, brs) => {
            out.push_str(op.keyword());
            out.push('{');
            for (i, (l, b)) in brs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(l);
                out.push_str(": ");
                write_proto(b, out);
            }
            out.push('}');
        }
    }
}

/// Render a list of named protocols as a `.proto-ic` file.
pub fn print_file(protos: &[(String, Protocol)]) -> String {
    let mut out = String::new();
    for (name, p) in protos {
        out.push_str("protocol ");
        out.push_str(name);
        out.push_str(" = ");
        out.push_str(&print(p));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::Polarity;

    #[test]
    fn parses_prefix_and_assert() {
        let s = parse_str("?pay . assert(paid) . end").unwrap();
        assert_eq!(
            s,
            Protocol::prefix(Action::receive("pay"), Protocol::assert_("paid", Protocol::End))
        );
    }

    #[test]
    fn parses_buffet_with_keyword_label() {
        let s = parse_str(
            "rec t . bra{hungry: require(paid).!food.t, end: consume(paid).end}",
        )
        .unwrap();
        match &s {
            Protocol::Rec(t, body) => {
                assert_eq!(t, "t");
                match body.as_ref() {
                    Protocol::Choice(ChoiceOp::Offer, brs) => {
                        assert_eq!(brs[0].0, "hungry");
                        assert_eq!(brs[1].0, "end");
                    }
                    other => panic!("expected branching, got {other:?}"),
                }
            }
            other => panic!("expected rec, got {other:?}"),
        }
    }

    #[test]
    fn unguarded_is_rejected() {
        match parse_str("rec t . t") {
            Err(SyntaxError::Validation(vs)) => {
                assert!(vs.iter().any(|v| matches!(v, Violation::UnguardedVariable { .. })))
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn neutral_actions_and_vars() {
        let s = parse_str("rec t.ping.t").unwrap();
        match &s {
            Protocol::Rec(_, body) => match body.as_ref() {
                Protocol::Prefix(a, c) => {
                    assert_eq!(a.polarity, Polarity::Neutral);
                    assert_eq!(a.payload, "ping");
                    assert!(matches!(c.as_ref(), Protocol::Var(v) if v == "t"));
                }
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn print_is_canonical_fixed_point() {
        let text = "sel{ok: assert(n).end, ko: end}";
        let s = parse_str(text).unwrap();
        assert_eq!(print(&s), text);
        assert_eq!(print(&Protocol::End), "end");
    }

    #[test]
    fn parse_print_roundtrip() {
        let cases = [
            "end",
            "?pay.assert(paid).end",
            "rec t.+{hungry: require(paid).!food.t, stop: consume(paid).end}",
            "rec t.!p1.t",
            "sel{ok: assert(pin).require(pin).rec r.bra{payment: !id.r, logout: consume(pin).end}, fail: end}",
        ];
        for text in cases {
            let s = parse_str(text).unwrap();
            let reparsed = parse_str(&print(&s)).unwrap();
            assert_eq!(s, reparsed, "round-trip failed for {text}");
            assert_eq!(print(&s), print(&reparsed));
        }
    }

    #[test]
    fn parse_file_blocks() {
        let text = "// two protocols\nprotocol a = end\nprotocol b = !p.end\n";
        let protos = parse_file(&SourceText::new(text)).unwrap();
        assert_eq!(protos.len(), 2);
        assert_eq!(protos[0].0, "a");
        assert_eq!(protos[1].1, Protocol::prefix(Action::send("p"), Protocol::End));
        assert!(parse_file(&SourceText::new("protocol a = end\nprotocol a = end")).is_err());
    }

    #[test]
    fn error_has_position() {
        match parse_str("rec t . ") {
            Err(SyntaxError::Parse { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col >= 8);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
