//! Scenario file format.
//!
//! ```text
//! # comment
//! peer Alice
//! principal Charlie
//! relation ext alicePhotos@Alice/1 owner Alice
//! relation int allPhotos@Alice/1
//! fact alicePhotos@Alice("sunset.jpg")
//! grant read on alicePhotos@Alice to Charlie
//! rule at Alice: allPhotos@$x($f) :- alicePhotos@Alice($f), [hide friends@Alice($x)]
//! rule at Bob as Carol: r@Bob($x) :- s@Bob($x)
//! ```
//!
//! Whitespace, including line breaks, is insignificant between tokens.
//! Constants are double-quoted strings with `\"` and `\\` escapes;
//! variables are `$ident` and may stand for relation and peer names.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::acl::{Grant, Privilege};
use crate::model::{
    Atom, Catalog, Fact, GroundAtom, ModelError, PeerId, PrincipalId, RelKey, RelationDecl, RelationKind, RelationRef,
    Rule, Term, ACL_RELATION,
};

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A program element with the position of its directive. Equality ignores
/// the position.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub value: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(value: T, span: Span) -> Self {
        Spanned { value, span }
    }

    pub fn unspanned(value: T) -> Self {
        Spanned {
            value,
            span: Span::default(),
        }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl<T: Eq> Eq for Spanned<T> {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{span}: syntax error: expected {expected}, found {found}")]
    Syntax {
        span: Span,
        expected: String,
        found: String,
    },
    #[error("{span}: unknown peer `{name}`")]
    UnknownPeer { span: Span, name: String },
    #[error("{span}: unknown principal `{name}`")]
    UnknownPrincipal { span: Span, name: String },
    #[error("{span}: unknown relation {relation}")]
    UnknownRelation { span: Span, relation: RelKey },
    #[error("{span}: unsafe rule: head variable ${variable} does not occur in the body")]
    UnsafeRule { span: Span, variable: String },
    #[error("{span}: arity mismatch for {relation}: declared {expected}, found {found}")]
    ArityMismatch {
        span: Span,
        relation: RelKey,
        expected: usize,
        found: usize,
    },
    #[error("{span}: duplicate {what}")]
    Duplicate { span: Span, what: String },
    #[error("{span}: {reason}")]
    Invalid { span: Span, reason: String },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::UnknownPeer { span, .. }
            | ParseError::UnknownPrincipal { span, .. }
            | ParseError::UnknownRelation { span, .. }
            | ParseError::UnsafeRule { span, .. }
            | ParseError::ArityMismatch { span, .. }
            | ParseError::Duplicate { span, .. }
            | ParseError::Invalid { span, .. } => *span,
        }
    }

    fn from_model(e: ModelError, span: Span) -> Self {
        match e {
            ModelError::UnknownRelation(relation) => ParseError::UnknownRelation { span, relation },
            ModelError::UnsafeRule(variable) => ParseError::UnsafeRule { span, variable },
            ModelError::EmptyBody => ParseError::Invalid {
                span,
                reason: "rule body is empty".into(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub peers: Vec<Spanned<PeerId>>,
    pub principals: Vec<Spanned<PrincipalId>>,
    pub declarations: Vec<Spanned<RelationDecl>>,
    pub facts: Vec<Spanned<Fact>>,
    pub grants: Vec<Spanned<Grant>>,
    pub rules: Vec<Spanned<Rule>>,
}

impl Program {
    /// Declarations plus the implicit `acl@peer` relation of every peer.
    pub fn catalog(&self) -> Catalog {
        let mut catalog = Catalog::new();
        for p in &self.peers {
            catalog.declare(RelationDecl::acl(&p.value));
        }
        for d in &self.declarations {
            catalog.declare(d.value.clone());
        }
        catalog
    }

    /// Checks every cross-reference: declared peers, principals and
    /// relations, arities, rule safety, and reserved-relation use.
    pub fn validate(&self) -> Result<(), ParseError> {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for p in self.peers.iter().chain(&self.principals) {
            if !names.insert(p.value.as_str()) {
                return Err(ParseError::Duplicate {
                    span: p.span,
                    what: format!("principal `{}`", p.value),
                });
            }
        }
        let peers: BTreeSet<&str> = self.peers.iter().map(|p| p.value.as_str()).collect();
        let known_peer = |name: &PrincipalId, span: Span| {
            if peers.contains(name.as_str()) {
                Ok(())
            } else {
                Err(ParseError::UnknownPeer {
                    span,
                    name: name.0.clone(),
                })
            }
        };
        let known_principal = |name: &PrincipalId, span: Span| {
            if names.contains(name.as_str()) {
                Ok(())
            } else {
                Err(ParseError::UnknownPrincipal {
                    span,
                    name: name.0.clone(),
                })
            }
        };

        let mut seen = BTreeSet::new();
        for d in &self.declarations {
            known_peer(&d.value.key.peer, d.span)?;
            known_principal(&d.value.owner, d.span)?;
            if d.value.key.is_acl() {
                return Err(ParseError::Invalid {
                    span: d.span,
                    reason: format!("`{ACL_RELATION}` is a reserved relation name"),
                });
            }
            if !seen.insert(&d.value.key) {
                return Err(ParseError::Duplicate {
                    span: d.span,
                    what: format!("relation {}", d.value.key),
                });
            }
        }
        let catalog = self.catalog();
        let lookup = |key: &RelKey, span: Span| {
            known_peer(&key.peer, span)?;
            catalog.get(key).ok_or_else(|| ParseError::UnknownRelation {
                span,
                relation: key.clone(),
            })
        };

        for f in &self.facts {
            let decl = lookup(f.value.rel(), f.span)?;
            if decl.key.is_acl() {
                return Err(ParseError::Invalid {
                    span: f.span,
                    reason: "acl facts are maintained through `grant` directives".into(),
                });
            }
            if decl.kind != RelationKind::Extensional {
                return Err(ParseError::Invalid {
                    span: f.span,
                    reason: format!(
                        "{} is intentional; facts can only be stated for extensional relations",
                        decl.key
                    ),
                });
            }
            check_arity(decl, f.value.atom.args.len(), f.span)?;
        }

        for g in &self.grants {
            lookup(&g.value.target, g.span)?;
            known_principal(&g.value.grantee, g.span)?;
        }

        for r in &self.rules {
            let rule = &r.value;
            known_peer(&rule.host, r.span)?;
            known_principal(&rule.author, r.span)?;
            rule.check_safety().map_err(|e| ParseError::from_model(e, r.span))?;
            if rule.head.hidden {
                return Err(ParseError::Invalid {
                    span: r.span,
                    reason: "hide is not allowed in a rule head".into(),
                });
            }
            for atom in rule.atoms() {
                if let Term::Const(p) = &atom.rel.peer {
                    known_peer(&PrincipalId::new(p.as_str()), r.span)?;
                }
                if let Some(key) = atom.rel.ground() {
                    let decl = lookup(&key, r.span)?;
                    check_arity(decl, atom.args.len(), r.span)?;
                }
            }
            if rule.head.rel.relation == Term::constant(ACL_RELATION) {
                return Err(ParseError::Invalid {
                    span: r.span,
                    reason: "rules cannot derive into the reserved acl relation".into(),
                });
            }
        }
        Ok(())
    }
}

fn check_arity(decl: &RelationDecl, found: usize, span: Span) -> Result<(), ParseError> {
    if decl.arity == found {
        Ok(())
    } else {
        Err(ParseError::ArityMismatch {
            span,
            relation: decl.key.clone(),
            expected: decl.arity,
            found,
        })
    }
}

/// Parses and validates a scenario.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let program = Parser::new(text)?.program()?;
    program.validate()?;
    Ok(program)
}

/// Parses `head :- body` as a rule installed at `host`, authored by `host`.
/// Only syntax and safety are checked.
pub fn parse_rule(text: &str, host: &PeerId) -> Result<Rule, ParseError> {
    let mut p = Parser::new(text)?;
    let span = p.peek_span();
    let (head, body) = p.rule_body()?;
    p.expect_eof()?;
    let rule = Rule::new(head, body, host.clone());
    rule.check_safety().map_err(|e| ParseError::from_model(e, span))?;
    Ok(rule)
}

/// Parses a single atom, e.g. a query pattern `allPhotos@Pete($f)`.
pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(text)?;
    let atom = p.atom()?;
    p.expect_eof()?;
    Ok(atom)
}

/// Renders a program one directive per line. Parsing the output yields a
/// program equal to `p`.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for peer in &p.peers {
        let _ = writeln!(out, "peer {}", peer.value);
    }
    for principal in &p.principals {
        let _ = writeln!(out, "principal {}", principal.value);
    }
    for d in &p.declarations {
        let d = &d.value;
        let kind = match d.kind {
            RelationKind::Extensional => "ext",
            RelationKind::Intentional => "int",
        };
        let _ = writeln!(out, "relation {kind} {}/{} owner {}", d.key, d.arity, d.owner);
    }
    for f in &p.facts {
        let _ = writeln!(out, "fact {}", f.value.atom);
    }
    for g in &p.grants {
        let _ = writeln!(out, "{}", g.value);
    }
    for r in &p.rules {
        let r = &r.value;
        let _ = write!(out, "rule at {}", r.host);
        if r.author != r.host {
            let _ = write!(out, " as {}", r.author);
        }
        let _ = writeln!(out, ": {r}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num(usize),
    At,
    LParen,
    RParen,
    Comma,
    Colon,
    Turnstile,
    LBracket,
    RBracket,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Var(s) => write!(f, "`${s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::At => f.write_str("`@`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Turnstile => f.write_str("`:-`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let syntax = |span: Span, expected: &str, found: String| ParseError::Syntax {
        span,
        expected: expected.to_string(),
        found,
    };
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump!();
                }
            }
            '@' | '(' | ')' | ',' | '[' | ']' | '/' => {
                bump!();
                let tok = match c {
                    '@' => Tok::At,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    _ => Tok::Slash,
                };
                out.push((tok, span));
            }
            ':' => {
                bump!();
                if chars.peek() == Some(&'-') {
                    bump!();
                    out.push((Tok::Turnstile, span));
                } else {
                    out.push((Tok::Colon, span));
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    let here = Span { line, col };
                    match bump!() {
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            Some(other) => return Err(syntax(here, "`\\\"` or `\\\\` escape", format!("`\\{other}`"))),
                            None => return Err(syntax(Span { line, col }, "closing `\"`", "end of input".into())),
                        },
                        Some('\n') => return Err(syntax(here, "closing `\"`", "line break".into())),
                        Some(other) => s.push(other),
                        None => return Err(syntax(Span { line, col }, "closing `\"`", "end of input".into())),
                    }
                }
                out.push((Tok::Str(s), span));
            }
            '$' => {
                bump!();
                let name = take_ident(&mut chars, &mut col);
                if name.is_empty() {
                    let found = chars.peek().map_or("end of input".to_string(), |c| format!("`{c}`"));
                    return Err(syntax(Span { line, col }, "variable name after `$`", found));
                }
                out.push((Tok::Var(name), span));
            }
            c if c.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                    n.push(d);
                    bump!();
                }
                let value = n
                    .parse()
                    .map_err(|_| syntax(span, "a number that fits in usize", format!("`{n}`")))?;
                out.push((Tok::Num(value), span));
            }
            c if c.is_ascii_alphabetic() => {
                let name = take_ident(&mut chars, &mut col);
                out.push((Tok::Ident(name), span));
            }
            other => return Err(syntax(span, "a token", format!("`{other}`"))),
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

fn take_ident(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, col: &mut usize) -> String {
    let mut s = String::new();
    if !chars.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
        return s;
    }
    while let Some(&c) = chars.peek().filter(|c| c.is_ascii_alphanumeric() || **c == '_') {
        s.push(c);
        chars.next();
        *col += 1;
    }
    s
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            span: self.peek_span(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.error(&tok.to_string())
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            _ => self.error(&format!("`{kw}`")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut p = Program::default();
        loop {
            let span = self.peek_span();
            let directive = match self.peek() {
                Tok::Eof => return Ok(p),
                Tok::Ident(s) => s.clone(),
                _ => return self.error("a directive (peer, principal, relation, fact, grant, rule)"),
            };
            match directive.as_str() {
                "peer" => {
                    self.next();
                    let name = self.ident("peer name")?;
                    p.peers.push(Spanned::new(PrincipalId(name), span));
                }
                "principal" => {
                    self.next();
                    let name = self.ident("principal name")?;
                    p.principals.push(Spanned::new(PrincipalId(name), span));
                }
                "relation" => {
                    self.next();
                    let kind = match self.ident("`ext` or `int`")?.as_str() {
                        "ext" => RelationKind::Extensional,
                        "int" => RelationKind::Intentional,
                        _ => {
                            self.pos -= 1;
                            return self.error("`ext` or `int`");
                        }
                    };
                    let key = self.ground_ref()?;
                    self.expect(Tok::Slash)?;
                    let arity = match self.next() {
                        (Tok::Num(n), _) => n,
                        _ => {
                            self.pos -= 1;
                            return self.error("arity");
                        }
                    };
                    let owner = if self.at_keyword("owner") {
                        self.next();
                        PrincipalId(self.ident("owner name")?)
                    } else {
                        key.peer.clone()
                    };
                    p.declarations.push(Spanned::new(
                        RelationDecl {
                            key,
                            arity,
                            kind,
                            owner,
                        },
                        span,
                    ));
                }
                "fact" => {
                    self.next();
                    let rel = self.ground_ref()?;
                    self.expect(Tok::LParen)?;
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            match self.peek().clone() {
                                Tok::Str(s) => {
                                    self.next();
                                    args.push(s);
                                }
                                _ => return self.error("quoted constant"),
                            }
                            if *self.peek() == Tok::Comma {
                                self.next();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    let author = rel.peer.clone();
                    p.facts
                        .push(Spanned::new(Fact::new(GroundAtom::new(rel, args), author), span));
                }
                "grant" => {
                    self.next();
                    let privilege: Privilege = match self.peek() {
                        Tok::Ident(s) => match s.parse() {
                            Ok(pr) => pr,
                            Err(_) => return self.error("`read`, `write` or `owner`"),
                        },
                        _ => return self.error("`read`, `write` or `owner`"),
                    };
                    self.next();
                    self.keyword("on")?;
                    let target = self.ground_ref()?;
                    self.keyword("to")?;
                    let grantee = PrincipalId(self.ident("grantee name")?);
                    p.grants
                        .push(Spanned::new(Grant::new(target, grantee, privilege), span));
                }
                "rule" => {
                    self.next();
                    self.keyword("at")?;
                    let host = PrincipalId(self.ident("host peer name")?);
                    let author = if self.at_keyword("as") {
                        self.next();
                        PrincipalId(self.ident("author name")?)
                    } else {
                        host.clone()
                    };
                    self.expect(Tok::Colon)?;
                    let (head, body) = self.rule_body()?;
                    let mut rule = Rule::new(head, body, host);
                    rule.author = author;
                    p.rules.push(Spanned::new(rule, span));
                }
                _ => return self.error("a directive (peer, principal, relation, fact, grant, rule)"),
            }
        }
    }

    fn ground_ref(&mut self) -> Result<RelKey, ParseError> {
        let relation = self.ident("relation name")?;
        self.expect(Tok::At)?;
        let peer = self.ident("peer name")?;
        Ok(RelKey::new(relation, peer))
    }

    fn rule_body(&mut self) -> Result<(Atom, Vec<Atom>), ParseError> {
        if *self.peek() == Tok::LBracket {
            return self.error("head atom (hide is only allowed in rule bodies)");
        }
        let head = self.atom()?;
        self.expect(Tok::Turnstile)?;
        let mut body = vec![self.body_atom()?];
        while *self.peek() == Tok::Comma {
            self.next();
            body.push(self.body_atom()?);
        }
        Ok((head, body))
    }

    fn body_atom(&mut self) -> Result<Atom, ParseError> {
        if *self.peek() == Tok::LBracket {
            self.next();
            self.keyword("hide")?;
            let mut atom = self.atom()?;
            atom.hidden = true;
            self.expect(Tok::RBracket)?;
            Ok(atom)
        } else {
            self.atom()
        }
    }

    fn name(&mut self, what: &str) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(Term::Const(s))
            }
            Tok::Var(v) => {
                self.next();
                Ok(Term::Var(v))
            }
            _ => self.error(what),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let relation = self.name("relation name or variable")?;
        self.expect(Tok::At)?;
        let peer = self.name("peer name or variable")?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                match self.peek().clone() {
                    Tok::Str(s) => args.push(Term::Const(s)),
                    Tok::Var(v) => args.push(Term::Var(v)),
                    _ => return self.error("quoted constant or variable"),
                }
                self.next();
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(Atom::new(RelationRef { relation, peer }, args))
    }
}
