//! Shared data model: principals, relation references, atoms, facts, rules,
//! the relation catalog and the rule classifier (kinds A through E).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::provenance::TokenId;

/// Name of the reserved extensional relation that mirrors each peer's ACL.
pub const ACL_RELATION: &str = "acl";

/// Errors raised by the rule classifier and the safety check.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown relation {0}")]
    UnknownRelation(RelKey),
    #[error("unsafe rule: head variable ${0} does not occur in the body")]
    UnsafeRule(String),
    #[error("rule body is empty")]
    EmptyBody,
}

/// Identifier of a principal, peer or virtual.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrincipalId(pub String);

/// Peers are principals that host relations.
pub type PeerId = PrincipalId;

impl PrincipalId {
    pub fn new(name: impl Into<String>) -> Self {
        PrincipalId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PrincipalId {
    fn from(s: &str) -> Self {
        PrincipalId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrincipalKind {
    /// Has storage and evaluates rules.
    Peer,
    /// A user or group identity relying on peers.
    Virtual,
}

/// A constant or a variable. Constants also serve as relation and peer names
/// when they appear in the name positions of an atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(s: impl Into<String>) -> Self {
        Term::Const(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Var(s.into())
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    fn substitute(&self, bindings: &Bindings) -> Term {
        match self {
            Term::Var(v) => match bindings.get(v) {
                Some(value) => Term::Const(value.clone()),
                None => self.clone(),
            },
            Term::Const(_) => self.clone(),
        }
    }
}

/// Variable bindings produced while matching a rule body.
pub type Bindings = BTreeMap<String, String>;

/// `relation@peer`, either part possibly a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationRef {
    pub relation: Term,
    pub peer: Term,
}

impl RelationRef {
    pub fn ground(&self) -> Option<RelKey> {
        match (&self.relation, &self.peer) {
            (Term::Const(r), Term::Const(p)) => Some(RelKey::new(r.as_str(), p.as_str())),
            _ => None,
        }
    }
}

/// A ground `relation@peer`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelKey {
    pub relation: String,
    pub peer: PeerId,
}

impl RelKey {
    pub fn new(relation: impl Into<String>, peer: impl Into<String>) -> Self {
        RelKey {
            relation: relation.into(),
            peer: PrincipalId(peer.into()),
        }
    }

    pub fn acl(peer: &PeerId) -> Self {
        RelKey {
            relation: ACL_RELATION.to_string(),
            peer: peer.clone(),
        }
    }

    pub fn is_acl(&self) -> bool {
        self.relation == ACL_RELATION
    }

    pub fn to_ref(&self) -> RelationRef {
        RelationRef {
            relation: Term::Const(self.relation.clone()),
            peer: Term::Const(self.peer.0.clone()),
        }
    }
}

impl fmt::Display for RelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.relation, self.peer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    Extensional,
    Intentional,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationDecl {
    pub key: RelKey,
    pub arity: usize,
    pub kind: RelationKind,
    pub owner: PrincipalId,
}

impl RelationDecl {
    /// Declaration of the reserved `acl@peer/3` relation.
    pub fn acl(peer: &PeerId) -> Self {
        RelationDecl {
            key: RelKey::acl(peer),
            arity: 3,
            kind: RelationKind::Extensional,
            owner: peer.clone(),
        }
    }
}

/// All relation declarations of a world, keyed by `relation@peer`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    decls: BTreeMap<RelKey, RelationDecl>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a declaration, returning the previous one for the same key.
    pub fn declare(&mut self, decl: RelationDecl) -> Option<RelationDecl> {
        self.decls.insert(decl.key.clone(), decl)
    }

    pub fn get(&self, key: &RelKey) -> Option<&RelationDecl> {
        self.decls.get(key)
    }

    pub fn contains(&self, key: &RelKey) -> bool {
        self.decls.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationDecl> {
        self.decls.values()
    }

    /// Declarations hosted at `peer`, in key order.
    pub fn at_peer<'a>(&'a self, peer: &'a PeerId) -> impl Iterator<Item = &'a RelationDecl> + 'a {
        self.decls.values().filter(move |d| &d.key.peer == peer)
    }
}

/// A ground tuple at `relation@peer`. This is the identity of a fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub rel: RelKey,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(rel: RelKey, args: Vec<String>) -> Self {
        GroundAtom { rel, args }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write_quoted(f, a)?;
        }
        f.write_str(")")
    }
}

/// A located fact. Extensional facts carry a provenance token once they are
/// stored in a world; facts read from a scenario have none yet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub atom: GroundAtom,
    pub token: Option<TokenId>,
    pub author: PrincipalId,
}

impl Fact {
    pub fn new(atom: GroundAtom, author: PrincipalId) -> Self {
        Fact {
            atom,
            token: None,
            author,
        }
    }

    pub fn rel(&self) -> &RelKey {
        &self.atom.rel
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub rel: RelationRef,
    pub args: Vec<Term>,
    /// Erases this atom's contribution to the provenance of derived facts.
    /// Only meaningful in rule bodies.
    pub hidden: bool,
}

impl Atom {
    pub fn new(rel: RelationRef, args: Vec<Term>) -> Self {
        Atom {
            rel,
            args,
            hidden: false,
        }
    }

    /// Variables in name and argument positions.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.rel.relation, &self.rel.peer]
            .into_iter()
            .chain(self.args.iter())
            .filter_map(Term::as_var)
    }

    pub fn substitute(&self, bindings: &Bindings) -> Atom {
        Atom {
            rel: RelationRef {
                relation: self.rel.relation.substitute(bindings),
                peer: self.rel.peer.substitute(bindings),
            },
            args: self.args.iter().map(|t| t.substitute(bindings)).collect(),
            hidden: self.hidden,
        }
    }

    /// The ground atom, if every position is a constant.
    pub fn to_ground(&self) -> Option<GroundAtom> {
        let rel = self.rel.ground()?;
        let args = self
            .args
            .iter()
            .map(|t| t.as_const().map(str::to_string))
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { rel, args })
    }

    pub fn from_ground(g: &GroundAtom) -> Atom {
        Atom::new(g.rel.to_ref(), g.args.iter().map(|a| Term::Const(a.clone())).collect())
    }

    /// True if some assignment of this atom's variables yields `g`.
    pub fn matches(&self, g: &GroundAtom) -> bool {
        if self.args.len() != g.args.len() {
            return false;
        }
        let mut bindings: BTreeMap<&str, &str> = BTreeMap::new();
        let positions = [
            (&self.rel.relation, g.rel.relation.as_str()),
            (&self.rel.peer, g.rel.peer.as_str()),
        ];
        positions
            .into_iter()
            .chain(self.args.iter().zip(g.args.iter().map(String::as_str)))
            .all(|(t, v)| match t {
                Term::Const(c) => c == v,
                Term::Var(x) => *bindings.entry(x.as_str()).or_insert(v) == v,
            })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hidden {
            f.write_str("[hide ")?;
        }
        write_name(f, &self.rel.relation)?;
        f.write_str("@")?;
        write_name(f, &self.rel.peer)?;
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match a {
                Term::Var(v) => write!(f, "${v}")?,
                Term::Const(c) => write_quoted(f, c)?,
            }
        }
        f.write_str(")")?;
        if self.hidden {
            f.write_str("]")?;
        }
        Ok(())
    }
}

fn write_name(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Var(v) => write!(f, "${v}"),
        Term::Const(c) => f.write_str(c),
    }
}

/// Writes `s` as a double-quoted constant, escaping `"` and `\`.
pub fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('"')
}

/// Whether `s` is a legal identifier (`[A-Za-z][A-Za-z0-9_]*`).
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Installed,
    Delegated(PrincipalId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
    pub host: PeerId,
    pub author: PrincipalId,
    pub origin: Origin,
}

impl Rule {
    /// An installed rule authored by its host peer.
    pub fn new(head: Atom, body: Vec<Atom>, host: PeerId) -> Self {
        Rule {
            head,
            body,
            author: host.clone(),
            host,
            origin: Origin::Installed,
        }
    }

    /// Every head variable, including relation and peer variables, must occur
    /// in some body atom, hidden or not.
    pub fn check_safety(&self) -> Result<(), ModelError> {
        if self.body.is_empty() {
            return Err(ModelError::EmptyBody);
        }
        let bound: BTreeSet<&str> = self.body.iter().flat_map(Atom::variables).collect();
        match self.head.variables().find(|v| !bound.contains(v)) {
            Some(v) => Err(ModelError::UnsafeRule(v.to_string())),
            None => Ok(()),
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter())
    }
}

/// Renders `head :- body` without the host/author prefix.
impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// The five rule kinds, by body locality and head locality/kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    /// Local body, local intentional head.
    A,
    /// Local body, local extensional head.
    B,
    /// Local body, remote extensional head (messaging).
    C,
    /// Local body, remote intentional head.
    D,
    /// Some body atom is not local: delegation.
    E,
}

/// Classifies `rule` as hosted at `host`.
///
/// Heads whose peer is a variable count as non-local; their kind is the
/// declared one when the head is ground and extensional otherwise. A local
/// head with a variable relation also defaults to extensional.
pub fn classify_rule(rule: &Rule, host: &PeerId, catalog: &Catalog) -> Result<RuleKind, ModelError> {
    rule.check_safety()?;
    for atom in rule.atoms() {
        if let Some(key) = atom.rel.ground() {
            if !catalog.contains(&key) {
                return Err(ModelError::UnknownRelation(key));
            }
        }
    }
    let host_term = Term::Const(host.0.clone());
    if rule.body.iter().any(|a| a.rel.peer != host_term) {
        return Ok(RuleKind::E);
    }
    let head_local = rule.head.rel.peer == host_term;
    let head_kind = rule
        .head
        .rel
        .ground()
        .and_then(|k| catalog.get(&k))
        .map(|d| d.kind)
        .unwrap_or(RelationKind::Extensional);
    Ok(match (head_local, head_kind) {
        (true, RelationKind::Intentional) => RuleKind::A,
        (true, RelationKind::Extensional) => RuleKind::B,
        (false, RelationKind::Extensional) => RuleKind::C,
        (false, RelationKind::Intentional) => RuleKind::D,
    })
}
