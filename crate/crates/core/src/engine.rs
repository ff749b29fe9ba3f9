//! Per-peer round evaluation.
//!
//! Every rule runs as its author: a body atom only matches facts the author
//! may read, and a derived fact only lands in a relation the author may
//! write. Rule bodies are walked left to right; as soon as an atom names
//! another peer, the rest of the rule (with the bindings found so far
//! substituted) is shipped to that peer as a residual rule, together with
//! the provenance accumulated by the local prefix.
//!
//! A round at a peer:
//! 1. incoming messages are checked for Write and join the extensional
//!    facts carried over from the previous round; `acl@peer` is refreshed
//!    from the ACL store;
//! 2. received delegations and remote view contributions replace those of
//!    the previous round;
//! 3. the intentional relations are computed to a fixpoint;
//! 4. rules with local extensional heads produce the next round's
//!    extensional facts, nothing else persists;
//! 5. remote heads become messages (extensional) or view contributions
//!    (intentional), and non-local bodies become delegations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::acl::{AclStore, Privilege};
use crate::model::{
    Atom, Bindings, Catalog, Fact, GroundAtom, Origin, PeerId, PrincipalId, RelKey, RelationDecl, RelationKind, Rule,
    Term,
};
use crate::provenance::{base_provenance, can_read, combine, Provenance, Token, TokenCounter, TokenId};

/// Bound on intentional fixpoint iterations per round.
pub const MAX_FIXPOINT_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("cannot delegate `{rule}`: peer variable ${variable} is unbound")]
    UnboundDelegationTarget { rule: String, variable: String },
}

/// Read-only world context shared by all peers during a round.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub catalog: &'a Catalog,
    pub acl: &'a AclStore,
}

impl<'a> Env<'a> {
    pub fn new(catalog: &'a Catalog, acl: &'a AclStore) -> Self {
        Env { catalog, acl }
    }

    fn peer_exists(&self, peer: &PeerId) -> bool {
        self.catalog.contains(&RelKey::acl(peer))
    }

    fn may(&self, who: &PrincipalId, rel: &RelKey, p: Privilege) -> bool {
        self.acl.has_privilege(who, rel, p).unwrap_or(false)
    }
}

/// Whose privileges a rule body is matched with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access<'a> {
    As(&'a PrincipalId),
    /// No read filtering; used to compare against sandboxed runs.
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdbEntry {
    pub token: TokenId,
    pub author: PrincipalId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdbEntry {
    pub provenance: Provenance,
    pub author: PrincipalId,
}

/// A fact for an extensional relation at another peer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub from: PeerId,
    pub author: PrincipalId,
    pub fact: GroundAtom,
}

/// A residual rule to install at `residual.host`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DelegationMsg {
    pub from: PeerId,
    pub author: PrincipalId,
    pub residual: Rule,
    /// Provenance of the body prefix already matched upstream.
    pub provenance: Provenance,
}

/// A contribution to an intentional relation at another peer, with the
/// provenance it was derived with.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewMsg {
    pub from: PeerId,
    pub author: PrincipalId,
    pub fact: GroundAtom,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Envelope {
    Message(Message),
    Delegation(DelegationMsg),
    View(ViewMsg),
}

impl Envelope {
    pub fn from(&self) -> &PeerId {
        match self {
            Envelope::Message(m) => &m.from,
            Envelope::Delegation(d) => &d.from,
            Envelope::View(v) => &v.from,
        }
    }

    pub fn target(&self) -> &PeerId {
        match self {
            Envelope::Message(m) => &m.fact.rel.peer,
            Envelope::Delegation(d) => &d.residual.host,
            Envelope::View(v) => &v.fact.rel.peer,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Envelope::Message(_) => 0,
            Envelope::Delegation(_) => 1,
            Envelope::View(_) => 2,
        }
    }

    /// Inbox order: sender, then kind, then rendered content.
    pub fn sort_key(&self) -> (PeerId, u8, String) {
        (self.from().clone(), self.kind_rank(), self.to_string())
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Message(m) => write!(f, "{} -> {} author={} {}", m.from, m.fact.rel.peer, m.author, m.fact),
            Envelope::Delegation(d) => write!(
                f,
                "{} -> {} author={} rule {} prov={}",
                d.from, d.residual.host, d.author, d.residual, d.provenance
            ),
            Envelope::View(v) => write!(
                f,
                "{} -> {} author={} view {} prov={}",
                v.from, v.fact.rel.peer, v.author, v.fact, v.provenance
            ),
        }
    }
}

/// A fact derived by one rule evaluation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Derived {
    pub fact: Fact,
    pub provenance: Provenance,
}

/// What a peer produced in one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub outbox: Vec<Envelope>,
    /// Rejected items and notes, one human-readable line each, sorted.
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerState {
    pub id: PeerId,
    pub decls: Vec<RelationDecl>,
    /// Extensional facts holding in the current round.
    pub edb: BTreeMap<GroundAtom, EdbEntry>,
    /// Intentional facts of the current round.
    pub idb: BTreeMap<GroundAtom, IdbEntry>,
    pub installed: Vec<Rule>,
    pub delegated_in: Vec<DelegationMsg>,
    pub views_in: Vec<ViewMsg>,
    /// Extensional facts that will hold next round, with their authors.
    pub carry: BTreeMap<GroundAtom, PrincipalId>,
}

/// Result of the intentional fixpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fixpoint {
    pub idb: BTreeMap<GroundAtom, IdbEntry>,
    /// Facts whose provenance was truncated to the alternative cap.
    pub capped: BTreeSet<GroundAtom>,
    pub iterations: usize,
}

enum Outcome {
    Derived(GroundAtom, Provenance),
    Residual(Rule, Provenance),
    Failed(EngineError),
}

/// The facts a rule body can match at the host.
struct Facts<'a> {
    host: &'a PeerId,
    edb: &'a BTreeMap<GroundAtom, EdbEntry>,
    idb: &'a BTreeMap<GroundAtom, IdbEntry>,
}

impl<'a> Facts<'a> {
    /// Local facts of `rel` (all local facts when `rel` is a variable), with
    /// their provenance, keeping only those readable under `access`.
    fn candidates(&self, rel: &Term, access: Access<'_>, env: &Env<'_>) -> Vec<(&'a GroundAtom, Provenance)> {
        let in_rel = |a: &GroundAtom| match rel {
            Term::Const(r) => &a.rel.relation == r,
            Term::Var(_) => true,
        };
        let mut out = Vec::new();
        for (atom, e) in self.edb.iter().filter(|(a, _)| in_rel(a)) {
            let readable = match access {
                Access::As(who) => env.may(who, &atom.rel, Privilege::Read),
                Access::Unrestricted => true,
            };
            if readable {
                out.push((atom, base_provenance(Token::new(e.token, atom.rel.clone()))));
            }
        }
        for (atom, e) in self.idb.iter().filter(|(a, _)| in_rel(a)) {
            let readable = match access {
                Access::As(who) => can_read(who, &atom.rel, &e.provenance, env.acl).unwrap_or(false),
                Access::Unrestricted => true,
            };
            if readable {
                out.push((atom, e.provenance.clone()));
            }
        }
        out
    }
}

fn bind(term: &Term, value: &str, bindings: &mut Bindings) -> bool {
    match term {
        Term::Const(c) => c == value,
        Term::Var(v) => match bindings.get(v) {
            Some(existing) => existing == value,
            None => {
                bindings.insert(v.clone(), value.to_string());
                true
            }
        },
    }
}

/// Unifies a (partially substituted) local atom with a fact.
fn unify(atom: &Atom, fact: &GroundAtom, bindings: &Bindings) -> Option<Bindings> {
    if atom.args.len() != fact.args.len() {
        return None;
    }
    let mut b = bindings.clone();
    if !bind(&atom.rel.relation, &fact.rel.relation, &mut b) || !bind(&atom.rel.peer, fact.rel.peer.as_str(), &mut b) {
        return None;
    }
    for (t, v) in atom.args.iter().zip(&fact.args) {
        if !bind(t, v, &mut b) {
            return None;
        }
    }
    Some(b)
}

fn evaluate(rule: &Rule, prefix: &Provenance, facts: &Facts<'_>, env: &Env<'_>, access: Access<'_>) -> Vec<Outcome> {
    let mut out = Vec::new();
    walk(rule, 0, &Bindings::new(), prefix.clone(), facts, env, access, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    rule: &Rule,
    idx: usize,
    bindings: &Bindings,
    acc: Provenance,
    facts: &Facts<'_>,
    env: &Env<'_>,
    access: Access<'_>,
    out: &mut Vec<Outcome>,
) {
    let Some(atom) = rule.body.get(idx) else {
        match rule.head.substitute(bindings).to_ground() {
            Some(head) => out.push(Outcome::Derived(head, acc)),
            // unreachable for safe rules
            None => out.push(Outcome::Failed(EngineError::UnboundDelegationTarget {
                rule: rule.to_string(),
                variable: rule.head.variables().next().unwrap_or_default().to_string(),
            })),
        }
        return;
    };
    let atom = atom.substitute(bindings);
    let peer = match &atom.rel.peer {
        Term::Var(v) => {
            out.push(Outcome::Failed(EngineError::UnboundDelegationTarget {
                rule: rule.to_string(),
                variable: v.clone(),
            }));
            return;
        }
        Term::Const(p) => PeerId::new(p.as_str()),
    };
    if &peer != facts.host {
        let residual = Rule {
            head: rule.head.substitute(bindings),
            body: rule.body[idx..].iter().map(|a| a.substitute(bindings)).collect(),
            host: peer,
            author: rule.author.clone(),
            origin: Origin::Delegated(rule.author.clone()),
        };
        out.push(Outcome::Residual(residual, acc));
        return;
    }
    for (fact, prov) in facts.candidates(&atom.rel.relation, access, env) {
        if let Some(next) = unify(&atom, fact, bindings) {
            let acc = combine([(&acc, false), (&prov, atom.hidden)]);
            walk(rule, idx + 1, &next, acc, facts, env, access, out);
        }
    }
}

/// Rules evaluated at a peer, with the provenance of their matched prefix.
fn rule_set(state: &PeerState) -> Vec<(&Rule, Provenance)> {
    let mut rules: Vec<(&Rule, Provenance)> = state
        .installed
        .iter()
        .map(|r| (r, Provenance::unit()))
        .chain(state.delegated_in.iter().map(|d| (&d.residual, d.provenance.clone())))
        .collect();
    rules.sort();
    rules
}

fn merge_idb(
    idb: &mut BTreeMap<GroundAtom, IdbEntry>,
    fact: GroundAtom,
    provenance: &Provenance,
    author: &PrincipalId,
    capped: &mut BTreeSet<GroundAtom>,
) {
    match idb.get_mut(&fact) {
        Some(e) => {
            let mut merged = e.provenance.merge(provenance);
            if merged.truncate() {
                capped.insert(fact);
            }
            e.provenance = merged;
            if author < &e.author {
                e.author = author.clone();
            }
        }
        None => {
            let mut p = provenance.clone();
            if p.truncate() {
                capped.insert(fact.clone());
            }
            idb.insert(
                fact,
                IdbEntry {
                    provenance: p,
                    author: author.clone(),
                },
            );
        }
    }
}

impl PeerState {
    pub fn new(id: PeerId, decls: Vec<RelationDecl>) -> Self {
        PeerState {
            id,
            decls,
            edb: BTreeMap::new(),
            idb: BTreeMap::new(),
            installed: Vec::new(),
            delegated_in: Vec::new(),
            views_in: Vec::new(),
            carry: BTreeMap::new(),
        }
    }

    fn facts(&self) -> Facts<'_> {
        Facts {
            host: &self.id,
            edb: &self.edb,
            idb: &self.idb,
        }
    }

    fn local_intentional(&self, fact: &GroundAtom, env: &Env<'_>) -> bool {
        fact.rel.peer == self.id
            && env
                .catalog
                .get(&fact.rel)
                .is_some_and(|d| d.kind == RelationKind::Intentional && d.arity == fact.args.len())
    }

    /// Least fixpoint of the local intentional relations over the current
    /// extensional facts, seeded with the accepted view contributions.
    pub fn local_fixpoint(&self, env: &Env<'_>) -> Fixpoint {
        let rules = rule_set(self);
        let mut capped = BTreeSet::new();
        let mut idb = BTreeMap::new();
        for v in &self.views_in {
            merge_idb(&mut idb, v.fact.clone(), &v.provenance, &v.author, &mut capped);
        }
        let mut iterations = 0;
        loop {
            iterations += 1;
            let facts = Facts {
                host: &self.id,
                edb: &self.edb,
                idb: &idb,
            };
            let mut next = idb.clone();
            for (rule, prefix) in &rules {
                for outcome in evaluate(rule, prefix, &facts, env, Access::As(&rule.author)) {
                    if let Outcome::Derived(head, prov) = outcome {
                        if self.local_intentional(&head, env) && env.may(&rule.author, &head.rel, Privilege::Write) {
                            merge_idb(&mut next, head, &prov, &rule.author, &mut capped);
                        }
                    }
                }
            }
            if next == idb || iterations >= MAX_FIXPOINT_ITERATIONS {
                idb = next;
                break;
            }
            idb = next;
        }
        Fixpoint {
            idb,
            capped,
            iterations,
        }
    }

    /// Evaluates the local prefix of a delegating rule and returns one
    /// residual per distinct remaining rule, addressed to the peer of the
    /// first non-local atom.
    pub fn split_for_delegation(&self, rule: &Rule, env: &Env<'_>) -> Result<Vec<DelegationMsg>, EngineError> {
        let mut grouped: BTreeMap<Rule, Provenance> = BTreeMap::new();
        for outcome in evaluate(rule, &Provenance::unit(), &self.facts(), env, Access::As(&rule.author)) {
            match outcome {
                Outcome::Residual(r, p) => {
                    let merged = match grouped.get(&r) {
                        Some(existing) => existing.merge(&p),
                        None => p,
                    };
                    grouped.insert(r, merged);
                }
                Outcome::Failed(e) => return Err(e),
                Outcome::Derived(..) => {}
            }
        }
        Ok(grouped
            .into_iter()
            .map(|(residual, provenance)| DelegationMsg {
                from: self.id.clone(),
                author: rule.author.clone(),
                residual,
                provenance,
            })
            .collect())
    }

    /// Facts a rule derives from the current state when its body is matched
    /// with `access`. Only complete local matches count; residuals are not
    /// produced.
    pub fn derive(&self, rule: &Rule, prefix: &Provenance, access: Access<'_>, env: &Env<'_>) -> Vec<Derived> {
        let mut out: BTreeMap<GroundAtom, Provenance> = BTreeMap::new();
        for outcome in evaluate(rule, prefix, &self.facts(), env, access) {
            if let Outcome::Derived(head, prov) = outcome {
                let merged = match out.get(&head) {
                    Some(p) => p.merge(&prov),
                    None => prov,
                };
                out.insert(head, merged);
            }
        }
        out.into_iter()
            .map(|(atom, provenance)| Derived {
                fact: Fact::new(atom, rule.author.clone()),
                provenance,
            })
            .collect()
    }

    /// Runs a delegated rule with the delegator's privileges: body atoms see
    /// only facts the delegator may read, and results are authored by it.
    pub fn evaluate_sandboxed(&self, delegation: &DelegationMsg, env: &Env<'_>) -> Vec<Derived> {
        let delegator = match &delegation.residual.origin {
            Origin::Delegated(c) => c,
            Origin::Installed => &delegation.author,
        };
        let mut derived = self.derive(&delegation.residual, &delegation.provenance, Access::As(delegator), env);
        for d in &mut derived {
            d.fact.author = delegator.clone();
        }
        derived
    }

    /// Facts at this peer that `who` may read.
    pub fn readable_snapshot(&self, who: &PrincipalId, env: &Env<'_>) -> Vec<GroundAtom> {
        let mut out: Vec<GroundAtom> = self
            .edb
            .keys()
            .filter(|a| env.may(who, &a.rel, Privilege::Read))
            .chain(
                self.idb
                    .iter()
                    .filter(|(a, e)| can_read(who, &a.rel, &e.provenance, env.acl).unwrap_or(false))
                    .map(|(a, _)| a),
            )
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// Advances this peer by one round.
    pub fn step(&mut self, inbox: &[Envelope], env: &Env<'_>, tokens: &mut TokenCounter) -> StepOutput {
        let mut rejected = BTreeSet::new();

        // (1) extensional facts of this round
        let mut current = std::mem::take(&mut self.carry);
        for env_msg in inbox {
            let Envelope::Message(m) = env_msg else { continue };
            match self.accept_extensional(&m.fact, &m.author, env) {
                Ok(()) => {
                    current
                        .entry(m.fact.clone())
                        .and_modify(|a| {
                            if m.author < *a {
                                *a = m.author.clone()
                            }
                        })
                        .or_insert_with(|| m.author.clone());
                }
                Err(reason) => {
                    rejected.insert(format!("message {} from {} by {}: {reason}", m.fact, m.from, m.author));
                }
            }
        }
        for atom in env.acl.facts(&self.id) {
            current.insert(atom, self.id.clone());
        }
        let previous = std::mem::take(&mut self.edb);
        self.edb = current
            .into_iter()
            .map(|(atom, author)| {
                let entry = previous.get(&atom).cloned().unwrap_or_else(|| EdbEntry {
                    token: tokens.fresh(),
                    author,
                });
                (atom, entry)
            })
            .collect();

        // (2) delegations and view contributions replace last round's
        let mut delegations: BTreeMap<(PeerId, Rule), Provenance> = BTreeMap::new();
        let mut views: BTreeMap<(PeerId, PrincipalId, GroundAtom), Provenance> = BTreeMap::new();
        for item in inbox {
            match item {
                Envelope::Delegation(d) => {
                    let key = (d.from.clone(), d.residual.clone());
                    let merged = match delegations.get(&key) {
                        Some(p) => p.merge(&d.provenance),
                        None => d.provenance.clone(),
                    };
                    delegations.insert(key, merged);
                }
                Envelope::View(v) => {
                    if !self.local_intentional(&v.fact, env) {
                        rejected.insert(format!(
                            "view {} from {}: not an intentional relation here",
                            v.fact, v.from
                        ));
                    } else if !env.may(&v.author, &v.fact.rel, Privilege::Write) {
                        rejected.insert(format!(
                            "view {} from {} by {}: no write on {}",
                            v.fact, v.from, v.author, v.fact.rel
                        ));
                    } else {
                        let key = (v.from.clone(), v.author.clone(), v.fact.clone());
                        let merged = match views.get(&key) {
                            Some(p) => p.merge(&v.provenance),
                            None => v.provenance.clone(),
                        };
                        views.insert(key, merged);
                    }
                }
                Envelope::Message(_) => {}
            }
        }
        self.delegated_in = delegations
            .into_iter()
            .map(|((from, residual), provenance)| DelegationMsg {
                from,
                author: residual.author.clone(),
                residual,
                provenance,
            })
            .collect();
        self.views_in = views
            .into_iter()
            .map(|((from, author, fact), provenance)| ViewMsg {
                from,
                author,
                fact,
                provenance,
            })
            .collect();

        // (3) intentional fixpoint
        let fixpoint = self.local_fixpoint(env);
        self.idb = fixpoint.idb;
        for fact in &fixpoint.capped {
            rejected.insert(format!(
                "cap {fact}: provenance truncated to {} alternatives",
                crate::provenance::MAX_ALTERNATIVES
            ));
        }
        if fixpoint.iterations >= MAX_FIXPOINT_ITERATIONS {
            rejected.insert(format!("fixpoint stopped after {MAX_FIXPOINT_ITERATIONS} iterations"));
        }

        // (4) + (5) extensional heads, remote heads and delegations
        let facts = self.facts();
        let mut carry: BTreeMap<GroundAtom, PrincipalId> = BTreeMap::new();
        let mut messages: BTreeSet<Message> = BTreeSet::new();
        let mut out_views: BTreeMap<(PrincipalId, GroundAtom), Provenance> = BTreeMap::new();
        let mut out_delegations: BTreeMap<Rule, Provenance> = BTreeMap::new();
        for (rule, prefix) in rule_set(self) {
            let author = &rule.author;
            for outcome in evaluate(rule, &prefix, &facts, env, Access::As(author)) {
                match outcome {
                    Outcome::Derived(head, prov) => {
                        let Some(decl) = env.catalog.get(&head.rel).filter(|d| d.arity == head.args.len()) else {
                            rejected.insert(format!("{head} by {author}: undeclared relation or wrong arity"));
                            continue;
                        };
                        if head.rel.peer != self.id {
                            match decl.kind {
                                RelationKind::Extensional => {
                                    messages.insert(Message {
                                        from: self.id.clone(),
                                        author: author.clone(),
                                        fact: head,
                                    });
                                }
                                RelationKind::Intentional => {
                                    let key = (author.clone(), head);
                                    let merged = match out_views.get(&key) {
                                        Some(p) => p.merge(&prov),
                                        None => prov,
                                    };
                                    out_views.insert(key, merged);
                                }
                            }
                        } else if head.rel.is_acl() {
                            rejected.insert(format!("{head} by {author}: acl is maintained by grants only"));
                        } else if !env.may(author, &head.rel, Privilege::Write) {
                            rejected.insert(format!("{head} by {author}: no write on {}", head.rel));
                        } else if decl.kind == RelationKind::Extensional {
                            carry
                                .entry(head)
                                .and_modify(|a| {
                                    if author < a {
                                        *a = author.clone()
                                    }
                                })
                                .or_insert_with(|| author.clone());
                        }
                    }
                    Outcome::Residual(residual, prov) => {
                        if !env.peer_exists(&residual.host) {
                            rejected.insert(format!("delegation to unknown peer {}: {residual}", residual.host));
                            continue;
                        }
                        let merged = match out_delegations.get(&residual) {
                            Some(p) => p.merge(&prov),
                            None => prov,
                        };
                        out_delegations.insert(residual, merged);
                    }
                    Outcome::Failed(e) => {
                        rejected.insert(e.to_string());
                    }
                }
            }
        }
        self.carry = carry;

        let mut outbox: Vec<Envelope> = messages.into_iter().map(Envelope::Message).collect();
        outbox.extend(out_delegations.into_iter().map(|(residual, provenance)| {
            Envelope::Delegation(DelegationMsg {
                from: self.id.clone(),
                author: residual.author.clone(),
                residual,
                provenance,
            })
        }));
        outbox.extend(out_views.into_iter().map(|((author, fact), provenance)| {
            Envelope::View(ViewMsg {
                from: self.id.clone(),
                author,
                fact,
                provenance,
            })
        }));
        StepOutput {
            outbox,
            rejected: rejected.into_iter().collect(),
        }
    }

    /// Checks an incoming extensional fact against the catalog and the
    /// author's Write privilege.
    fn accept_extensional(&self, fact: &GroundAtom, author: &PrincipalId, env: &Env<'_>) -> Result<(), String> {
        if fact.rel.peer != self.id {
            return Err("addressed to another peer".into());
        }
        match env.catalog.get(&fact.rel) {
            Some(d) if d.kind == RelationKind::Extensional && d.arity == fact.args.len() => {}
            _ => return Err(format!("{} is not an extensional relation of matching arity", fact.rel)),
        }
        if fact.rel.is_acl() {
            return Err("acl is maintained by grants only".into());
        }
        if !env.may(author, &fact.rel, Privilege::Write) {
            return Err(format!("no write on {}", fact.rel));
        }
        Ok(())
    }
}
