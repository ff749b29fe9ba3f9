//! Lockstep world scheduler.
//!
//! Everything a peer sends in round `n` is delivered at the start of round
//! `n + 1`. Inboxes are sorted by sender, kind and rendered content, and
//! peers are stepped in name order, so a scenario always yields the same
//! trace.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::acl::{AclError, AclStore, Grant};
use crate::engine::{Env, Envelope, PeerState};
use crate::model::{Atom, Catalog, GroundAtom, PeerId, PrincipalId, PrincipalKind, RelKey};
use crate::parser::{parse_program, ParseError, Program};
use crate::provenance::{can_read, TokenCounter};

/// Default round cap for [`World::run_until_quiescent`].
pub const DEFAULT_MAX_ROUNDS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown principal `{0}`")]
    UnknownPrincipal(PrincipalId),
}

/// What happened in one round. Every section is sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u64,
    /// Extensional facts sent to other peers.
    pub messages: Vec<String>,
    /// Residual rules and remote view contributions sent to other peers.
    pub delegations: Vec<String>,
    pub edb: Vec<String>,
    pub idb: Vec<String>,
    pub rejected: Vec<String>,
}

impl fmt::Display for RoundRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "round {}", self.round)?;
        let sections = [
            ("messages", &self.messages),
            ("delegations", &self.delegations),
            ("edb", &self.edb),
            ("idb", &self.idb),
            ("rejected", &self.rejected),
        ];
        for (name, lines) in sections {
            writeln!(f, "  {name}")?;
            for line in lines {
                writeln!(f, "    {line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub rounds: Vec<RoundRecord>,
}

impl Trace {
    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn extend(&mut self, other: Trace) {
        self.rounds.extend(other.rounds);
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rounds {
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

/// How [`World::run_until_quiescent`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The last round left the world exactly as it found it.
    Quiescent,
    /// The round cap was reached first.
    Capped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub peers: BTreeMap<PeerId, PeerState>,
    pub principals: BTreeMap<PrincipalId, PrincipalKind>,
    pub catalog: Catalog,
    pub acl: AclStore,
    /// Sent during the last round, delivered during the next.
    pub in_flight: Vec<Envelope>,
    pub round: u64,
    pub tokens: TokenCounter,
}

impl World {
    /// Parses, validates and loads a scenario.
    pub fn load(text: &str) -> Result<World, ParseError> {
        World::from_program(&parse_program(text)?)
    }

    /// Builds the initial world: stated facts hold in round 1, authored by
    /// their peer; grants are issued by the owner of their relation.
    pub fn from_program(program: &Program) -> Result<World, ParseError> {
        program.validate()?;
        let catalog = program.catalog();
        let mut acl = AclStore::new();
        for d in catalog.iter() {
            acl.declare(d);
        }
        for g in &program.grants {
            let owner = acl
                .owner_of(&g.value.target)
                .cloned()
                .expect("validated grant targets are declared");
            acl.grant(&g.value, &owner).expect("owners may grant");
        }
        let mut principals = BTreeMap::new();
        let mut peers = BTreeMap::new();
        for p in &program.peers {
            principals.insert(p.value.clone(), PrincipalKind::Peer);
            let decls = catalog.at_peer(&p.value).cloned().collect();
            peers.insert(p.value.clone(), PeerState::new(p.value.clone(), decls));
        }
        for p in &program.principals {
            principals.insert(p.value.clone(), PrincipalKind::Virtual);
        }
        for f in &program.facts {
            let peer = peers
                .get_mut(&f.value.atom.rel.peer)
                .expect("validated facts live at declared peers");
            peer.carry.insert(f.value.atom.clone(), f.value.author.clone());
        }
        for r in &program.rules {
            peers
                .get_mut(&r.value.host)
                .expect("validated rules live at declared peers")
                .installed
                .push(r.value.clone());
        }
        for p in peers.values_mut() {
            p.installed.sort();
        }
        Ok(World {
            peers,
            principals,
            catalog,
            acl,
            in_flight: Vec::new(),
            round: 0,
            tokens: TokenCounter::new(),
        })
    }

    pub fn env(&self) -> Env<'_> {
        Env::new(&self.catalog, &self.acl)
    }

    pub fn peer(&self, id: &str) -> Option<&PeerState> {
        self.peers.get(&PeerId::from(id))
    }

    /// The in-flight items grouped by destination, in delivery order.
    pub fn inboxes(&self) -> BTreeMap<PeerId, Vec<Envelope>> {
        let mut out: BTreeMap<PeerId, Vec<Envelope>> = BTreeMap::new();
        for e in &self.in_flight {
            out.entry(e.target().clone()).or_default().push(e.clone());
        }
        for inbox in out.values_mut() {
            inbox.sort_by_cached_key(Envelope::sort_key);
        }
        out
    }

    /// Advances every peer by one round.
    pub fn step(&mut self) -> RoundRecord {
        self.round += 1;
        let mut inboxes = self.inboxes();
        let env = Env::new(&self.catalog, &self.acl);
        let mut record = RoundRecord {
            round: self.round,
            ..RoundRecord::default()
        };
        let mut outbox = Vec::new();
        for (id, peer) in self.peers.iter_mut() {
            let inbox = inboxes.remove(id).unwrap_or_default();
            let out = peer.step(&inbox, &env, &mut self.tokens);
            record
                .rejected
                .extend(out.rejected.into_iter().map(|r| format!("{id}: {r}")));
            outbox.extend(out.outbox);
        }
        for (target, lost) in inboxes {
            for e in lost {
                record.rejected.push(format!("{}: no such peer {target}", e.from()));
            }
        }

        for e in &outbox {
            match e {
                Envelope::Message(_) => record.messages.push(e.to_string()),
                Envelope::Delegation(_) | Envelope::View(_) => record.delegations.push(e.to_string()),
            }
        }
        for peer in self.peers.values() {
            for (atom, entry) in &peer.edb {
                record
                    .edb
                    .push(format!("fact {atom} token={} author={}", entry.token, entry.author));
            }
            for (atom, entry) in &peer.idb {
                record.idb.push(format!("fact {atom} prov={}", entry.provenance));
            }
        }
        for section in [
            &mut record.messages,
            &mut record.delegations,
            &mut record.edb,
            &mut record.idb,
            &mut record.rejected,
        ] {
            section.sort();
        }
        outbox.sort_by_cached_key(|e| (e.target().clone(), e.sort_key()));
        self.in_flight = outbox;
        record
    }

    /// Runs exactly `rounds` rounds.
    pub fn run(&mut self, rounds: u64) -> Trace {
        Trace {
            rounds: (0..rounds).map(|_| self.step()).collect(),
        }
    }

    /// Runs until a round leaves the world unchanged (apart from the round
    /// counter), or until `max_rounds` rounds have run.
    pub fn run_until_quiescent(&mut self, max_rounds: u64) -> (Trace, Termination) {
        let mut trace = Trace::default();
        for _ in 0..max_rounds {
            let before = (self.peers.clone(), self.in_flight.clone(), self.tokens.clone());
            trace.rounds.push(self.step());
            if before == (self.peers.clone(), self.in_flight.clone(), self.tokens.clone()) {
                return (trace, Termination::Quiescent);
            }
        }
        (trace, Termination::Capped)
    }

    pub fn grant(&mut self, g: &Grant, grantor: &PrincipalId) -> Result<bool, AclError> {
        self.acl.grant(g, grantor)
    }

    pub fn revoke(&mut self, g: &Grant, grantor: &PrincipalId) -> Result<bool, AclError> {
        self.acl.revoke(g, grantor)
    }

    /// Current facts matching `pattern` that `who` may read, sorted.
    /// Extensional facts need Read on their relation; intentional facts
    /// also need a derivation whose base facts are all readable.
    pub fn query(&self, who: &PrincipalId, pattern: &Atom) -> Result<Vec<GroundAtom>, QueryError> {
        if !self.principals.contains_key(who) {
            return Err(QueryError::UnknownPrincipal(who.clone()));
        }
        let key: RelKey = pattern
            .rel
            .ground()
            .ok_or_else(|| QueryError::UnknownRelation(pattern.to_string()))?;
        if !self.catalog.contains(&key) {
            return Err(QueryError::UnknownRelation(key.to_string()));
        }
        let Some(peer) = self.peers.get(&key.peer) else {
            return Err(QueryError::UnknownRelation(key.to_string()));
        };
        let unknown = |_: AclError| QueryError::UnknownRelation(key.to_string());
        let mut out = Vec::new();
        for (atom, _) in peer.edb.iter().filter(|(a, _)| pattern.matches(a)) {
            if self
                .acl
                .has_privilege(who, &atom.rel, crate::acl::Privilege::Read)
                .map_err(unknown)?
            {
                out.push(atom.clone());
            }
        }
        for (atom, entry) in peer.idb.iter().filter(|(a, _)| pattern.matches(a)) {
            if can_read(who, &atom.rel, &entry.provenance, &self.acl).map_err(unknown)? {
                out.push(atom.clone());
            }
        }
        out.sort();
        Ok(out)
    }
}
