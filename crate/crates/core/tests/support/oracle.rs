//! Reference semantics for worlds whose rules name relations and peers by
//! constants.
//!
//! Instead of shipping residual rules, a rule is cut into hops: maximal runs
//! of consecutive body atoms at the same peer, plus an empty first hop when
//! the first atom is not at the rule's host. Hop `j` of a rule that fires in
//! round `n` was matched in round `n - (hops - 1 - j)` against that round's
//! final state. Provenance is replaced by its image in the lattice of
//! principal sets: a fact's clean set holds every principal that can read
//! all base facts of at least one of its derivations.

use std::collections::{BTreeMap, BTreeSet};

use webdamlog::{Atom, GroundAtom, PeerId, PrincipalId, Privilege, Program, RelKey, RelationKind, Rule, Term};

type Clean = BTreeSet<PrincipalId>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundState {
    pub edb: BTreeMap<PeerId, BTreeSet<GroundAtom>>,
    pub idb: BTreeMap<PeerId, BTreeMap<GroundAtom, Clean>>,
}

struct Plan {
    rule: Rule,
    /// Peer of each hop; the empty leading hop is not listed.
    hop_peers: Vec<PeerId>,
    /// Hop index of each body atom.
    hop_of: Vec<usize>,
    /// 1 when the first atom is not at the host.
    lead: u64,
}

pub struct Oracle {
    peers: Vec<PeerId>,
    everyone: Clean,
    decls: BTreeMap<RelKey, (usize, RelationKind)>,
    readers: BTreeMap<RelKey, Clean>,
    writers: BTreeMap<RelKey, Clean>,
    acl_facts: BTreeMap<PeerId, BTreeSet<GroundAtom>>,
    initial: BTreeMap<PeerId, BTreeSet<GroundAtom>>,
    plans: Vec<Plan>,
}

fn ground_peer(t: &Term) -> PeerId {
    PeerId::new(t.as_const().expect("oracle worlds name peers by constants"))
}

fn ground_key(a: &Atom) -> RelKey {
    a.rel.ground().expect("oracle worlds name relations by constants")
}

impl Oracle {
    pub fn new(program: &Program) -> Self {
        let peers: Vec<PeerId> = program.peers.iter().map(|p| p.value.clone()).collect();
        let everyone: Clean = peers
            .iter()
            .cloned()
            .chain(program.principals.iter().map(|p| p.value.clone()))
            .collect();

        let mut decls = BTreeMap::new();
        let mut readers: BTreeMap<RelKey, Clean> = BTreeMap::new();
        let mut writers: BTreeMap<RelKey, Clean> = BTreeMap::new();
        let mut acl_facts: BTreeMap<PeerId, BTreeSet<GroundAtom>> = BTreeMap::new();
        let mut owned = Vec::new();
        for p in &peers {
            owned.push((RelKey::new("acl", p.as_str()), p.clone()));
            decls.insert(RelKey::new("acl", p.as_str()), (3, RelationKind::Extensional));
        }
        for d in &program.declarations {
            let d = &d.value;
            decls.insert(d.key.clone(), (d.arity, d.kind));
            owned.push((d.key.clone(), d.owner.clone()));
        }
        let acl_row = |key: &RelKey, who: &PrincipalId, what: &str| {
            GroundAtom::new(
                RelKey::new("acl", key.peer.as_str()),
                vec![key.relation.clone(), who.as_str().to_string(), what.to_string()],
            )
        };
        for (key, owner) in &owned {
            let host = key.peer.clone();
            readers
                .entry(key.clone())
                .or_default()
                .extend([host.clone(), owner.clone()]);
            writers.entry(key.clone()).or_default().extend([host, owner.clone()]);
            acl_facts
                .entry(key.peer.clone())
                .or_default()
                .insert(acl_row(key, owner, "owner"));
        }
        for g in &program.grants {
            let g = &g.value;
            let (read, write, name) = match g.privilege {
                Privilege::Read => (true, false, "read"),
                Privilege::Write => (false, true, "write"),
                Privilege::Owner => (true, true, "owner"),
            };
            if read {
                readers.get_mut(&g.target).unwrap().insert(g.grantee.clone());
            }
            if write {
                writers.get_mut(&g.target).unwrap().insert(g.grantee.clone());
            }
            acl_facts
                .entry(g.target.peer.clone())
                .or_default()
                .insert(acl_row(&g.target, &g.grantee, name));
        }

        let mut initial: BTreeMap<PeerId, BTreeSet<GroundAtom>> = BTreeMap::new();
        for f in &program.facts {
            initial
                .entry(f.value.atom.rel.peer.clone())
                .or_default()
                .insert(f.value.atom.clone());
        }

        let plans = program
            .rules
            .iter()
            .map(|r| {
                let rule = r.value.clone();
                let mut hop_peers: Vec<PeerId> = Vec::new();
                let mut hop_of = Vec::new();
                for a in &rule.body {
                    let p = ground_peer(&a.rel.peer);
                    if hop_peers.last() != Some(&p) {
                        hop_peers.push(p);
                    }
                    hop_of.push(hop_peers.len() - 1);
                }
                let lead = u64::from(hop_peers[0] != rule.host);
                Plan {
                    rule,
                    hop_peers,
                    hop_of,
                    lead,
                }
            })
            .collect();

        Oracle {
            peers,
            everyone,
            decls,
            readers,
            writers,
            acl_facts,
            initial,
            plans,
        }
    }

    fn reads(&self, who: &PrincipalId, rel: &RelKey) -> bool {
        self.readers.get(rel).is_some_and(|s| s.contains(who))
    }

    fn writes(&self, who: &PrincipalId, rel: &RelKey) -> bool {
        self.writers.get(rel).is_some_and(|s| s.contains(who))
    }

    fn is_kind(&self, g: &GroundAtom, kind: RelationKind) -> bool {
        self.decls.get(&g.rel) == Some(&(g.args.len(), kind))
    }

    /// Fact sets and clean sets of rounds `1..=rounds`.
    pub fn simulate(&self, rounds: u64) -> Vec<RoundState> {
        let mut history: Vec<RoundState> = Vec::new();
        let mut carry = self.initial.clone();
        let mut inbound_msgs: BTreeSet<(GroundAtom, PrincipalId)> = BTreeSet::new();
        let mut inbound_views: BTreeMap<(GroundAtom, PrincipalId), Clean> = BTreeMap::new();

        for n in 1..=rounds {
            let mut state = RoundState::default();
            for p in &self.peers {
                let mut edb = carry.remove(p).unwrap_or_default();
                edb.extend(self.acl_facts.get(p).cloned().unwrap_or_default());
                for (g, author) in &inbound_msgs {
                    if &g.rel.peer == p
                        && g.rel.relation != "acl"
                        && self.is_kind(g, RelationKind::Extensional)
                        && self.writes(author, &g.rel)
                    {
                        edb.insert(g.clone());
                    }
                }
                state.edb.insert(p.clone(), edb);
            }

            for p in &self.peers {
                let mut idb: BTreeMap<GroundAtom, Clean> = BTreeMap::new();
                for ((g, author), clean) in &inbound_views {
                    if &g.rel.peer == p && self.is_kind(g, RelationKind::Intentional) && self.writes(author, &g.rel) {
                        idb.entry(g.clone()).or_default().extend(clean.iter().cloned());
                    }
                }
                loop {
                    let mut next = idb.clone();
                    for plan in self.plans.iter().filter(|pl| pl.hop_peers.last() == Some(p)) {
                        for (head, clean) in self.firings(plan, n, &history, &state.edb[p], &idb) {
                            if &head.rel.peer == p
                                && self.is_kind(&head, RelationKind::Intentional)
                                && self.writes(&plan.rule.author, &head.rel)
                            {
                                next.entry(head).or_default().extend(clean);
                            }
                        }
                    }
                    if next == idb {
                        break;
                    }
                    idb = next;
                }
                state.idb.insert(p.clone(), idb);
            }

            inbound_msgs.clear();
            inbound_views.clear();
            for p in &self.peers {
                for plan in self.plans.iter().filter(|pl| pl.hop_peers.last() == Some(p)) {
                    let author = &plan.rule.author;
                    for (head, clean) in self.firings(plan, n, &history, &state.edb[p], &state.idb[p]) {
                        let local = &head.rel.peer == p;
                        if self.is_kind(&head, RelationKind::Extensional) {
                            if !local {
                                inbound_msgs.insert((head, author.clone()));
                            } else if self.writes(author, &head.rel) {
                                carry.entry(p.clone()).or_default().insert(head);
                            }
                        } else if !local {
                            inbound_views.entry((head, author.clone())).or_default().extend(clean);
                        }
                    }
                }
            }
            history.push(state);
        }
        history
    }

    /// Ground heads the plan derives when its last hop runs in round `n`
    /// over `edb`/`idb` at the last hop's peer, with their clean sets.
    fn firings(
        &self,
        plan: &Plan,
        n: u64,
        history: &[RoundState],
        edb: &BTreeSet<GroundAtom>,
        idb: &BTreeMap<GroundAtom, Clean>,
    ) -> Vec<(GroundAtom, Clean)> {
        let hops = plan.hop_peers.len() as u64;
        // the host starts the rule in round n - (hops - 1) - lead
        if n < hops + plan.lead {
            return Vec::new();
        }
        let mut out = Vec::new();
        self.extend(
            plan,
            0,
            n,
            hops,
            history,
            edb,
            idb,
            BTreeMap::new(),
            self.everyone.clone(),
            &mut out,
        );
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        plan: &Plan,
        i: usize,
        n: u64,
        hops: u64,
        history: &[RoundState],
        edb: &BTreeSet<GroundAtom>,
        idb: &BTreeMap<GroundAtom, Clean>,
        bindings: BTreeMap<String, String>,
        clean: Clean,
        out: &mut Vec<(GroundAtom, Clean)>,
    ) {
        let rule = &plan.rule;
        let Some(atom) = rule.body.get(i) else {
            let args = rule
                .head
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => bindings[v].clone(),
                })
                .collect();
            out.push((GroundAtom::new(ground_key(&rule.head), args), clean));
            return;
        };
        let key = ground_key(atom);
        let peer = &plan.hop_peers[plan.hop_of[i]];
        let round = n - (hops - 1 - plan.hop_of[i] as u64);
        let (e, d) = if round == n {
            (edb, idb)
        } else {
            let s = &history[(round - 1) as usize];
            (&s.edb[peer], &s.idb[peer])
        };
        let who = &rule.author;
        if !self.reads(who, &key) {
            return;
        }
        let base = self.readers[&key].clone();
        let candidates = e
            .iter()
            .filter(|g| g.rel == key)
            .map(|g| (g, &base))
            .chain(d.iter().filter(|(g, c)| g.rel == key && c.contains(who)));
        for (g, fact_clean) in candidates {
            if g.args.len() != atom.args.len() {
                continue;
            }
            let mut b = bindings.clone();
            let fits = atom.args.iter().zip(&g.args).all(|(t, v)| match t {
                Term::Const(c) => c == v,
                Term::Var(x) => b.entry(x.clone()).or_insert_with(|| v.clone()) == v,
            });
            if !fits {
                continue;
            }
            let clean = if atom.hidden {
                clean.clone()
            } else {
                clean.intersection(fact_clean).cloned().collect()
            };
            self.extend(plan, i + 1, n, hops, history, edb, idb, b, clean, out);
        }
    }

    /// Every fact of `state` that `who` may read.
    pub fn readable(&self, state: &RoundState, who: &PrincipalId) -> BTreeSet<GroundAtom> {
        let edb = state
            .edb
            .values()
            .flatten()
            .filter(|g| self.reads(who, &g.rel))
            .cloned();
        let idb = state
            .idb
            .values()
            .flatten()
            .filter(|(g, c)| self.reads(who, &g.rel) && c.contains(who))
            .map(|(g, _)| g.clone());
        edb.chain(idb).collect()
    }

    pub fn principals(&self) -> impl Iterator<Item = &PrincipalId> {
        self.everyone.iter()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&RelKey, usize)> {
        self.decls.iter().map(|(k, (arity, _))| (k, *arity))
    }
}
