//! Random scenario generator. Worlds have at most 5 peers, 20 rules and 50
//! facts; relation and peer names in rules are always constants.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_PEERS: usize = 5;
pub const MAX_RULES: usize = 20;
pub const MAX_FACTS: usize = 50;

const CONSTANTS: [&str; 3] = ["k0", "k1", "k2"];
const VARIABLES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone)]
struct Rel {
    name: String,
    peer: String,
    arity: usize,
    ext: bool,
}

impl Rel {
    fn key(&self) -> String {
        format!("{}@{}", self.name, self.peer)
    }
}

/// Scenario text for `seed`.
pub fn random_world(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_peers = rng.gen_range(1..=MAX_PEERS);
    let peers: Vec<String> = (0..n_peers).map(|i| format!("p{i}")).collect();
    let virtuals: Vec<String> = (0..rng.gen_range(0..=2)).map(|i| format!("u{i}")).collect();
    let principals: Vec<String> = peers.iter().chain(&virtuals).cloned().collect();

    let mut rels = Vec::new();
    let mut out = String::new();
    for p in &peers {
        writeln!(out, "peer {p}").unwrap();
    }
    for u in &virtuals {
        writeln!(out, "principal {u}").unwrap();
    }
    for p in &peers {
        for j in 0..rng.gen_range(2..=3) {
            let rel = Rel {
                name: format!("r{j}"),
                peer: p.clone(),
                arity: rng.gen_range(1..=2),
                ext: rng.gen_bool(0.5),
            };
            let owner = if rng.gen_bool(0.8) {
                p.clone()
            } else {
                principals.choose(&mut rng).unwrap().clone()
            };
            let kind = if rel.ext { "ext" } else { "int" };
            writeln!(out, "relation {kind} {}/{} owner {owner}", rel.key(), rel.arity).unwrap();
            rels.push(rel);
        }
    }
    let acl_rels: Vec<Rel> = peers
        .iter()
        .map(|p| Rel {
            name: "acl".into(),
            peer: p.clone(),
            arity: 3,
            ext: true,
        })
        .collect();
    let ext: Vec<&Rel> = rels.iter().filter(|r| r.ext).collect();

    let mut facts = BTreeSet::new();
    if !ext.is_empty() {
        for _ in 0..rng.gen_range(10..=MAX_FACTS) {
            let r = ext.choose(&mut rng).unwrap();
            let args: Vec<String> = (0..r.arity)
                .map(|_| format!("\"{}\"", CONSTANTS.choose(&mut rng).unwrap()))
                .collect();
            facts.insert(format!("fact {}({})", r.key(), args.join(", ")));
        }
    }
    for f in &facts {
        writeln!(out, "{f}").unwrap();
    }

    let mut grants = BTreeSet::new();
    for _ in 0..rng.gen_range(0..=25) {
        let r = if rng.gen_bool(0.1) {
            acl_rels.choose(&mut rng).unwrap()
        } else {
            rels.choose(&mut rng).unwrap()
        };
        let privilege = match rng.gen_range(0..10) {
            0..=6 => "read",
            7..=8 => "write",
            _ => "owner",
        };
        let grantee = principals.choose(&mut rng).unwrap();
        grants.insert(format!("grant {privilege} on {} to {grantee}", r.key()));
    }
    for g in &grants {
        writeln!(out, "{g}").unwrap();
    }

    let mut rules = BTreeSet::new();
    for _ in 0..rng.gen_range(5..=MAX_RULES) {
        if !ext.is_empty() && rng.gen_bool(0.3) {
            let r = ext.choose(&mut rng).unwrap();
            let args: Vec<String> = VARIABLES[..r.arity].iter().map(|v| format!("${v}")).collect();
            let atom = format!("{}({})", r.key(), args.join(", "));
            rules.insert(format!("rule at {}: {atom} :- {atom}", r.peer));
            continue;
        }
        let host = peers.choose(&mut rng).unwrap();
        let author = if rng.gen_bool(0.7) {
            host.clone()
        } else {
            principals.choose(&mut rng).unwrap().clone()
        };
        let mut body = Vec::new();
        let mut bound = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let local = rng.gen_bool(0.6);
            let base = rng.gen_bool(0.7);
            let pool: Vec<&Rel> = rels
                .iter()
                .filter(|r| !local || &r.peer == host)
                .filter(|r| !base || r.ext)
                .collect();
            let r = match pool.choose(&mut rng) {
                _ if rng.gen_bool(0.05) => acl_rels.choose(&mut rng).unwrap(),
                Some(r) => *r,
                None => rels.choose(&mut rng).unwrap(),
            };
            let args: Vec<String> = (0..r.arity)
                .map(|_| {
                    if rng.gen_bool(0.85) {
                        let v = VARIABLES.choose(&mut rng).unwrap();
                        bound.push(*v);
                        format!("${v}")
                    } else {
                        format!("\"{}\"", CONSTANTS.choose(&mut rng).unwrap())
                    }
                })
                .collect();
            let atom = format!("{}({})", r.key(), args.join(", "));
            if rng.gen_bool(0.25) {
                body.push(format!("[hide {atom}]"));
            } else {
                body.push(atom);
            }
        }
        let want_ext = match rng.gen_range(0..4) {
            0 | 1 => Some(false),
            2 => Some(true),
            _ => None,
        };
        let local: Vec<&Rel> = rels
            .iter()
            .filter(|r| &r.peer == host && Some(r.ext) == want_ext)
            .collect();
        let head = match local.choose(&mut rng) {
            Some(r) => *r,
            None => rels.choose(&mut rng).unwrap(),
        };
        let args: Vec<String> = (0..head.arity)
            .map(|_| match bound.choose(&mut rng) {
                Some(v) if rng.gen_bool(0.8) => format!("${v}"),
                _ => format!("\"{}\"", CONSTANTS.choose(&mut rng).unwrap()),
            })
            .collect();
        let as_author = if &author == host {
            String::new()
        } else {
            format!(" as {author}")
        };
        rules.insert(format!(
            "rule at {host}{as_author}: {}({}) :- {}",
            head.key(),
            args.join(", "),
            body.join(", ")
        ));
    }
    for r in &rules {
        writeln!(out, "{r}").unwrap();
    }
    out
}
