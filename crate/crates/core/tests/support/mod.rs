#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::collections::BTreeSet;
use std::path::PathBuf;

use webdamlog::{Atom, GroundAtom, PrincipalId, RelationRef, Rule, Term, World};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn load(name: &str) -> World {
    World::load(&scenario_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// All `.wdm` files under `scenarios/`, sorted.
pub fn all_scenarios() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_path(""))
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.ends_with(".wdm").then_some(name)
        })
        .collect();
    names.sort();
    names
}

/// A pattern with a fresh variable in every argument position.
pub fn pattern(rel: &webdamlog::RelKey, arity: usize) -> Atom {
    Atom::new(
        RelationRef {
            relation: Term::constant(rel.relation.as_str()),
            peer: Term::constant(rel.peer.as_str()),
        },
        (0..arity).map(|i| Term::var(format!("v{i}"))).collect(),
    )
}

/// Everything `who` can read in `world`, through the public query API.
pub fn readable_via_query(world: &World, who: &PrincipalId) -> BTreeSet<GroundAtom> {
    world
        .catalog
        .iter()
        .flat_map(|d| world.query(who, &pattern(&d.key, d.arity)).unwrap())
        .collect()
}

/// Plain nested-loop evaluation of `rule` over `facts`; every body atom
/// must match one of them.
pub fn naive_heads(rule: &Rule, facts: &[GroundAtom]) -> BTreeSet<GroundAtom> {
    fn go(
        rule: &Rule,
        i: usize,
        facts: &[GroundAtom],
        env: &std::collections::BTreeMap<String, String>,
        out: &mut BTreeSet<GroundAtom>,
    ) {
        let value = |t: &Term, env: &std::collections::BTreeMap<String, String>| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => env.get(v).cloned(),
        };
        let Some(atom) = rule.body.get(i) else {
            let rel = value(&rule.head.rel.relation, env).unwrap();
            let peer = value(&rule.head.rel.peer, env).unwrap();
            let args = rule.head.args.iter().map(|t| value(t, env).unwrap()).collect();
            out.insert(GroundAtom::new(webdamlog::RelKey::new(rel, peer), args));
            return;
        };
        for f in facts {
            if f.args.len() != atom.args.len() {
                continue;
            }
            let mut e = env.clone();
            let slots = [
                (&atom.rel.relation, f.rel.relation.clone()),
                (&atom.rel.peer, f.rel.peer.as_str().to_string()),
            ];
            let ok = slots
                .into_iter()
                .chain(atom.args.iter().zip(f.args.iter().cloned()))
                .all(|(t, v)| match t {
                    Term::Const(c) => *c == v,
                    Term::Var(x) => e.entry(x.clone()).or_insert_with(|| v.clone()) == &v,
                });
            if ok {
                go(rule, i + 1, facts, &e, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(rule, 0, facts, &Default::default(), &mut out);
    out
}
