//! Why-provenance: each derived fact carries a set of alternative
//! derivations, each derivation being the set of base-fact tokens it used.
//! A reader may see a fact when it can read the container relation and every
//! token of at least one derivation.

use std::collections::BTreeSet;
use std::fmt;

use crate::acl::{AclError, AclStore, Privilege};
use crate::model::{PrincipalId, RelKey};

/// Upper bound on the number of alternatives kept per fact.
pub const MAX_ALTERNATIVES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Hands out strictly increasing token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounter {
    next: u64,
}

impl TokenCounter {
    pub fn new() -> Self {
        TokenCounter { next: 1 }
    }

    pub fn fresh(&mut self) -> TokenId {
        if self.next == 0 {
            self.next = 1;
        }
        let id = TokenId(self.next);
        self.next += 1;
        id
    }

    /// The id the next call to `fresh` will return.
    pub fn peek(&self) -> u64 {
        self.next.max(1)
    }
}

/// A base-fact token and the relation its fact lives in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    pub id: TokenId,
    pub source: RelKey,
}

impl Token {
    pub fn new(id: TokenId, source: RelKey) -> Self {
        Token { id, source }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.source, self.id)
    }
}

/// One witness set. Empty means nothing beyond the container is required.
pub type Derivation = BTreeSet<Token>;

/// A nonempty, absorption-reduced set of derivations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    alternatives: BTreeSet<Derivation>,
}

impl Provenance {
    /// The provenance `{{}}`: derivable with no token requirement.
    pub fn unit() -> Self {
        Provenance {
            alternatives: BTreeSet::from([Derivation::new()]),
        }
    }

    /// `{{token}}` for a base fact.
    pub fn base(token: Token) -> Self {
        Provenance {
            alternatives: BTreeSet::from([BTreeSet::from([token])]),
        }
    }

    /// Builds a provenance from arbitrary derivations, absorption-reduced.
    /// An empty input yields `{{}}`.
    pub fn from_derivations(derivations: impl IntoIterator<Item = Derivation>) -> Self {
        let alternatives: BTreeSet<Derivation> = derivations.into_iter().collect();
        if alternatives.is_empty() {
            return Provenance::unit();
        }
        Provenance {
            alternatives: absorb(alternatives),
        }
    }

    pub fn alternatives(&self) -> impl Iterator<Item = &Derivation> {
        self.alternatives.iter()
    }

    pub fn len(&self) -> usize {
        self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alternatives.is_empty()
    }

    /// Union of alternatives, absorption-reduced.
    pub fn merge(&self, other: &Provenance) -> Provenance {
        let all = self.alternatives.union(&other.alternatives).cloned().collect();
        Provenance {
            alternatives: absorb(all),
        }
    }

    /// Keeps the first [`MAX_ALTERNATIVES`] alternatives in lexicographic
    /// order. Returns true if anything was dropped.
    pub fn truncate(&mut self) -> bool {
        if self.alternatives.len() <= MAX_ALTERNATIVES {
            return false;
        }
        self.alternatives = std::mem::take(&mut self.alternatives)
            .into_iter()
            .take(MAX_ALTERNATIVES)
            .collect();
        true
    }

    /// True if some derivation consists only of tokens accepted by `readable`.
    pub fn has_readable_derivation(&self, mut readable: impl FnMut(&Token) -> bool) -> bool {
        self.alternatives.iter().any(|d| d.iter().all(&mut readable))
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, d) in self.alternatives.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, t) in d.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

/// Drops every derivation that is a strict superset of another one.
fn absorb(alternatives: BTreeSet<Derivation>) -> BTreeSet<Derivation> {
    let mut by_size: Vec<Derivation> = alternatives.into_iter().collect();
    by_size.sort_by_key(BTreeSet::len);
    let mut kept: Vec<Derivation> = Vec::with_capacity(by_size.len());
    for d in by_size {
        if !kept.iter().any(|k| k.is_subset(&d)) {
            kept.push(d);
        }
    }
    kept.into_iter().collect()
}

/// Provenance of an extensional fact: the single alternative `{token}`.
pub fn base_provenance(token: Token) -> Provenance {
    Provenance::base(token)
}

/// Provenance of a rule firing: the cross product of the body provenances,
/// unioning token sets per choice. Hidden entries contribute `{{}}`.
pub fn combine<'a>(body: impl IntoIterator<Item = (&'a Provenance, bool)>) -> Provenance {
    let mut acc: BTreeSet<Derivation> = BTreeSet::from([Derivation::new()]);
    for (prov, hidden) in body {
        if hidden {
            continue;
        }
        let mut next = BTreeSet::new();
        for left in &acc {
            for right in &prov.alternatives {
                next.insert(left.union(right).cloned().collect::<Derivation>());
            }
        }
        acc = absorb(next);
    }
    Provenance { alternatives: acc }
}

/// `merge_alternatives(a, b)`: the fact is derivable either way.
pub fn merge_alternatives(a: &Provenance, b: &Provenance) -> Provenance {
    a.merge(b)
}

/// Fine-grained read check: `who` needs Read on the container and on every
/// token's source relation for at least one derivation.
pub fn can_read(who: &PrincipalId, container: &RelKey, prov: &Provenance, acl: &AclStore) -> Result<bool, AclError> {
    if !acl.has_privilege(who, container, Privilege::Read)? {
        return Ok(false);
    }
    'alternatives: for derivation in prov.alternatives() {
        for token in derivation {
            if !acl.has_privilege(who, &token.source, Privilege::Read)? {
                continue 'alternatives;
            }
        }
        return Ok(true);
    }
    Ok(false)
}
