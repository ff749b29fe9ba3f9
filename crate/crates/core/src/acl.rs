//! Relation-level access control lists.
//!
//! Each peer's grants are kept as rows `(relationName, granteeName,
//! privilegeName)` and are exposed to rules as the extensional relation
//! `acl@peer`, so access rights can be queried like any other data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{GroundAtom, PeerId, PrincipalId, RelKey, RelationDecl};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AclError {
    #[error("{grantor} does not own {target}")]
    NotOwner { grantor: PrincipalId, target: RelKey },
    #[error("unknown relation {0}")]
    UnknownRelation(RelKey),
    #[error("the declared owner's owner grant on {0} cannot be revoked")]
    CannotRevokeOwner(RelKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Privilege {
    Read,
    Write,
    /// Implies Read and Write.
    Owner,
}

impl Privilege {
    pub fn name(self) -> &'static str {
        match self {
            Privilege::Read => "read",
            Privilege::Write => "write",
            Privilege::Owner => "owner",
        }
    }
}

impl fmt::Display for Privilege {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Privilege {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(Privilege::Read),
            "write" => Ok(Privilege::Write),
            "owner" => Ok(Privilege::Owner),
            other => Err(format!("unknown privilege `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grant {
    pub target: RelKey,
    pub grantee: PrincipalId,
    pub privilege: Privilege,
}

impl Grant {
    pub fn new(target: RelKey, grantee: PrincipalId, privilege: Privilege) -> Self {
        Grant {
            target,
            grantee,
            privilege,
        }
    }

    /// The row this grant occupies in `acl@target.peer`.
    pub fn to_fact(&self) -> GroundAtom {
        GroundAtom::new(
            RelKey::acl(&self.target.peer),
            vec![
                self.target.relation.clone(),
                self.grantee.0.clone(),
                self.privilege.name().to_string(),
            ],
        )
    }
}

/// Same syntax as the scenario `grant` directive.
impl fmt::Display for Grant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grant {} on {} to {}", self.privilege, self.target, self.grantee)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AclStore {
    owners: BTreeMap<RelKey, PrincipalId>,
    grants: BTreeMap<PeerId, BTreeSet<Grant>>,
}

impl AclStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a relation and gives its owner the Owner grant.
    pub fn declare(&mut self, decl: &RelationDecl) {
        self.owners.insert(decl.key.clone(), decl.owner.clone());
        self.grants.entry(decl.key.peer.clone()).or_default().insert(Grant::new(
            decl.key.clone(),
            decl.owner.clone(),
            Privilege::Owner,
        ));
    }

    pub fn owner_of(&self, target: &RelKey) -> Option<&PrincipalId> {
        self.owners.get(target)
    }

    /// Adds `g`. Returns whether the store changed.
    pub fn grant(&mut self, g: &Grant, grantor: &PrincipalId) -> Result<bool, AclError> {
        self.require_owner(&g.target, grantor)?;
        Ok(self.grants.entry(g.target.peer.clone()).or_default().insert(g.clone()))
    }

    /// Removes `g`. Returns whether the store changed.
    pub fn revoke(&mut self, g: &Grant, grantor: &PrincipalId) -> Result<bool, AclError> {
        self.require_owner(&g.target, grantor)?;
        if g.privilege == Privilege::Owner && self.owners.get(&g.target) == Some(&g.grantee) {
            return Err(AclError::CannotRevokeOwner(g.target.clone()));
        }
        Ok(self.grants.get_mut(&g.target.peer).is_some_and(|set| set.remove(g)))
    }

    fn require_owner(&self, target: &RelKey, grantor: &PrincipalId) -> Result<(), AclError> {
        if self.has_privilege(grantor, target, Privilege::Owner)? {
            Ok(())
        } else {
            Err(AclError::NotOwner {
                grantor: grantor.clone(),
                target: target.clone(),
            })
        }
    }

    /// True if `who` holds `p` on `target` through an explicit grant, an
    /// Owner grant, or by being the peer that hosts `target`.
    pub fn has_privilege(&self, who: &PrincipalId, target: &RelKey, p: Privilege) -> Result<bool, AclError> {
        if !self.owners.contains_key(target) {
            return Err(AclError::UnknownRelation(target.clone()));
        }
        if &target.peer == who {
            return Ok(true);
        }
        let Some(set) = self.grants.get(&target.peer) else {
            return Ok(false);
        };
        let holds = |q: Privilege| set.contains(&Grant::new(target.clone(), who.clone(), q));
        Ok(holds(Privilege::Owner) || holds(p))
    }

    pub fn grants_at<'a>(&'a self, peer: &PeerId) -> impl Iterator<Item = &'a Grant> + 'a {
        self.grants.get(peer).into_iter().flatten()
    }

    pub fn all_grants(&self) -> impl Iterator<Item = &Grant> {
        self.grants.values().flatten()
    }

    /// Contents of `acl@peer`.
    pub fn facts(&self, peer: &PeerId) -> BTreeSet<GroundAtom> {
        self.grants_at(peer).map(Grant::to_fact).collect()
    }

    /// One grant per line, sorted lexicographically.
    pub fn listing(&self, peer: &PeerId) -> Vec<String> {
        let mut lines: Vec<String> = self.grants_at(peer).map(|g| g.to_string()).collect();
        lines.sort();
        lines
    }
}
