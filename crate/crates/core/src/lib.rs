//! A multi-peer WebdamLog engine with collaborative access control.
//!
//! Peers hold extensional facts and rules; rules whose bodies mention other
//! peers are delegated to them and run there with the delegator's
//! privileges. Derived facts carry why-provenance, and a principal may read
//! an intentional fact only if it can read the relation that contains it
//! and every base fact of at least one of its derivations.

pub mod acl;
pub mod cli;
pub mod engine;
pub mod model;
pub mod netsim;
pub mod parser;
pub mod provenance;

pub use acl::{AclError, AclStore, Grant, Privilege};
pub use engine::{DelegationMsg, Envelope, Message, PeerState, ViewMsg};
pub use model::{
    classify_rule, Atom, Catalog, Fact, GroundAtom, ModelError, Origin, PeerId, PrincipalId, PrincipalKind, RelKey,
    RelationDecl, RelationKind, RelationRef, Rule, RuleKind, Term,
};
pub use netsim::{QueryError, Trace, World};
pub use parser::{parse_atom, parse_program, parse_rule, print_program, ParseError, Program, Span, Spanned};
pub use provenance::{base_provenance, can_read, combine, merge_alternatives, Provenance, Token, TokenId};
