//! A toolkit for asserted protocols: sequential protocol specifications
//! with `assert`/`require`/`consume` annotations that act as contact
//! points between separately written protocols.
//!
//! The crate provides the protocol language ([`proto`], [`syntax`]), the
//! well-assertedness analysis ([`assertions`]), an operational semantics
//! with reachability and progress checking ([`semantics`]), interleaving
//! composition under four branching disciplines ([`compose`]),
//! behaviour-preservation and fairness checks ([`verify`]), and
//! state-machine artifacts with code-stub generation and protocol
//! extraction ([`artifacts`]).

pub mod artifacts;
pub mod assertions;
pub mod compose;
pub mod proto;
pub mod semantics;
pub mod syntax;
pub mod verify;

pub use assertions::{env, well_asserted, very_well_asserted, Env};
pub use compose::{compose, compose_with_budget, CompositionResult, Mode};
pub use proto::{Action, ChoiceOp, Polarity, Protocol};
pub use semantics::{has_progress, step, Config, EnsembleConfig, TransitionLabel};
pub use syntax::{parse, parse_file, parse_str, print, print_file, SourceText};
