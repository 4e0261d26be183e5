//! ASPfun: a calculus of functional active objects, together with a
//! semi-lattice security model and a security type system.
//!
//! The crate is split along the lines of the calculus itself:
//!
//! * [`term`] -- the static and runtime syntax (terms, methods, identifiers);
//! * [`config`] -- configurations: maps from activities to request queues and
//!   active objects;
//! * [`parser`] / [`printer`] -- a concrete syntax round trip;
//! * [`semantics`] -- the local and parallel reduction relations;
//! * [`secmodel`] -- security levels, global levels, the `(S, delta)`
//!   classification semi-lattice, and visibility;
//! * [`typecheck`] -- the security type checker and minimal-type search;
//! * [`properties`] -- executable metatheory: erasure, indistinguishability,
//!   preservation, confinement and noninterference checks.
//!
//! Everything here is `no_std` + `alloc`; IO and file formats live in the
//! companion CLI crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::result_large_err)]

extern crate alloc;

pub mod config;
pub mod parser;
pub mod printer;
pub mod properties;
pub mod secmodel;
pub mod semantics;
pub mod term;
pub mod typecheck;

pub use config::{Activity, ConfigError, Configuration, RequestEntry};
pub use term::{ActivityId, FutureId, Label, Method, Term, VarName};
