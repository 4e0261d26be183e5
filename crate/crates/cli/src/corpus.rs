//! The example corpus, embedded into the binary.
//!
//! Entries are plain concrete syntax with a trailing `sec { .. }` block where
//! a security assignment belongs to the example. The manifest records the
//! expected outcome of each entry along with how that expectation was
//! established.

use aspfun_core::parser::parse_configuration;
use aspfun_core::secmodel::SecAssignment;
use aspfun_core::Configuration;
use serde::{Deserialize, Serialize};

/// Names accepted by [`source`] and [`load_example`].
pub const NAMES: [&str; 5] = [
    "booleans",
    "privatesort",
    "privatesort-fallacious",
    "nspk",
    "borderline",
];

/// Raw concrete syntax of a corpus entry. A trailing `.aspfun` is tolerated.
pub fn source(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".aspfun").unwrap_or(name);
    match name {
        "booleans" => Some(include_str!("../corpus/booleans.aspfun")),
        "privatesort" => Some(include_str!("../corpus/privatesort.aspfun")),
        "privatesort-fallacious" => {
            Some(include_str!("../corpus/privatesort-fallacious.aspfun"))
        }
        "nspk" => Some(include_str!("../corpus/nspk.aspfun")),
        "borderline" => Some(include_str!("../corpus/borderline.aspfun")),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownExample(pub String);

impl core::fmt::Display for UnknownExample {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unknown example {} (known: {})", self.0, NAMES.join(", "))
    }
}

impl std::error::Error for UnknownExample {}

/// Parses a corpus entry together with its security assignment.
pub fn load_example(
    name: &str,
) -> Result<(Configuration, SecAssignment), UnknownExample> {
    let text = source(name).ok_or_else(|| UnknownExample(name.to_string()))?;
    match parse_configuration(text) {
        Ok(pair) => Ok(pair),
        Err(e) => panic!("corpus entry {name} must parse: {e}"),
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub expected: Expected,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Expected {
    pub typecheck: String,
    pub tag: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Evaluation {
    pub note: String,
    pub tag: String,
}

pub fn manifest() -> Manifest {
    serde_json::from_str(include_str!("../corpus/manifest.json"))
        .expect("corpus manifest must be well formed")
}
