//! Library half of the CLI crate: the embedded example corpus and the
//! renderers shared between the binary and the test suites.

pub mod corpus;
pub mod output;
