//! Toolkit for small-depth sorting networks: a comparator-circuit model with
//! exhaustive 0-1 verification, CNF encodings of "does a depth-`d` network
//! extending a fixed prefix exist", pluggable SAT solving, and the
//! counterexample-guided synthesis loop that ties them together.

pub mod backend;
pub mod cegis;
pub mod encode;
pub mod generators;
pub mod network;
pub mod prefix;
pub mod verify;

pub use network::{BitVector, Comparator, Layer, Network, ValidationError};
pub use verify::{InputFamily, Verdict, VerifyOptions};
