//! Exact constructions around restricted permanents: sparse polynomial
//! arithmetic, an algebraic circuit IR, cycle-cover enumeration, gadget
//! compilation of formulas into weighted digraphs, and a tree-decomposition
//! dynamic program emitting circuits for length-restricted permanents.
//! Everything is checked against independent brute-force oracles.

pub mod algebra;
pub mod circuit;
pub mod classics;
pub mod error;
pub mod expsum;
pub mod gadgets;
pub mod generators;
pub mod graph;
pub mod twdp;

pub use error::{Error, Result};
