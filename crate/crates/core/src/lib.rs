//! Question answering over a knowledge base by dynamic program induction:
//! programs are decoded token by token, and at each step only tokens whose
//! continuation still executes to a non-empty answer are offered to the
//! scorer.

mod error;
pub mod fixtures;
pub mod harness;
pub mod induction;
pub mod kb;
pub mod scorer;
pub mod sexpr;

pub use error::Error;
