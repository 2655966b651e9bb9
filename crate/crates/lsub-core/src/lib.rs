//! The λsub-calculus with partial substitutions, its metaterms,
//! sister calculi and type systems.

pub mod calculi;
pub mod campaign;
pub mod confluence;
pub mod gen;
pub mod lsub;
pub mod measures;
pub mod par;
pub mod syntax;
pub mod typing;

pub use syntax::{parse, Name, Term};
