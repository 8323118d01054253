//! Learning minimal weighted finite automata with an SMT solver in the loop.

pub mod benchgen;
pub mod equations;
pub mod harness;
pub mod learner;
pub mod semiring;
pub mod smt;
pub mod teacher;
pub mod wfa;
