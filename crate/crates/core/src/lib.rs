//! Budget aggregation for token-based retroactive funding.
//!
//! Voters split a fixed budget (normalized to 1) across projects; a rule
//! turns the ballots into one allocation. The crate implements the rules,
//! outcome metrics, axiom checkers, manipulation experiments and a seeded
//! ballot generator, plus the `retrofund` command-line harness.

pub mod attacks;
pub mod axioms;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod phantoms;
pub mod rules;
pub mod votegen;

pub use error::{Error, Result};
pub use model::{
    canonical_sum, l1_distance, load_ballots_csv, read_ballots_csv, validate_profile,
    write_ballots_csv, Allocation, Ballot, Profile, QuorumBasis, RuleKind, RuleSpec,
    EQ_TOLERANCE, SUM_TOLERANCE,
};
pub use phantoms::{phantom_value, solve_phantoms, PhantomFamily, PhantomSolution, PhantomSystem};
pub use rules::allocate;
