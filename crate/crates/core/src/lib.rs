//! Approximate functional dependence over teams and multi-teams.
//!
//! A team is a set of variable assignments; a multi-team keeps duplicate
//! rows apart with indices. `dep[p](x ; y)` holds when some sub-team of
//! relative size at least `1 - p` satisfies the exact dependence of `y`
//! on `x`; the crate computes minimal error rates with exact rational
//! arithmetic, checks and searches derivations in a weighted inference
//! calculus, builds counterexample teams for non-derivable atoms, and
//! mines approximate dependencies from tabular data.

pub mod atom;
pub mod calculus;
pub mod completeness;
pub mod discovery;
pub mod io;
pub mod rational;
pub mod satisfy;
pub mod team;

pub use atom::{Atom, AtomParseError, NormalizedAtom, SigmaSet};
pub use calculus::{
    check_derivation, d_tau, derives, min_derivable_weight, Derivation, DerivationError, Rule,
    Side, Step,
};
pub use completeness::{
    build_tau_context, build_x_tau, countermodel_report, find_countermodel,
    semantic_entails_bruteforce, verify_countermodel, CompletenessError, Countermodel,
    CountermodelReport, SigmaCheck, TauContext,
};
pub use discovery::{
    column_stats, mine, mining_results_to_csv, mining_results_to_json, MiningResult,
};
pub use io::{multiteam_from_json, multiteam_to_json, read_multiteam_csv, write_multiteam_csv};
pub use rational::{ErrorRate, RateError};
pub use satisfy::DeletionWitness;
pub use team::{Assignment, MultiTeam, RowId, Team, TeamError, Value, VarSeq, Variable};
