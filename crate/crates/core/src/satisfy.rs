//! Deletion-based satisfaction of dependence atoms.
//!
//! A multi-team satisfies `dep(x; y)` when rows that agree on `x` agree on
//! `y`. The approximate form `dep[p](x; y)` tolerates a deletion set `Y`
//! of at most `p * |rows|` rows whose removal restores exact dependence.
//! `min_deletions` computes the least such `Y` by majority counting inside
//! each `x`-group; that greedy count is provably optimal, and the tests pin
//! it against an exhaustive subset oracle.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::rational::ErrorRate;
use crate::team::{MultiTeam, RowId, Team, TeamError, Value, VarSeq};

/// The rows removed to restore exact dependence, plus the size of the team
/// they were removed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeletionWitness {
    pub removed: BTreeSet<RowId>,
    pub total_rows: usize,
}

impl DeletionWitness {
    pub fn removed_count(&self) -> usize {
        self.removed.len()
    }
}

impl MultiTeam {
    /// Exact dependence: every pair of rows agreeing on `x` agrees on `y`.
    pub fn satisfies_dep(&self, x: &VarSeq, y: &VarSeq) -> Result<bool, TeamError> {
        let mut seen: BTreeMap<Vec<Value>, Vec<Value>> = BTreeMap::new();
        for (_, row) in self.rows() {
            let key = row.project(x)?;
            let val = row.project(y)?;
            match seen.get(&key) {
                None => {
                    seen.insert(key, val);
                }
                Some(prev) if *prev != val => return Ok(false),
                Some(_) => {}
            }
        }
        Ok(true)
    }

    /// The minimum number of rows to delete so the rest satisfies
    /// `dep(x; y)`, with one optimal witness.
    ///
    /// Within each `x`-group only the rows of one `y`-class can stay, so
    /// the group costs its size minus its largest class; groups are
    /// independent. Ties between equally large classes keep the class
    /// containing the smallest row id.
    pub fn min_deletions(&self, x: &VarSeq, y: &VarSeq) -> Result<(usize, DeletionWitness), TeamError> {
        let mut groups: BTreeMap<Vec<Value>, BTreeMap<Vec<Value>, Vec<RowId>>> = BTreeMap::new();
        for (id, row) in self.rows() {
            let key = row.project(x)?;
            let val = row.project(y)?;
            groups.entry(key).or_default().entry(val).or_default().push(id);
        }
        let mut removed = BTreeSet::new();
        for classes in groups.values() {
            let keep = classes
                .values()
                .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
                .expect("every group has a class");
            let keep_class = keep.as_slice();
            for class in classes.values() {
                if class.as_slice() != keep_class {
                    removed.extend(class.iter().copied());
                }
            }
        }
        let count = removed.len();
        Ok((count, DeletionWitness { removed, total_rows: self.len() }))
    }

    /// The least error `p` at which this team satisfies `dep[p](x; y)`:
    /// `min_deletions / |rows|`, and 0 for the empty team.
    pub fn minimal_error(&self, x: &VarSeq, y: &VarSeq) -> Result<ErrorRate, TeamError> {
        let (count, _) = self.min_deletions(x, y)?;
        Ok(ErrorRate::fraction_of(count, self.len()))
    }

    /// Whether a deletion set of size at most `p * |rows|` restores exact
    /// dependence; on success also returns a smallest witness.
    pub fn satisfies_approx(
        &self,
        p: &ErrorRate,
        x: &VarSeq,
        y: &VarSeq,
    ) -> Result<(bool, Option<DeletionWitness>), TeamError> {
        let (count, witness) = self.min_deletions(x, y)?;
        if p.at_least_fraction(count, self.len()) {
            Ok((true, Some(witness)))
        } else {
            Ok((false, None))
        }
    }

    /// Dependence up to finitely many exceptions: trivially true on every
    /// finite team, kept as the degenerate endpoint of the approximate
    /// family.
    pub fn satisfies_modfinite(&self, x: &VarSeq, y: &VarSeq) -> Result<bool, TeamError> {
        for seq in [x, y] {
            for v in seq.iter() {
                if !self.contains_var(v) {
                    return Err(TeamError::UnknownVariable(v.name().to_string()));
                }
            }
        }
        Ok(true)
    }
}

impl Team {
    /// Exact dependence on the underlying set of rows.
    pub fn satisfies_dep(&self, x: &VarSeq, y: &VarSeq) -> Result<bool, TeamError> {
        self.as_multiteam().satisfies_dep(x, y)
    }

    /// Minimum deletions over the distinct rows; ids refer to the
    /// multi-team view of this team (canonical row order).
    pub fn min_deletions(&self, x: &VarSeq, y: &VarSeq) -> Result<(usize, DeletionWitness), TeamError> {
        self.as_multiteam().min_deletions(x, y)
    }

    pub fn minimal_error(&self, x: &VarSeq, y: &VarSeq) -> Result<ErrorRate, TeamError> {
        self.as_multiteam().minimal_error(x, y)
    }

    pub fn satisfies_approx(
        &self,
        p: &ErrorRate,
        x: &VarSeq,
        y: &VarSeq,
    ) -> Result<(bool, Option<DeletionWitness>), TeamError> {
        self.as_multiteam().satisfies_approx(p, x, y)
    }

    pub fn satisfies_modfinite(&self, x: &VarSeq, y: &VarSeq) -> Result<bool, TeamError> {
        self.as_multiteam().satisfies_modfinite(x, y)
    }
}
