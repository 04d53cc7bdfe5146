//! Mining approximate dependencies from tabular data.
//!
//! Exhaustive lattice scan: every left-hand set up to a size cap
//! (including the empty set, which finds near-constant columns) against
//! every other column, reporting the pairs whose minimal error stays
//! within a threshold. Proper supersets of an exact (error 0) left side
//! for the same column are pruned — they are implied. No sampling, no
//! partition-refinement shortcuts: correctness-first, desk-scale.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::rational::ErrorRate;
use crate::team::{MultiTeam, TeamError, Value, VarSeq, Variable};

/// One mined dependency: `lhs -> rhs` holds after deleting `deletions`
/// rows, an `error` fraction of the team.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningResult {
    pub lhs: BTreeSet<Variable>,
    pub rhs: Variable,
    pub error: ErrorRate,
    pub deletions: usize,
}

impl MiningResult {
    fn sort_key(&self) -> (ErrorRate, usize, Vec<&str>, &str) {
        (
            self.error.clone(),
            self.lhs.len(),
            self.lhs.iter().map(|v| v.name()).collect(),
            self.rhs.name(),
        )
    }
}

impl Serialize for MiningResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut row = s.serialize_struct("MiningResult", 4)?;
        row.serialize_field("lhs", &self.lhs.iter().map(|v| v.name()).collect::<Vec<_>>())?;
        row.serialize_field("rhs", self.rhs.name())?;
        row.serialize_field("deletions", &self.deletions)?;
        row.serialize_field("error", &self.error.as_fraction())?;
        row.end()
    }
}

fn subsets_of_size(vars: &[Variable], size: usize) -> Vec<BTreeSet<Variable>> {
    let mut out = Vec::new();
    let mut indices: Vec<usize> = (0..size).collect();
    if size > vars.len() {
        return out;
    }
    loop {
        out.push(indices.iter().map(|&i| vars[i].clone()).collect());
        // Next combination in lexicographic order.
        let mut k = size;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if indices[k] + 1 <= vars.len() - (size - k) {
                indices[k] += 1;
                for j in k + 1..size {
                    indices[j] = indices[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Scans every candidate `LHS -> rhs` with `|LHS| <= max_lhs_size` and
/// `rhs` outside `LHS`, keeping the pairs whose minimal error is at most
/// `threshold`. Results are sorted by (error, left-side size, names).
/// Once an exact left side is found for a column, its proper supersets
/// are dropped: they cannot say anything new.
pub fn mine(
    team: &MultiTeam,
    max_lhs_size: usize,
    threshold: &ErrorRate,
) -> Result<Vec<MiningResult>, TeamError> {
    let domain: Vec<Variable> = team.domain().to_vec();
    let mut exact: BTreeMap<Variable, Vec<BTreeSet<Variable>>> = BTreeMap::new();
    let mut results = Vec::new();
    for size in 0..=max_lhs_size.min(domain.len()) {
        for lhs in subsets_of_size(&domain, size) {
            let lhs_seq: VarSeq = lhs.iter().cloned().collect();
            for rhs in &domain {
                if lhs.contains(rhs) {
                    continue;
                }
                if exact
                    .get(rhs)
                    .is_some_and(|sets| sets.iter().any(|s| s.is_subset(&lhs)))
                {
                    continue;
                }
                let rhs_seq = VarSeq::new(vec![rhs.clone()]);
                let (deletions, _) = team.min_deletions(&lhs_seq, &rhs_seq)?;
                let error = ErrorRate::fraction_of(deletions, team.len());
                if error > *threshold {
                    continue;
                }
                if error.is_zero() {
                    exact.entry(rhs.clone()).or_default().push(lhs.clone());
                }
                results.push(MiningResult { lhs: lhs.clone(), rhs: rhs.clone(), error, deletions });
            }
        }
    }
    results.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(results)
}

/// Distinct value count and the largest single-value multiplicity of one
/// column.
pub fn column_stats(team: &MultiTeam, v: &Variable) -> Result<(usize, usize), TeamError> {
    let seq = VarSeq::new(vec![v.clone()]);
    let mut multiplicity: BTreeMap<Vec<Value>, usize> = BTreeMap::new();
    for (_, row) in team.rows() {
        *multiplicity.entry(row.project(&seq)?).or_default() += 1;
    }
    let top = multiplicity.values().max().copied().unwrap_or(0);
    Ok((multiplicity.len(), top))
}

/// CSV export: `lhs,rhs,deletions,error` with the left side space-joined
/// and the error always printed as a fraction.
pub fn mining_results_to_csv(results: &[MiningResult]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["lhs", "rhs", "deletions", "error"])
        .expect("in-memory write");
    for r in results {
        let lhs = r.lhs.iter().map(|v| v.name()).collect::<Vec<_>>().join(" ");
        writer
            .write_record([
                lhs.as_str(),
                r.rhs.name(),
                &r.deletions.to_string(),
                &r.error.as_fraction(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 output")
}

pub fn mining_results_to_json(results: &[MiningResult]) -> serde_json::Value {
    serde_json::to_value(results).expect("results serialize")
}
