//! Teams and multi-teams of variable assignments.
//!
//! A *team* is a set of assignments over a fixed variable domain; a
//! *multi-team* is a bag of assignments, realised as a set of integer row
//! indices plus a map from index to assignment, so distinct rows may carry
//! equal assignments. Restriction behaves differently on the two: team
//! restriction collapses duplicates, multi-team restriction keeps every
//! index. That difference is load-bearing for approximate dependence and is
//! exercised heavily by the tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by team construction and restriction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TeamError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable name must be nonempty")]
    EmptyVariableName,
    #[error("duplicate variable {0} in domain")]
    DuplicateVariable(String),
    #[error("row {row} has {got} values but the domain has {want}")]
    RowArity { row: usize, got: usize, want: usize },
}

/// An opaque scalar compared by exact equality; `Int(4)` and `Text("4")`
/// are distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => s.serialize_i64(*n),
            Value::Text(t) => s.serialize_str(t),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| D::Error::custom("value number must be an integer")),
            serde_json::Value::String(s) => Ok(Value::Text(s)),
            other => Err(D::Error::custom(format!("unsupported value {other}"))),
        }
    }
}

/// A nonempty variable name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, TeamError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TeamError::EmptyVariableName);
        }
        Ok(Variable(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Variable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Variable::new(name).map_err(D::Error::custom)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A finite, possibly empty sequence of variables; repetitions allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarSeq(Vec<Variable>);

impl VarSeq {
    pub fn new(vars: Vec<Variable>) -> Self {
        VarSeq(vars)
    }

    pub fn empty() -> Self {
        VarSeq(Vec::new())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Variable] {
        &self.0
    }

    /// The underlying variable set, order and repetition forgotten.
    pub fn to_set(&self) -> BTreeSet<Variable> {
        self.0.iter().cloned().collect()
    }

    pub fn concat(&self, other: &VarSeq) -> VarSeq {
        let mut vars = self.0.clone();
        vars.extend(other.0.iter().cloned());
        VarSeq(vars)
    }

    /// Splits into `(prefix, suffix)` at `k`; `None` when `k` is out of range.
    pub fn split_at_checked(&self, k: usize) -> Option<(VarSeq, VarSeq)> {
        (k <= self.0.len())
            .then(|| (VarSeq(self.0[..k].to_vec()), VarSeq(self.0[k..].to_vec())))
    }

    pub fn starts_with(&self, prefix: &VarSeq) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0
    }
}

impl From<Vec<Variable>> for VarSeq {
    fn from(vars: Vec<Variable>) -> Self {
        VarSeq(vars)
    }
}

impl FromIterator<Variable> for VarSeq {
    fn from_iter<I: IntoIterator<Item = Variable>>(iter: I) -> Self {
        VarSeq(iter.into_iter().collect())
    }
}

impl fmt::Display for VarSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A total map from the domain variables to values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    bindings: BTreeMap<Variable, Value>,
}

impl Assignment {
    pub fn new(bindings: BTreeMap<Variable, Value>) -> Self {
        Assignment { bindings }
    }

    pub fn get(&self, var: &Variable) -> Option<&Value> {
        self.bindings.get(var)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Variable> {
        self.bindings.keys()
    }

    /// The value tuple of this assignment on the sequence `x`, in order and
    /// with repetitions.
    pub fn project(&self, x: &VarSeq) -> Result<Vec<Value>, TeamError> {
        x.iter()
            .map(|v| {
                self.bindings
                    .get(v)
                    .cloned()
                    .ok_or_else(|| TeamError::UnknownVariable(v.name().to_string()))
            })
            .collect()
    }

    /// Keeps only the bindings for `vars`.
    fn restrict(&self, vars: &BTreeSet<Variable>) -> Assignment {
        Assignment {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| vars.contains(v))
                .map(|(v, val)| (v.clone(), val.clone()))
                .collect(),
        }
    }
}

/// Identifies one row of a [`MultiTeam`]. Dense integers assigned at
/// ingestion, preserving source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub usize);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn validate_domain(domain: &[Variable]) -> Result<BTreeSet<Variable>, TeamError> {
    let mut seen = BTreeSet::new();
    for v in domain {
        if !seen.insert(v.clone()) {
            return Err(TeamError::DuplicateVariable(v.name().to_string()));
        }
    }
    Ok(seen)
}

fn check_row(domain: &BTreeSet<Variable>, row: &Assignment, index: usize) -> Result<(), TeamError> {
    if row.bindings.len() != domain.len() || !row.domain().all(|v| domain.contains(v)) {
        return Err(TeamError::RowArity {
            row: index,
            got: row.bindings.len(),
            want: domain.len(),
        });
    }
    Ok(())
}

/// A set of assignments over a shared domain. The domain keeps its
/// presentation order for serialization; rows are an order-free set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Team {
    domain: Vec<Variable>,
    rows: BTreeSet<Assignment>,
}

impl Team {
    pub fn new(domain: Vec<Variable>, rows: BTreeSet<Assignment>) -> Result<Self, TeamError> {
        let domain_set = validate_domain(&domain)?;
        for (i, row) in rows.iter().enumerate() {
            check_row(&domain_set, row, i)?;
        }
        Ok(Team { domain, rows })
    }

    pub fn domain(&self) -> &[Variable] {
        &self.domain
    }

    pub fn rows(&self) -> impl Iterator<Item = &Assignment> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains_var(&self, var: &Variable) -> bool {
        self.domain.iter().any(|v| v == var)
    }

    /// Set-style restriction to `vars`: assignments that become equal
    /// collapse into one row.
    pub fn restrict(&self, vars: &BTreeSet<Variable>) -> Result<Team, TeamError> {
        for v in vars {
            if !self.contains_var(v) {
                return Err(TeamError::UnknownVariable(v.name().to_string()));
            }
        }
        let domain: Vec<Variable> =
            self.domain.iter().filter(|v| vars.contains(v)).cloned().collect();
        let rows = self.rows.iter().map(|r| r.restrict(vars)).collect();
        Ok(Team { domain, rows })
    }

    /// Views this team as a multi-team with one index per row. Indices are
    /// dense integers in row order, standing in for the rows themselves.
    pub fn as_multiteam(&self) -> MultiTeam {
        MultiTeam {
            domain: self.domain.clone(),
            rows: self.rows.iter().cloned().enumerate().map(|(i, r)| (RowId(i), r)).collect(),
        }
    }
}

/// An indexed bag of assignments: a set of row indices plus a total map
/// from index to assignment. Distinct indices may map to equal assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiTeam {
    domain: Vec<Variable>,
    rows: BTreeMap<RowId, Assignment>,
}

impl MultiTeam {
    pub fn new(domain: Vec<Variable>, rows: BTreeMap<RowId, Assignment>) -> Result<Self, TeamError> {
        let domain_set = validate_domain(&domain)?;
        for (id, row) in &rows {
            check_row(&domain_set, row, id.0)?;
        }
        Ok(MultiTeam { domain, rows })
    }

    /// Builds a multi-team from rows in source order, assigning ids 0, 1, ...
    pub fn from_rows(domain: Vec<Variable>, rows: Vec<Assignment>) -> Result<Self, TeamError> {
        Self::new(
            domain,
            rows.into_iter().enumerate().map(|(i, r)| (RowId(i), r)).collect(),
        )
    }

    pub fn domain(&self) -> &[Variable] {
        &self.domain
    }

    pub fn rows(&self) -> impl Iterator<Item = (RowId, &Assignment)> {
        self.rows.iter().map(|(id, row)| (*id, row))
    }

    pub fn row(&self, id: RowId) -> Option<&Assignment> {
        self.rows.get(&id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains_var(&self, var: &Variable) -> bool {
        self.domain.iter().any(|v| v == var)
    }

    /// Bag-style restriction: every index survives, so multiplicity is
    /// preserved even when restricted assignments coincide.
    pub fn restrict(&self, vars: &BTreeSet<Variable>) -> Result<MultiTeam, TeamError> {
        for v in vars {
            if !self.contains_var(v) {
                return Err(TeamError::UnknownVariable(v.name().to_string()));
            }
        }
        let domain: Vec<Variable> =
            self.domain.iter().filter(|v| vars.contains(v)).cloned().collect();
        let rows = self.rows.iter().map(|(id, r)| (*id, r.restrict(vars))).collect();
        Ok(MultiTeam { domain, rows })
    }

    /// Forgets multiplicity, collapsing equal assignments into a set team.
    pub fn to_team(&self) -> Team {
        Team {
            domain: self.domain.clone(),
            rows: self.rows.values().cloned().collect(),
        }
    }

    /// Drops rows whose assignment already appeared under a smaller id,
    /// keeping first occurrences with their original ids. Returns the
    /// deduplicated multi-team and the number of dropped rows.
    pub fn dedup_rows(&self) -> (MultiTeam, usize) {
        let mut seen: BTreeSet<&Assignment> = BTreeSet::new();
        let mut kept = BTreeMap::new();
        for (id, row) in &self.rows {
            if seen.insert(row) {
                kept.insert(*id, row.clone());
            }
        }
        let dropped = self.rows.len() - kept.len();
        (MultiTeam { domain: self.domain.clone(), rows: kept }, dropped)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    pub fn var(name: &str) -> Variable {
        Variable::new(name).unwrap()
    }

    fn assignment(pairs: &[(&str, i64)]) -> Assignment {
        Assignment::new(
            pairs
                .iter()
                .map(|(name, value)| (var(name), Value::Int(*value)))
                .collect(),
        )
    }

    fn three_var_multiteam(rows: &[(i64, i64, i64)]) -> MultiTeam {
        MultiTeam::from_rows(
            vec![var("x"), var("y"), var("z")],
            rows.iter()
                .map(|(x, y, z)| assignment(&[("x", *x), ("y", *y), ("z", *z)]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn projection_follows_sequence_order_and_repetition() {
        let s = assignment(&[("x", 1), ("y", 2)]);
        let seq = VarSeq::new(vec![var("y"), var("x"), var("y")]);
        assert_eq!(
            s.project(&seq).unwrap(),
            vec![Value::Int(2), Value::Int(1), Value::Int(2)]
        );
        assert_eq!(s.project(&VarSeq::empty()).unwrap(), Vec::<Value>::new());
        assert_eq!(
            s.project(&VarSeq::new(vec![var("w")])),
            Err(TeamError::UnknownVariable("w".into()))
        );
    }

    #[test]
    fn projection_concat_concatenates() {
        let s = assignment(&[("x", 1), ("y", 2), ("z", 3)]);
        let a = VarSeq::new(vec![var("z"), var("x")]);
        let b = VarSeq::new(vec![var("y")]);
        let mut joined = s.project(&a).unwrap();
        joined.extend(s.project(&b).unwrap());
        assert_eq!(s.project(&a.concat(&b)).unwrap(), joined);
    }

    #[test]
    fn team_restriction_collapses_duplicates() {
        // Three rows over (x, y, z) that collapse to two on (x, y).
        let rows: BTreeSet<Assignment> = [
            assignment(&[("x", 0), ("y", 0), ("z", 0)]),
            assignment(&[("x", 0), ("y", 0), ("z", 1)]),
            assignment(&[("x", 0), ("y", 1), ("z", 1)]),
        ]
        .into();
        let team = Team::new(vec![var("x"), var("y"), var("z")], rows).unwrap();
        let restricted = team
            .restrict(&[var("x"), var("y")].into_iter().collect())
            .unwrap();
        assert_eq!(restricted.len(), 2);
        assert_eq!(restricted.domain(), &[var("x"), var("y")]);
    }

    #[test]
    fn multiteam_restriction_preserves_indices() {
        let m = three_var_multiteam(&[(0, 0, 0), (0, 0, 1), (0, 1, 1)]);
        let restricted = m
            .restrict(&[var("x"), var("y")].into_iter().collect())
            .unwrap();
        assert_eq!(restricted.len(), 3);
        let ids: Vec<RowId> = restricted.rows().map(|(id, _)| id).collect();
        assert_eq!(ids, vec![RowId(0), RowId(1), RowId(2)]);
    }

    #[test]
    fn restriction_to_full_domain_is_identity() {
        let m = three_var_multiteam(&[(1, 2, 3), (4, 5, 6)]);
        let full: BTreeSet<Variable> = m.domain().iter().cloned().collect();
        assert_eq!(m.restrict(&full).unwrap(), m);
        let t = m.to_team();
        assert_eq!(t.restrict(&full).unwrap(), t);
    }

    #[test]
    fn restriction_to_empty_set_leaves_one_empty_assignment() {
        let m = three_var_multiteam(&[(1, 2, 3), (4, 5, 6)]);
        let t = m.to_team();
        let restricted = t.restrict(&BTreeSet::new()).unwrap();
        assert_eq!(restricted.len(), 1);

        let empty = Team::new(vec![var("x")], BTreeSet::new()).unwrap();
        assert_eq!(empty.restrict(&BTreeSet::new()).unwrap().len(), 0);
    }

    #[test]
    fn restriction_to_unknown_variable_errors() {
        let m = three_var_multiteam(&[(1, 2, 3)]);
        let missing: BTreeSet<Variable> = [var("w")].into();
        assert_eq!(
            m.restrict(&missing),
            Err(TeamError::UnknownVariable("w".into()))
        );
    }

    #[test]
    fn team_as_multiteam_has_one_index_per_row() {
        let empty = Team::new(vec![var("x")], BTreeSet::new()).unwrap();
        assert!(empty.as_multiteam().is_empty());

        let rows: BTreeSet<Assignment> = (0..4)
            .map(|i| assignment(&[("x", i), ("y", i * i)]))
            .collect();
        let team = Team::new(vec![var("x"), var("y")], rows).unwrap();
        let m = team.as_multiteam();
        assert_eq!(m.len(), 4);
        assert_eq!(m.to_team(), team);
    }

    #[test]
    fn dedup_keeps_first_occurrence_ids() {
        let m = three_var_multiteam(&[(0, 0, 0), (0, 0, 0), (1, 1, 1), (0, 0, 0)]);
        let (deduped, dropped) = m.dedup_rows();
        assert_eq!(dropped, 2);
        let ids: Vec<RowId> = deduped.rows().map(|(id, _)| id).collect();
        assert_eq!(ids, vec![RowId(0), RowId(2)]);
    }

    #[test]
    fn domain_validation() {
        assert_eq!(
            Team::new(vec![var("x"), var("x")], BTreeSet::new()),
            Err(TeamError::DuplicateVariable("x".into()))
        );
        assert_eq!(Variable::new(""), Err(TeamError::EmptyVariableName));
        let bad_row: BTreeSet<Assignment> = [assignment(&[("x", 1)])].into();
        assert!(matches!(
            Team::new(vec![var("x"), var("y")], bad_row),
            Err(TeamError::RowArity { .. })
        ));
    }
}
