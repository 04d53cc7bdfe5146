//! Countermodel construction for non-derivable atoms.
//!
//! When `dep[p](x ; y)` is not derivable from a hypothesis set, a finite
//! multi-team witnesses the gap: it satisfies every hypothesis and
//! falsifies the goal. Three candidate builders run in order of cost:
//!
//! 1. A staircase team: for each variable `u`, measure the cheapest
//!    derivable weight `d(u)` from the goal's left side to `u`, pick a row
//!    count `n` large enough that `2/n` separates every pair of distinct
//!    weights in play, and give each column an ascending run of length
//!    `floor(d(u) * n)` followed by a constant tail. Columns the left side
//!    determines cheaply are nearly constant; expensive ones spread out.
//! 2. A branching team, for goals whose weight is a sum over several
//!    hypothesis applications. Staircase columns ascend in lockstep, so a
//!    hypothesis whose left side bundles several variables sees one large
//!    group with a still-varying right side and over-deletes. Branching
//!    teams instead mix blocks of rows that each break a chosen subset of
//!    variables with fresh values; the block masses come from an exact
//!    rational linear program over all subsets.
//! 3. A bounded exhaustive enumeration of tiny teams, as a final backstop.
//!
//! Constructed teams are never trusted: each candidate is re-checked by
//! the satisfaction routines before it is returned.

use std::collections::{BTreeMap, BTreeSet};

use num::bigint::BigInt;
use num::rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::{Atom, SigmaSet};
use crate::calculus::{d_tau, min_derivable_weight};
use crate::rational::ErrorRate;
use crate::team::{Assignment, MultiTeam, TeamError, Value, Variable};

/// Everything the team construction needs for one goal: the variable
/// universe, the per-variable cheapest weights, the weight set `a_tau`,
/// and the separating row count `n`.
#[derive(Debug, Clone)]
pub struct TauContext {
    pub sigma: SigmaSet,
    pub target: Atom,
    pub z_tau: BTreeSet<Variable>,
    pub d_table: BTreeMap<Variable, ErrorRate>,
    pub a_tau: BTreeSet<ErrorRate>,
    pub n: u64,
}

/// Measures every variable against the goal's left side and sizes the
/// team: `n = 1 + max(ceil(2 / |a - b|))` over distinct weight pairs, so
/// that `2/n` is below every gap; `n = 2` when all weights coincide and
/// no separation is needed.
pub fn build_tau_context(sigma: &SigmaSet, target: &Atom) -> TauContext {
    let mut z_tau = sigma.variables();
    z_tau.extend(target.variables());
    let d_table: BTreeMap<Variable, ErrorRate> = z_tau
        .iter()
        .map(|u| (u.clone(), d_tau(sigma, &target.lhs, u)))
        .collect();
    let mut a_tau: BTreeSet<ErrorRate> = d_table.values().cloned().collect();
    a_tau.insert(target.p.clone());
    let mut n = 2;
    for a in &a_tau {
        for b in &a_tau {
            if a < b {
                let gap = b.abs_diff(a);
                let bound = 1 + gap.ceil_inverse_scaled(2).expect("distinct pair has a gap");
                n = n.max(bound);
            }
        }
    }
    TauContext { sigma: sigma.clone(), target: target.clone(), z_tau, d_table, a_tau, n }
}

/// Builds the `n`-row team: column `u` reads `min(i, m)` in row `i`, with
/// `m = floor(d(u) * n)`. A weight of 1 makes the column fully ascending;
/// a weight of 0 makes it constant.
pub fn build_x_tau(ctx: &TauContext) -> MultiTeam {
    let domain: Vec<Variable> = ctx.z_tau.iter().cloned().collect();
    let m: BTreeMap<&Variable, u64> = ctx
        .d_table
        .iter()
        .map(|(u, d)| (u, d.floor_scaled(ctx.n)))
        .collect();
    let rows = (0..ctx.n)
        .map(|i| {
            Assignment::new(
                domain
                    .iter()
                    .map(|u| (u.clone(), Value::Int(i.min(m[u]) as i64)))
                    .collect(),
            )
        })
        .collect();
    MultiTeam::from_rows(domain, rows).expect("constructed rows share the domain")
}

/// A team that satisfies every hypothesis and falsifies the goal, with
/// the verification flags that returned values always carry as `true`.
#[derive(Debug, Clone)]
pub struct Countermodel {
    pub team: MultiTeam,
    pub checked_sigma: bool,
    pub checked_target_fails: bool,
}

/// One hypothesis re-checked against a countermodel team.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct SigmaCheck {
    pub atom: String,
    pub min_deletions: usize,
    pub bound: String,
    pub satisfied: bool,
}

/// The machine-readable verification report exported next to a team.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct CountermodelReport {
    pub target_atom: String,
    pub min_deletions: usize,
    pub bound: String,
    pub sigma_checks: Vec<SigmaCheck>,
}

fn deletion_bound(p: &ErrorRate, rows: usize) -> String {
    let bound = BigRational::from(p) * BigInt::from(rows);
    bound.to_string()
}

/// Re-checks `team` against every hypothesis and the goal, reporting the
/// exact deletion counts next to the allowed bounds `p * rows`.
pub fn countermodel_report(
    sigma: &SigmaSet,
    target: &Atom,
    team: &MultiTeam,
) -> Result<CountermodelReport, TeamError> {
    let mut sigma_checks = Vec::new();
    for atom in sigma.iter() {
        let (count, _) = team.min_deletions(&atom.lhs, &atom.rhs)?;
        sigma_checks.push(SigmaCheck {
            atom: atom.to_string(),
            min_deletions: count,
            bound: deletion_bound(&atom.p, team.len()),
            satisfied: atom.p.at_least_fraction(count, team.len()),
        });
    }
    let (count, _) = team.min_deletions(&target.lhs, &target.rhs)?;
    Ok(CountermodelReport {
        target_atom: target.to_string(),
        min_deletions: count,
        bound: deletion_bound(&target.p, team.len()),
        sigma_checks,
    })
}

/// True iff `team` satisfies every atom of `sigma` and falsifies `target`.
pub fn verify_countermodel(
    sigma: &SigmaSet,
    target: &Atom,
    team: &MultiTeam,
) -> Result<bool, TeamError> {
    for atom in sigma.iter() {
        let (ok, _) = team.satisfies_approx(&atom.p, &atom.lhs, &atom.rhs)?;
        if !ok {
            return Ok(false);
        }
    }
    let (ok, _) = team.satisfies_approx(&target.p, &target.lhs, &target.rhs)?;
    Ok(!ok)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompletenessError {
    #[error("no countermodel found within bounds")]
    NotFoundWithinBounds,
    #[error("enumeration budget exceeded")]
    BudgetExceeded,
    #[error(transparent)]
    Team(#[from] TeamError),
}

/// Searches for a verified countermodel to `target` under `sigma`.
///
/// Returns `None` when the goal is derivable. Otherwise tries the
/// staircase team, then the branching team (for hypotheses whose left
/// sides bundle several variables and defeat the per-variable staircase),
/// then a bounded exhaustive search over teams of up to 6 rows and values
/// `{0..5}`. Every candidate is verified before it is returned. An error
/// means all three routes failed — a loud signal, never a silent pass.
pub fn find_countermodel(
    sigma: &SigmaSet,
    target: &Atom,
) -> Result<Option<Countermodel>, CompletenessError> {
    let weight = min_derivable_weight(sigma, &target.lhs.to_set(), &target.rhs.to_set());
    if weight <= target.p {
        return Ok(None);
    }
    let ctx = build_tau_context(sigma, target);
    let team = build_x_tau(&ctx);
    if verify_countermodel(sigma, target, &team)? {
        return Ok(Some(Countermodel { team, checked_sigma: true, checked_target_fails: true }));
    }
    if let Some(team) = branching::branching_countermodel(sigma, target)? {
        return Ok(Some(Countermodel { team, checked_sigma: true, checked_target_fails: true }));
    }
    let z: Vec<Variable> = ctx.z_tau.iter().cloned().collect();
    if let Some(team) = search::bounded_search(sigma, target, &z)? {
        if verify_countermodel(sigma, target, &team)? {
            return Ok(Some(Countermodel {
                team,
                checked_sigma: true,
                checked_target_fails: true,
            }));
        }
    }
    Err(CompletenessError::NotFoundWithinBounds)
}

/// Bounded semantic-consequence oracle: true iff no multi-team over the
/// mentioned variables with at most `max_rows` rows and values in
/// `{0..domain_size-1}` satisfies all of `sigma` while falsifying
/// `target`. Enumeration is up to row order. Errors out instead of
/// running past the configured budget.
pub fn semantic_entails_bruteforce(
    sigma: &SigmaSet,
    target: &Atom,
    max_rows: usize,
    domain_size: usize,
) -> Result<bool, CompletenessError> {
    let mut z = sigma.variables();
    z.extend(target.variables());
    let z: Vec<Variable> = z.into_iter().collect();
    search::guard_budget(z.len(), max_rows, domain_size)?;
    let checker = search::CandidateChecker::new(sigma, target, &z);
    let mut unlimited = u128::MAX;
    for rows in 1..=max_rows {
        if let Some(found) = search::scan(&checker, &z, rows, domain_size, &mut unlimited) {
            debug_assert!(verify_countermodel(sigma, target, &found).unwrap_or(false));
            return Ok(false);
        }
    }
    Ok(true)
}

mod branching {
    use super::*;
    use num::{Integer, One, Signed, Zero};

    /// Beyond this many undetermined variables the subset grid is too wide.
    const MAX_FREE_VARS: usize = 12;
    /// Give up rather than emit an absurdly large witness team.
    const MAX_TEAM_ROWS: u64 = 100_000;

    /// Builds a team from "anchor" rows, constant everywhere, plus blocks
    /// of rows that each break a subset of variables with values fresh to
    /// the whole column. With at least one anchor present, a hypothesis
    /// `dep[q](u ; v)` then needs exactly one deletion per row whose block
    /// leaves `u` intact but breaks part of `v` (rows breaking `u` sit in
    /// singleton groups and cost nothing), and the goal needs one per row
    /// breaking a goal right-side variable. That makes the best block
    /// masses an exact linear program: maximize the goal-breaking mass
    /// subject to each hypothesis's allowance and a total mass of one.
    /// When the optimum exceeds the goal weight, scaling the masses to a
    /// common denominator yields the witness.
    pub(super) fn branching_countermodel(
        sigma: &SigmaSet,
        target: &Atom,
    ) -> Result<Option<MultiTeam>, TeamError> {
        let p = BigRational::from(&target.p);
        if p >= BigRational::one() {
            return Ok(None);
        }
        let mut domain = sigma.variables();
        domain.extend(target.variables());
        let locked = target.lhs.to_set();
        let free: Vec<Variable> =
            domain.iter().filter(|v| !locked.contains(*v)).cloned().collect();
        if free.is_empty() || free.len() > MAX_FREE_VARS {
            return Ok(None);
        }
        let mask_of = |side: &crate::team::VarSeq| -> u32 {
            let set = side.to_set();
            free.iter()
                .enumerate()
                .filter(|(_, v)| set.contains(v))
                .fold(0u32, |m, (i, _)| m | (1 << i))
        };
        let goal_mask = mask_of(&target.rhs);
        if goal_mask == 0 {
            return Ok(None);
        }
        let hyps: Vec<(u32, u32, BigRational)> = sigma
            .iter()
            .map(|a| (mask_of(&a.lhs), mask_of(&a.rhs), BigRational::from(&a.p)))
            .collect();
        // Only blocks that break a goal variable gain anything; others
        // would spend hypothesis allowances for free.
        let cells: Vec<u32> = (1u32..1 << free.len()).filter(|m| m & goal_mask != 0).collect();
        let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(hyps.len() + 1);
        let mut rhs: Vec<BigRational> = Vec::with_capacity(hyps.len() + 1);
        for (u, v, q) in &hyps {
            rows.push(
                cells
                    .iter()
                    .map(|&m| {
                        if m & u == 0 && m & v != 0 {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    })
                    .collect(),
            );
            rhs.push(q.clone());
        }
        rows.push(vec![BigRational::one(); cells.len()]);
        rhs.push(BigRational::one());
        let (gain, masses) = simplex_max(&rows, &rhs);
        if gain <= p {
            return Ok(None);
        }
        // Scale the fractional masses to integer row counts. `base` rows
        // carry the blocks; one extra anchor row keeps every constant
        // class inhabited. `base` is a multiple of every denominator in
        // play and large enough that the goal still overshoots its
        // allowance after the floor in `p * (base + 1)`.
        let mut scale = BigInt::one();
        for r in masses.iter().chain(hyps.iter().map(|(_, _, q)| q)).chain([&p, &gain]) {
            scale = scale.lcm(r.denom());
        }
        let gap = &gain - &p;
        let scale_rat = BigRational::from_integer(scale.clone());
        let steps = (BigRational::one() / (&scale_rat * &gap)).ceil().to_integer();
        let base = scale * steps.max(BigInt::one());
        if base >= BigInt::from(MAX_TEAM_ROWS) {
            return Ok(None);
        }
        let base_rat = BigRational::from_integer(base.clone());
        let mut blocks: Vec<(u32, u64)> = Vec::new();
        let mut broken: u64 = 0;
        for (cell, mass) in cells.iter().zip(&masses) {
            let count: u64 = (mass * &base_rat)
                .to_integer()
                .try_into()
                .expect("mass fits the row cap");
            if count > 0 {
                broken += count;
                blocks.push((*cell, count));
            }
        }
        let n: u64 = (base + 1u32).try_into().expect("row cap fits u64");
        debug_assert!(broken < n, "the anchor row must survive");
        let domain: Vec<Variable> = domain.into_iter().collect();
        let mut assignments = Vec::with_capacity(n as usize);
        let fill = |cell: u32, count: u64, assignments: &mut Vec<Assignment>| {
            for _ in 0..count {
                let fresh = assignments.len() as i64 + 1;
                assignments.push(Assignment::new(
                    domain
                        .iter()
                        .map(|v| {
                            let hit = free.iter().position(|f| f == v)
                                .is_some_and(|i| cell & (1 << i) != 0);
                            (v.clone(), Value::Int(if hit { fresh } else { 0 }))
                        })
                        .collect(),
                ));
            }
        };
        fill(0, n - broken, &mut assignments);
        for (cell, count) in blocks {
            fill(cell, count, &mut assignments);
        }
        let team = MultiTeam::from_rows(domain, assignments).expect("rows share the domain");
        Ok(verify_countermodel(sigma, target, &team)?.then_some(team))
    }

    /// Dense-tableau simplex maximizing an all-ones objective over
    /// `a * x <= b`, `x >= 0`, in exact rationals with Bland's rule.
    /// Returns the optimum and an optimal vertex. The caller always
    /// includes a total-mass row, so the program is bounded.
    fn simplex_max(a: &[Vec<BigRational>], b: &[BigRational]) -> (BigRational, Vec<BigRational>) {
        let m = a.len();
        let n = a[0].len();
        let cols = n + m;
        let mut t: Vec<Vec<BigRational>> = a
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut full = row.clone();
                full.extend((0..m).map(|s| {
                    if s == r { BigRational::one() } else { BigRational::zero() }
                }));
                full
            })
            .collect();
        let mut rhs = b.to_vec();
        let mut obj: Vec<BigRational> = (0..cols)
            .map(|j| if j < n { BigRational::one() } else { BigRational::zero() })
            .collect();
        let mut value = BigRational::zero();
        let mut basis: Vec<usize> = (n..cols).collect();
        loop {
            let Some(enter) = (0..cols).find(|&j| obj[j].is_positive()) else {
                break;
            };
            let mut pivot: Option<usize> = None;
            for r in 0..m {
                if !t[r][enter].is_positive() {
                    continue;
                }
                let better = match pivot {
                    None => true,
                    Some(pr) => {
                        // rhs[r]/t[r][enter] vs rhs[pr]/t[pr][enter] by
                        // cross-multiplication; ties to the lowest basis
                        // index so Bland's rule prevents cycling.
                        let lhs = &rhs[r] * &t[pr][enter];
                        let cmp = &rhs[pr] * &t[r][enter];
                        lhs < cmp || (lhs == cmp && basis[r] < basis[pr])
                    }
                };
                if better {
                    pivot = Some(r);
                }
            }
            let Some(pr) = pivot else {
                debug_assert!(false, "the total-mass row bounds every column");
                break;
            };
            let div = t[pr][enter].clone();
            for x in t[pr].iter_mut() {
                *x = &*x / &div;
            }
            rhs[pr] = &rhs[pr] / &div;
            for r in 0..m {
                if r == pr || t[r][enter].is_zero() {
                    continue;
                }
                let f = t[r][enter].clone();
                for j in 0..cols {
                    let d = &t[pr][j] * &f;
                    t[r][j] = &t[r][j] - &d;
                }
                let d = &rhs[pr] * &f;
                rhs[r] = &rhs[r] - &d;
            }
            if !obj[enter].is_zero() {
                let f = obj[enter].clone();
                for j in 0..cols {
                    let d = &t[pr][j] * &f;
                    obj[j] = &obj[j] - &d;
                }
                let d = &rhs[pr] * &f;
                value = &value + &d;
            }
            basis[pr] = enter;
        }
        let mut x = vec![BigRational::zero(); n];
        for (r, &col) in basis.iter().enumerate() {
            if col < n {
                x[col] = rhs[r].clone();
            }
        }
        (value, x)
    }
}

mod search {
    use super::*;

    /// Naive-space guard from the oracle contract: the sequence count
    /// `domain_size^(vars * max_rows)` dominates the multiset count the
    /// scan actually visits.
    const ORACLE_BUDGET: f64 = 1e8;
    /// Total candidate teams the fallback may visit across all bounds.
    const FALLBACK_BUDGET: u128 = 20_000_000;
    const FALLBACK_MAX_ROWS: usize = 6;
    const FALLBACK_MAX_VALUES: usize = 6;

    pub(super) fn guard_budget(
        vars: usize,
        max_rows: usize,
        domain_size: usize,
    ) -> Result<(), CompletenessError> {
        let naive = (domain_size.max(1) as f64).powi((vars * max_rows) as i32);
        if naive > ORACLE_BUDGET {
            return Err(CompletenessError::BudgetExceeded);
        }
        Ok(())
    }

    /// Projection indices plus weight for one atom, for fast checks on
    /// raw `u8` rows before any team object exists.
    struct AtomProj {
        lhs: Vec<usize>,
        rhs: Vec<usize>,
        p: ErrorRate,
    }

    pub(super) struct CandidateChecker {
        sigma: Vec<AtomProj>,
        target: AtomProj,
    }

    fn project(atom_side: &crate::team::VarSeq, z: &[Variable]) -> Vec<usize> {
        let set: BTreeSet<&Variable> = atom_side.iter().collect();
        z.iter()
            .enumerate()
            .filter(|(_, v)| set.contains(v))
            .map(|(i, _)| i)
            .collect()
    }

    impl CandidateChecker {
        pub(super) fn new(sigma: &SigmaSet, target: &Atom, z: &[Variable]) -> Self {
            let proj = |atom: &Atom| AtomProj {
                lhs: project(&atom.lhs, z),
                rhs: project(&atom.rhs, z),
                p: atom.p.clone(),
            };
            CandidateChecker {
                sigma: sigma.iter().map(proj).collect(),
                target: proj(target),
            }
        }

        /// Minimum deletions for `dep(lhs ; rhs)` over raw rows: each
        /// left-projection group keeps its most frequent right class.
        fn deletions(rows: &[&[u8]], proj: &AtomProj) -> usize {
            let mut groups: BTreeMap<Vec<u8>, BTreeMap<Vec<u8>, usize>> = BTreeMap::new();
            for row in rows {
                let key: Vec<u8> = proj.lhs.iter().map(|&i| row[i]).collect();
                let val: Vec<u8> = proj.rhs.iter().map(|&i| row[i]).collect();
                *groups.entry(key).or_default().entry(val).or_default() += 1;
            }
            groups
                .values()
                .map(|classes| {
                    let total: usize = classes.values().sum();
                    total - classes.values().max().expect("nonempty group")
                })
                .sum()
        }

        fn satisfied(rows: &[&[u8]], proj: &AtomProj) -> bool {
            proj.p.at_least_fraction(Self::deletions(rows, proj), rows.len())
        }

        pub(super) fn is_countermodel(&self, rows: &[&[u8]]) -> bool {
            !Self::satisfied(rows, &self.target)
                && self.sigma.iter().all(|a| Self::satisfied(rows, a))
        }
    }

    fn to_multiteam(z: &[Variable], rows: &[&[u8]]) -> MultiTeam {
        let assignments = rows
            .iter()
            .map(|row| {
                Assignment::new(
                    z.iter()
                        .zip(row.iter())
                        .map(|(v, &x)| (v.clone(), Value::Int(x as i64)))
                        .collect(),
                )
            })
            .collect();
        MultiTeam::from_rows(z.to_vec(), assignments).expect("rows share the domain")
    }

    /// Visits multisets of `row_count` rows over `value_count` values
    /// (rows in non-decreasing order) and returns the first countermodel,
    /// if any. Decrements `budget` per candidate and stops when it runs
    /// out, so an oversized space still gets a partial scan.
    pub(super) fn scan(
        checker: &CandidateChecker,
        z: &[Variable],
        row_count: usize,
        value_count: usize,
        budget: &mut u128,
    ) -> Option<MultiTeam> {
        let all_rows = all_rows(z.len(), value_count);
        let mut pick = vec![0usize; row_count];
        loop {
            if *budget == 0 {
                return None;
            }
            *budget -= 1;
            let rows: Vec<&[u8]> = pick.iter().map(|&i| all_rows[i].as_slice()).collect();
            if checker.is_countermodel(&rows) {
                return Some(to_multiteam(z, &rows));
            }
            // Next non-decreasing index tuple.
            let mut k = row_count;
            loop {
                if k == 0 {
                    return None;
                }
                k -= 1;
                if pick[k] + 1 < all_rows.len() {
                    let next = pick[k] + 1;
                    for slot in pick.iter_mut().skip(k) {
                        *slot = next;
                    }
                    break;
                }
            }
        }
    }

    fn all_rows(width: usize, value_count: usize) -> Vec<Vec<u8>> {
        let mut rows = vec![vec![]];
        for _ in 0..width {
            rows = rows
                .into_iter()
                .flat_map(|row| {
                    (0..value_count as u8).map(move |v| {
                        let mut next = row.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        rows
    }

    fn multiset_count(options: u128, picks: usize) -> u128 {
        // C(options + picks - 1, picks), saturating.
        let mut result: u128 = 1;
        for i in 0..picks as u128 {
            result = result.saturating_mul(options.saturating_add(i)) / (i + 1);
        }
        result
    }

    /// Iterative deepening over (row count, value count), cheapest spaces
    /// first, within a global budget; the space the budget dies in is
    /// still scanned as far as it allows. Values beyond the row count
    /// never help (rows can only be told apart `row_count` ways per
    /// column).
    pub(super) fn bounded_search(
        sigma: &SigmaSet,
        target: &Atom,
        z: &[Variable],
    ) -> Result<Option<MultiTeam>, CompletenessError> {
        let checker = CandidateChecker::new(sigma, target, z);
        let mut spaces: Vec<(u128, usize, usize)> = Vec::new();
        for rows in 2..=FALLBACK_MAX_ROWS {
            for values in 2..=rows.min(FALLBACK_MAX_VALUES) {
                let options = (values as u128).saturating_pow(z.len() as u32);
                spaces.push((multiset_count(options, rows), rows, values));
            }
        }
        spaces.sort();
        let mut budget = FALLBACK_BUDGET;
        for (_, rows, values) in spaces {
            if budget == 0 {
                break;
            }
            if let Some(team) = scan(&checker, z, rows, values, &mut budget) {
                return Ok(Some(team));
            }
        }
        Ok(None)
    }
}
