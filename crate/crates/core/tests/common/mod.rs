//! Shared helpers for the integration suites: fixture tables, seeded
//! random generators, brute-force reference checkers, and the exhaustive
//! three-variable atom grid that the acceptance harness sweeps.

#![allow(dead_code)]

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use teamdep::{Assignment, Atom, ErrorRate, MultiTeam, SigmaSet, Value, VarSeq, Variable};

pub fn var(name: &str) -> Variable {
    Variable::new(name).unwrap()
}

pub fn seq(names: &[&str]) -> VarSeq {
    names.iter().map(|n| var(n)).collect()
}

pub fn set(names: &[&str]) -> BTreeSet<Variable> {
    names.iter().map(|n| var(n)).collect()
}

pub fn rate(n: u64, d: u64) -> ErrorRate {
    ErrorRate::new(n, d).unwrap()
}

pub fn atom(text: &str) -> Atom {
    text.parse().unwrap()
}

pub fn sigma(lines: &[&str]) -> SigmaSet {
    SigmaSet::new(lines.iter().map(|l| atom(l)))
}

pub fn int_team(names: &[&str], rows: &[&[i64]]) -> MultiTeam {
    let vars: Vec<Variable> = names.iter().map(|n| var(n)).collect();
    let assignments = rows
        .iter()
        .map(|row| {
            assert_eq!(row.len(), vars.len());
            Assignment::new(
                vars.iter().cloned().zip(row.iter().map(|v| Value::Int(*v))).collect(),
            )
        })
        .collect();
    MultiTeam::from_rows(vars, assignments).unwrap()
}

/// Squares-and-remainders table: one bad row breaks x -> y and the
/// near-constancy of z.
pub fn squares_table() -> MultiTeam {
    int_team(&["x", "y", "z"], &[&[2, 4, 0], &[5, 25, 0], &[3, 9, 1], &[2, 3, 0]])
}

pub const SQUARES_CSV: &str = "x,y,z\n2,4,0\n5,25,0\n3,9,1\n2,3,0\n";

/// Six employees; one department I salary deviates.
pub fn payroll_table() -> MultiTeam {
    let vars = vec![var("Employee"), var("Department"), var("Salary")];
    let data: &[(&str, &str, i64)] = &[
        ("John", "I", 120_000),
        ("Mary", "II", 130_000),
        ("Ann", "I", 120_000),
        ("Paul", "I", 120_000),
        ("Matt", "II", 130_000),
        ("Julia", "I", 130_000),
    ];
    MultiTeam::from_rows(
        vars.clone(),
        data.iter()
            .map(|(e, d, s)| {
                Assignment::new(
                    [
                        (vars[0].clone(), Value::Text(e.to_string())),
                        (vars[1].clone(), Value::Text(d.to_string())),
                        (vars[2].clone(), Value::Int(*s)),
                    ]
                    .into(),
                )
            })
            .collect(),
    )
    .unwrap()
}

pub const PAYROLL_CSV: &str = "Employee,Department,Salary\n\
John,I,120000\nMary,II,130000\nAnn,I,120000\nPaul,I,120000\nMatt,II,130000\nJulia,I,130000\n";

/// Three rows over (x, y, z) that collapse to two on (x, y): the
/// non-locality stress case for set-team restriction.
pub fn collapse_table() -> MultiTeam {
    int_team(&["x", "y", "z"], &[&[0, 0, 0], &[0, 0, 1], &[0, 1, 1]])
}

/// Uniform random integer table with the given shape.
pub fn random_multiteam(
    rng: &mut impl Rng,
    n_vars: usize,
    n_rows: usize,
    max_val: i64,
) -> MultiTeam {
    let vars: Vec<Variable> = (0..n_vars).map(|i| var(&format!("v{i}"))).collect();
    let rows = (0..n_rows)
        .map(|_| {
            Assignment::new(
                vars.iter()
                    .map(|v| (v.clone(), Value::Int(rng.random_range(0..=max_val))))
                    .collect(),
            )
        })
        .collect();
    MultiTeam::from_rows(vars, rows).unwrap()
}

/// Random variable sequence over `domain`, repeats allowed, length in
/// `0..=max_len`.
pub fn random_varseq(rng: &mut impl Rng, domain: &[Variable], max_len: usize) -> VarSeq {
    let len = rng.random_range(0..=max_len);
    VarSeq::new((0..len).map(|_| domain[rng.random_range(0..domain.len())].clone()).collect())
}

/// Reference checker: rows that agree on every variable of `x` agree on
/// every variable of `y`. Groups rows by their x-projection directly.
pub fn exact_dep_holds(team: &MultiTeam, x: &VarSeq, y: &VarSeq) -> bool {
    let mut groups: BTreeMap<Vec<Value>, Vec<Value>> = BTreeMap::new();
    for (_, row) in team.rows() {
        let xs = row.project(x).unwrap();
        let ys = row.project(y).unwrap();
        match groups.entry(xs) {
            Entry::Vacant(e) => {
                e.insert(ys);
            }
            Entry::Occupied(e) => {
                if *e.get() != ys {
                    return false;
                }
            }
        }
    }
    true
}

/// Exhaustive reference for the deletion count: tries every subset of
/// rows and returns the size of the smallest whose removal restores the
/// exact dependence. Only usable on small tables.
pub fn oracle_min_deletions(team: &MultiTeam, x: &VarSeq, y: &VarSeq) -> usize {
    let rows: Vec<&Assignment> = team.rows().map(|(_, a)| a).collect();
    let n = rows.len();
    assert!(n <= 16, "oracle is exponential in the row count");
    let mut best = n;
    'mask: for mask in 0u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if k >= best {
            continue;
        }
        let mut groups: BTreeMap<Vec<Value>, Vec<Value>> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if mask & (1 << i) != 0 {
                continue;
            }
            let xs = row.project(x).unwrap();
            let ys = row.project(y).unwrap();
            match groups.entry(xs) {
                Entry::Vacant(e) => {
                    e.insert(ys);
                }
                Entry::Occupied(e) => {
                    if *e.get() != ys {
                        continue 'mask;
                    }
                }
            }
        }
        best = k;
    }
    best
}

/// The exhaustive grid over variables {a, b, c} and quarter weights: every
/// atom shape dep[q/4](U ; V) with V nonempty and disjoint from U (other
/// shapes reduce to these; see the properties suite), every hypothesis set
/// of at most three such atoms, and every single-variable goal.
pub mod corpus {
    use super::*;

    pub const VARS: [&str; 3] = ["a", "b", "c"];
    pub const ATOM_COUNT: usize = 95;
    pub const SIGMA_COUNT: u64 = 142_976;
    pub const TARGET_COUNT: usize = 120;

    /// One grid atom, sides encoded as bit masks over (a, b, c) and the
    /// weight in quarters.
    #[derive(Copy, Clone, Debug, PartialEq, Eq)]
    pub struct GridAtom {
        pub u_mask: u8,
        pub v_mask: u8,
        pub q: u8,
    }

    pub fn universe() -> Vec<GridAtom> {
        let mut out = Vec::new();
        for u_mask in 0u8..8 {
            for v_mask in 1u8..8 {
                if v_mask & u_mask != 0 {
                    continue;
                }
                for q in 0..=4 {
                    out.push(GridAtom { u_mask, v_mask, q });
                }
            }
        }
        assert_eq!(out.len(), ATOM_COUNT);
        out
    }

    pub fn mask_vars(mask: u8) -> Vec<Variable> {
        (0..3).filter(|i| mask & (1 << i) != 0).map(|i| var(VARS[i])).collect()
    }

    pub fn mask_seq(mask: u8) -> VarSeq {
        VarSeq::new(mask_vars(mask))
    }

    pub fn mask_set(mask: u8) -> BTreeSet<Variable> {
        mask_vars(mask).into_iter().collect()
    }

    pub fn quarter(q: u8) -> ErrorRate {
        ErrorRate::new(q as u64, 4).unwrap()
    }

    pub fn grid_atom(ga: GridAtom) -> Atom {
        Atom::new(quarter(ga.q), mask_seq(ga.u_mask), mask_seq(ga.v_mask))
    }

    pub fn sigma_set(atoms: &[GridAtom]) -> SigmaSet {
        SigmaSet::new(atoms.iter().map(|ga| grid_atom(*ga)))
    }

    /// Visits every hypothesis set of at most three distinct grid atoms,
    /// in a fixed deterministic order.
    pub fn for_each_sigma(mut f: impl FnMut(&[GridAtom])) {
        let uni = universe();
        f(&[]);
        for i in 0..uni.len() {
            f(&[uni[i]]);
            for j in (i + 1)..uni.len() {
                f(&[uni[i], uni[j]]);
                for k in (j + 1)..uni.len() {
                    f(&[uni[i], uni[j], uni[k]]);
                }
            }
        }
    }

    /// All single-variable-goal atoms on the grid: (lhs mask, goal
    /// variable index, weight in quarters, parsed atom).
    pub fn targets() -> Vec<(u8, usize, u8, Atom)> {
        let mut out = Vec::new();
        for lhs_mask in 0u8..8 {
            for v_idx in 0..3 {
                for q in 0..=4u8 {
                    let goal = Atom::new(
                        quarter(q),
                        mask_seq(lhs_mask),
                        VarSeq::new(vec![var(VARS[v_idx])]),
                    );
                    out.push((lhs_mask, v_idx, q, goal));
                }
            }
        }
        assert_eq!(out.len(), TARGET_COUNT);
        out
    }

    /// Exhaustive derivation enumeration at the set level: closes the
    /// 8x8 table of side-pairs under the inference rules (hypotheses,
    /// side weakening, augmentation, weighted composition) to a fixpoint,
    /// with weights in quarters capped at 4/4. Independent of the search
    /// engine: it enumerates rule applications rather than routes.
    pub fn closure_weights(atoms: &[GridAtom]) -> [[u8; 8]; 8] {
        let mut d = [[0u8; 8]; 8];
        for (u, row) in d.iter_mut().enumerate() {
            for (v, cell) in row.iter_mut().enumerate() {
                *cell = if v & !u == 0 { 0 } else { 4 };
            }
        }
        for a in atoms {
            let cell = &mut d[a.u_mask as usize][a.v_mask as usize];
            *cell = (*cell).min(a.q);
        }
        loop {
            let mut changed = false;
            for u in 0..8usize {
                for v in 0..8usize {
                    let base = d[u][v];
                    for w in 0..8usize {
                        if w & u == u && base < d[w][v] {
                            d[w][v] = base;
                            changed = true;
                        }
                        if w & v == w && base < d[u][w] {
                            d[u][w] = base;
                            changed = true;
                        }
                        if base < d[u | w][v | w] {
                            d[u | w][v | w] = base;
                            changed = true;
                        }
                        let composed = base.saturating_add(d[u | v][w]).min(4);
                        if composed < d[u][w] {
                            d[u][w] = composed;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        d
    }
}
