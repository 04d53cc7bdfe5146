//! Approximate dependence atoms and their concrete syntax.
//!
//! An atom `dep[P](L ; R)` pairs an error weight `P` in [0, 1] with two
//! variable sequences. `P` is a fraction `a/b`, an integer, or a decimal
//! literal (decimals become exact rationals, `0.25` is `1/4`). `L` and `R`
//! are whitespace-separated identifiers and may be empty. Hypothesis files
//! carry one atom per line with `#` comments.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::rational::{ErrorRate, RateError};
use crate::team::{TeamError, VarSeq, Variable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AtomParseError {
    #[error("expected dep[P](L ; R), got {0:?}")]
    Malformed(String),
    #[error("bad weight: {0}")]
    BadWeight(#[from] RateError),
    #[error("bad identifier: {0}")]
    BadIdentifier(#[from] TeamError),
    #[error("line {line}: {error}")]
    InFile { line: usize, error: Box<AtomParseError> },
}

/// A weighted dependence atom over variable sequences.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub p: ErrorRate,
    pub lhs: VarSeq,
    pub rhs: VarSeq,
}

impl Atom {
    pub fn new(p: ErrorRate, lhs: VarSeq, rhs: VarSeq) -> Self {
        Atom { p, lhs, rhs }
    }

    /// Forgets order and repetition on both sides.
    pub fn normalize(&self) -> NormalizedAtom {
        NormalizedAtom {
            p: self.p.clone(),
            lhs: self.lhs.to_set(),
            rhs: self.rhs.to_set(),
        }
    }

    /// Every variable mentioned by the atom.
    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut vars = self.lhs.to_set();
        vars.extend(self.rhs.to_set());
        vars
    }

    /// Parses `dep[P](L ; R)`.
    pub fn parse(text: &str) -> Result<Self, AtomParseError> {
        let s = text.trim();
        let malformed = || AtomParseError::Malformed(text.to_string());
        let rest = s.strip_prefix("dep").ok_or_else(malformed)?;
        let rest = rest.trim_start().strip_prefix('[').ok_or_else(malformed)?;
        let (weight, rest) = rest.split_once(']').ok_or_else(malformed)?;
        let p = ErrorRate::parse(weight)?;
        let rest = rest.trim_start().strip_prefix('(').ok_or_else(malformed)?;
        let body = rest.strip_suffix(')').ok_or_else(malformed)?;
        let (left, right) = body.split_once(';').ok_or_else(malformed)?;
        if right.contains(';') {
            return Err(malformed());
        }
        Ok(Atom::new(p, parse_side(left)?, parse_side(right)?))
    }
}

fn parse_side(text: &str) -> Result<VarSeq, AtomParseError> {
    let mut vars = Vec::new();
    for token in text.split_whitespace() {
        if token.contains(|c: char| "[](),;#".contains(c)) {
            return Err(AtomParseError::Malformed(token.to_string()));
        }
        vars.push(Variable::new(token)?);
    }
    Ok(VarSeq::new(vars))
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dep[{}]({} ; {})", self.p, self.lhs, self.rhs)
    }
}

impl std::str::FromStr for Atom {
    type Err = AtomParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        Atom::parse(text)
    }
}

/// An atom with both sides reduced to variable sets. Satisfaction only
/// depends on this shape, so the inference engine works here; ordered
/// sequences survive only in the proof checker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NormalizedAtom {
    pub p: ErrorRate,
    pub lhs: BTreeSet<Variable>,
    pub rhs: BTreeSet<Variable>,
}

impl NormalizedAtom {
    /// Reads the normalized atom back as an atom over sorted sequences.
    pub fn to_atom(&self) -> Atom {
        Atom::new(
            self.p.clone(),
            self.lhs.iter().cloned().collect(),
            self.rhs.iter().cloned().collect(),
        )
    }
}

/// A finite set of hypothesis atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SigmaSet {
    atoms: BTreeSet<Atom>,
}

impl SigmaSet {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        SigmaSet { atoms: atoms.into_iter().collect() }
    }

    pub fn empty() -> Self {
        SigmaSet::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.atoms.iter().flat_map(|a| a.variables()).collect()
    }

    /// Parses a hypothesis file: one atom per line, `#` starts a comment,
    /// blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, AtomParseError> {
        let mut atoms = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let atom = Atom::parse(line).map_err(|error| AtomParseError::InFile {
                line: i + 1,
                error: Box::new(error),
            })?;
            atoms.insert(atom);
        }
        Ok(SigmaSet { atoms })
    }
}

impl FromIterator<Atom> for SigmaSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        SigmaSet::new(iter)
    }
}

impl fmt::Display for SigmaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for atom in &self.atoms {
            writeln!(f, "{atom}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str) -> Variable {
        Variable::new(name).unwrap()
    }

    fn seq(names: &[&str]) -> VarSeq {
        names.iter().map(|n| var(n)).collect()
    }

    #[test]
    fn parses_fraction_decimal_and_integer_weights() {
        let a = Atom::parse("dep[1/4](x ; y)").unwrap();
        assert_eq!(a.p, ErrorRate::new(1, 4).unwrap());
        assert_eq!(a.lhs, seq(&["x"]));
        assert_eq!(a.rhs, seq(&["y"]));
        assert_eq!(Atom::parse("dep[0.25](x ; y)").unwrap(), a);
        assert_eq!(
            Atom::parse("dep[1](x ; y)").unwrap().p,
            ErrorRate::one()
        );
    }

    #[test]
    fn parses_multi_variable_and_empty_sides() {
        let a = Atom::parse("dep[0](x y ; x)").unwrap();
        assert_eq!(a.lhs, seq(&["x", "y"]));
        assert_eq!(a.rhs, seq(&["x"]));
        let b = Atom::parse("dep[1/2]( ; z)").unwrap();
        assert!(b.lhs.is_empty());
        let c = Atom::parse("dep[1/2](x ;)").unwrap();
        assert!(c.rhs.is_empty());
        let d = Atom::parse("dep[0](Department ; Salary)").unwrap();
        assert_eq!(d.lhs, seq(&["Department"]));
    }

    #[test]
    fn rejects_malformed_atoms() {
        for bad in [
            "dep(x ; y)",
            "dep[](x ; y)",
            "dep[1/4](x , y)",
            "dep[1/4](x ; y",
            "dep[1/4](x ; y ; z)",
            "dep[5/4](x ; y)",
            "dep[1/0](x ; y)",
            "dep[-1/4](x ; y)",
            "dp[1/4](x ; y)",
            "dep[1/4](x) extra",
        ] {
            assert!(Atom::parse(bad).is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn display_uses_integer_weights_when_whole() {
        for text in ["dep[1/4](x ; y)", "dep[0](x y ; x)", "dep[1](x ; y)", "dep[1/2]( ; z)"] {
            assert_eq!(Atom::parse(text).unwrap().to_string(), text);
        }
    }

    #[test]
    fn print_parse_roundtrip() {
        let atoms = [
            Atom::new(ErrorRate::new(3, 4).unwrap(), seq(&["x", "u"]), seq(&["y", "u"])),
            Atom::new(ErrorRate::zero(), VarSeq::empty(), VarSeq::empty()),
            Atom::new(ErrorRate::new(19, 20).unwrap(), seq(&["a", "a", "b"]), seq(&["c"])),
        ];
        for atom in atoms {
            assert_eq!(Atom::parse(&atom.to_string()).unwrap(), atom);
        }
    }

    #[test]
    fn normalization_sorts_and_dedups() {
        let a = Atom::parse("dep[1/4](y x y ; z z)").unwrap();
        let n = a.normalize();
        assert_eq!(n.lhs, [var("x"), var("y")].into());
        assert_eq!(n.rhs, [var("z")].into());
        let back = n.to_atom();
        assert_eq!(back.lhs, seq(&["x", "y"]));
        assert_eq!(back.rhs, seq(&["z"]));
    }

    #[test]
    fn sigma_file_parsing_skips_comments_and_blanks() {
        let text = "\n# hypotheses\ndep[1/4](x ; y)  # weakest link\n\ndep[0](y ; z)\n";
        let sigma = SigmaSet::parse(text).unwrap();
        assert_eq!(sigma.len(), 2);
        assert!(sigma.contains(&Atom::parse("dep[0](y ; z)").unwrap()));
        assert_eq!(
            sigma.variables(),
            [var("x"), var("y"), var("z")].into()
        );
    }

    #[test]
    fn sigma_file_reports_line_numbers() {
        let err = SigmaSet::parse("dep[0](x ; y)\nnot an atom\n").unwrap_err();
        assert!(matches!(err, AtomParseError::InFile { line: 2, .. }));
    }
}
