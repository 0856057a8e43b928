use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A letter of `2^AP`, encoded as a bitmask over the alphabet's atom order.
pub type Symbol = u32;

const MAX_ATOMS: usize = 16;

/// Ordered list of atomic propositions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    atoms: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let atoms: Vec<String> = atoms.into_iter().map(Into::into).collect();
        if atoms.len() > MAX_ATOMS {
            return Err(Error::InvalidParameter(format!(
                "at most {MAX_ATOMS} atomic propositions are supported, got {}",
                atoms.len()
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !is_identifier(a) {
                return Err(Error::InvalidParameter(format!(
                    "`{a}` is not a valid proposition name"
                )));
            }
            if atoms[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate proposition `{a}`"
                )));
            }
        }
        Ok(Alphabet { atoms })
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == name)
    }

    pub fn num_symbols(&self) -> usize {
        1 << self.atoms.len()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> {
        0..self.num_symbols() as Symbol
    }

    /// Builds a symbol from proposition names.
    pub fn symbol<S: AsRef<str>>(&self, names: &[S]) -> Result<Symbol> {
        names.iter().try_fold(0, |acc, n| {
            let n = n.as_ref();
            self.index_of(n)
                .map(|i| acc | (1 << i))
                .ok_or_else(|| Error::UnknownAtom(n.to_string()))
        })
    }

    pub fn contains_symbol(&self, sym: Symbol) -> bool {
        (sym as usize) < self.num_symbols()
    }

    /// `{a,b}` rendering of a symbol.
    pub fn symbol_name(&self, sym: Symbol) -> String {
        let names: Vec<&str> = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| sym & (1 << i) != 0)
            .map(|(_, a)| a.as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "X" | "U" | "F" | "true")
}

/// Abstract syntax of an sc-LTL formula. Atoms are indices into the
/// [`Alphabet`] the formula was parsed against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Atom(usize),
    NegAtom(usize),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
}

impl Formula {
    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Formula {
        Formula::Until(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    /// Rewrites `F f` as `true U f`.
    pub fn normalize(&self) -> Formula {
        use Formula::*;
        match self {
            True | Atom(_) | NegAtom(_) => self.clone(),
            And(l, r) => Formula::and(l.normalize(), r.normalize()),
            Or(l, r) => Formula::or(l.normalize(), r.normalize()),
            Next(f) => Formula::next(f.normalize()),
            Until(l, r) => Formula::until(l.normalize(), r.normalize()),
            Eventually(f) => Formula::until(True, f.normalize()),
        }
    }

    pub fn is_normalized(&self) -> bool {
        use Formula::*;
        match self {
            True | Atom(_) | NegAtom(_) => true,
            And(l, r) | Or(l, r) | Until(l, r) => l.is_normalized() && r.is_normalized(),
            Next(f) => f.is_normalized(),
            Eventually(_) => false,
        }
    }

    /// Negation pushed down to the atoms. Only defined on propositional
    /// formulas built from literals with `&` and `|`.
    pub fn negate(&self) -> Option<Formula> {
        use Formula::*;
        Some(match self {
            Atom(p) => NegAtom(*p),
            NegAtom(p) => Atom(*p),
            And(l, r) => Formula::or(l.negate()?, r.negate()?),
            Or(l, r) => Formula::and(l.negate()?, r.negate()?),
            _ => return None,
        })
    }

    /// Safety-guarded reading of a task of the shape `!g U f`: every
    /// eventuality inside `f` is strengthened to `!g U ...`, so the guard must
    /// hold until the whole task is discharged. Other shapes are returned
    /// unchanged.
    ///
    /// Under plain finite-trace semantics `!g U F f` is equivalent to `F f`
    /// and the guard has no effect; this rewrite gives the intended
    /// "avoid `g` until done" task.
    pub fn guard_eventualities(&self) -> Formula {
        let normalized = self.normalize();
        match &normalized {
            Formula::Until(guard, body) if guard.is_literal_conjunction() => {
                let guarded = body.replace_eventualities(guard);
                match guarded {
                    // `!g U (!g U x)` collapses to `!g U x`.
                    Formula::Until(ref g2, ref x) if **g2 == **guard => {
                        Formula::until((**guard).clone(), (**x).clone())
                    }
                    other => Formula::until((**guard).clone(), other),
                }
            }
            _ => normalized,
        }
    }

    fn is_literal_conjunction(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::NegAtom(_) => true,
            Formula::And(l, r) => l.is_literal_conjunction() && r.is_literal_conjunction(),
            _ => false,
        }
    }

    fn replace_eventualities(&self, guard: &Formula) -> Formula {
        use Formula::*;
        match self {
            True | Atom(_) | NegAtom(_) => self.clone(),
            And(l, r) => Formula::and(
                l.replace_eventualities(guard),
                r.replace_eventualities(guard),
            ),
            Or(l, r) => Formula::or(
                l.replace_eventualities(guard),
                r.replace_eventualities(guard),
            ),
            Next(f) => Formula::next(f.replace_eventualities(guard)),
            Until(l, r) if **l == True => {
                Formula::until(guard.clone(), r.replace_eventualities(guard))
            }
            Until(l, r) => Formula::until(
                l.replace_eventualities(guard),
                r.replace_eventualities(guard),
            ),
            Eventually(f) => Formula::until(guard.clone(), f.replace_eventualities(guard)),
        }
    }

    /// Largest atom index used, if any.
    pub fn max_atom(&self) -> Option<usize> {
        use Formula::*;
        match self {
            True => None,
            Atom(p) | NegAtom(p) => Some(*p),
            And(l, r) | Or(l, r) | Until(l, r) => l.max_atom().max(r.max_atom()),
            Next(f) | Eventually(f) => f.max_atom(),
        }
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            alphabet,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    alphabet: &'a Alphabet,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self.formula, self.alphabet, f)
    }
}

fn write_formula(fm: &Formula, ap: &Alphabet, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    use Formula::*;
    let name = |p: usize| ap.atoms().get(p).map(String::as_str).unwrap_or("?");
    match fm {
        True => write!(f, "true"),
        Atom(p) => write!(f, "{}", name(*p)),
        NegAtom(p) => write!(f, "!{}", name(*p)),
        And(l, r) => {
            write!(f, "(")?;
            write_formula(l, ap, f)?;
            write!(f, " & ")?;
            write_formula(r, ap, f)?;
            write!(f, ")")
        }
        Or(l, r) => {
            write!(f, "(")?;
            write_formula(l, ap, f)?;
            write!(f, " | ")?;
            write_formula(r, ap, f)?;
            write!(f, ")")
        }
        Next(g) => {
            write!(f, "X ")?;
            write_formula(g, ap, f)
        }
        Until(l, r) => {
            write!(f, "(")?;
            write_formula(l, ap, f)?;
            write!(f, " U ")?;
            write_formula(r, ap, f)?;
            write!(f, ")")
        }
        Eventually(g) => {
            write!(f, "F ")?;
            write_formula(g, ap, f)
        }
    }
}
