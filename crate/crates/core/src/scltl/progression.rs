//! Formula progression over residual obligations.
//!
//! A residual is what remains to be satisfied by the rest of the word. All
//! constructors keep residuals in a canonical disjunctive normal form (sorted,
//! deduplicated, absorbed), which makes structurally equal residuals equal as
//! values and lets the DFA builder hash-cons them. With that form a residual
//! accepts the empty suffix iff it is exactly `True`.

use super::formula::{Formula, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Residual {
    False,
    True,
    /// At least one more letter follows.
    Live,
    Lit(usize, bool),
    And(Vec<Residual>),
    Or(Vec<Residual>),
    Next(Box<Residual>),
    Until(Box<Residual>, Box<Residual>),
}

impl Residual {
    pub(crate) fn from_formula(f: &Formula) -> Residual {
        use Formula::*;
        match f {
            True => Residual::True,
            Atom(p) => Residual::Lit(*p, true),
            NegAtom(p) => Residual::Lit(*p, false),
            And(l, r) => mk_and(vec![Self::from_formula(l), Self::from_formula(r)]),
            Or(l, r) => mk_or(vec![Self::from_formula(l), Self::from_formula(r)]),
            Next(g) => Residual::Next(Box::new(Self::from_formula(g))),
            Until(l, r) => mk_until(Self::from_formula(l), Self::from_formula(r)),
            Eventually(g) => mk_until(Residual::True, Self::from_formula(g)),
        }
    }

    pub(crate) fn accepts_empty(&self) -> bool {
        *self == Residual::True
    }

    pub(crate) fn progress(&self, sym: Symbol) -> Residual {
        use Residual::*;
        match self {
            False => False,
            True | Live => True,
            Lit(p, pos) => {
                if (sym & (1 << p) != 0) == *pos {
                    True
                } else {
                    False
                }
            }
            And(xs) => mk_and(xs.iter().map(|x| x.progress(sym)).collect()),
            Or(xs) => mk_or(xs.iter().map(|x| x.progress(sym)).collect()),
            Next(g) => {
                if **g == True {
                    Live
                } else {
                    (**g).clone()
                }
            }
            Until(l, r) => mk_or(vec![
                r.progress(sym),
                mk_and(vec![l.progress(sym), self.clone()]),
            ]),
        }
    }
}

fn mk_until(l: Residual, r: Residual) -> Residual {
    match (&l, &r) {
        (_, Residual::False) => Residual::False,
        // `l U true` holds at any non-empty suffix.
        (_, Residual::True) | (_, Residual::Live) => Residual::Live,
        (Residual::False, _) => mk_and(vec![r, Residual::Live]),
        _ => Residual::Until(Box::new(l), Box::new(r)),
    }
}

/// Disjunctive normal form: a list of conjunctive clauses over elements
/// (`Live`, literals, `Next` and `Until`). `[]` is `False`, `[[]]` is `True`.
fn clauses(x: Residual) -> Vec<Vec<Residual>> {
    match x {
        Residual::False => Vec::new(),
        Residual::True => vec![Vec::new()],
        Residual::Or(xs) => xs.into_iter().flat_map(clauses).collect(),
        Residual::And(ys) => vec![ys],
        other => vec![vec![other]],
    }
}

fn mk_and(xs: Vec<Residual>) -> Residual {
    let mut acc: Vec<Vec<Residual>> = vec![Vec::new()];
    for x in xs {
        let cs = clauses(x);
        acc = acc
            .iter()
            .flat_map(|a| {
                cs.iter().map(move |c| {
                    let mut v = a.clone();
                    v.extend(c.iter().cloned());
                    v
                })
            })
            .collect();
        if acc.is_empty() {
            return Residual::False;
        }
    }
    from_clauses(acc)
}

fn mk_or(xs: Vec<Residual>) -> Residual {
    from_clauses(xs.into_iter().flat_map(clauses).collect())
}

/// Canonical residual of a DNF: clauses are sorted and deduplicated,
/// contradictory clauses dropped and subsumed clauses absorbed. Since every
/// element is a subformula of the original formula (or `Live`), the set of
/// canonical residuals reachable by progression is finite.
fn from_clauses(cs: Vec<Vec<Residual>>) -> Residual {
    let mut cs: Vec<Vec<Residual>> = cs
        .into_iter()
        .filter_map(|mut c| {
            c.sort();
            c.dedup();
            // Anything other than `True` already requires a non-empty suffix.
            if c.len() > 1 {
                c.retain(|x| *x != Residual::Live);
            }
            (!has_complementary_literals(&c)).then_some(c)
        })
        .collect();
    cs.sort();
    cs.dedup();
    if cs.iter().any(Vec::is_empty) {
        return Residual::True;
    }
    let singletons: Vec<Residual> = cs
        .iter()
        .filter(|c| c.len() == 1)
        .map(|c| c[0].clone())
        .collect();
    if singletons.contains(&Residual::Live) || has_complementary_literals(&singletons) {
        return Residual::Live;
    }
    let kept: Vec<Vec<Residual>> = cs
        .iter()
        .filter(|c| {
            !cs.iter()
                .any(|d| d.len() < c.len() && d.iter().all(|x| c.binary_search(x).is_ok()))
        })
        .cloned()
        .collect();
    let mut terms: Vec<Residual> = kept
        .into_iter()
        .map(|mut c| {
            if c.len() == 1 {
                c.pop().unwrap()
            } else {
                Residual::And(c)
            }
        })
        .collect();
    match terms.len() {
        0 => Residual::False,
        1 => terms.pop().unwrap(),
        _ => {
            terms.sort();
            Residual::Or(terms)
        }
    }
}

fn has_complementary_literals(xs: &[Residual]) -> bool {
    xs.iter().any(|x| match x {
        Residual::Lit(p, true) => xs.contains(&Residual::Lit(*p, false)),
        _ => false,
    })
}
