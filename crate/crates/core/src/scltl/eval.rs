use super::formula::{Formula, Symbol};

/// Finite-trace satisfaction `w |= f`, evaluated directly on the word.
///
/// The empty word satisfies only `true` (and boolean combinations that reduce
/// to it). `X f` is false at the last position, and `l U r` needs `r` at some
/// position of the word.
pub fn eval_word(f: &Formula, w: &[Symbol]) -> bool {
    holds(f, w, 0)
}

/// Satisfaction by the empty suffix.
pub fn eval_empty(f: &Formula) -> bool {
    use Formula::*;
    match f {
        True => true,
        And(l, r) => eval_empty(l) && eval_empty(r),
        Or(l, r) => eval_empty(l) || eval_empty(r),
        Atom(_) | NegAtom(_) | Next(_) | Until(..) | Eventually(_) => false,
    }
}

fn holds(f: &Formula, w: &[Symbol], i: usize) -> bool {
    use Formula::*;
    if i >= w.len() {
        return eval_empty(f);
    }
    match f {
        True => true,
        Atom(p) => w[i] & (1 << p) != 0,
        NegAtom(p) => w[i] & (1 << p) == 0,
        And(l, r) => holds(l, w, i) && holds(r, w, i),
        Or(l, r) => holds(l, w, i) || holds(r, w, i),
        Next(g) => i + 1 < w.len() && holds(g, w, i + 1),
        Until(l, r) => {
            for k in i..w.len() {
                if holds(r, w, k) {
                    return true;
                }
                if !holds(l, w, k) {
                    return false;
                }
            }
            false
        }
        Eventually(g) => (i..w.len()).any(|k| holds(g, w, k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: Symbol = 0b01;
    const G: Symbol = 0b10;

    #[test]
    fn atom_at_first_position() {
        assert!(eval_word(&Formula::Atom(0), &[1]));
        assert!(!eval_word(&Formula::Atom(0), &[0, 1]));
    }

    #[test]
    fn guarded_until() {
        let f = Formula::until(Formula::NegAtom(0), Formula::Atom(1));
        assert!(eval_word(&f, &[0, G]));
        assert!(!eval_word(&f, &[C, G]));
        assert!(!eval_word(&f, &[0, 0]));
    }

    #[test]
    fn next_is_false_at_the_end() {
        let f = Formula::next(Formula::True);
        assert!(!eval_word(&f, &[0]));
        assert!(eval_word(&f, &[0, 0]));
    }

    #[test]
    fn empty_word_only_satisfies_true() {
        assert!(eval_word(&Formula::True, &[]));
        assert!(!eval_word(&Formula::Atom(0), &[]));
        assert!(!eval_word(&Formula::NegAtom(0), &[]));
        assert!(!eval_word(
            &Formula::until(Formula::True, Formula::True),
            &[]
        ));
    }
}
