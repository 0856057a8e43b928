//! Automaton-guided task decomposition.
//!
//! States of the task DFA are ranked by their distance to acceptance. A
//! transition that lowers the rank by one is *progressing*, one into a dead
//! state is *unsafe*. Every group of progressing symbols from a state becomes
//! a conditional-reachability task `!unsafe U goal`; tasks whose goal is a
//! single atomic proposition are the primitives, the rest are recorded as
//! conjunction/disjunction/exclusion of primitives.
//!
//! All symbol sets are taken relative to an *admissible* subset of `2^AP`
//! (by default every symbol). Passing the labels that actually occur in a
//! labeled MDP drops letters that can never be read, e.g. a cell that is both
//! region 1 and region 2 when no such cell exists.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scltl::{Alphabet, Dfa, Symbol};

/// Propositional formula in one of the shapes decomposition produces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "atoms", rename_all = "snake_case")]
pub enum Prop {
    False,
    True,
    Atom(usize),
    /// Conjunction of atoms.
    And(Vec<usize>),
    /// First atom and none of the others.
    Minus(usize, Vec<usize>),
    /// Disjunction of atoms.
    Or(Vec<usize>),
    /// Exactly one of the listed symbols.
    Symbols(Vec<Symbol>),
}

impl Prop {
    pub fn holds(&self, sym: Symbol) -> bool {
        let has = |p: &usize| sym & (1 << p) != 0;
        match self {
            Prop::False => false,
            Prop::True => true,
            Prop::Atom(p) => has(p),
            Prop::And(ps) => ps.iter().all(has),
            Prop::Minus(p, qs) => has(p) && !qs.iter().any(has),
            Prop::Or(ps) => ps.iter().any(has),
            Prop::Symbols(ss) => ss.contains(&sym),
        }
    }

    pub fn max_atom(&self) -> Option<usize> {
        match self {
            Prop::False | Prop::True => None,
            Prop::Atom(p) => Some(*p),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().copied().max(),
            Prop::Minus(p, qs) => qs.iter().copied().chain([*p]).max(),
            Prop::Symbols(ss) => ss
                .iter()
                .map(|&s| (32 - s.leading_zeros()) as usize)
                .max()
                .and_then(|b| b.checked_sub(1)),
        }
    }

    pub fn atom(&self) -> Option<usize> {
        match self {
            Prop::Atom(p) => Some(*p),
            _ => None,
        }
    }

    /// Composition of atoms this formula corresponds to, if any.
    pub fn composition(&self) -> Option<(CompositionOp, Vec<usize>)> {
        match self {
            Prop::And(ps) => Some((CompositionOp::And, ps.clone())),
            Prop::Or(ps) => Some((CompositionOp::Or, ps.clone())),
            Prop::Minus(p, qs) if qs.len() == 1 => Some((CompositionOp::Minus, vec![*p, qs[0]])),
            _ => None,
        }
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> PropDisplay<'a> {
        PropDisplay {
            prop: self,
            alphabet,
        }
    }

    /// Simplest description of `set` relative to `domain` (the symbols that
    /// can occur). Tries an atom, a conjunction, an exclusion and a
    /// disjunction of atoms before falling back to an explicit symbol list.
    pub fn describe(set: &BTreeSet<Symbol>, domain: &BTreeSet<Symbol>, num_atoms: usize) -> Prop {
        let set: BTreeSet<Symbol> = set.intersection(domain).copied().collect();
        if set.is_empty() {
            return Prop::False;
        }
        if set == *domain {
            return Prop::True;
        }
        let matches = |p: &Prop| {
            domain
                .iter()
                .filter(|&&s| p.holds(s))
                .copied()
                .collect::<BTreeSet<_>>()
                == set
        };

        for p in 0..num_atoms {
            if matches(&Prop::Atom(p)) {
                return Prop::Atom(p);
            }
        }
        let common = set.iter().fold(Symbol::MAX, |acc, &s| acc & s);
        let common: Vec<usize> = (0..num_atoms).filter(|p| common & (1 << p) != 0).collect();
        if common.len() >= 2 && matches(&Prop::And(common.clone())) {
            return Prop::And(common);
        }
        let used = set.iter().fold(0, |acc, &s| acc | s);
        for p in 0..num_atoms {
            if !set.iter().all(|&s| s & (1 << p) != 0) {
                continue;
            }
            let excluded: Symbol = domain
                .iter()
                .filter(|&&s| s & (1 << p) != 0 && !set.contains(&s))
                .fold(0, |acc, &s| acc | s);
            let excluded = excluded & !used;
            let qs: Vec<usize> = (0..num_atoms)
                .filter(|q| excluded & (1 << q) != 0)
                .collect();
            let candidate = Prop::Minus(p, qs.clone());
            if !qs.is_empty() && matches(&candidate) {
                return candidate;
            }
        }
        let covered: Vec<usize> = (0..num_atoms)
            .filter(|&p| {
                domain
                    .iter()
                    .filter(|&&s| s & (1 << p) != 0)
                    .all(|s| set.contains(s))
                    && domain.iter().any(|&s| s & (1 << p) != 0)
            })
            .collect();
        if covered.len() >= 2 && matches(&Prop::Or(covered.clone())) {
            return Prop::Or(covered);
        }
        Prop::Symbols(set.into_iter().collect())
    }
}

pub struct PropDisplay<'a> {
    prop: &'a Prop,
    alphabet: &'a Alphabet,
}

impl fmt::Display for PropDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |p: &usize| self.alphabet.atoms()[*p].clone();
        let join = |ps: &[usize], sep: &str| ps.iter().map(name).collect::<Vec<_>>().join(sep);
        match self.prop {
            Prop::False => write!(f, "false"),
            Prop::True => write!(f, "true"),
            Prop::Atom(p) => write!(f, "{}", name(p)),
            Prop::And(ps) => write!(f, "{}", join(ps, " & ")),
            Prop::Or(ps) => write!(f, "{}", join(ps, " | ")),
            Prop::Minus(p, qs) if qs.len() == 1 => write!(f, "{} \\ {}", name(p), name(&qs[0])),
            Prop::Minus(p, qs) => write!(f, "{} \\ ({})", name(p), join(qs, " | ")),
            Prop::Symbols(ss) => {
                let n = self.alphabet.len();
                let terms: Vec<String> = ss
                    .iter()
                    .map(|&s| {
                        let lits: Vec<String> = (0..n)
                            .map(|p| {
                                if s & (1 << p) != 0 {
                                    name(&p)
                                } else {
                                    format!("!{}", name(&p))
                                }
                            })
                            .collect();
                        format!("({})", lits.join(" & "))
                    })
                    .collect();
                write!(f, "{}", terms.join(" | "))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionOp {
    Or,
    And,
    Minus,
}

impl fmt::Display for CompositionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionOp::Or => "or",
            CompositionOp::And => "and",
            CompositionOp::Minus => "minus",
        })
    }
}

/// DFA with ranks computed over an admissible symbol set.
#[derive(Debug, Clone)]
pub struct RankedDfa {
    dfa: Dfa,
    admissible: Vec<Symbol>,
    rank: Vec<Option<usize>>,
    reachable: Vec<bool>,
}

impl RankedDfa {
    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn admissible(&self) -> &[Symbol] {
        &self.admissible
    }

    /// `None` for states that cannot reach acceptance.
    pub fn rank(&self, q: usize) -> Option<usize> {
        self.rank[q]
    }

    pub fn is_dead(&self, q: usize) -> bool {
        self.rank[q].is_none()
    }

    pub fn is_reachable(&self, q: usize) -> bool {
        self.reachable[q]
    }

    /// Level sets `L_0, L_1, ...`.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let max = self.rank.iter().flatten().copied().max().unwrap_or(0);
        let mut levels = vec![Vec::new(); max + 1];
        for (q, r) in self.rank.iter().enumerate() {
            if let Some(r) = r {
                levels[*r].push(q);
            }
        }
        levels
    }
}

pub fn rank_states(dfa: &Dfa) -> Result<RankedDfa> {
    let all: Vec<Symbol> = dfa.alphabet().symbols().collect();
    rank_states_over(dfa, &all)
}

/// Backward BFS from the accepting set over admissible transitions.
///
/// With the full alphabet, every state except the sink must be coaccessible.
/// With a restricted alphabet, states that lose coaccessibility are treated
/// like the sink.
pub fn rank_states_over(dfa: &Dfa, admissible: &[Symbol]) -> Result<RankedDfa> {
    let mut admissible: Vec<Symbol> = admissible.to_vec();
    admissible.sort_unstable();
    admissible.dedup();
    if let Some(&s) = admissible
        .iter()
        .find(|&&s| !dfa.alphabet().contains_symbol(s))
    {
        return Err(Error::AlphabetMismatch(format!("symbol {s} outside 2^AP")));
    }
    let n = dfa.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for q in 0..n {
        for &s in &admissible {
            preds[dfa.step(q, s)].push(q);
        }
    }
    let mut rank = vec![None; n];
    let mut queue = VecDeque::new();
    for q in dfa.accepting_states() {
        rank[q] = Some(0);
        queue.push_back(q);
    }
    while let Some(q) = queue.pop_front() {
        let r = rank[q].unwrap();
        for &p in &preds[q] {
            if rank[p].is_none() {
                rank[p] = Some(r + 1);
                queue.push_back(p);
            }
        }
    }
    let full = admissible.len() == dfa.alphabet().num_symbols();
    if full {
        if let Some(q) = (0..n).find(|&q| rank[q].is_none() && Some(q) != dfa.sink()) {
            return Err(Error::NotCoaccessible(q));
        }
    }
    let mut reachable = vec![false; n];
    reachable[dfa.initial()] = true;
    let mut queue = VecDeque::from([dfa.initial()]);
    while let Some(q) = queue.pop_front() {
        for &s in &admissible {
            let t = dfa.step(q, s);
            if !reachable[t] {
                reachable[t] = true;
                queue.push_back(t);
            }
        }
    }
    Ok(RankedDfa {
        dfa: dfa.clone(),
        admissible,
        rank,
        reachable,
    })
}

/// Per-state partition of the admissible symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateTransitions {
    pub progressing: Vec<Symbol>,
    pub unsafe_: Vec<Symbol>,
    pub self_loop: Vec<Symbol>,
    pub lateral: Vec<Symbol>,
}

#[derive(Debug, Clone)]
pub struct TransitionClass {
    pub states: Vec<StateTransitions>,
}

pub fn classify_transitions(rdfa: &RankedDfa) -> TransitionClass {
    let dfa = &rdfa.dfa;
    let states = (0..dfa.num_states())
        .map(|q| {
            let mut st = StateTransitions::default();
            for &s in &rdfa.admissible {
                let t = dfa.step(q, s);
                if t == q {
                    st.self_loop.push(s);
                } else if rdfa.is_dead(t) {
                    st.unsafe_.push(s);
                } else if matches!((rdfa.rank[q], rdfa.rank[t]), (Some(a), Some(b)) if b + 1 == a) {
                    st.progressing.push(s);
                } else {
                    st.lateral.push(s);
                }
            }
            st
        })
        .collect();
    TransitionClass { states }
}

/// Conditional reachability task `!unsafe U goal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondReachTask {
    pub goal: Prop,
    #[serde(rename = "unsafe")]
    pub unsafe_: Prop,
    /// `(state, successor)` DFA edges that generated the task.
    pub sources: Vec<(usize, usize)>,
}

impl CondReachTask {
    pub fn new(goal: Prop, unsafe_: Prop) -> Self {
        CondReachTask {
            goal,
            unsafe_,
            sources: Vec::new(),
        }
    }

    pub fn is_primitive(&self) -> bool {
        self.goal.atom().is_some()
    }

    pub fn describe(&self, alphabet: &Alphabet) -> String {
        match &self.unsafe_ {
            Prop::False => format!("true U ({})", self.goal.display(alphabet)),
            u => format!(
                "!({}) U ({})",
                u.display(alphabet),
                self.goal.display(alphabet)
            ),
        }
    }

    fn key(&self, symbols: &[Symbol]) -> (Vec<Symbol>, Vec<Symbol>) {
        let den = |p: &Prop| symbols.iter().copied().filter(|&s| p.holds(s)).collect();
        (den(&self.goal), den(&self.unsafe_))
    }
}

/// The full set of conditional-reachability tasks, one per (state, successor)
/// group of progressing symbols, deduplicated by denotation.
pub fn decompose(rdfa: &RankedDfa) -> Vec<CondReachTask> {
    let classes = classify_transitions(rdfa);
    let dfa = &rdfa.dfa;
    let n_atoms = dfa.alphabet().len();
    let mut tasks: Vec<CondReachTask> = Vec::new();
    for q in 0..dfa.num_states() {
        if !rdfa.reachable[q] || rdfa.is_dead(q) || dfa.is_accepting(q) {
            continue;
        }
        let st = &classes.states[q];
        let admissible: BTreeSet<Symbol> = rdfa.admissible.iter().copied().collect();
        let unsafe_set: BTreeSet<Symbol> = st.unsafe_.iter().copied().collect();
        let unsafe_ = Prop::describe(&unsafe_set, &admissible, n_atoms);
        let domain: BTreeSet<Symbol> = admissible.difference(&unsafe_set).copied().collect();
        let mut targets: Vec<usize> = st.progressing.iter().map(|&s| dfa.step(q, s)).collect();
        targets.sort_unstable();
        targets.dedup();
        for t in targets {
            let group: BTreeSet<Symbol> = st
                .progressing
                .iter()
                .copied()
                .filter(|&s| dfa.step(q, s) == t)
                .collect();
            let task = CondReachTask {
                goal: Prop::describe(&group, &domain, n_atoms),
                unsafe_: unsafe_.clone(),
                sources: vec![(q, t)],
            };
            let key = task.key(&rdfa.admissible);
            match tasks.iter_mut().find(|x| x.key(&rdfa.admissible) == key) {
                Some(existing) => existing.sources.push((q, t)),
                None => tasks.push(task),
            }
        }
    }
    tasks
}

/// Non-primitive task with its expression over atomic goals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeTask {
    pub task: CondReachTask,
    pub op: CompositionOp,
    /// Atom indices, in operand order.
    pub operands: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveSet {
    /// Tasks of the decomposition with an atomic goal.
    pub primitives: Vec<CondReachTask>,
    /// Atomic tasks not in the decomposition but needed as operands of a
    /// composite.
    pub supplementary: Vec<CondReachTask>,
    pub composites: Vec<CompositeTask>,
}

impl PrimitiveSet {
    /// Primitives followed by supplementary atomic tasks.
    pub fn atomic_tasks(&self) -> impl Iterator<Item = &CondReachTask> {
        self.primitives.iter().chain(&self.supplementary)
    }
}

pub fn prune_to_primitives(tasks: &[CondReachTask]) -> Result<PrimitiveSet> {
    let mut primitives: Vec<CondReachTask> = Vec::new();
    let mut composites = Vec::new();
    for t in tasks {
        if t.is_primitive() {
            primitives.push(t.clone());
            continue;
        }
        let (op, operands) = t
            .goal
            .composition()
            .ok_or_else(|| Error::NotComposable(format!("{:?}", t.goal)))?;
        composites.push(CompositeTask {
            task: t.clone(),
            op,
            operands,
        });
    }
    let mut supplementary: Vec<CondReachTask> = Vec::new();
    for c in &composites {
        for &p in &c.operands {
            let have = primitives
                .iter()
                .chain(&supplementary)
                .any(|t| t.goal == Prop::Atom(p) && t.unsafe_ == c.task.unsafe_);
            if !have {
                supplementary.push(CondReachTask::new(Prop::Atom(p), c.task.unsafe_.clone()));
            }
        }
    }
    Ok(PrimitiveSet {
        primitives,
        supplementary,
        composites,
    })
}

/// One task as written to `tasks.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    /// Human-readable `!unsafe U goal`.
    pub text: String,
    pub primitive: bool,
    #[serde(flatten)]
    pub task: CondReachTask,
}

/// Decomposition of one DFA as written to `tasks.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFile {
    pub ap: Vec<String>,
    /// DFA states per rank, rank 0 first.
    pub levels: Vec<Vec<usize>>,
    pub tasks: Vec<TaskEntry>,
    pub pruned: PrimitiveSet,
}

impl TaskFile {
    pub fn new(rdfa: &RankedDfa) -> Result<Self> {
        let ap = rdfa.dfa().alphabet();
        let tasks = decompose(rdfa);
        let pruned = prune_to_primitives(&tasks)?;
        Ok(TaskFile {
            ap: ap.atoms().to_vec(),
            levels: rdfa.levels(),
            tasks: tasks
                .into_iter()
                .map(|t| TaskEntry {
                    text: t.describe(ap),
                    primitive: t.is_primitive(),
                    task: t,
                })
                .collect(),
            pruned,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scltl::{parse, to_dfa};

    fn eventually_a() -> Dfa {
        let ap = Alphabet::new(["a"]).unwrap();
        to_dfa(&parse("F a", &ap).unwrap(), &ap).unwrap()
    }

    #[test]
    fn ranks_of_eventually() {
        let d = eventually_a();
        let r = rank_states(&d).unwrap();
        let qf = d.step(d.initial(), 1);
        assert_eq!(r.levels(), vec![vec![qf], vec![d.initial()]]);
    }

    #[test]
    fn all_accepting_is_rank_zero() {
        let ap = Alphabet::new(["a"]).unwrap();
        let d = to_dfa(&crate::scltl::Formula::True, &ap).unwrap();
        let r = rank_states(&d).unwrap();
        assert!((0..d.num_states()).all(|q| r.rank(q) == Some(0)));
        let c = classify_transitions(&r);
        for st in &c.states {
            assert!(st.progressing.is_empty() && st.unsafe_.is_empty() && st.lateral.is_empty());
            assert_eq!(st.self_loop.len(), 2);
        }
    }

    #[test]
    fn single_task_for_eventually() {
        let r = rank_states(&eventually_a()).unwrap();
        let tasks = decompose(&r);
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].goal, Prop::Atom(0));
        assert_eq!(tasks[0].unsafe_, Prop::False);
        let set = prune_to_primitives(&tasks).unwrap();
        assert_eq!(set.primitives, tasks);
        assert!(set.composites.is_empty() && set.supplementary.is_empty());
    }

    #[test]
    fn identical_states_share_tasks() {
        // Both branches of the disjunction need `!c U g` afterwards.
        let ap = Alphabet::new(["a", "b", "g", "c"]).unwrap();
        let f = parse("!c U ((a | b) & X (!c U g))", &ap).unwrap();
        let d = to_dfa(&f, &ap).unwrap();
        let adm = [0b0000, 0b0001, 0b0010, 0b0100, 0b1000];
        let r = rank_states_over(&d, &adm).unwrap();
        let tasks = decompose(&r);
        let g_tasks: Vec<_> = tasks.iter().filter(|t| t.goal == Prop::Atom(2)).collect();
        assert_eq!(g_tasks.len(), 1);
    }

    #[test]
    fn describe_shapes() {
        let dom: BTreeSet<Symbol> = [0, 1, 2, 4, 6].into_iter().collect();
        let d = |s: &[Symbol]| Prop::describe(&s.iter().copied().collect(), &dom, 3);
        assert_eq!(d(&[1]), Prop::Atom(0));
        assert_eq!(d(&[2, 6]), Prop::Atom(1));
        assert_eq!(d(&[6]), Prop::And(vec![1, 2]));
        assert_eq!(d(&[2]), Prop::Minus(1, vec![2]));
        assert_eq!(d(&[4]), Prop::Minus(2, vec![1]));
        assert_eq!(d(&[1, 2, 6]), Prop::Or(vec![0, 1]));
        assert_eq!(d(&[]), Prop::False);
        assert_eq!(d(&[0, 1, 2, 4, 6]), Prop::True);
    }

    #[test]
    fn non_composable_goal_is_an_error() {
        let t = CondReachTask::new(Prop::Symbols(vec![1, 6]), Prop::False);
        assert!(matches!(
            prune_to_primitives(&[t]),
            Err(Error::NotComposable(_))
        ));
    }

    #[test]
    fn three_region_task() {
        let ap = Alphabet::new(["s1", "s2", "s3", "C"]).unwrap();
        let f = parse("!C U F(s1 & (F s2 & F s3))", &ap)
            .unwrap()
            .guard_eventualities();
        let d = to_dfa(&f, &ap).unwrap();
        let r = rank_states_over(&d, &[0, 1, 2, 4, 6, 8]).unwrap();
        let levels = r.levels();
        assert_eq!(
            levels.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![1, 3, 1]
        );
        assert_eq!(levels[2], vec![d.initial()]);
        let set = prune_to_primitives(&decompose(&r)).unwrap();
        let mut goals: Vec<_> = set.primitives.iter().map(|t| t.goal.clone()).collect();
        goals.sort();
        assert_eq!(goals, vec![Prop::Atom(0), Prop::Atom(1), Prop::Atom(2)]);
        assert!(set.primitives.iter().all(|t| t.unsafe_ == Prop::Atom(3)));
        assert!(set.supplementary.is_empty());
        assert_eq!(set.composites.len(), 1);
        assert_eq!(set.composites[0].op, CompositionOp::And);
        assert_eq!(set.primitives[0].describe(&ap), "!(C) U (s1)");
    }
}
