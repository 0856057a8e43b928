//! Product of a labeled MDP with a task DFA, its option (macro-action)
//! model and the four planners.

mod macro_model;
mod plan;

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mdp::LabeledMdp;
use crate::scltl::Dfa;
use crate::solver::{Choice, ChoiceId, ChoiceModel};

pub use macro_model::{build_macro_model, MacroEntry, MacroModel};
pub use plan::{PlanResult, PlannerConfig, PlannerKind, ProductPlanner};

/// Reachable part of `S x Q`.
///
/// The automaton reads the label of every state entered, including the
/// initial one, so a run starting in `s0` begins in `delta(q0, L(s0))`.
#[derive(Debug, Clone)]
pub struct ProductModel {
    mdp: LabeledMdp,
    dfa: Dfa,
    states: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    initial: Vec<(usize, f64)>,
}

pub fn build_product(mdp: &LabeledMdp, dfa: &Dfa) -> Result<ProductModel> {
    if mdp.ap() != dfa.alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "MDP propositions {:?} differ from automaton propositions {:?}",
            mdp.ap().atoms(),
            dfa.alphabet().atoms()
        )));
    }
    let mut states = Vec::new();
    let mut index = HashMap::new();
    let mut queue = VecDeque::new();
    let mut visit =
        |pair: (usize, usize), states: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
            *index.entry(pair).or_insert_with(|| {
                states.push(pair);
                queue.push_back(states.len() - 1);
                states.len() - 1
            })
        };
    let mut initial = Vec::new();
    for &(s, p) in mdp.mu0() {
        let q = dfa.step(dfa.initial(), mdp.label(s));
        let i = visit((s, q), &mut states, &mut queue);
        initial.push((i, p));
    }
    while let Some(i) = queue.pop_front() {
        let (s, q) = states[i];
        if dfa.is_accepting(q) || dfa.sink() == Some(q) {
            continue;
        }
        for a in mdp.defined_actions(s) {
            for &(t, _) in mdp.row(s, a) {
                let qt = dfa.step(q, mdp.label(t));
                visit((t, qt), &mut states, &mut queue);
            }
        }
    }
    Ok(ProductModel {
        mdp: mdp.clone(),
        dfa: dfa.clone(),
        states,
        index,
        initial,
    })
}

impl ProductModel {
    pub fn mdp(&self) -> &LabeledMdp {
        &self.mdp
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// `(s, q)` of product state `i`.
    pub fn state(&self, i: usize) -> (usize, usize) {
        self.states[i]
    }

    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    pub fn index_of(&self, s: usize, q: usize) -> Option<usize> {
        self.index.get(&(s, q)).copied()
    }

    /// Initial product states with their probabilities.
    pub fn initial(&self) -> &[(usize, f64)] {
        &self.initial
    }

    pub fn is_accepting(&self, i: usize) -> bool {
        self.dfa.is_accepting(self.states[i].1)
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        let q = self.states[i].1;
        self.dfa.is_accepting(q) || self.dfa.sink() == Some(q)
    }

    /// Product successor of `i` when the MDP moves to `t`.
    pub fn successor(&self, i: usize, t: usize) -> usize {
        let q = self.states[i].1;
        self.index[&(t, self.dfa.step(q, self.mdp.label(t)))]
    }

    /// Micro-action model: reward `alpha * P(q' in F)`, successors weighted
    /// by `gamma`.
    pub fn micro_model(&self, gamma: f64, alpha: f64) -> ChoiceModel {
        let n = self.num_states();
        let mut choices = vec![Vec::new(); n];
        let mut pinned = vec![false; n];
        for i in 0..n {
            if self.is_absorbing(i) {
                pinned[i] = true;
                continue;
            }
            let s = self.states[i].0;
            for a in self.mdp.defined_actions(s) {
                let mut reward = 0.0;
                let mut next: Vec<(usize, f64)> = Vec::new();
                for &(t, p) in self.mdp.row(s, a) {
                    let j = self.successor(i, t);
                    if self.is_accepting(j) {
                        reward += alpha * p;
                    }
                    next.push((j, gamma * p));
                }
                choices[i].push(Choice {
                    id: ChoiceId::Action(a),
                    reward,
                    next,
                });
            }
        }
        ChoiceModel { choices, pinned }
    }

    /// `sum mu0(s) V(s, q0(s))`.
    pub fn initial_value(&self, values: &[f64]) -> f64 {
        self.initial.iter().map(|&(i, p)| p * values[i]).sum()
    }

    pub fn monitor(&self) -> Vec<(usize, f64)> {
        self.initial.clone()
    }

    /// `s,q,value` rows.
    pub fn values_csv(&self, values: &[f64]) -> String {
        let mut out = String::from("s,q,value\n");
        for (i, &(s, q)) in self.states.iter().enumerate() {
            out.push_str(&format!("{s},{q},{}\n", values[i]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scltl::{parse, to_dfa, Alphabet};
    use crate::solver::{hardmax_vi, ViConfig};

    #[test]
    fn single_state_eventually() {
        let ap = Alphabet::new(["a"]).unwrap();
        let dfa = to_dfa(&parse("F a", &ap).unwrap(), &ap).unwrap();
        // The state is labeled `a` but the label is consumed at start, so
        // use an unlabeled start with a move onto the labeled state.
        let mdp = LabeledMdp::new(
            ap,
            vec!["go".into()],
            vec![vec![vec![(1, 1.0)]], vec![vec![(1, 1.0)]]],
            vec![(0, 1.0)],
            vec![0, 1],
        )
        .unwrap();
        let prod = build_product(&mdp, &dfa).unwrap();
        assert!(prod.num_states() <= 2 * dfa.num_states());
        let model = prod.micro_model(0.9, 100.0);
        let (v, _) = hardmax_vi(&model, &ViConfig::default()).unwrap();
        assert!((prod.initial_value(&v.values) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn alphabet_mismatch() {
        let ap = Alphabet::new(["a"]).unwrap();
        let other = Alphabet::new(["b"]).unwrap();
        let dfa = to_dfa(&parse("F b", &other).unwrap(), &other).unwrap();
        let mdp = LabeledMdp::new(
            ap,
            vec!["x".into()],
            vec![vec![vec![(0, 1.0)]]],
            vec![(0, 1.0)],
            vec![0],
        )
        .unwrap();
        assert!(matches!(
            build_product(&mdp, &dfa),
            Err(Error::AlphabetMismatch(_))
        ));
    }
}
