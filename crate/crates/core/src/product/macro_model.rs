use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;

use super::ProductModel;
use crate::error::{Error, Result};
use crate::options::OptionPolicy;
use crate::solver::{solve_absorbing, Choice, ChoiceId, ChoiceModel};

/// Multi-time model of running one option from one product state.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroEntry {
    pub option: usize,
    /// Expected discounted product reward collected before the option exits.
    pub reward: f64,
    /// `(exit state, sum_k gamma^k P(exit there at step k))`.
    pub outcomes: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroModel {
    pub gamma: f64,
    pub alpha: f64,
    /// Per product state; an option is missing where it would terminate
    /// immediately.
    pub entries: Vec<Vec<MacroEntry>>,
}

impl MacroModel {
    /// Appends the option choices to `model`.
    pub fn add_to(&self, model: &mut ChoiceModel) {
        for (i, es) in self.entries.iter().enumerate() {
            for e in es {
                model.choices[i].push(Choice {
                    id: ChoiceId::Option(e.option),
                    reward: e.reward,
                    next: e.outcomes.clone(),
                });
            }
        }
    }

    pub fn entry(&self, i: usize, option: usize) -> Option<&MacroEntry> {
        self.entries[i].iter().find(|e| e.option == option)
    }
}

/// Builds the option model of every option in every non-absorbing product
/// state.
///
/// While an option runs in automaton state `q` the product stays in the
/// transient set `{(s, q) : beta(s) = 0}`; it exits on the first step that
/// changes `q` or enters a terminating state. One linear solve per
/// `(q, option)` gives all discounted exit masses and the discounted reward.
pub fn build_macro_model(
    product: &ProductModel,
    options: &[OptionPolicy],
    gamma: f64,
    alpha: f64,
) -> Result<MacroModel> {
    let n = product.num_states();
    let mdp = product.mdp();
    for o in options {
        if o.policy.num_states() != mdp.num_states() || o.termination.len() != mdp.num_states() {
            return Err(Error::InvalidParameter(format!(
                "option `{}` does not match the MDP state space",
                o.name
            )));
        }
    }
    let mut by_q: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        if !product.is_absorbing(i) {
            by_q.entry(product.state(i).1).or_default().push(i);
        }
    }
    let mut qs: Vec<usize> = by_q.keys().copied().collect();
    qs.sort_unstable();

    let mut entries: Vec<Vec<MacroEntry>> = vec![Vec::new(); n];
    for &q in &qs {
        for (oi, o) in options.iter().enumerate() {
            let starts: Vec<usize> = by_q[&q]
                .iter()
                .copied()
                .filter(|&i| !o.terminates(product.state(i).0))
                .collect();
            if starts.is_empty() {
                continue;
            }
            let local: HashMap<usize, usize> =
                starts.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let m = starts.len();
            let mut w = DMatrix::<f64>::zeros(m, m);
            let mut exit_cols: HashMap<usize, usize> = HashMap::new();
            let mut exits: Vec<usize> = Vec::new();
            let mut exit_mass: Vec<(usize, usize, f64)> = Vec::new();
            let mut reward = vec![0.0; m];
            let mut leaves = vec![false; m];
            for (k, &i) in starts.iter().enumerate() {
                let s = product.state(i).0;
                for &(id, pa) in &o.policy.rows[s] {
                    let ChoiceId::Action(a) = id else { continue };
                    if pa == 0.0 {
                        continue;
                    }
                    for &(t, p) in mdp.row(s, a) {
                        let j = product.successor(i, t);
                        let mass = pa * p;
                        match local.get(&j) {
                            Some(&kj) => w[(k, kj)] += mass,
                            None => {
                                let col = *exit_cols.entry(j).or_insert_with(|| {
                                    exits.push(j);
                                    exits.len() - 1
                                });
                                exit_mass.push((k, col, mass));
                                leaves[k] = true;
                                if product.is_accepting(j) {
                                    reward[k] += mass;
                                }
                            }
                        }
                    }
                }
            }
            let trapped = trapped_states(&w, &leaves);
            if !trapped.is_empty() {
                return Err(Error::NotAbsorbing {
                    option: o.name.clone(),
                    q,
                    states: trapped
                        .iter()
                        .map(|&k| product.state(starts[k]).0)
                        .collect(),
                });
            }
            let cols = exits.len() + 1;
            let mut b = DMatrix::<f64>::zeros(m, cols);
            for (k, col, mass) in exit_mass {
                b[(k, col)] += gamma * mass;
            }
            for k in 0..m {
                b[(k, cols - 1)] = alpha * reward[k];
            }
            let x = solve_absorbing(&(w * gamma), &b)?;
            for (k, &i) in starts.iter().enumerate() {
                let outcomes: Vec<(usize, f64)> = exits
                    .iter()
                    .enumerate()
                    .map(|(c, &j)| (j, x[(k, c)]))
                    .filter(|&(_, v)| v > 0.0)
                    .collect();
                entries[i].push(MacroEntry {
                    option: oi,
                    reward: x[(k, cols - 1)],
                    outcomes,
                });
            }
        }
    }
    Ok(MacroModel {
        gamma,
        alpha,
        entries,
    })
}

/// Transient states from which no exit is reachable.
fn trapped_states(w: &DMatrix<f64>, leaves: &[bool]) -> Vec<usize> {
    let m = leaves.len();
    let mut ok = leaves.to_vec();
    let mut queue: VecDeque<usize> = (0..m).filter(|&k| ok[k]).collect();
    while let Some(j) = queue.pop_front() {
        for k in 0..m {
            if !ok[k] && w[(k, j)] > 0.0 {
                ok[k] = true;
                queue.push_back(k);
            }
        }
    }
    (0..m).filter(|&k| !ok[k]).collect()
}
