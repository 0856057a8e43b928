//! Labeled MDPs, the grid-world family and SSP task binding.

mod grid;
mod ssp;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scltl::{Alphabet, Symbol};
use crate::taskdecomp::Prop;

pub use grid::{build_gridworld, Cell, GridWorldSpec, GRID_ACTIONS};
pub(crate) use ssp::check_params;
pub use ssp::{bind_task, SspTask};

const ROW_TOL: f64 = 1e-12;

/// Sparse transition row: `(successor, probability)`.
pub type Row = Vec<(usize, f64)>;

/// Finite MDP with a labeling function over `2^AP`.
///
/// `trans[s][a]` is empty when action `a` is undefined at `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMdp {
    ap: Alphabet,
    actions: Vec<String>,
    trans: Vec<Vec<Row>>,
    mu0: Vec<(usize, f64)>,
    labels: Vec<Symbol>,
}

impl LabeledMdp {
    pub fn new(
        ap: Alphabet,
        actions: Vec<String>,
        trans: Vec<Vec<Row>>,
        mu0: Vec<(usize, f64)>,
        labels: Vec<Symbol>,
    ) -> Result<Self> {
        let n = trans.len();
        if n == 0 {
            return Err(Error::InvalidModel("MDP has no states".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} labels for {n} states",
                labels.len()
            )));
        }
        for (s, &l) in labels.iter().enumerate() {
            if !ap.contains_symbol(l) {
                let bit = (0..32)
                    .find(|b| l & (1 << b) != 0 && *b >= ap.len())
                    .unwrap_or(0);
                return Err(Error::UnknownAtom(format!(
                    "bit {bit} in the label of state {s}"
                )));
            }
        }
        for (s, rows) in trans.iter().enumerate() {
            if rows.len() != actions.len() {
                return Err(Error::InvalidModel(format!(
                    "state {s} has {} action rows, expected {}",
                    rows.len(),
                    actions.len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                for &(t, p) in row {
                    if t >= n {
                        return Err(Error::InvalidModel(format!(
                            "trans[{s}][{a}] targets unknown state {t}"
                        )));
                    }
                    if !(0.0..=1.0 + ROW_TOL).contains(&p) {
                        return Err(Error::InvalidModel(format!(
                            "trans[{s}][{a}] has probability {p} outside [0,1]"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_TOL {
                    return Err(Error::InvalidModel(format!(
                        "trans[{s}][{a}] sums to {sum}, expected 1"
                    )));
                }
            }
        }
        let mut total = 0.0;
        for &(s, p) in &mu0 {
            if s >= n || !(0.0..=1.0 + ROW_TOL).contains(&p) {
                return Err(Error::InvalidModel(format!("invalid mu0 entry ({s}, {p})")));
            }
            total += p;
        }
        if (total - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidModel(format!(
                "mu0 sums to {total}, expected 1"
            )));
        }
        Ok(LabeledMdp {
            ap,
            actions,
            trans,
            mu0,
            labels,
        })
    }

    pub fn ap(&self) -> &Alphabet {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.trans.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn mu0(&self) -> &[(usize, f64)] {
        &self.mu0
    }

    pub fn label(&self, s: usize) -> Symbol {
        self.labels[s]
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    /// Distinct labels occurring in the MDP, sorted.
    pub fn label_symbols(&self) -> Vec<Symbol> {
        let set: BTreeSet<Symbol> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.trans[s][a]
    }

    pub fn is_defined(&self, s: usize, a: usize) -> bool {
        !self.trans[s][a].is_empty()
    }

    /// Actions defined at `s`, in id order.
    pub fn defined_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.actions.len()).filter(move |&a| self.is_defined(s, a))
    }

    /// `[[prop]]`: the states whose label satisfies `prop`.
    pub fn states_satisfying(&self, prop: &Prop) -> StateSet {
        StateSet(self.labels.iter().map(|&l| prop.holds(l)).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MdpFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.into_mdp()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text =
            serde_json::to_string_pretty(&MdpFile::from(self)).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk MDP format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub ap: Vec<String>,
    pub states: usize,
    pub actions: Vec<String>,
    pub mu0: Vec<(usize, f64)>,
    /// `(state, bitmask)`; unlisted states carry the empty label.
    pub labels: Vec<(usize, Symbol)>,
    /// `(state, action, successor, probability)`.
    pub trans: Vec<(usize, usize, usize, f64)>,
}

impl From<&LabeledMdp> for MdpFile {
    fn from(m: &LabeledMdp) -> Self {
        let mut trans = Vec::new();
        for (s, rows) in m.trans.iter().enumerate() {
            for (a, row) in rows.iter().enumerate() {
                trans.extend(row.iter().map(|&(t, p)| (s, a, t, p)));
            }
        }
        MdpFile {
            ap: m.ap.atoms().to_vec(),
            states: m.num_states(),
            actions: m.actions.clone(),
            mu0: m.mu0.clone(),
            labels: m
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != 0)
                .map(|(s, &l)| (s, l))
                .collect(),
            trans,
        }
    }
}

impl MdpFile {
    pub fn into_mdp(self) -> Result<LabeledMdp> {
        let ap = Alphabet::new(self.ap)?;
        let n = self.states;
        let mut labels = vec![0; n];
        for (s, l) in self.labels {
            if s >= n {
                return Err(Error::InvalidModel(format!("labels: unknown state {s}")));
            }
            labels[s] = l;
        }
        let mut trans = vec![vec![Vec::new(); self.actions.len()]; n];
        for (s, a, t, p) in self.trans {
            if s >= n || a >= self.actions.len() {
                return Err(Error::InvalidModel(format!(
                    "trans: unknown pair ({s}, {a})"
                )));
            }
            if p != 0.0 {
                let row: &mut Row = &mut trans[s][a];
                if row.iter().any(|&(u, _)| u == t) {
                    return Err(Error::InvalidModel(format!(
                        "trans: duplicate entry ({s}, {a}, {t})"
                    )));
                }
                row.push((t, p));
            }
        }
        LabeledMdp::new(ap, self.actions, trans, self.mu0, labels)
    }
}

/// Subset of MDP states as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateSet(Vec<bool>);

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet(vec![false; n])
    }

    pub fn full(n: usize) -> Self {
        StateSet(vec![true; n])
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        StateSet(mask)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0[s]
    }

    pub fn insert(&mut self, s: usize) {
        self.0[s] = true;
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(s, _)| s)
    }

    pub fn mask(&self) -> &[bool] {
        &self.0
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        StateSet(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        StateSet(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a && !*b)
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> LabeledMdp {
        LabeledMdp::new(
            Alphabet::new(["g"]).unwrap(),
            vec!["go".into()],
            vec![vec![vec![(1, 1.0)]], vec![vec![(1, 1.0)]]],
            vec![(0, 1.0)],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn file_round_trip() {
        let m = two_state();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(LabeledMdp::load(&p).unwrap(), m);
    }

    #[test]
    fn rejects_bad_row_sum() {
        let file = MdpFile {
            ap: vec!["g".into()],
            states: 2,
            actions: vec!["go".into()],
            mu0: vec![(0, 1.0)],
            labels: vec![],
            trans: vec![(0, 0, 1, 0.99), (1, 0, 1, 1.0)],
        };
        let err = file.into_mdp().unwrap_err().to_string();
        assert!(err.contains("trans[0][0]"), "{err}");
    }

    #[test]
    fn rejects_unknown_label_bit() {
        let file = MdpFile {
            ap: vec!["g".into()],
            states: 1,
            actions: vec!["stay".into()],
            mu0: vec![(0, 1.0)],
            labels: vec![(0, 0b10)],
            trans: vec![(0, 0, 0, 1.0)],
        };
        assert!(matches!(file.into_mdp(), Err(Error::UnknownAtom(_))));
    }

    #[test]
    fn satisfaction_sets() {
        let m = two_state();
        assert_eq!(
            m.states_satisfying(&Prop::Atom(0))
                .iter()
                .collect::<Vec<_>>(),
            vec![1]
        );
        assert!(m.states_satisfying(&Prop::False).is_empty());
    }
}
