use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::formula::{Alphabet, Formula, Symbol};
use super::progression::Residual;
use crate::error::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Complete DFA over `2^AP`.
///
/// `delta[q][sym]` is the successor of `q` on `sym`. State 0 is not
/// necessarily initial; use [`Dfa::initial`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dfa {
    alphabet: Alphabet,
    delta: Vec<Vec<usize>>,
    initial: usize,
    accepting: Vec<bool>,
    sink: Option<usize>,
}

impl Dfa {
    /// Builds a DFA from its parts, checking totality and the sink invariant.
    pub fn new(
        alphabet: Alphabet,
        delta: Vec<Vec<usize>>,
        initial: usize,
        accepting: Vec<bool>,
        sink: Option<usize>,
    ) -> Result<Self> {
        let n = delta.len();
        let k = alphabet.num_symbols();
        if n == 0 || initial >= n || accepting.len() != n {
            return Err(Error::InvalidModel("malformed DFA header".into()));
        }
        for (q, row) in delta.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidModel(format!(
                    "state {q} has {} transitions, expected {k}",
                    row.len()
                )));
            }
            if let Some(&t) = row.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidModel(format!(
                    "state {q} targets unknown state {t}"
                )));
            }
        }
        if let Some(s) = sink {
            if s >= n || accepting[s] || delta[s].iter().any(|&t| t != s) {
                return Err(Error::InvalidModel(format!(
                    "state {s} is not a rejecting absorbing sink"
                )));
            }
        }
        Ok(Dfa {
            alphabet,
            delta,
            initial,
            accepting,
            sink,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    pub fn step(&self, q: usize, sym: Symbol) -> usize {
        self.delta[q][sym as usize]
    }

    pub fn run(&self, word: &[Symbol]) -> usize {
        word.iter().fold(self.initial, |q, &s| self.step(q, s))
    }

    pub fn accepts(&self, word: &[Symbol]) -> bool {
        self.accepting[self.run(word)]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DfaFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.into_dfa()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&DfaFile::from(self)).expect("DFA serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk DFA layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfaFile {
    pub ap: Vec<String>,
    pub states: usize,
    pub q0: usize,
    pub accepting: Vec<usize>,
    pub sink: Option<usize>,
    pub delta: Vec<[usize; 3]>,
}

impl From<&Dfa> for DfaFile {
    fn from(d: &Dfa) -> Self {
        let mut delta = Vec::with_capacity(d.num_states() * d.alphabet.num_symbols());
        for (q, row) in d.delta.iter().enumerate() {
            for (sym, &t) in row.iter().enumerate() {
                delta.push([q, sym, t]);
            }
        }
        DfaFile {
            ap: d.alphabet.atoms().to_vec(),
            states: d.num_states(),
            q0: d.initial,
            accepting: d.accepting_states().collect(),
            sink: d.sink,
            delta,
        }
    }
}

impl DfaFile {
    pub fn into_dfa(self) -> Result<Dfa> {
        let alphabet = Alphabet::new(self.ap)?;
        let k = alphabet.num_symbols();
        let mut delta = vec![vec![usize::MAX; k]; self.states];
        for [q, sym, t] in self.delta {
            if q >= self.states || sym >= k {
                return Err(Error::InvalidModel(format!(
                    "transition ({q},{sym}) out of range"
                )));
            }
            if delta[q][sym] != usize::MAX {
                return Err(Error::InvalidModel(format!(
                    "duplicate transition ({q},{sym})"
                )));
            }
            delta[q][sym] = t;
        }
        if let Some((q, sym)) = delta
            .iter()
            .enumerate()
            .find_map(|(q, row)| row.iter().position(|&t| t == usize::MAX).map(|s| (q, s)))
        {
            return Err(Error::InvalidModel(format!(
                "missing transition ({q},{sym})"
            )));
        }
        let mut accepting = vec![false; self.states];
        for q in self.accepting {
            *accepting.get_mut(q).ok_or_else(|| {
                Error::InvalidModel(format!("accepting state {q} out of range"))
            })? = true;
        }
        Dfa::new(alphabet, delta, self.q0, accepting, self.sink)
    }
}

pub fn to_dfa(f: &Formula, alphabet: &Alphabet) -> Result<Dfa> {
    to_dfa_with_cap(f, alphabet, DEFAULT_STATE_CAP)
}

/// Compiles a formula by progression: each state is a canonical residual
/// obligation, accepting when the residual holds on the empty suffix. States
/// that cannot reach acceptance are merged into one sink and the result is
/// minimized.
pub fn to_dfa_with_cap(f: &Formula, alphabet: &Alphabet, cap: usize) -> Result<Dfa> {
    if let Some(p) = f.max_atom() {
        if p >= alphabet.len() {
            return Err(Error::AlphabetMismatch(format!(
                "formula uses atom #{p} but the alphabet has {} atoms",
                alphabet.len()
            )));
        }
    }
    let k = alphabet.num_symbols();
    let start = Residual::from_formula(f);
    let mut ids: HashMap<Residual, usize> = HashMap::new();
    let mut residuals = vec![start.clone()];
    ids.insert(start, 0);
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < residuals.len() {
        let mut row = Vec::with_capacity(k);
        for sym in alphabet.symbols() {
            let next = residuals[i].progress(sym);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    if residuals.len() >= cap {
                        return Err(Error::StateBlowUp { cap });
                    }
                    let id = residuals.len();
                    ids.insert(next.clone(), id);
                    residuals.push(next);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let accepting: Vec<bool> = residuals.iter().map(Residual::accepts_empty).collect();
    Ok(minimize(alphabet.clone(), &delta, 0, &accepting))
}

/// Moore partition refinement, then renumbering in BFS order from the initial
/// state. The (unique) rejecting class closed under every symbol becomes the
/// sink.
fn minimize(alphabet: Alphabet, delta: &[Vec<usize>], initial: usize, accepting: &[bool]) -> Dfa {
    let n = delta.len();
    let mut class: Vec<usize> = accepting.iter().map(|&a| usize::from(a)).collect();
    let mut num_classes = 0;
    loop {
        let mut sig_ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = vec![0; n];
        for q in 0..n {
            let sig = (
                class[q],
                delta[q].iter().map(|&t| class[t]).collect::<Vec<_>>(),
            );
            let fresh = sig_ids.len();
            next[q] = *sig_ids.entry(sig).or_insert(fresh);
        }
        let count = sig_ids.len();
        class = next;
        if count == num_classes {
            break;
        }
        num_classes = count;
    }

    // BFS renumbering over classes.
    let mut rep = vec![usize::MAX; num_classes];
    for q in 0..n {
        if rep[class[q]] == usize::MAX {
            rep[class[q]] = q;
        }
    }
    let mut order = vec![usize::MAX; num_classes];
    let mut queue = VecDeque::from([class[initial]]);
    let mut seq = Vec::new();
    order[class[initial]] = 0;
    seq.push(class[initial]);
    while let Some(c) = queue.pop_front() {
        for &t in &delta[rep[c]] {
            let tc = class[t];
            if order[tc] == usize::MAX {
                order[tc] = seq.len();
                seq.push(tc);
                queue.push_back(tc);
            }
        }
    }
    let m = seq.len();
    let new_delta: Vec<Vec<usize>> = seq
        .iter()
        .map(|&c| delta[rep[c]].iter().map(|&t| order[class[t]]).collect())
        .collect();
    let new_acc: Vec<bool> = seq.iter().map(|&c| accepting[rep[c]]).collect();

    // States that cannot reach acceptance; after minimization there is at most one.
    let coaccessible = coaccessible(&new_delta, &new_acc);
    let sink = (0..m).find(|&q| !coaccessible[q]);
    debug_assert!((0..m).filter(|&q| !coaccessible[q]).count() <= 1);
    Dfa {
        alphabet,
        delta: new_delta,
        initial: 0,
        accepting: new_acc,
        sink,
    }
}

pub(crate) fn coaccessible(delta: &[Vec<usize>], accepting: &[bool]) -> Vec<bool> {
    let n = delta.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (q, row) in delta.iter().enumerate() {
        for &t in row {
            preds[t].push(q);
        }
    }
    let mut seen = accepting.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&q| accepting[q]).collect();
    while let Some(q) = queue.pop_front() {
        for &p in &preds[q] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}
