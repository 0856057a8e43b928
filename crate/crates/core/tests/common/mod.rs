//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

use compplan::mdp::LabeledMdp;
use compplan::scltl::{Alphabet, Symbol};

/// Every word over `num_symbols` letters of length 1 to `max_len`.
pub fn all_words(num_symbols: usize, max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * num_symbols);
        for w in &layer {
            for s in 0..num_symbols as Symbol {
                let mut v = w.clone();
                v.push(s);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Random MDP over `AP = {g}` where only the last state is labeled `g`.
/// Each row has one to three successors with random weights.
pub fn random_mdp(rng: &mut impl Rng, n: usize, m: usize) -> LabeledMdp {
    let trans = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let k = rng.random_range(1..=3usize);
                    let mut succ: Vec<usize> = Vec::new();
                    while succ.len() < k {
                        let t = rng.random_range(0..n);
                        if !succ.contains(&t) {
                            succ.push(t);
                        }
                    }
                    let w: Vec<f64> = succ.iter().map(|_| rng.random::<f64>() + 0.05).collect();
                    let z: f64 = w.iter().sum();
                    succ.into_iter().zip(w).map(|(t, w)| (t, w / z)).collect()
                })
                .collect()
        })
        .collect();
    let mut labels = vec![0; n];
    labels[n - 1] = 1;
    let actions = (0..m).map(|a| format!("a{a}")).collect();
    LabeledMdp::new(
        Alphabet::new(["g"]).unwrap(),
        actions,
        trans,
        vec![(0, 1.0)],
        labels,
    )
    .unwrap()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let pivot_row = a[col].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Probability of reaching `goal` under the deterministic policy `pi`, by a
/// linear solve over the states that can reach the goal.
pub fn reach_under(mdp: &LabeledMdp, goal: &[bool], pi: &[usize]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut can = goal.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !can[s] && mdp.row(s, pi[s]).iter().any(|&(t, p)| p > 0.0 && can[t]) {
                can[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !goal[s]).collect();
    let idx = |s: usize| unknown.iter().position(|&u| u == s);
    let k = unknown.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (r, &s) in unknown.iter().enumerate() {
        a[r][r] += 1.0;
        for &(t, p) in mdp.row(s, pi[s]) {
            if goal[t] {
                b[r] += p;
            } else if let Some(c) = idx(t) {
                a[r][c] -= p;
            }
        }
    }
    let x = gauss_solve(a, b);
    (0..n)
        .map(|s| {
            if goal[s] {
                1.0
            } else {
                idx(s).map_or(0.0, |r| x[r])
            }
        })
        .collect()
}

/// Maximal reach probability per state, by enumerating every deterministic
/// policy.
pub fn reach_oracle(mdp: &LabeledMdp, goal: &[bool]) -> Vec<f64> {
    let n = mdp.num_states();
    let m = mdp.num_actions();
    let mut best = vec![0.0f64; n];
    let total = m.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let pi: Vec<usize> = (0..n)
            .map(|_| {
                let a = c % m;
                c /= m;
                a
            })
            .collect();
        for (b, v) in best.iter_mut().zip(reach_under(mdp, goal, &pi)) {
            *b = b.max(v);
        }
    }
    best
}
