use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::model::ChoiceModel;
use super::Policy;
use crate::error::{Error, Result};

/// Systems with at least this many unknowns use Gauss-Seidel.
pub const DENSE_LIMIT: usize = 5000;
const GS_TOL: f64 = 1e-10;
const GS_MAX_SWEEPS: usize = 1_000_000;

/// Sparse system `x = b + W x` over `n` unknowns.
#[derive(Debug, Clone, Default)]
pub(crate) struct FixedPoint {
    pub b: Vec<f64>,
    pub w: Vec<Vec<(usize, f64)>>,
}

impl FixedPoint {
    pub fn new(n: usize) -> Self {
        FixedPoint {
            b: vec![0.0; n],
            w: vec![Vec::new(); n],
        }
    }

    /// Unknowns whose rows leak mass (row sum below 1).
    fn leaks(&self) -> Vec<bool> {
        self.w
            .iter()
            .map(|row| row.iter().map(|e| e.1).sum::<f64>() < 1.0 - 1e-12)
            .collect()
    }

    /// Unknowns that never reach a leaking row. Mass there circulates forever.
    pub fn trapped(&self) -> Vec<bool> {
        let n = self.b.len();
        let mut preds = vec![Vec::new(); n];
        for (i, row) in self.w.iter().enumerate() {
            for &(j, x) in row {
                if x > 0.0 {
                    preds[j].push(i);
                }
            }
        }
        let mut reach = self.leaks();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| reach[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                }
            }
        }
        reach.iter().map(|r| !r).collect()
    }

    /// Solves the system. Trapped unknowns with zero reward are set to 0;
    /// trapped unknowns with reward make the system divergent.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.b.len();
        let trapped = self.trapped();
        let bad: Vec<usize> = (0..n).filter(|&i| trapped[i] && self.b[i] != 0.0).collect();
        if !bad.is_empty() {
            return Err(Error::Divergent { states: bad });
        }
        let live: Vec<usize> = (0..n).filter(|&i| !trapped[i]).collect();
        let mut index = vec![usize::MAX; n];
        for (k, &i) in live.iter().enumerate() {
            index[i] = k;
        }
        let m = live.len();
        let mut x = vec![0.0; n];
        if m == 0 {
            return Ok(x);
        }
        let sol = if m < DENSE_LIMIT {
            let mut a = DMatrix::<f64>::identity(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for (k, &i) in live.iter().enumerate() {
                rhs[k] = self.b[i];
                for &(j, wij) in &self.w[i] {
                    if index[j] != usize::MAX {
                        a[(k, index[j])] -= wij;
                    }
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidModel("singular policy-evaluation system".into()))?;
            sol.iter().copied().collect::<Vec<_>>()
        } else {
            self.gauss_seidel(&live, &index)?
        };
        for (k, &i) in live.iter().enumerate() {
            x[i] = sol[k];
        }
        Ok(x)
    }

    fn gauss_seidel(&self, live: &[usize], index: &[usize]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; live.len()];
        for _ in 0..GS_MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for (k, &i) in live.iter().enumerate() {
                let mut diag = 0.0;
                let mut acc = self.b[i];
                for &(j, wij) in &self.w[i] {
                    match index[j] {
                        usize::MAX => {}
                        kj if kj == k => diag += wij,
                        kj => acc += wij * x[kj],
                    }
                }
                let new = acc / (1.0 - diag);
                delta = delta.max((new - x[k]).abs());
                x[k] = new;
            }
            if delta < GS_TOL {
                return Ok(x);
            }
        }
        Err(Error::NotConverged {
            iterations: GS_MAX_SWEEPS,
            residual: f64::NAN,
        })
    }
}

/// Exact evaluation of `policy` on `model`: solves
/// `V(s) = sum_c pi(c|s) (r_c + sum w V(t))` with pinned states at 0.
///
/// With undiscounted weights, states that can never reach a pinned state
/// get value 0 if they collect no reward and an error otherwise.
pub fn policy_eval(model: &ChoiceModel, policy: &Policy) -> Result<Vec<f64>> {
    let n = model.num_states();
    if policy.rows.len() != n {
        return Err(Error::InvalidParameter(format!(
            "policy covers {} states, model has {n}",
            policy.rows.len()
        )));
    }
    let mut sys = FixedPoint::new(n);
    for s in 0..n {
        if model.pinned[s] {
            continue;
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(id, p) in &policy.rows[s] {
            if p == 0.0 {
                continue;
            }
            let c = model.choice(s, id).ok_or_else(|| {
                Error::InvalidParameter(format!("policy uses {id:?}, undefined at state {s}"))
            })?;
            sys.b[s] += p * c.reward;
            for &(t, w) in &c.next {
                if model.pinned[t] {
                    continue;
                }
                match row.iter_mut().find(|e| e.0 == t) {
                    Some(e) => e.1 += p * w,
                    None => row.push((t, p * w)),
                }
            }
        }
        if policy.rows[s].is_empty() && !model.choices[s].is_empty() {
            return Err(Error::InvalidParameter(format!(
                "policy undefined at state {s}"
            )));
        }
        sys.w[s] = row;
    }
    // Transitions into pinned states leak mass out of the system.
    sys.solve()
}

/// Dense solve of `(I - W) X = B` for several right-hand sides.
pub(crate) fn solve_absorbing(w: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    let a = DMatrix::<f64>::identity(n, n) - w;
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::InvalidModel("singular absorbing-chain system".into()))
}
