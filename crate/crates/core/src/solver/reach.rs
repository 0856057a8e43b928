use super::linear::policy_eval;
use super::model::ChoiceModel;
use super::vi::{argmax_lowest_id, value_iteration, Operator, ValueFunction, ViConfig};
use super::Policy;
use crate::error::Result;

const MAX_POLISH_ROUNDS: usize = 1000;

/// Deterministic policy attaining the optimal undiscounted total reward,
/// together with its exactly evaluated values.
///
/// Hardmax value iteration alone can return a greedy policy that idles in a
/// reward-free loop, since every choice in such a loop looks optimal. Among
/// the near-optimal choices, an attractor search picks ones that make
/// progress towards reward, then policy improvement with strict gains
/// removes the remaining approximation error.
pub fn max_reach(model: &ChoiceModel, cfg: &ViConfig) -> Result<(ValueFunction, Policy, Vec<f64>)> {
    let vf = value_iteration(model, Operator::Hardmax, cfg)?;
    let n = model.num_states();
    let v = &vf.values;
    let eps = (cfg.tol * 100.0).max(1e-9);
    let mut chosen: Vec<Option<usize>> = vec![None; n];
    let mut good = vec![false; n];
    let near: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let q = model.q_row(s, v);
            (0..q.len()).filter(|&i| q[i] >= v[s] - eps).collect()
        })
        .collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if model.pinned[s] || chosen[s].is_some() || v[s] <= eps {
                continue;
            }
            let pick = near[s].iter().copied().find(|&i| {
                let c = &model.choices[s][i];
                c.reward > 0.0 || c.next.iter().any(|&(t, w)| w > 0.0 && good[t])
            });
            if let Some(i) = pick {
                chosen[s] = Some(i);
                good[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut pick: Vec<usize> = (0..n)
        .map(|s| match chosen[s] {
            Some(i) => i,
            None if model.choices[s].is_empty() => usize::MAX,
            None => argmax_lowest_id(model, s, &model.q_row(s, v)),
        })
        .collect();
    let to_policy = |pick: &[usize]| Policy {
        rows: (0..n)
            .map(|s| match pick[s] {
                usize::MAX => Vec::new(),
                i => vec![(model.choices[s][i].id, 1.0)],
            })
            .collect(),
    };
    let mut exact = policy_eval(model, &to_policy(&pick))?;
    for _ in 0..MAX_POLISH_ROUNDS {
        let mut improved = false;
        for s in 0..n {
            if model.pinned[s] || pick[s] == usize::MAX {
                continue;
            }
            let q = model.q_row(s, &exact);
            let best = argmax_lowest_id(model, s, &q);
            if q[best] > q[pick[s]] + 1e-12 * q[best].abs().max(1.0) {
                pick[s] = best;
                improved = true;
            }
        }
        if !improved {
            break;
        }
        exact = policy_eval(model, &to_policy(&pick))?;
    }
    Ok((vf, to_policy(&pick), exact))
}
