mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use compplan::mdp::{bind_task, build_gridworld, GridWorldSpec};
use compplan::options::{exclusion_q, gcd_value, option_weights};
use compplan::scltl::{eval_word, parse, to_dfa, Alphabet, Formula};
use compplan::solver::{softmax_vi, ChoiceModel, ViConfig};
use compplan::taskdecomp::{CondReachTask, Prop};

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        (0..3usize).prop_map(Formula::Atom),
        (0..3usize).prop_map(Formula::NegAtom),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            inner.clone().prop_map(Formula::next),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::until(l, r)),
            inner.prop_map(Formula::eventually),
        ]
    })
}

fn grid() -> impl Strategy<Value = GridWorldSpec> {
    (2..6usize, 2..6usize, 0.0..1.0f64).prop_flat_map(|(w, h, slip)| {
        let cell = (0..w, 0..h).prop_map(|(x, y)| [x, y]);
        (
            proptest::collection::vec(cell.clone(), 0..3),
            proptest::collection::vec(cell.clone(), 1..3),
            proptest::collection::vec(cell.clone(), 1..3),
            cell,
        )
            .prop_map(move |(obstacles, r1, r2, s0)| {
                let mut labels = BTreeMap::new();
                labels.insert("1".to_string(), r1);
                labels.insert("2".to_string(), r2);
                GridWorldSpec {
                    width: w,
                    height: h,
                    slip,
                    obstacles: obstacles.into_iter().filter(|&c| c != s0).collect(),
                    labels,
                    s0,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(f in formula()) {
        let n = f.normalize();
        prop_assert!(n.is_normalized());
        prop_assert_eq!(n.normalize(), n);
    }

    #[test]
    fn automaton_agrees_with_evaluator(f in formula(), words in proptest::collection::vec(proptest::collection::vec(0u32..8, 0..7), 20)) {
        let ap = Alphabet::new(["a", "b", "c"]).unwrap();
        let dfa = to_dfa(&f, &ap).unwrap();
        for w in words.iter().filter(|w| !w.is_empty()) {
            prop_assert_eq!(dfa.accepts(w), eval_word(&f, w));
        }
    }

    #[test]
    fn display_round_trips(f in formula()) {
        let ap = Alphabet::new(["a", "b", "c"]).unwrap();
        let text = f.display(&ap).to_string();
        let back = parse(&text, &ap).unwrap();
        prop_assert_eq!(back.normalize(), f.normalize());
    }

    #[test]
    fn grid_rows_are_distributions(spec in grid()) {
        let mdp = build_gridworld(&spec).unwrap();
        for s in 0..mdp.num_states() {
            for a in mdp.defined_actions(s) {
                let total: f64 = mdp.row(s, a).iter().map(|r| r.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(mdp.row(s, a).iter().all(|r| r.1 >= 0.0));
            }
        }
    }

    #[test]
    fn softmax_policies_are_distributions(spec in grid()) {
        let mdp = build_gridworld(&spec).unwrap();
        let c = mdp.ap().index_of("C").unwrap();
        let goal = mdp.ap().index_of("s1").unwrap();
        let Ok(ssp) = bind_task(&mdp, &CondReachTask::new(Prop::Atom(goal), Prop::Atom(c)), 0.9, 100.0, 1.0) else {
            return Ok(());
        };
        let model = ChoiceModel::from_ssp(&ssp);
        let (vf, pi) = softmax_vi(&model, 1.0, &ViConfig::default()).unwrap();
        for row in &pi.rows {
            let total: f64 = row.iter().map(|e| e.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        prop_assert!(vf.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn gcd_is_bracketed(xs in proptest::collection::vec(0.0..1.0f64, 1..6), eta in 0.5..100.0f64) {
        let max = xs.iter().cloned().fold(f64::MIN, f64::max);
        let min = xs.iter().cloned().fold(f64::MAX, f64::min);
        let slack = (xs.len() as f64).ln() / eta + 1e-12;
        let or = gcd_value(&xs, eta, None).unwrap();
        let and = gcd_value(&xs, -eta, None).unwrap();
        prop_assert!(or >= max - 1e-12 && or <= max + slack);
        prop_assert!(and <= min + 1e-12 && and >= min - slack);
    }

    #[test]
    fn exclusion_inverts_gcd(q12 in 0.0..0.9f64, gap in 0.01..0.1f64, eta in 5.0..60.0f64) {
        let q1 = q12 + gap;
        let minus = exclusion_q(&[q1], &[q12], -eta)[0];
        // Clamped results carry no inverse.
        prop_assume!(minus > 0.0);
        let back = gcd_value(&[q12, minus], eta, None).unwrap();
        prop_assert!((back - q1).abs() < 1e-9);
    }

    #[test]
    fn option_weights_are_distributions(
        tables in proptest::collection::vec(proptest::collection::vec(proptest::collection::vec(0.0..100.0f64, 4), 3), 1..4),
        eta in prop_oneof![-60.0..-0.5f64, 0.5..60.0f64],
    ) {
        for row in option_weights(&tables, eta, 100.0, None) {
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn hardmax_matches_brute_force(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, 4, 2);
        let ssp = bind_task(&mdp, &CondReachTask::new(Prop::Atom(0), Prop::False), 1.0, 1.0, 1.0).unwrap();
        let cfg = ViConfig { tol: 1e-12, max_iter: 1_000_000, monitor: Vec::new() };
        let (vf, _) = compplan::solver::hardmax_vi(&ChoiceModel::from_ssp(&ssp), &cfg).unwrap();
        let oracle = common::reach_oracle(&mdp, ssp.goal.mask());
        for s in (0..mdp.num_states()).filter(|&s| !ssp.goal.contains(s)) {
            prop_assert!((vf.values[s] - oracle[s]).abs() < 1e-6);
        }
    }
}
