#![allow(clippy::needless_range_loop)]

mod common;

use celltype_ot::trajectory::{
    ancestor_distribution, backward_transition, descendant_distribution, forward_transition,
    path_probability, TrajectoryPath, TransitionMatrix,
};
use celltype_ot::{Error, Marginal, TransportPlan};
use common::{dirichlet, random_plan, rng};
use nalgebra::{DMatrix, DVector};

fn chain(plans: &[TransportPlan]) -> (Vec<TransitionMatrix>, Vec<TransitionMatrix>) {
    let bwd = plans
        .iter()
        .enumerate()
        .map(|(t, p)| backward_transition(p, t))
        .collect();
    let fwd = plans
        .iter()
        .enumerate()
        .map(|(t, p)| forward_transition(p, t))
        .collect();
    (bwd, fwd)
}

/// All paths of length `len` through `d` types with `x[anchor] = state`.
fn all_paths(d: usize, len: usize, anchor: usize, state: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for t in 0..len {
        let choices: Vec<usize> = if t == anchor {
            vec![state]
        } else {
            (0..d).collect()
        };
        out = out
            .into_iter()
            .flat_map(|p| {
                choices.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

#[test]
fn path_probabilities_sum_to_one_for_every_anchor() {
    let (d, t_max) = (3, 4);
    let mut r = rng(7);
    let plans: Vec<TransportPlan> = (0..t_max).map(|_| random_plan(&mut r, d)).collect();
    let (bwd, fwd) = chain(&plans);
    for anchor in 0..=t_max {
        for state in 0..d {
            let paths = all_paths(d, t_max + 1, anchor, state);
            assert_eq!(paths.len(), 81);
            let total: f64 = paths
                .into_iter()
                .map(|x| {
                    let p =
                        path_probability(&TrajectoryPath::new(x, anchor, d).unwrap(), &bwd, &fwd)
                            .unwrap();
                    assert!((0.0..=1.0).contains(&p));
                    p
                })
                .sum();
            assert!(
                (total - 1.0).abs() < 1e-8,
                "anchor {anchor} state {state}: {total}"
            );
        }
    }
}

#[test]
fn six_factor_trajectory_matches_stepwise_conditionals() {
    // X = (1,2,3,2,2,1,1) in one-based types, anchored at type 2 at t = 3.
    let d = 3;
    let mut r = rng(41);
    let plans: Vec<TransportPlan> = (0..6).map(|_| random_plan(&mut r, d)).collect();
    let (bwd, fwd) = chain(&plans);
    let x = [0usize, 1, 2, 1, 1, 0, 0];

    // Conditionals straight from the plan entries.
    let col = |p: &TransportPlan, k: usize| (0..d).map(|j| p.get(j, k)).sum::<f64>();
    let row = |p: &TransportPlan, j: usize| (0..d).map(|k| p.get(j, k)).sum::<f64>();
    // h^{t|t+1}_{ab}: type a at t given type b at t+1.
    let back = |t: usize, a: usize, b: usize| plans[t].get(a, b) / col(&plans[t], b);
    // h^{t+1|t}_{ab}: type a at t+1 given type b at t.
    let fwd_h = |t: usize, a: usize, b: usize| plans[t].get(b, a) / row(&plans[t], b);
    let expected = (back(0, 0, 1) * back(1, 1, 2) * back(2, 2, 1))
        * (fwd_h(3, 1, 1) * fwd_h(4, 0, 1) * fwd_h(5, 0, 0));

    let path = TrajectoryPath::new(x.to_vec(), 3, d).unwrap();
    assert_eq!(path.anchor_state(), 1);
    let got = path_probability(&path, &bwd, &fwd).unwrap();
    assert!(
        (got - expected).abs() <= 1e-15 * expected.max(1.0),
        "{got} vs {expected}"
    );
}

#[test]
fn path_probability_needs_every_step() {
    let mut r = rng(3);
    let plans: Vec<TransportPlan> = (0..3).map(|_| random_plan(&mut r, 2)).collect();
    let (bwd, fwd) = chain(&plans);
    let path = TrajectoryPath::new(vec![0, 1, 0, 1], 2, 2).unwrap();
    assert!(path_probability(&path, &bwd, &fwd).is_ok());
    // Backward matrices cannot stand in for forward ones.
    assert!(matches!(
        path_probability(&path, &bwd, &bwd),
        Err(Error::Composition(_))
    ));
    assert!(matches!(
        path_probability(&path, &bwd[1..], &fwd),
        Err(Error::Composition(_))
    ));
    assert!(TrajectoryPath::new(vec![0, 2], 0, 2).is_err());
}

#[test]
fn identity_transitions() {
    let plan = common::plan_from(DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.2, 0.3, 0.5,
    ])));
    let bwd: Vec<_> = (0..3).map(|t| backward_transition(&plan, t)).collect();
    let fwd: Vec<_> = (0..3).map(|t| forward_transition(&plan, t)).collect();
    let q = Marginal::new(vec![0.1, 0.6, 0.3]).unwrap();
    assert_eq!(ancestor_distribution(&bwd, &q).unwrap(), q);
    assert_eq!(descendant_distribution(&fwd, &q).unwrap(), q);
    let stay = TrajectoryPath::new(vec![2; 4], 1, 3).unwrap();
    assert_eq!(path_probability(&stay, &bwd, &fwd).unwrap(), 1.0);
    let leave = TrajectoryPath::new(vec![2, 2, 1, 2], 1, 3).unwrap();
    assert_eq!(path_probability(&leave, &bwd, &fwd).unwrap(), 0.0);
}

#[test]
fn compositions_are_associative_and_valid() {
    let d = 4;
    let mut r = rng(19);
    let plans: Vec<TransportPlan> = (0..3).map(|_| random_plan(&mut r, d)).collect();
    let (bwd, fwd) = chain(&plans);
    let q = dirichlet(&mut r, d);
    let v = DVector::from_column_slice(q.probs());

    let anc = ancestor_distribution(&bwd, &q).unwrap();
    let direct = bwd[0].entries() * (bwd[1].entries() * (bwd[2].entries() * &v));
    let grouped = (bwd[0].entries() * bwd[1].entries()) * bwd[2].entries() * &v;
    for k in 0..d {
        assert!((anc.get(k) - direct[k]).abs() < 1e-12);
        assert!((anc.get(k) - grouped[k]).abs() < 1e-12);
    }

    let desc = descendant_distribution(&fwd, &q).unwrap();
    let direct = fwd[2].entries() * (fwd[1].entries() * (fwd[0].entries() * &v));
    let grouped = fwd[2].entries() * (fwd[1].entries() * fwd[0].entries()) * &v;
    for k in 0..d {
        assert!((desc.get(k) - direct[k]).abs() < 1e-12);
        assert!((desc.get(k) - grouped[k]).abs() < 1e-12);
    }
    for m in [&anc, &desc] {
        assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(m.probs().iter().all(|&p| p >= 0.0));
    }

    // Out-of-order chains are rejected.
    let shuffled = vec![bwd[1].clone(), bwd[0].clone()];
    assert!(matches!(
        ancestor_distribution(&shuffled, &q),
        Err(Error::Composition(_))
    ));
    assert!(matches!(
        descendant_distribution(&bwd, &q),
        Err(Error::Composition(_))
    ));
}

#[test]
fn point_mass_picks_a_column() {
    let d = 3;
    let mut r = rng(5);
    let plan = random_plan(&mut r, d);
    let h = backward_transition(&plan, 0);
    let q = Marginal::new(vec![0.0, 1.0, 0.0]).unwrap();
    let anc = ancestor_distribution(std::slice::from_ref(&h), &q).unwrap();
    for k in 0..d {
        assert!((anc.get(k) - h.get(k, 1)).abs() < 1e-15);
    }
}

#[test]
fn forward_step_from_the_row_marginal_gives_the_column_marginal() {
    let d = 5;
    let mut r = rng(23);
    let plan = random_plan(&mut r, d);
    let h = forward_transition(&plan, 0);
    let rows = Marginal::from_weights(&plan.row_sums()).unwrap();
    let desc = descendant_distribution(std::slice::from_ref(&h), &rows).unwrap();
    let cols = plan.column_sums();
    for k in 0..d {
        assert!((desc.get(k) - cols[k]).abs() < 1e-10);
        for j in 0..d {
            assert!((h.get(k, j) * plan.row_sums()[j] - plan.get(j, k)).abs() < 1e-12);
        }
    }
}

#[test]
fn absent_types_give_flagged_zero_columns() {
    let m = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.1, 0.0, 0.0, 0.0, 0.3, 0.0, 0.4]);
    let plan = common::plan_from(m);
    let f = forward_transition(&plan, 0);
    let b = backward_transition(&plan, 0);
    assert_eq!(f.degenerate_columns(), &[1]);
    assert_eq!(b.degenerate_columns(), &[1]);
    assert!((0..3).all(|k| f.get(k, 1) == 0.0 && b.get(k, 1) == 0.0));
    let through = TrajectoryPath::new(vec![0, 1], 0, 3).unwrap();
    assert_eq!(path_probability(&through, &[b], &[f]).unwrap(), 0.0);
}
