use celltype_ot::distributions::kl_divergence;
use celltype_ot::uot::COLUMN_TOLERANCE;
use celltype_ot::{
    oracle_solve, solve_balanced, solve_unbalanced, transport_cost, CostMatrix, Epsilon, Marginal,
    SolverConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};

fn dirichlet(rng: &mut ChaCha20Rng, d: usize) -> Marginal {
    // Flat Dirichlet via normalized exponentials.
    let w: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().ln()).collect();
    Marginal::from_weights(&w).unwrap()
}

fn random_cost(rng: &mut ChaCha20Rng, d: usize, lo: f64, hi: f64) -> CostMatrix {
    let u = Uniform::new(lo, hi).unwrap();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in j + 1..d {
            let v = u.sample(rng);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    CostMatrix::new(m).unwrap()
}

#[test]
fn agrees_with_oracle_on_small_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let lambdas = [0.1, 1.0, 10.0];
    for (i, d) in std::iter::repeat_n(2, 60)
        .chain(std::iter::repeat_n(3, 12))
        .enumerate()
    {
        let (a, b) = (dirichlet(&mut rng, d), dirichlet(&mut rng, d));
        let cost = random_cost(&mut rng, d, 0.1, 5.0);
        let lambda = lambdas[i % 3];
        let cfg = SolverConfig::with_lambda(lambda);
        let w = transport_cost(&a, &b, &cost, &cfg).unwrap();
        let oracle = oracle_solve(&a, &b, &cost, lambda, 1e-3)
            .unwrap()
            .unbalanced_objective(&cost, lambda);
        assert!(
            w - oracle <= 1e-3,
            "instance {i}: solver {w} oracle {oracle}"
        );
        assert!(
            w - oracle >= -1e-6,
            "instance {i}: solver {w} beats oracle {oracle}"
        );
    }
}

#[test]
fn gap_shrinks_with_epsilon() {
    let cost = CostMatrix::from_row_major(2, &[0.0, 0.2, 0.2, 0.0]).unwrap();
    let a = Marginal::new(vec![0.35, 0.65]).unwrap();
    let b = Marginal::new(vec![0.6, 0.4]).unwrap();
    let oracle = oracle_solve(&a, &b, &cost, 1.0, 1e-4)
        .unwrap()
        .unbalanced_objective(&cost, 1.0);
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&e| {
            let cfg = SolverConfig::with_lambda(1.0).with_epsilon(Epsilon::Absolute(e));
            transport_cost(&a, &b, &cost, &cfg).unwrap() - oracle
        })
        .collect();
    // The bias decays like exp(−m/ε); below ~1e−12 only rounding remains.
    assert!(gaps[0] > gaps[1], "{gaps:?}");
    assert!(gaps[1] > gaps[2] || gaps[1].abs() < 1e-12, "{gaps:?}");
    assert!(gaps[2].abs() < 1e-6, "{gaps:?}");
}

#[test]
fn oracle_relaxation_term_is_monotone_in_lambda() {
    let cost =
        CostMatrix::from_row_major(3, &[0.0, 1.0, 3.0, 1.0, 0.0, 1.5, 3.0, 1.5, 0.0]).unwrap();
    let a = Marginal::new(vec![0.6, 0.3, 0.1]).unwrap();
    let b = Marginal::new(vec![0.1, 0.2, 0.7]).unwrap();
    let kls: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 100.0]
        .iter()
        .map(|&l| {
            let plan = oracle_solve(&a, &b, &cost, l, 1e-3).unwrap();
            kl_divergence(&plan.row_sums(), a.probs())
        })
        .collect();
    for w in kls.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{kls:?}");
    }
}

#[test]
fn permutation_equivariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let d = 6;
    let perm = [3, 0, 5, 1, 4, 2];
    for _ in 0..10 {
        let (a, b) = (dirichlet(&mut rng, d), dirichlet(&mut rng, d));
        let cost = random_cost(&mut rng, d, 0.1, 5.0);
        let permute =
            |q: &Marginal| Marginal::new(perm.iter().map(|&i| q.get(i)).collect()).unwrap();
        let cfg = SolverConfig::default();
        let w = transport_cost(&a, &b, &cost, &cfg).unwrap();
        let wp = transport_cost(&permute(&a), &permute(&b), &cost.permuted(&perm), &cfg).unwrap();
        assert!((w - wp).abs() <= 1e-10, "{w} vs {wp}");
    }
}

#[test]
fn column_exactness_and_mass_on_larger_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for i in 0..60 {
        let d = [4, 7, 10][i % 3];
        let a = dirichlet(&mut rng, d);
        let mut bw: Vec<f64> = dirichlet(&mut rng, d).into_inner();
        if i % 4 == 0 {
            bw[rng.random_range(0..d)] = 0.0;
        }
        let b = Marginal::from_weights(&bw).unwrap();
        let cost = random_cost(&mut rng, d, 0.0, 50.0);
        let lambda = [0.01, 0.1, 1.0, 10.0, 100.0, 1e8][i % 6];
        let plan = solve_unbalanced(&a, &b, &cost, &SolverConfig::with_lambda(lambda)).unwrap();
        for (c, t) in plan.column_sums().iter().zip(b.probs()) {
            assert!((c - t).abs() <= COLUMN_TOLERANCE);
        }
        assert!(plan.entries().iter().all(|&v| v >= 0.0));
        assert!((plan.total_mass() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn huge_lambda_matches_balanced_on_random_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..10 {
        let d = 5;
        let (a, b) = (dirichlet(&mut rng, d), dirichlet(&mut rng, d));
        let cost = random_cost(&mut rng, d, 0.1, 5.0);
        let cfg = SolverConfig::with_lambda(1e8);
        let unbalanced = solve_unbalanced(&a, &b, &cost, &cfg).unwrap();
        let balanced = solve_balanced(&a, &b, &cost, &cfg).unwrap();
        for (r, s) in unbalanced.row_sums().iter().zip(a.probs()) {
            assert!((r - s).abs() <= 1e-4);
        }
        let diff = (unbalanced.entries() - balanced.entries()).amax();
        assert!(diff <= 1e-3, "{diff}");
    }
}
