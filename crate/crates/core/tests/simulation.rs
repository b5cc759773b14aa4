use celltype_ot::reduce::{FeatureSummary, Reducer};
use celltype_ot::simulation::{
    build_sim_cost, generate_marginals, generate_truth, growth_profile, sample_block, SimConfig,
};
use celltype_ot::uot::COLUMN_TOLERANCE;
use celltype_ot::{Error, Snapshot, SolverConfig};

fn small() -> SimConfig {
    SimConfig {
        d: 6,
        t: 12,
        g: 8,
        n: 500,
        change_times: vec![3, 8],
        ..SimConfig::default()
    }
}

#[test]
fn changes_break_growth_exactly_at_change_times() {
    let cfg = SimConfig::default();
    let q = generate_marginals(&cfg).unwrap();
    assert_eq!(q.len(), 51);
    let deviating: Vec<usize> = (0..cfg.t)
        .filter(|&t| {
            let grown = q[t].apply_growth(&growth_profile(t, &cfg)).unwrap();
            grown
                .probs()
                .iter()
                .zip(q[t + 1].probs())
                .any(|(a, b)| (a - b).abs() > 1e-14)
        })
        .map(|t| t + 1)
        .collect();
    assert_eq!(deviating, vec![11, 21, 31, 41]);
}

#[test]
fn odd_d_with_changes_is_a_config_error() {
    let cfg = SimConfig { d: 5, ..small() };
    assert!(matches!(generate_marginals(&cfg), Err(Error::Config(_))));
    let cfg = SimConfig {
        d: 5,
        change_times: vec![],
        ..small()
    };
    assert!(generate_marginals(&cfg).is_ok());
}

#[test]
fn without_growth_or_change_labels_stay_uniform() {
    let cfg = SimConfig {
        nu: 0.0,
        eta: 0.0,
        n: 2000,
        ..SimConfig::default()
    };
    let q = generate_marginals(&cfg).unwrap();
    let bound = 3.0 / (cfg.n as f64).sqrt();
    for (t, qt) in q.iter().enumerate() {
        let (labels, expr) = sample_block(qt, &cfg, 0, t).unwrap();
        assert_eq!(expr.shape(), (cfg.n, cfg.g));
        let emp = Snapshot::new(t, labels)
            .unwrap()
            .empirical_marginal(cfg.d)
            .unwrap();
        for &p in emp.probs() {
            assert!((p - 0.1).abs() < bound, "t={t}: {p}");
        }
    }
}

#[test]
fn expression_means_match_type_levels() {
    let cfg = SimConfig {
        n: 20_000,
        ..SimConfig::default()
    };
    let q = generate_marginals(&cfg).unwrap();
    let (labels, expr) = sample_block(&q[0], &cfg, 0, 0).unwrap();
    let mut sum = vec![0.0; cfg.d];
    let mut count = vec![0usize; cfg.d];
    for (i, &l) in labels.iter().enumerate() {
        sum[l] += expr.row(i).sum();
        count[l] += cfg.g;
    }
    for j in 0..cfg.d {
        let mean = sum[j] / count[j] as f64;
        assert!(
            (mean - cfg.mean_level(j + 1)).abs() < 0.02,
            "type {j}: {mean}"
        );
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let cfg = small();
    let q = generate_marginals(&cfg).unwrap();
    let a = sample_block(&q[4], &cfg, 2, 4).unwrap();
    assert_eq!(a, sample_block(&q[4], &cfg, 2, 4).unwrap());
    assert_ne!(a, sample_block(&q[4], &cfg, 3, 4).unwrap());
    assert_ne!(a, sample_block(&q[4], &cfg, 2, 5).unwrap());
    let other = SimConfig { seed: 1, ..small() };
    assert_ne!(a, sample_block(&q[4], &other, 2, 4).unwrap());
}

#[test]
fn estimated_identity_cost_tracks_the_true_cost() {
    let cfg = SimConfig {
        reducer: Reducer::Identity,
        ..small()
    };
    let q = generate_marginals(&cfg).unwrap();
    let mut summary = FeatureSummary::new(cfg.d, cfg.g);
    for (t, qt) in q.iter().enumerate() {
        let (labels, expr) = sample_block(qt, &cfg, 0, t).unwrap();
        summary.add_block(&labels, &expr);
    }
    let est = build_sim_cost(&summary, &cfg).unwrap();
    let truth = cfg.true_cost();
    for j in 0..cfg.d {
        assert_eq!(est.get(j, j), 0.0);
        for k in 0..cfg.d {
            assert!((est.get(j, k) - est.get(k, j)).abs() < 1e-12);
            if j != k {
                let rel = (est.get(j, k) - truth.get(j, k)).abs() / truth.get(j, k);
                assert!(
                    rel < 0.1,
                    "({j},{k}): {} vs {}",
                    est.get(j, k),
                    truth.get(j, k)
                );
            }
            // Farther types cost more.
            if k + 1 < cfg.d && k >= j {
                assert!(est.get(j, k + 1) > est.get(j, k));
            }
        }
    }
}

#[test]
fn truth_plans_are_valid() {
    let cfg = small();
    let truth = generate_truth(&cfg, &SolverConfig::default()).unwrap();
    assert_eq!(truth.plans.len(), cfg.t);
    assert_eq!(truth.change_times, vec![3, 8]);
    for (t, p) in truth.plans.iter().enumerate() {
        assert!(p.entries().iter().all(|&v| v >= 0.0));
        for (c, q) in p.column_sums().iter().zip(truth.marginals[t + 1].probs()) {
            assert!((c - q).abs() < COLUMN_TOLERANCE);
        }
    }
}
