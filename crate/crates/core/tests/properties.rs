use adapted_ot::causal::{bicausal_distance_lp, causal_distance, check_causality, Direction, CAUSALITY_TOL};
use adapted_ot::experiments::{random_process, RandomTreeSpec};
use adapted_ot::lp::{solve, solve_exact, LinearProgram};
use adapted_ot::nested::nested_distance;
use adapted_ot::process::{FiniteProcess, MetricSpec, DEFAULT_TOL};
use adapted_ot::stopping::{enumerate_stopping_values, snell_value, Convention, RewardSpec};
use adapted_ot::transport::{ot_bruteforce, solve_ot, TransportProblem};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree(seed: u64, horizon: usize, dim: usize) -> FiniteProcess {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_process(
        &mut rng,
        RandomTreeSpec {
            horizon,
            max_branching: 3,
            dim,
        },
    )
}

fn weights(raw: Vec<u8>) -> Vec<f64> {
    let total: f64 = raw.iter().map(|&w| f64::from(w) + 1.0).sum();
    raw.iter().map(|&w| (f64::from(w) + 1.0) / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn network_simplex_matches_enumeration(
        mu in prop::collection::vec(any::<u8>(), 1..=4),
        nu in prop::collection::vec(any::<u8>(), 1..=4),
        seed in any::<u64>(),
    ) {
        let (mu, nu) = (weights(mu), weights(nu));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = Array2::from_shape_fn((mu.len(), nu.len()), |_| {
            rand::Rng::random_range(&mut rng, 0.0..3.0)
        });
        let prob = TransportProblem::new(mu, nu, cost).unwrap();
        let plan = solve_ot(&prob).unwrap();
        prop_assert!(plan.marginal_error(&prob) < 1e-12);
        prop_assert!((plan.value - ot_bruteforce(&prob).unwrap().value).abs() < 1e-9);
    }

    #[test]
    fn lp_float_agrees_with_exact(
        costs in prop::collection::vec(0u8..20, 6),
        rhs in prop::collection::vec(1u8..10, 3),
    ) {
        // min c·x subject to a 3x6 system with a known feasible point.
        let mut lp = LinearProgram::new(6, costs.iter().map(|&c| f64::from(c)).collect());
        for (i, &b) in rhs.iter().enumerate() {
            lp.add_row(vec![(2 * i, 1.0), (2 * i + 1, 1.0), ((2 * i + 2) % 6, 0.5)], f64::from(b));
        }
        let fast = solve(&lp).unwrap();
        let exact = solve_exact(&lp).unwrap();
        prop_assert!((fast.value - exact.value).abs() < 1e-9);
    }

    #[test]
    fn canonical_form_is_idempotent(seed in any::<u64>(), horizon in 1usize..=3, dim in 1usize..=2) {
        let p = tree(seed, horizon, dim);
        // Renormalizing may move masses by an ulp; the shape must not change.
        let q = p.canonicalize(DEFAULT_TOL).unwrap();
        prop_assert_eq!(q.nodes().len(), p.nodes().len());
        for ((x, a), (y, b)) in q.paths().iter().zip(&p.paths()) {
            prop_assert_eq!(x, y);
            prop_assert!((a - b).abs() < 1e-15);
        }
        let total: f64 = p.paths().iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snell_matches_enumeration(seed in any::<u64>(), horizon in 1usize..=3, zero in any::<bool>()) {
        let p = tree(seed, horizon, 1);
        prop_assume!(p.nodes().iter().filter(|n| !n.is_leaf()).count() <= 12);
        let conv = if zero { Convention::ZeroToN } else { Convention::OneToN };
        let reward = RewardSpec::panel().evaluate(&p, conv).unwrap();
        let (v, rule) = snell_value(&p, &reward).unwrap();
        prop_assert!((v - enumerate_stopping_values(&p, &reward).unwrap()).abs() < 1e-12);
        prop_assert!((rule.expected_reward(&p, &reward) - v).abs() < 1e-12);
    }

    #[test]
    fn optimal_plans_are_causal(a in any::<u64>(), b in any::<u64>(), horizon in 1usize..=3) {
        let (mu, nu) = (tree(a, horizon, 1), tree(b, horizon, 1));
        let m = MetricSpec::absolute(1.0);
        let (_, fwd) = causal_distance(&mu, &nu, &m).unwrap();
        prop_assert!(check_causality(&fwd, &mu, &nu, Direction::Forward, CAUSALITY_TOL).is_empty());
        let (aw, bi) = bicausal_distance_lp(&mu, &nu, &m).unwrap();
        prop_assert!(check_causality(&bi, &mu, &nu, Direction::Bicausal, CAUSALITY_TOL).is_empty());
        prop_assert!((aw - nested_distance(&mu, &nu, &m).unwrap().0).abs() < 1e-7);
    }

    #[test]
    fn p2_adapted_distance_matches_recursion(a in any::<u64>(), b in any::<u64>(), horizon in 1usize..=2) {
        let (mu, nu) = (tree(a, horizon, 2), tree(b, horizon, 2));
        let m = MetricSpec::euclidean(2.0);
        let (aw, _) = bicausal_distance_lp(&mu, &nu, &m).unwrap();
        prop_assert!((aw - nested_distance(&mu, &nu, &m).unwrap().0).abs() < 1e-7);
    }
}
