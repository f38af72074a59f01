use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use closure_core::dsl::{
    build_vocabulary, equivalent, evaluate, parse_expr, Expr, ProbeSet, SlotTemplate, TemplateLimits,
    VocabularyConfig, DEFAULT_EQUIVALENCE_TOL,
};
use closure_core::environment::{
    compute_reference, reward_formula, Environment, EvalStatus, RewardConfig,
};
use closure_core::numerics::{d2dx2, ddx, Field, Grid, SolverConfig};
use closure_core::policy::{init_policy_for_counts, ActorConfig};

fn benchmark_template() -> SlotTemplate {
    let vocab = build_vocabulary(&VocabularyConfig {
        integers: vec![2],
        reciprocals: vec![2],
        ..Default::default()
    })
    .unwrap();
    SlotTemplate::new(&vocab, TemplateLimits { n_max: 2, max_depth: 3 }).unwrap()
}

fn random_action(template: &SlotTemplate, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    template.choice_counts().iter().map(|&k| rng.random_range(0..k)).collect()
}

fn random_expr(seed: u64) -> Expr {
    let t = benchmark_template();
    t.decode(&random_action(&t, seed)).unwrap()
}

fn tiny_solver() -> SolverConfig {
    let mut cfg = SolverConfig::default();
    cfg.grid.n = 32;
    cfg.dt = 0.004;
    cfg.t_end = 0.02;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_encode_decode_is_stable(seed in any::<u64>()) {
        let t = benchmark_template();
        let e = t.decode(&random_action(&t, seed)).unwrap();
        let again = t.decode(&t.encode(&e).unwrap()).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn rendering_parses_back(seed in any::<u64>()) {
        let e = random_expr(seed);
        prop_assert_eq!(parse_expr(&e.render()).unwrap(), e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn term_counts_add(a in any::<u64>(), b in any::<u64>()) {
        let (ea, eb) = (random_expr(a), random_expr(b));
        prop_assert!(ea.term_count() >= 1);
        prop_assert_eq!(ea.clone().add(eb.clone()).term_count(), ea.term_count() + eb.term_count());
    }

    #[test]
    fn evaluation_is_pure(seed in any::<u64>(), t in 0.0f64..1.0) {
        let e = random_expr(seed);
        let g = Grid::unit(64).unwrap();
        let u = Field::from_fn(&g, |x| (std::f64::consts::TAU * x).sin() + 0.3);
        let a = evaluate(&e, &u, &g, t);
        let b = evaluate(&e, &u, &g, t);
        prop_assert!(a.values().iter().zip(b.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let probes = ProbeSet::default();
        let (ea, eb) = (random_expr(a), random_expr(b));
        let fa = closure_core::dsl::fingerprint(&ea, &probes);
        prop_assume!(fa.finite);
        prop_assert!(equivalent(&ea, &ea, &probes, DEFAULT_EQUIVALENCE_TOL));
        prop_assert_eq!(
            equivalent(&ea, &eb, &probes, DEFAULT_EQUIVALENCE_TOL),
            equivalent(&eb, &ea, &probes, DEFAULT_EQUIVALENCE_TOL)
        );
    }

    #[test]
    fn ddx_is_linear_inside_evaluation(a in any::<u64>(), b in any::<u64>(), ka in scalar(), kb in scalar()) {
        let (f, g) = (random_expr(a), random_expr(b));
        let grid = Grid::unit(64).unwrap();
        let u = Field::from_fn(&grid, |x| 0.5 * (std::f64::consts::TAU * x).cos() + 0.2);
        let (alpha, alpha_e) = ka;
        let (beta, beta_e) = kb;
        let fv = evaluate(&f, &u, &grid, 0.1);
        let gv = evaluate(&g, &u, &grid, 0.1);
        prop_assume!(fv.is_finite() && gv.is_finite());
        let scale = alpha.abs() * fv.max_abs() + beta.abs() * gv.max_abs();
        prop_assume!(scale < 1e6);
        let combined = alpha_e.mul(f.clone()).add(beta_e.mul(g.clone())).ddx();
        let lhs = evaluate(&combined, &u, &grid, 0.1);
        let df = evaluate(&f.ddx(), &u, &grid, 0.1);
        let dg = evaluate(&g.ddx(), &u, &grid, 0.1);
        // Rounding in the stencil grows with the field magnitude over h.
        let tol = 1e-12 * (1.0 + scale / grid.h());
        for ((l, p), q) in lhs.values().iter().zip(df.values()).zip(dg.values()) {
            let r = alpha * p + beta * q;
            prop_assert!((l - r).abs() <= tol, "{} vs {}", l, r);
        }
    }

    #[test]
    fn stencils_annihilate_constants(c in -100.0f64..100.0, n in 5usize..400) {
        let g = Grid::unit(n).unwrap();
        let f = Field::constant(&g, c);
        prop_assert!(ddx(&f, &g).max_abs() <= 1e-13);
        prop_assert!(d2dx2(&f, &g).max_abs() <= 1e-13);
    }

    #[test]
    fn reward_is_bounded_and_decreasing(e in 0.0f64..1e6, de in 1e-9f64..1e3, n in 1usize..20) {
        let cfg = RewardConfig::default();
        let r = reward_formula(e, n, &cfg);
        prop_assert!(r > 0.0 && r <= 20.0);
        prop_assert!(reward_formula(e + de * (1.0 + e), n, &cfg) < r);
        prop_assert!(reward_formula(e, n + 1, &cfg) < r);
    }
}

/// A signed constant of the language with its value.
fn scalar() -> impl Strategy<Value = (f64, Expr)> {
    (1u32..=10, any::<bool>(), any::<bool>()).prop_map(|(k, recip, negative)| {
        let (v, e) = if recip {
            (1.0 / k as f64, Expr::reciprocal(k))
        } else {
            (k as f64, Expr::integer(k))
        };
        if negative {
            (-v, e.neg())
        } else {
            (v, e)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn batches_keep_order_and_ignore_worker_count(seeds in prop::collection::vec(any::<u64>(), 1..12)) {
        let reference = compute_reference(&tiny_solver()).unwrap();
        let cfg = RewardConfig::default();
        let exprs: Vec<Expr> = seeds.iter().map(|&s| random_expr(s)).collect();
        let one = Environment::with_reference(reference.clone(), cfg.clone(), ProbeSet::default(), 1).unwrap();
        let three = Environment::with_reference(reference, cfg.clone(), ProbeSet::default(), 3).unwrap();
        let a = one.evaluate_batch(&exprs);
        let b = three.evaluate_batch(&exprs);
        prop_assert_eq!(a.records.len(), exprs.len());
        for ((ra, rb), e) in a.records.iter().zip(&b.records).zip(&exprs) {
            prop_assert_eq!(&ra.expr, e);
            prop_assert_eq!(ra.reward.to_bits(), rb.reward.to_bits());
            prop_assert_eq!(ra.error_norm.to_bits(), rb.error_norm.to_bits());
            prop_assert_eq!(ra.cached, rb.cached);
            prop_assert!(ra.reward > 0.0 && ra.reward <= 20.0);
            let charged = match ra.status {
                EvalStatus::Ok => ra.error_norm,
                EvalStatus::Diverged => cfg.e_max,
            };
            prop_assert_eq!(ra.reward, reward_formula(charged, ra.n, &cfg));
            prop_assert_eq!(ra.n, e.term_count());
        }
    }

    #[test]
    fn policy_outputs_are_simplices(seed in any::<u64>(), counts in prop::collection::vec(1usize..6, 1..6)) {
        let cfg = ActorConfig { width: 8, relu_layers: 2, sigmoid_layers: 2 };
        let mut p = init_policy_for_counts(seed, counts.clone(), &cfg);
        let uniform = p.forward().unwrap();
        for (s, &k) in counts.iter().enumerate() {
            prop_assert!(uniform.slot(s).iter().all(|&q| (q - 1.0 / k as f64).abs() <= 1e-6));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let params: Vec<f64> = p.net().params().iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        p.net_mut().set_params(params);
        let dist = p.forward().unwrap();
        for s in 0..counts.len() {
            let sum: f64 = dist.slot(s).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(dist.slot(s).iter().all(|&q| q >= 0.0));
        }
    }
}
