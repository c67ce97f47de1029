use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsearch_core::Vec2;
use vsearch_core::agent::{
    AgentConfig, CircularScan, DetectorOutput, OracleDetector, OracleDetectorConfig, RandomPolicy, RewardConfig, SacAmpKind, SearchPolicy, SpikingPolicy,
    TEST_CONTRAST_RANGE, Termination, check_termination, half_span_deg, ior_reward, run_agent_trials, sacamp_reward,
};

fn point() -> impl Strategy<Value = Vec2> {
    (-7.5..7.5f64, -7.5..7.5f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn output() -> impl Strategy<Value = DetectorOutput> {
    (point(), point(), 0.0..1.2f64).prop_map(|(f, t, e)| DetectorOutput { fix_loc_pred_deg: f, target_rel_pred_deg: t * 0.1, err_est_deg: e })
}

proptest! {
    #[test]
    fn rewards_stay_in_range(h in prop::collection::vec(point(), 1..20), next in point(), r in 0.1..5.0f64, amp in 0.0..20.0f64) {
        let ior = ior_reward(&h, next, r, 8);
        prop_assert!((-1.0..=0.0).contains(&ior));
        let exp = sacamp_reward(amp, &RewardConfig { sacamp_kind: SacAmpKind::Exp, ..RewardConfig::hp1() });
        prop_assert!(exp > -1.0 && exp <= -0.5);
        let lin = sacamp_reward(amp, &RewardConfig::hp2());
        prop_assert!(lin <= 0.0);
    }

    #[test]
    fn ior_forgets_beyond_memory(
        recent in prop::collection::vec(point(), 8),
        old in prop::collection::vec(point(), 1..10),
        other in prop::collection::vec(point(), 1..10),
        next in point(),
    ) {
        let a: Vec<Vec2> = old.iter().chain(&recent).copied().collect();
        let b: Vec<Vec2> = other.iter().chain(&recent).copied().collect();
        prop_assert_eq!(ior_reward(&a, next, 2.5, 8), ior_reward(&b, next, 2.5, 8));
    }

    #[test]
    fn termination_depends_only_on_inputs(prev in output(), last in output(), n in 1usize..250) {
        let a = check_termination(&prev, &last, n, 200);
        prop_assert_eq!(a, check_termination(&prev, &last, n, 200));
        let confirmed = prev.err_est_deg < 0.58 && last.err_est_deg < 0.58 && prev.target_abs_pred().dist(last.target_abs_pred()) < 0.5;
        let expect = if confirmed { Termination::Stop } else if n >= 200 { Termination::Timeout } else { Termination::Continue };
        prop_assert_eq!(a, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fixations_inside_square(seed in any::<u64>(), which in 0usize..3) {
        let mut pol: Box<dyn SearchPolicy> = match which {
            0 => Box::new(RandomPolicy),
            1 => Box::new(CircularScan::default()),
            _ => Box::new(SpikingPolicy::init(16, 32, &mut ChaCha8Rng::seed_from_u64(seed))),
        };
        let det = OracleDetector::new(OracleDetectorConfig::default());
        let cfg = AgentConfig { max_fixations: 60, ..AgentConfig::default() };
        let h = half_span_deg();
        for (_, t) in run_agent_trials(&det, pol.as_mut(), &cfg, TEST_CONTRAST_RANGE, 5, seed) {
            for s in &t.steps {
                prop_assert!(s.fixation.x.abs() <= h && s.fixation.y.abs() <= h, "{:?}", s.fixation);
            }
        }
    }
}

#[test]
fn circular_scan_solves_the_task() {
    let det = OracleDetector::new(OracleDetectorConfig::default());
    let runs = run_agent_trials(&det, &mut CircularScan::default(), &AgentConfig::default(), TEST_CONTRAST_RANGE, 2000, 3);
    let correct = runs.iter().filter(|(_, t)| t.outcome.is_correct()).count();
    assert!(correct as f64 / 2000.0 >= 0.9, "accuracy {}", correct as f64 / 2000.0);
}
