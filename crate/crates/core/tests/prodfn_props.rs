use ebigame_core::prodfn::*;
use proptest::prelude::*;

fn cfg(seed: u64) -> AuditConfig {
    AuditConfig { n_samples: 150, seed, ..AuditConfig::default() }
}

fn spec() -> impl Strategy<Value = ProductionSpec> {
    (
        prop::collection::vec(0.05..1.0f64, 2),
        -0.8..0.8f64,
        prop::bool::ANY,
        0.0..1.0f64,
        prop::option::of(0.1..0.9f64),
    )
        .prop_map(|(weights, incentive, negative, lo_inc, threshold)| {
            let inc_box = if negative { [-1.0, 1.0] } else { [lo_inc, lo_inc + 1.0] };
            let vesting_threshold = threshold.map(|t| inc_box[0] + t * (inc_box[1] - inc_box[0]));
            ProductionSpec {
                family: if vesting_threshold.is_some() { Family::PiecewiseVesting } else { Family::CobbDouglasIncentive },
                params: FamilyParams { scale: 1.0, weights, incentive, rho: None, returns: 1.0 },
                n_factors: 3,
                domain_box: vec![[0.5, 2.0], [0.5, 2.0], inc_box],
                vesting_threshold,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn audit_is_deterministic(s in spec(), seed in any::<u64>()) {
        prop_assert_eq!(audit(&s, &cfg(seed)).unwrap(), audit(&s, &cfg(seed)).unwrap());
    }

    #[test]
    fn positive_scaling_keeps_structural_verdicts(s in spec(), k in 1u32..64, seed in any::<u64>()) {
        let c = k as f64 / 8.0;
        let a = audit(&s, &cfg(seed)).unwrap();
        let b = audit(&s.scaled(c), &cfg(seed)).unwrap();
        for assumption in [1u8, 5, 6, 7] {
            prop_assert_eq!(a.verdict(assumption), b.verdict(assumption), "A{}", assumption);
        }
    }

    #[test]
    fn witnesses_recheck(s in spec(), seed in any::<u64>()) {
        let r = audit(&s, &cfg(seed)).unwrap();
        for c in &r.checks {
            if c.verdict == Verdict::Violated {
                prop_assert!(!c.evidence.is_empty());
            }
            for w in &c.evidence {
                prop_assert!(recheck_witness(&s, w, r.tolerance), "{:?}", w);
            }
        }
    }

    #[test]
    fn interior_threshold_always_breaks_smoothness(mut s in spec(), t in 0.01..0.99f64, beta in 1e-3..0.8f64, negative in prop::bool::ANY, seed in any::<u64>()) {
        let [lo, hi] = s.domain_box[2];
        s.family = Family::PiecewiseVesting;
        s.vesting_threshold = Some(lo + t * (hi - lo));
        s.params.incentive = if negative { -beta } else { beta };
        prop_assert_eq!(check_a6_smooth(&s, &cfg(seed)).unwrap().verdict, Verdict::Violated);
    }

    #[test]
    fn fd_matches_closed_form(a0 in 0.05..1.0f64, a1 in 0.05..1.0f64, u in prop::array::uniform3(0.05..0.95f64)) {
        let s = ProductionSpec {
            family: Family::CobbDouglasIncentive,
            params: FamilyParams { scale: 1.0, weights: vec![a0, a1], incentive: 0.0, rho: None, returns: 1.0 },
            n_factors: 3,
            domain_box: vec![[0.5, 2.0], [0.5, 2.0], [0.0, 1.0]],
            vesting_threshold: None,
        };
        let x: Vec<f64> = u.iter().zip(&s.domain_box).map(|(t, b)| b[0] + t * (b[1] - b[0])).collect();
        let h: f64 = 1e-4;
        let bound = (10.0 * h * h).max(1e-6);
        let f = s.formula(&x);
        for (i, a) in [a0, a1].into_iter().enumerate() {
            let (f_i, f_ii) = marginals_fd(&s, &x, i, h);
            prop_assert!((f_i - a * f / x[i]).abs() <= bound);
            prop_assert!((f_ii - a * (a - 1.0) * f / (x[i] * x[i])).abs() <= bound);
        }
    }
}
