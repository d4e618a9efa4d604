use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smbo::benchmarks::{mf_quadratic, Benchmark};
use smbo::runhistory::{RunHistory, TrialKey, TrialResult};
use smbo::space::{Configuration, Encoding, Value};

fn history(entries: &[(i64, u8, u64, bool, u8, u8)]) -> RunHistory {
    let mut rh = RunHistory::new();
    for &(x, inst, seed, running, cost, wall) in entries {
        let id = rh.add_config(&Configuration::from_values(BTreeMap::from([("x".to_string(), Value::Int(x))])));
        let key = TrialKey {
            config_id: id,
            instance: (inst > 0).then(|| format!("i{inst}")),
            seed,
            budget: None,
        };
        let result = if running {
            TrialResult::running()
        } else {
            TrialResult::success(cost as f64, 0.1)
        };
        let _ = rh.add_trial(key, result, wall as f64);
    }
    rh
}

fn entries() -> impl Strategy<Value = Vec<(i64, u8, u64, bool, u8, u8)>> {
    prop::collection::vec((0i64..4, 0u8..3, 0u64..2, prop::bool::weighted(0.1), 0u8..4, 0u8..4), 0..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn samples_are_valid_and_encode_to_fixed_length(seed in any::<u64>()) {
        for b in [Benchmark::Branin, Benchmark::CashSynth, Benchmark::MfQuadratic, Benchmark::AcRuntime] {
            let space = b.space();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = space.sample(&mut rng);
            prop_assert!(space.validate(&c).is_ok());
            for scheme in [Encoding::Index, Encoding::OneHot] {
                let x = space.encode_unchecked(&c, scheme);
                let d = space.encode_unchecked(&space.default_configuration(), scheme);
                prop_assert_eq!(x.len(), d.len());
                prop_assert!(x.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn merge_is_idempotent_and_order_insensitive(a in entries(), b in entries()) {
        let (a, b) = (history(&a), history(&b));
        let mut aa = a.clone();
        aa.merge(&a);
        prop_assert_eq!(aa.canonical(), a.canonical());

        let mut ab = RunHistory::new();
        ab.merge(&a);
        ab.merge(&b);
        let mut ba = RunHistory::new();
        ba.merge(&b);
        ba.merge(&a);
        prop_assert_eq!(ab.canonical(), ba.canonical());
        let keys = |rh: &RunHistory| rh.canonical().into_iter().map(|t| (t.config, t.instance, t.seed)).collect::<BTreeSet<_>>();
        let union: BTreeSet<_> = keys(&a).union(&keys(&b)).cloned().collect();
        prop_assert_eq!(keys(&ab), union);
    }

    #[test]
    fn cash_synth_ignores_inactive_values(s1 in any::<u64>(), s2 in any::<u64>()) {
        let b = Benchmark::CashSynth;
        let space = b.space();
        let c = space.sample(&mut ChaCha8Rng::seed_from_u64(s1));
        let other = space.sample(&mut ChaCha8Rng::seed_from_u64(s2));
        let mut values = other.into_values();
        values.extend(c.values().clone());
        let completed = space.complete(values);
        prop_assert_eq!(&completed, &c);
        let x = b.evaluate(&c, None, 0, None).unwrap().cost;
        let y = b.evaluate(&completed, None, 0, None).unwrap().cost;
        prop_assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn mf_fidelity_gap_shrinks_with_budget(x in prop::array::uniform6(0.0f64..1.0)) {
        let full = mf_quadratic(&x, 27.0);
        let mut last = f64::INFINITY;
        for b in 1..=27 {
            let gap = (mf_quadratic(&x, b as f64) - full).abs();
            prop_assert!(gap <= last + 1e-15);
            last = gap;
        }
        prop_assert_eq!(last, 0.0);
    }
}
