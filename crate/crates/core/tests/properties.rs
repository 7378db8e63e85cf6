use caplab::comonotone::{chain_decompose, exp_sum_function, is_comonotonic_class, GridFunction};
use caplab::config::ScenarioConfig;
use caplab::ellsberg::{
    build_pprime, contamination_urn, random_urn, verify_pprime, verify_product_fubini, SortedUrn,
};
use caplab::independence::{
    exp_independent, fubini_independent_chain, peng_check, random_phis, Convention, Urn, UrnModel,
};
use caplab::measure::{choquet_integral, CredalSet, FiniteSpace, RandomVariable};
use caplab::rng::stream;
use caplab::wlln::{
    center_truncated, exact_band_probabilities, mc_simulate, subadditivity_violation, truncate,
    truncation_bound, Strategy, WllnScenario,
};
use std::ops::RangeInclusive;

use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use rand::Rng;

fn urn_from(rows: Vec<Vec<f64>>, values: Vec<f64>) -> Urn {
    let space = FiniteSpace::indexed(values.len()).unwrap();
    let credal = CredalSet::from_rows(&space, rows).unwrap();
    Urn::new(credal, RandomVariable::new(&space, values).unwrap()).unwrap()
}

fn sample_urn(
    rng: &mut impl Rng,
    atoms: RangeInclusive<usize>,
    members: RangeInclusive<usize>,
) -> Urn {
    let atoms = rng.gen_range(atoms);
    let members = rng.gen_range(members);
    random_urn(rng, atoms, members)
}

fn binary_urn(rng: &mut impl Rng) -> Urn {
    let members = rng.gen_range(1..=3);
    let rows = (0..members)
        .map(|_| {
            let q: f64 = rng.gen_range(0.05..0.95);
            vec![q, 1.0 - q]
        })
        .collect();
    let a: f64 = rng.gen_range(-3..=3) as f64;
    urn_from(rows, vec![a, a + rng.gen_range(1..=3) as f64])
}

fn model_of(urns: Vec<Urn>) -> UrnModel {
    UrnModel::product(urns).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_is_bounded_and_monotone(x in -1e6f64..1e6, y in -1e6f64..1e6, n in 1usize..10_000) {
        let b = truncation_bound(n);
        prop_assert!(truncation_bound(n + 1) > b);
        prop_assert!(truncate(x, n).abs() <= b);
        if x <= y {
            prop_assert!(truncate(x, n) <= truncate(y, n));
        }
        if x.abs() <= b {
            prop_assert_eq!(truncate(x, n), x);
        }
    }

    #[test]
    fn centering_keeps_the_upper_mean(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = stream(seed, 0);
        let atoms = rng.gen_range(2..=5);
        let members = rng.gen_range(1..=4);
        let urn = random_urn(&mut rng, atoms, members);
        let mean_hi = urn.credal().upper_envelope(urn.variable());
        let centered = center_truncated(&urn, n, mean_hi, 1e-12).unwrap();
        prop_assert!((urn.credal().upper_envelope(&centered) - mean_hi).abs() <= 1e-12);
        let spread = 2.0 * truncation_bound(n) + 1e-12;
        prop_assert!(centered.values().iter().all(|v| (v - mean_hi).abs() <= spread));
        prop_assert!(center_truncated(&urn, n, mean_hi + 1.0, 1e-12).is_err());
    }

    #[test]
    fn band_assembles_from_one_sided_events(seed in any::<u64>(), n in 1usize..6, eps in 0.0f64..1.0) {
        let mut rng = stream(seed, 1);
        let urn = sample_urn(&mut rng, 2..=3, 1..=3);
        let b = exact_band_probabilities(&urn, n, eps).unwrap();
        prop_assert!(b.band <= b.below_hi.min(b.above_lo) + 1e-12);
        prop_assert!(b.band >= b.below_hi + b.above_lo - 1.0 - 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b.band));
    }

    #[test]
    fn upper_capacities_are_subadditive(seed in any::<u64>()) {
        let mut rng = stream(seed, 2);
        let urn = sample_urn(&mut rng, 2..=6, 1..=5);
        let v = urn.credal().upper_capacity().unwrap();
        prop_assert_eq!(subadditivity_violation(&v, 1e-12), None);
    }

    #[test]
    fn choquet_ignores_tie_order(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 5), 1..4),
        levels in prop::collection::vec(0u8..3, 5),
        perm in proptest::strategy::Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|p| p / s).collect()
            })
            .collect();
        let x: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        let space = FiniteSpace::indexed(5).unwrap();
        let set = CredalSet::from_rows(&space, rows.clone()).unwrap();
        let permuted_rows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
        let permuted = CredalSet::from_rows(&space, permuted_rows).unwrap();
        let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let a = choquet_integral(&set.upper_probability(), &x);
        let b = choquet_integral(&permuted.upper_probability(), &px);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn chains_are_nested_comonotonic_classes(seed in any::<u64>(), p in 0u32..10) {
        let mut rng = stream(seed, 3);
        let urns = (0..2).map(|_| sample_urn(&mut rng, 2..=3, 1..=1)).collect();
        let m = model_of(urns);
        let f = exp_sum_function(&random_phis(&m, seed, 0)).unwrap();
        let chain = chain_decompose(&f, p).unwrap();
        prop_assert!(chain.is_nested());
        let mut class = vec![chain.reconstruct()];
        class.extend(chain.indicators());
        prop_assert!(is_comonotonic_class(&class).unwrap());
        let total: f64 = chain.levels().iter().map(|l| l.weight).sum();
        prop_assert!((total - chain.reconstruct().max()).abs() <= 1e-12);
    }

    #[test]
    fn pprime_matches_survival_and_follows_relabelling(seed in any::<u64>()) {
        let mut rng = stream(seed, 4);
        let atoms = rng.gen_range(2..=6);
        let members = rng.gen_range(1..=5);
        let urn = random_urn(&mut rng, atoms, members);
        let sorted = SortedUrn::new(urn.clone());
        let p = build_pprime(&sorted);
        prop_assert!(verify_pprime(&sorted, &p, 1e-12).unwrap().survival_match);

        let shift: Vec<usize> = (0..atoms).map(|i| (i + 1) % atoms).collect();
        let rows = urn.credal().members().iter().map(|m| shift.iter().map(|&i| m.prob(i)).collect()).collect();
        let values = shift.iter().map(|&i| urn.variable().value(i)).collect();
        let q = build_pprime(&SortedUrn::new(urn_from(rows, values)));
        for (new, &old) in shift.iter().enumerate() {
            prop_assert!((q.prob(new) - p.prob(old)).abs() <= 1e-12);
        }
    }

    #[test]
    fn pprime_is_in_core_for_two_alternating_envelopes(seed in any::<u64>()) {
        let mut rng = stream(seed, 5);
        let urn = sample_urn(&mut rng, 2..=5, 1..=3);
        let v = urn.credal().upper_capacity().unwrap();
        prop_assume!(v.two_alternating_violation(1e-12).unwrap().is_none());
        let sorted = SortedUrn::new(urn);
        let verdict = verify_pprime(&sorted, &build_pprime(&sorted), 1e-12).unwrap();
        prop_assert!(verdict.all());
    }

    #[test]
    fn contamination_pprime_is_in_core(seed in any::<u64>(), eps in 0.0f64..1.0) {
        let mut rng = stream(seed, 6);
        let atoms = rng.gen_range(2..=6);
        let sorted = SortedUrn::new(contamination_urn(&mut rng, atoms, eps));
        prop_assert!(verify_pprime(&sorted, &build_pprime(&sorted), 1e-12).unwrap().all());
    }

    #[test]
    fn fubini_conventions_agree(seed in any::<u64>()) {
        let mut rng = stream(seed, 7);
        let urns = (0..2).map(|_| sample_urn(&mut rng, 2..=3, 1..=3)).collect();
        let m = model_of(urns);
        let phis = random_phis(&m, seed, 1);
        let ge = fubini_independent_chain(&m, &phis, Convention::AtLeast, 1e-9).unwrap();
        let gt = fubini_independent_chain(&m, &phis, Convention::Greater, 1e-9).unwrap();
        prop_assert_eq!(ge.holds, gt.holds);
    }

    #[test]
    fn peng_sides_are_positively_homogeneous(seed in any::<u64>(), a in 0.0f64..10.0) {
        let mut rng = stream(seed, 8);
        let urns = (0..2).map(|_| sample_urn(&mut rng, 2..=3, 1..=3)).collect();
        let m = model_of(urns);
        let phi = exp_sum_function(&random_phis(&m, seed, 2)).unwrap();
        let scaled = GridFunction::new(m.range_axes(), phi.values().iter().map(|v| a * v).collect()).unwrap();
        let base = peng_check(&m, &phi, 1e-9).unwrap();
        let s = peng_check(&m, &scaled, 1e-9).unwrap();
        prop_assert!((s.lhs - a * base.lhs).abs() <= 1e-9 * (1.0 + s.lhs.abs()));
        prop_assert!((s.rhs - a * base.rhs).abs() <= 1e-9 * (1.0 + s.rhs.abs()));
    }

    #[test]
    fn product_fubini_holds_when_last_urn_is_binary(seed in any::<u64>()) {
        let mut rng = stream(seed, 9);
        let mut urns: Vec<Urn> = (0..rng.gen_range(1..=2))
            .map(|_| sample_urn(&mut rng, 2..=4, 1..=4))
            .collect();
        urns.push(binary_urn(&mut rng));
        let m = model_of(urns);
        let r = verify_product_fubini(&m, &random_phis(&m, seed, 3), 1e-9).unwrap();
        prop_assert!(r.holds, "max gap {}", r.max_gap);
    }

    #[test]
    fn product_fubini_holds_when_last_urn_is_contaminated(seed in any::<u64>(), eps in 0.0f64..1.0) {
        let mut rng = stream(seed, 10);
        let mut urns: Vec<Urn> = (0..rng.gen_range(1..=2))
            .map(|_| sample_urn(&mut rng, 2..=4, 1..=4))
            .collect();
        let atoms = rng.gen_range(2..=4);
        urns.push(contamination_urn(&mut rng, atoms, eps));
        let m = model_of(urns);
        let r = verify_product_fubini(&m, &random_phis(&m, seed, 4), 1e-9).unwrap();
        prop_assert!(r.holds, "max gap {}", r.max_gap);
    }

    #[test]
    fn binary_products_are_exponentially_independent(seed in any::<u64>()) {
        let mut rng = stream(seed, 11);
        let m = model_of((0..2).map(|_| binary_urn(&mut rng)).collect());
        let r = exp_independent(&m, 20, seed, 1e-9).unwrap();
        prop_assert!(r.holds, "max gap {} at {:?}", r.max_gap, r.witness);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_ignores_thread_count(seed in any::<u64>(), strategy in prop::sample::select(Strategy::ALL.to_vec())) {
        let s = WllnScenario {
            name: "t".into(),
            mean_lo: -1.0,
            mean_hi: 1.0,
            sigma_lo: 1.0,
            sigma_hi: 3.0,
            n_list: vec![1, 7, 40],
            reps: 30,
            epsilon: 0.1,
            strategy,
            seed,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_simulate(&s).unwrap())
        };
        prop_assert_eq!(run(1), run(4));
    }

    #[test]
    fn scenario_configs_round_trip(
        seed in any::<u64>(),
        reps in 1usize..500,
        eps in 0.0f64..2.0,
        n_list in prop::collection::vec(1usize..1000, 1..6),
    ) {
        let text = format!(
            r#"{{"version": 1, "wlln": {{"scenarios": [{{"name": "s", "mean_lo": -0.7, "mean_hi": 1.3,
            "sigma_lo": 0.5, "sigma_hi": 2.5, "n_list": {n_list:?}, "reps": {reps}, "epsilon": {eps:?},
            "strategy": "oscillating", "seed": {seed}}}]}}}}"#
        );
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let again = ScenarioConfig::parse(&cfg.to_json()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_json(), cfg.to_json());
    }
}

#[test]
fn bundled_configs_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ScenarioConfig::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let again = ScenarioConfig::parse(&cfg.to_json()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
        }
    }
}
