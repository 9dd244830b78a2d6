mod common;

use proptest::prelude::*;
use scenred::exact::{continuous_exact, discrete_exact, DEFAULT_BUDGET, DEFAULT_TOL};
use scenred::heuristics::{
    continuous_polish, dupacova_trace, k_means_generalized, local_search, KMeansInit, LocalSearchInit, SwapStrategy,
};
use scenred::quantize::pre_reduce;
use scenred::transport::{dist_to_support, wasserstein};
use scenred::{DiscreteDistribution, Metric, Norm};

fn distribution(max_n: usize, dim: usize) -> impl Strategy<Value = DiscreteDistribution> {
    (1..=max_n).prop_flat_map(move |n| {
        (prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n), prop::collection::vec(0.05..1.0f64, n))
            .prop_map(|(pts, masses)| DiscreteDistribution::from_masses(pts, &masses).unwrap())
    })
}

fn metric() -> impl Strategy<Value = Metric> {
    (prop::sample::select(vec![1.0, 2.0]), prop::sample::select(vec![Norm::L1, Norm::L2, Norm::LInf]))
        .prop_map(|(l, norm)| Metric::new(l, norm).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_plan_is_feasible_and_symmetric(p in distribution(5, 2), q in distribution(5, 2), m in metric()) {
        let t = wasserstein(&p, &q, &m).unwrap();
        prop_assert!(t.plan.marginal_error() <= 1e-9);
        prop_assert!(t.plan.positive_entries() < p.len() + q.len());
        let back = wasserstein(&q, &p, &m).unwrap();
        prop_assert!((t.value - back.value).abs() <= 1e-9 * (1.0 + t.value));
        prop_assert!(wasserstein(&p, &p, &m).unwrap().value <= 1e-9);
    }

    #[test]
    fn transport_matches_enumeration(p in distribution(4, 2), q in distribution(4, 2), m in metric()) {
        let got = wasserstein(&p, &q, &m).unwrap().value;
        let want = common::brute_force_transport(&p, &q, &m);
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want), "{} vs {}", got, want);
    }

    #[test]
    fn support_distance_is_optimal_transport(p in distribution(6, 2), k in 1usize..4, m in metric()) {
        let support: Vec<Vec<f64>> = p.points().iter().take(k).cloned().collect();
        let fit = dist_to_support(&p, &support, &m).unwrap();
        let t = wasserstein(&p, &fit.reduced, &m).unwrap();
        prop_assert!((t.value - fit.value).abs() <= 1e-9 * (1.0 + fit.value));
    }

    #[test]
    fn greedy_is_monotone(p in distribution(8, 2), m in metric()) {
        let (r, trace) = dupacova_trace(&p, p.len(), &m).unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(r.value <= 1e-12);
        for k in 1..=p.len() {
            let (rk, _) = dupacova_trace(&p, k, &m).unwrap();
            prop_assert!((rk.value - trace[k - 1]).abs() <= 1e-9 * (1.0 + rk.value));
            rk.check(&p).unwrap();
        }
    }

    #[test]
    fn heuristics_never_beat_exact(p in distribution(8, 2), m in metric(), k in 1usize..4, seed in 0u64..1000) {
        let k = k.min(p.len());
        let exact_d = discrete_exact(&p, k, &m, DEFAULT_BUDGET).unwrap();
        let exact_c = continuous_exact(&p, k, &m, DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
        let slack = 1e-7 * (1.0 + exact_d.value);
        prop_assert!(exact_c.value <= exact_d.value + slack);
        for strategy in [SwapStrategy::BestFit, SwapStrategy::FirstFit] {
            let loc = local_search(&p, k, &m, LocalSearchInit::Seed(seed), strategy, 0.0).unwrap();
            prop_assert!(loc.value >= exact_d.value - 1e-12);
            loc.check(&p).unwrap();
        }
        let km = k_means_generalized(&p, k, &m, KMeansInit::Seed(seed), 200).unwrap();
        prop_assert!(km.value >= exact_c.value - slack);
        let polished = continuous_polish(&exact_d, &p, &m, DEFAULT_TOL).unwrap();
        prop_assert!(polished.value <= exact_d.value);
    }

    #[test]
    fn exact_values_shrink_with_m(p in distribution(7, 2), m in metric()) {
        let mut prev_d = f64::INFINITY;
        let mut prev_c = f64::INFINITY;
        for k in 1..=p.len() {
            let d = discrete_exact(&p, k, &m, DEFAULT_BUDGET).unwrap().value;
            let c = continuous_exact(&p, k, &m, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value;
            prop_assert!(d <= prev_d + 1e-12);
            prop_assert!(c <= prev_c + 1e-7);
            prev_d = d;
            prev_c = c;
        }
    }

    #[test]
    fn local_search_improves_its_start(p in distribution(9, 2), m in metric(), k in 1usize..4, eps in 0.0..0.5f64) {
        let k = k.min(p.len());
        let start: Vec<usize> = (0..k).collect();
        let pts: Vec<Vec<f64>> = start.iter().map(|&i| p.point(i).to_vec()).collect();
        let before = dist_to_support(&p, &pts, &m).unwrap().value;
        let r = local_search(&p, k, &m, LocalSearchInit::Indices(start), SwapStrategy::FirstFit, eps).unwrap();
        prop_assert!(r.value <= before + 1e-12);
    }

    #[test]
    fn k_means_improves_its_start(p in distribution(9, 1), k in 1usize..4) {
        let k = k.min(p.len());
        let m = Metric::l2_euclidean();
        let init: Vec<Vec<f64>> = p.points().iter().take(k).cloned().collect();
        let before = dist_to_support(&p, &init, &m).unwrap().value;
        let r = k_means_generalized(&p, k, &m, KMeansInit::Points(init), 500).unwrap();
        prop_assert!(r.value <= before + 1e-12);
        prop_assert!(r.iterations <= 500);
    }

    #[test]
    fn pre_reduce_keeps_mass(colors in prop::collection::vec((0u8..=255, 0u8..=255, 0u8..=255), 1..80),
                             target in 1usize..40) {
        let pts: Vec<Vec<f64>> = colors.iter().map(|&(r, g, b)| vec![r as f64, g as f64, b as f64]).collect();
        let p = DiscreteDistribution::uniform(pts).unwrap();
        let q = pre_reduce(&p, target).unwrap();
        prop_assert!(q.len() <= p.len());
        if p.len() > target {
            prop_assert!(q.len() <= target);
        }
        prop_assert!((q.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(q.points().iter().flatten().all(|&c| c.fract() == 0.0 && (0.0..=255.0).contains(&c)));
    }
}
