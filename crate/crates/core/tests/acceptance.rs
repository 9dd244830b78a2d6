//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any fail.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenred::exact::{continuous_exact, discrete_exact, DEFAULT_BUDGET, DEFAULT_TOL};
use scenred::heuristics::{
    dupacova_greedy, dupacova_trace, k_means_generalized, local_search, KMeansInit, LocalSearchInit, SwapStrategy,
};
use scenred::limits::{
    gen_adversarial, gen_kappa_tight, gen_worst_case, limit_bounds, normal_experiment, AdversarialFamily,
    DEFAULT_RESTARTS,
};
use scenred::quantize::{quantize_image, ImageRaster, PaletteAlgorithm, QuantizeOptions, Reference};
use scenred::transport::wasserstein;
use scenred::{DiscreteDistribution, Metric, Norm};

type Outcome = Result<String, String>;

fn worst_case_type2() -> Outcome {
    let metric = Metric::l2_euclidean();
    let mut worst: f64 = 0.0;
    for n in 3..=7 {
        let p = gen_worst_case(n, n).unwrap();
        for m in 1..n {
            let got = continuous_exact(&p, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value;
            let want = limit_bounds(n, m, 2).unwrap().c_upper;
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-9 {
                return Err(format!("n={n} m={m}: {got} vs {want}"));
            }
        }
    }
    Ok(format!("max error {worst:.2e}"))
}

fn worst_case_type1() -> Outcome {
    let metric = Metric::l1(Norm::L2);
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        let p = gen_worst_case(n, n).unwrap();
        for m in 1..=n {
            let got = continuous_exact(&p, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value;
            let want = limit_bounds(n, m, 1).unwrap().c1_lower;
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-4 {
                return Err(format!("n={n} m={m}: {got} vs {want}"));
            }
        }
    }
    Ok(format!("max error {worst:.2e}"))
}

fn ratio(p: &DiscreteDistribution, m: usize, metric: &Metric) -> f64 {
    let d = discrete_exact(p, m, metric, DEFAULT_BUDGET).unwrap().value;
    let c = continuous_exact(p, m, metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value;
    d / c
}

fn kappa2_tight() -> Outcome {
    let mut out = Vec::new();
    for n in [4, 6] {
        for m in [1, 2] {
            let p = gen_kappa_tight(2, n, m, Some(3), None).unwrap();
            let r = ratio(&p, m, &Metric::l2_euclidean());
            out.push(format!("({n},{m})={r:.9}"));
            if (r - 2f64.sqrt()).abs() > 1e-6 {
                return Err(out.join(" "));
            }
        }
    }
    Ok(out.join(" "))
}

fn kappa1_tight() -> Outcome {
    let mut out = Vec::new();
    for (n, m) in [(4, 1), (8, 2), (12, 3)] {
        let p = gen_kappa_tight(1, n, m, None, None).unwrap();
        let r = ratio(&p, m, &Metric::l1(Norm::L1));
        let want = 2.0 * (1.0 - m as f64 / n as f64);
        out.push(format!("({n},{m})={r:.9}"));
        if (r - want).abs() > 1e-6 {
            return Err(format!("{} want {want}", out.join(" ")));
        }
    }
    Ok(out.join(" "))
}

fn greedy_failure() -> Outcome {
    let z = 50;
    let p = gen_adversarial(AdversarialFamily::Dupacova, z, 1e-3, 2).unwrap();
    let metric = Metric::l1(Norm::L2);
    let (greedy, _) = dupacova_trace(&p, 4, &metric).unwrap();
    let first = greedy.support_indices.as_ref().unwrap()[0];
    // C(201, 4) is about 6.6e7, above the default budget.
    let exact = discrete_exact(&p, 4, &metric, 100_000_000).unwrap();
    let r = greedy.value / exact.value;
    let msg = format!("first pick {first} (origin {}), ratio {r:.3}", 4 * z);
    if first == 4 * z && r >= 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn kmeans_failure() -> Outcome {
    let z = 50;
    let p = gen_adversarial(AdversarialFamily::KMeans, z, 1e-3, 1).unwrap();
    let metric = Metric::l2_euclidean();
    let init = vec![p.point(0).to_vec(), p.point(1).to_vec(), p.point(2 * z).to_vec()];
    let km = k_means_generalized(&p, 3, &metric, KMeansInit::Points(init), 10_000).unwrap();
    let exact = continuous_exact(&p, 3, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
    let r = km.value / exact.value;
    let msg = format!("ratio {r:.3}");
    if r >= 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn local_search_guarantee() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(1..=3.min(n));
        let d = rng.random_range(1..=3);
        let norm = if k % 2 == 0 { Norm::L1 } else { Norm::L2 };
        let metric = Metric::l1(norm);
        let p = DiscreteDistribution::from_masses(
            common::random_points(&mut rng, n, d),
            &(0..n).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<f64>>(),
        )
        .unwrap();
        let exact = discrete_exact(&p, m, &metric, DEFAULT_BUDGET).unwrap().value;
        let loc =
            local_search(&p, m, &metric, LocalSearchInit::MostFrequent, SwapStrategy::BestFit, 0.0).unwrap().value;
        let dpcv = dupacova_greedy(&p, m, &metric).unwrap();
        let init = LocalSearchInit::Indices(dpcv.support_indices.clone().unwrap());
        let loc1 = local_search(&p, m, &metric, init, SwapStrategy::BestFit, 0.0).unwrap().value;
        if exact > 0.0 {
            worst = worst.max(loc / exact);
        }
        if loc > 5.0 * exact + 1e-12 || loc1 > dpcv.value {
            return Err(format!("instance {k}: loc {loc}, loc1 {loc1}, dpcv {}, exact {exact}", dpcv.value));
        }
    }
    Ok(format!("worst ratio {worst:.4}"))
}

fn transport_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let (n, m) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let d = rng.random_range(1..=3);
        let metric = Metric::new([1.0, 2.0][rng.random_range(0..2)], common::random_norm(&mut rng)).unwrap();
        let p =
            DiscreteDistribution::new(common::random_points(&mut rng, n, d), common::rational_weights(&mut rng, n, 12))
                .unwrap();
        let q =
            DiscreteDistribution::new(common::random_points(&mut rng, m, d), common::rational_weights(&mut rng, m, 12))
                .unwrap();
        let got = wasserstein(&p, &q, &metric).unwrap().value;
        let want = common::brute_force_transport(&p, &q, &metric);
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-9 {
            return Err(format!("instance {k}: simplex {got}, enumeration {want}"));
        }
    }
    Ok(format!("max error {worst:.2e}"))
}

fn dimension_trend() -> Outcome {
    let dims = [15, 30, 60];
    let mut notes = Vec::new();
    for seed in [2024, 7] {
        let t = normal_experiment(60, &[30], &dims, 2.97, 20, seed, DEFAULT_RESTARTS).unwrap();
        let means: Vec<f64> = dims.iter().map(|&d| t.row(d, 30).unwrap().mean_ratio).collect();
        let increasing = means.windows(2).all(|w| w[0] < w[1]);
        let note = format!("seed {seed}: {:.4} {:.4} {:.4}", means[0], means[1], means[2]);
        if increasing && means[2] >= 0.75 {
            return Ok(note);
        }
        notes.push(note);
    }
    // Ratio reached if the 60 samples were exactly orthogonal with the
    // typical norm sqrt(d) / (sqrt(d - 1) + c).
    let (n, d, c) = (60.0f64, 60.0f64, 2.97);
    let ceiling = d.sqrt() / ((d - 1.0).sqrt() + c) * ((n - 1.0) / n).sqrt();
    notes.push(format!("orthogonal ceiling at d=60 {ceiling:.4}"));
    Err(notes.join("; "))
}

fn quantization_ordering() -> Outcome {
    let image = ImageRaster::open(common::fixture("sample.ppm")).unwrap();
    let q = quantize_image(&image, &QuantizeOptions::new(3, PaletteAlgorithm::Exact, 64)).unwrap();
    let r = &q.report;
    let gap = |a| r.entry(a).unwrap().gap;
    if r.reference != Reference::Exact || r.entries.iter().any(|e| e.gap < -1e-9) {
        return Err(format!("m=3 gaps {:?}", r.entries));
    }
    if gap(PaletteAlgorithm::Loc1) > gap(PaletteAlgorithm::Dpcv) {
        return Err("m=3: loc1 gap above dpcv gap".into());
    }
    let mut notes = vec![format!("m=3 dpcv gap {:.4}", gap(PaletteAlgorithm::Dpcv))];
    for m in [8, 16] {
        let q = quantize_image(&image, &QuantizeOptions::new(m, PaletteAlgorithm::Loc1, 64)).unwrap();
        let r = &q.report;
        let value = |a| r.entry(a).unwrap().value;
        if r.reference != Reference::BestKnown || value(PaletteAlgorithm::Loc1) > value(PaletteAlgorithm::Dpcv) {
            return Err(format!("m={m}: {:?}", r.entries));
        }
        notes.push(format!(
            "m={m} loc1 {:.3} dpcv {:.3}",
            value(PaletteAlgorithm::Loc1),
            value(PaletteAlgorithm::Dpcv)
        ));
    }
    Ok(notes.join(", "))
}

fn golden_lp() -> Outcome {
    for (name, text) in common::golden_exports() {
        let want = std::fs::read_to_string(common::fixture(name)).map_err(|e| format!("{name}: {e}"))?;
        if text != want {
            return Err(format!("{name} differs"));
        }
    }
    Ok("2 fixtures byte-identical".into())
}

fn bound_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 0..100 {
        let n = rng.random_range(2..=9);
        let m = rng.random_range(1..=3.min(n));
        let d = rng.random_range(1..=3);
        let l = rng.random_range(1..=2u32);
        let metric = if l == 2 { Metric::l2_euclidean() } else { Metric::l1(common::random_norm(&mut rng)) };
        let p = DiscreteDistribution::uniform(common::random_points(&mut rng, n, d)).unwrap();
        let c = continuous_exact(&p, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value;
        let dv = discrete_exact(&p, m, &metric, DEFAULT_BUDGET).unwrap().value;
        let kappa = limit_bounds(n, m, l).unwrap().kappa_upper;
        if c > dv + 1e-7 || dv > kappa * c + 1e-7 {
            return Err(format!("instance {k} (n={n} m={m} l={l}): continuous {c}, discrete {dv}, kappa {kappa}"));
        }
    }
    Ok("100 instances".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("worst-case tightness, order 2", worst_case_type2),
        ("worst-case equality, order 1", worst_case_type1),
        ("kappa tightness, order 2", kappa2_tight),
        ("kappa tightness, order 1", kappa1_tight),
        ("greedy failure instance", greedy_failure),
        ("k-means failure instance", kmeans_failure),
        ("local-search guarantee", local_search_guarantee),
        ("transport oracle", transport_oracle),
        ("dimension trend", dimension_trend),
        ("quantization ordering", quantization_ordering),
        ("LP golden files", golden_lp),
        ("bound sandwich", bound_sandwich),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("criterion {:>2} {tag}: {name} ({detail}) [{secs:.2}s]", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
