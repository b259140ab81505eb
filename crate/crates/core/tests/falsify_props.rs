use neurosens::falsify::{
    distance_profile, falsify_forward_density, falsify_inverse, falsify_inverse_with_targets, falsify_random_baseline,
    inverse_density_map, verify_counterexample, DensityMapConfig, DensitySearchConfig, InverseSearchConfig, Outcome,
    SafetySpec,
};
use neurosens::linalg::norm;
use neurosens::sim::SensOracle;
use neurosens::{builtin_system, simulate, BoxRegion};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn counterexamples_and_profiles_re_simulate(seed in any::<u64>(), cx in -2.5f64..2.5, cy in -2.5f64..2.5, r in 0.05f64..0.6) {
        let sys = builtin_system("Vanderpol").unwrap();
        let theta = sys.meta().init_set.clone();
        let spec = SafetySpec::new(BoxRegion::around(&[cx, cy], &[r, r]).unwrap(), 200);
        let report = falsify_random_baseline(&sys, &spec, &theta, 0.01, 30, seed).unwrap();
        prop_assert_eq!(report.samples_used, report.profile.len());
        if let Some(c) = &report.counterexample {
            prop_assert_eq!(report.outcome, Outcome::Falsified);
            prop_assert!(verify_counterexample(&sys, &spec, c, 0.01).unwrap());
        }
        for e in &report.profile {
            let t = simulate(&sys, &e.x, 200, 0.01).unwrap();
            let d = t.states().iter().map(|s| spec.unsafe_set.distance(s)).fold(f64::INFINITY, f64::min);
            prop_assert!((d - e.distance).abs() <= 1e-12);
        }
    }
}

#[test]
fn inverse_search_never_falsifies_an_unreachable_box() {
    let sys = builtin_system("linear-stable").unwrap();
    let theta = sys.meta().init_set.clone();
    let inv = SensOracle::from_system(&sys).unwrap().model(true);
    let u = BoxRegion::from_bounds(&[(2.0, 3.0), (-0.5, 0.5)]).unwrap();
    let spec = SafetySpec::new(u.clone(), 300);
    // fine grid over Θ: nothing enters
    let grid: Vec<Vec<f64>> = (0..=20)
        .flat_map(|i| (0..=20).map(move |j| vec![-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64]))
        .collect();
    assert!(distance_profile(&sys, &spec, &grid, 0.01).unwrap().iter().all(|e| e.distance > 0.0));
    let cfg = InverseSearchConfig { targets: 5, iterations: 3, stride: 50, ..Default::default() };
    let report = falsify_inverse(&sys, &inv, &spec, &theta, 0.01, &cfg).unwrap();
    assert_eq!(report.outcome, Outcome::Exhausted);
    // closed-form tube: |ξ(x0, t)| = e^{−t/2}|x0| ≤ |x0|, so every distance
    // lies between dist(U, 0) − |x0| and dist(U, x0)
    let d0 = u.distance(&[0.0, 0.0]);
    for e in &report.profile {
        assert!(e.distance >= d0 - norm(&e.x) - 1e-9);
        assert!(e.distance <= u.distance(&e.x) + 1e-12);
    }
}

#[test]
fn inverse_search_finds_a_seeded_reachable_box() {
    let sys = builtin_system("linear-rotation").unwrap();
    let theta = sys.meta().init_set.clone();
    let inv = SensOracle::from_system(&sys).unwrap().model(true);
    let z = simulate(&sys, &[0.5, 0.5], 100, 0.01).unwrap().last().to_vec();
    let spec = SafetySpec::new(BoxRegion::around(&z, &[0.01, 0.01]).unwrap(), 200);
    let cfg = InverseSearchConfig { stride: 100, ..Default::default() };
    let report = falsify_inverse_with_targets(&sys, &inv, &spec, &theta, 0.01, &cfg, &[z]).unwrap();
    assert_eq!(report.outcome, Outcome::Falsified);
    assert!(report.samples_used >= 1);
    assert!(verify_counterexample(&sys, &spec, report.counterexample.as_ref().unwrap(), 0.01).unwrap());
}

#[test]
fn box_outside_the_domain_is_a_config_error() {
    let sys = builtin_system("linear-rotation").unwrap();
    let inv = SensOracle::from_system(&sys).unwrap().model(true);
    let far = BoxRegion::from_bounds(&[(50.0, 60.0), (50.0, 60.0)]).unwrap();
    let r = falsify_inverse(&sys, &inv, &SafetySpec::new(far, 10), &sys.meta().init_set, 0.01, &Default::default());
    assert!(matches!(r, Err(neurosens::Error::Config(_))));
}

#[test]
fn density_search_on_the_anchor_itself() {
    let sys = builtin_system("Vanderpol").unwrap();
    let theta = sys.meta().init_set.clone();
    let fwd = SensOracle::from_system(&builtin_system("linear-stable").unwrap()).unwrap().model(false);
    let cfg = DensitySearchConfig { seed: 2, ..Default::default() };
    // the first anchor start is the first draw of the search's own generator
    let first = {
        use rand::SeedableRng;
        theta.sample(&mut rand_chacha::ChaCha8Rng::seed_from_u64(2))
    };
    let mid = simulate(&sys, &first, 100, 0.01).unwrap().state(50).to_vec();
    let spec = SafetySpec::new(BoxRegion::around(&mid, &[0.05, 0.05]).unwrap(), 100);
    let report = falsify_forward_density(&sys, &fwd, &spec, &theta, 0.01, &cfg).unwrap();
    assert_eq!(report.outcome, Outcome::Falsified);
    assert_eq!(report.samples_used, 1);
    assert!(report.iterations.is_empty());
}

#[test]
fn exact_predictions_pick_the_truly_closest_start() {
    let sys = builtin_system("linear-rotation").unwrap();
    let theta = sys.meta().init_set.clone();
    let fwd = SensOracle::from_system(&sys).unwrap().model(false);
    let spec = SafetySpec::new(BoxRegion::from_bounds(&[(1.6, 2.0), (-0.2, 0.2)]).unwrap(), 628);
    let cfg = DensitySearchConfig { iterations: 3, cluster_size: 40, radius: 0.1, seed: 5, ..Default::default() };
    let report = falsify_forward_density(&sys, &fwd, &spec, &theta, 0.01, &cfg).unwrap();
    assert!(!report.iterations.is_empty());
    for it in &report.iterations {
        let (a, b) = it.window;
        let truth: Vec<f64> = it
            .predicted
            .iter()
            .map(|p| {
                let t = simulate(&sys, &p.x, b, 0.01).unwrap();
                (a..=b).map(|s| spec.unsafe_set.distance(t.state(s))).fold(f64::INFINITY, f64::min)
            })
            .collect();
        let best = (0..truth.len()).min_by(|i, j| truth[*i].total_cmp(&truth[*j])).unwrap();
        assert!((truth[best] - truth[it.chosen]).abs() < 1e-6);
        for (p, t) in it.predicted.iter().zip(&truth) {
            assert!((p.distance - t).abs() < 1e-6);
        }
    }
}

#[test]
fn density_maps_re_simulate_and_differ_between_boxes() {
    let sys = builtin_system("Brusselator").unwrap();
    let theta = sys.meta().init_set.clone();
    let inv = SensOracle::from_system(&builtin_system("linear-stable").unwrap()).unwrap().model(true);
    let u1 = SafetySpec::new(BoxRegion::from_bounds(&[(2.0, 2.5), (2.0, 2.5)]).unwrap(), 300);
    let u2 = SafetySpec::new(BoxRegion::from_bounds(&[(0.2, 0.5), (3.0, 3.5)]).unwrap(), 300);
    let cfg = DensityMapConfig { targets: 4, iterations: 2, ..Default::default() };
    let map = inverse_density_map(&sys, &inv, &u1, &theta, 0.01, &cfg).unwrap();
    assert_eq!(map.len(), 4 * 3);
    for e in &map {
        let t = simulate(&sys, &e.x, 300, 0.01).unwrap();
        let d = t.states().iter().map(|s| u1.unsafe_set.distance(s)).fold(f64::INFINITY, f64::min);
        assert!((d - e.distance).abs() <= 1e-12);
    }
    let grid: Vec<Vec<f64>> = (0..10).flat_map(|i| (0..10).map(move |j| vec![0.5 + 0.1 * i as f64, 0.1 * j as f64])).collect();
    let p1 = distance_profile(&sys, &u1, &grid, 0.01).unwrap();
    let p2 = distance_profile(&sys, &u2, &grid, 0.01).unwrap();
    let l1: f64 = p1.iter().zip(&p2).map(|(a, b)| (a.distance - b.distance).abs()).sum();
    assert!(l1 > 0.0);
}

#[test]
fn random_baseline_sample_count_is_geometric() {
    let sys = builtin_system("linear-rotation").unwrap();
    let theta = sys.meta().init_set.clone();
    // 10% of Θ = [−1, 1]², checked at step 0 only
    let spec = SafetySpec::new(BoxRegion::from_bounds(&[(-1.0, -0.6), (-1.0, 0.0)]).unwrap(), 1).with_window(0, 0);
    let runs = 400;
    let total: usize = (0..runs)
        .map(|s| falsify_random_baseline(&sys, &spec, &theta, 0.01, 10_000, s).unwrap().samples_used)
        .sum();
    let mean = total as f64 / runs as f64;
    assert!((8.5..=11.5).contains(&mean), "mean samples {mean}");
}
