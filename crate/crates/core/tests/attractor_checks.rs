use rdsjump_core::attractor::{
    attractor_fiber, fiber_distance_stats, forward_attraction_check, pullback_point, pullback_stability_check,
    sample_measure_stats, PullbackConfig,
};
use rdsjump_core::stationary::{build_one_point_chain, cyclic_classes, conditioned_stationary, stationary_distribution};
use rdsjump_core::{Builtin, DistributionVector, NoiseFiber, ReactionNetwork};

fn bd() -> ReactionNetwork {
    ReactionNetwork::builtin(Builtin::BirthDeath, &[10.0, 1.0]).unwrap()
}

#[test]
fn stabilized_pullbacks_do_not_move_up_to_twice_the_depth() {
    let net = bd();
    let cfg = PullbackConfig::new(10_000, 10).resolved(&net).unwrap();
    for seed in 0..100u64 {
        let f = NoiseFiber::new(seed);
        for x in [0u64, 1] {
            let rep = pullback_point(&net, &f, x, &cfg).unwrap();
            assert!(rep.converged);
            assert_eq!(pullback_stability_check(&net, &f, x, &rep, 2 * cfg.n_max).unwrap(), None, "seed {seed} x {x}");
        }
    }
}

#[test]
fn forward_attraction_of_an_initial_block() {
    let net = bd();
    let cfg = PullbackConfig::default().resolved(&net).unwrap();
    let block: Vec<u64> = (0..=10).collect();
    let mut finite = 0;
    let seeds = 1_000u64;
    for seed in 0..seeds {
        // full 100-step persistence on a subset keeps the run short
        let window = if seed % 10 == 0 { 100 } else { 5 };
        let res = forward_attraction_check(&net, &NoiseFiber::new(seed), &block, 100_000, window, &cfg).unwrap();
        if res.first_contained.is_some() {
            assert!(res.persisted, "seed {seed}");
            finite += 1;
        }
    }
    assert!(finite as f64 >= 0.999 * seeds as f64, "{finite}/{seeds}");
}

#[test]
fn even_half_of_the_sample_measure() {
    let net = bd();
    let chain = build_one_point_chain(&net, 200).unwrap();
    let rho = stationary_distribution(&chain, 1e-13).unwrap();
    let even = conditioned_stationary(&rho, &cyclic_classes(&chain).unwrap().classes[0]).unwrap();
    let seeds: Vec<u64> = (0..10_000).collect();
    let rep = sample_measure_stats(&net, &seeds, &PullbackConfig::default(), None).unwrap();
    let (states, weights): (Vec<Vec<u64>>, Vec<f64>) = rep
        .measure
        .states
        .iter()
        .zip(&rep.measure.weights)
        .filter(|(s, _)| s[0] % 2 == 0)
        .map(|(s, w)| (s.clone(), 2.0 * w))
        .unzip();
    let doubled = DistributionVector::new(states, weights).unwrap();
    assert!((doubled.total() - 1.0).abs() < 1e-12);
    let tv = doubled.total_variation(&even);
    assert!(tv <= 0.03, "TV {tv}");
}

#[test]
fn schloegl_fibers_are_reported() {
    let net = ReactionNetwork::builtin(Builtin::Schloegl, &[6.0, 3.5, 0.4, 0.0105]).unwrap();
    let cfg = PullbackConfig::new(2_000, 10);
    let seeds: Vec<u64> = (0..20).collect();
    let stats = fiber_distance_stats(&net, &seeds, &cfg).unwrap();
    assert_eq!(stats.converged + stats.nonconverged, 20);
    assert!(stats.histogram.keys().all(|d| d % 2 == 1));
    let af = attractor_fiber(&net, &NoiseFiber::new(0), &cfg).unwrap();
    assert_eq!(af.a0 % 2, 0);
}
