//! Simulator against the analytic chain.

use onc_core::{
    evaluate_policy, optimal_policy, simulate, Policy, Scheme, SimConfig, StateSpace,
    SystemParams,
};

#[test]
fn state_frequencies_match_pi_on_smallest_grid() {
    let p = SystemParams::new(0.5, 0.5, 1, 1, 3.0).unwrap();
    let policy = Policy::greedy(StateSpace::new(1, 1));
    let (pi, m) = evaluate_policy(&p, &policy).unwrap();
    let r = simulate(
        &SimConfig::new(p, Scheme::OptimalPolicy, 1_000_000, 3),
        Some(&policy),
        None,
    )
    .unwrap();
    for (f, q) in r.state_freq.iter().zip(&pi.pi) {
        assert!((f - q).abs() < 0.005, "{f} vs {q}");
    }
    assert!((r.mu2_hat - m.mu2).abs() < 0.005);
    assert!((r.mean_delay_hat.unwrap() - m.mean_delay.unwrap()).abs() < 0.005);
}

#[test]
fn optimal_policy_at_reference_point() {
    let p = SystemParams::default();
    let (_, policy, pi) = optimal_policy(&p).unwrap();
    let r = simulate(
        &SimConfig::new(p, Scheme::OptimalPolicy, 1_000_000, 11),
        Some(&policy),
        None,
    )
    .unwrap();
    assert!((r.mu1_hat - 1.0).abs() < 0.01, "{}", r.mu1_hat);
    assert!(r.mean_delay_hat.unwrap() <= 3.0 + 3.0 * r.mean_delay_se);
    assert!(r.tv_distance(&pi.pi) < 0.01);
    // lossless: every packet that left a source entered it
    let backlog: u64 = r.final_queue.iter().sum();
    assert_eq!(r.packets_in.iter().sum::<u64>(), r.packets_out.iter().sum::<u64>() + backlog);
}

#[test]
fn random_ma_symmetric_idle_fraction() {
    let p = SystemParams::default();
    let r = simulate(&SimConfig::new(p, Scheme::RandomMa, 1_000_000, 5), None, None).unwrap();
    assert!((r.mu2_hat - 0.25).abs() < 0.005, "{}", r.mu2_hat);
}

#[test]
fn combined_ma_wastes_fewer_slots_than_random_ma() {
    let p = SystemParams::new(0.5, 0.5, 15, 15, 3.0).unwrap();
    let combined = simulate(&SimConfig::new(p, Scheme::CombinedMa, 200_000, 2), None, None).unwrap();
    let random = simulate(&SimConfig::new(p, Scheme::RandomMa, 200_000, 2), None, None).unwrap();
    assert!(combined.mu2_hat > random.mu2_hat);
    assert!((combined.mu2_hat - 0.5).abs() < 0.02, "{}", combined.mu2_hat);
}
