//! Channel-gain thresholds for a policy and the resulting average transmit
//! power under Rayleigh fading.
//!
//! A node transmits only when its gain is at least a per-state threshold,
//! chosen so that the transmit probability equals the policy's marginal
//! (`g1 + g3` for A, `g2 + g3` for B). At gain `h` a single transmission
//! needs power `alpha / h` and a simultaneous one `beta / h` (unit noise).
//! With Rayleigh density `(h / s^2) exp(-h^2 / 2 s^2)` the expected cost of
//! transmitting above threshold `t` is
//! `(1/s) sqrt(pi/2) erfc(t / (s sqrt 2))` per unit SNR.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::policy::Policy;
use crate::state::StateSpace;
use crate::stationary::StationaryDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrTargets {
    /// Required SNR for a transmission alone.
    pub alpha: f64,
    /// Required SNR for a simultaneous, lattice-coded transmission.
    pub beta: f64,
    pub rate_r: f64,
}

pub fn snr_targets(rate_r: f64) -> SnrTargets {
    let two_r = 2f64.powf(2.0 * rate_r);
    SnrTargets {
        alpha: two_r - 1.0,
        beta: two_r - 0.5,
        rate_r,
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `P(h >= t)` for a Rayleigh gain of scale `s`.
pub fn rayleigh_tail(t: f64, s: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        (-(t * t) / (2.0 * s * s)).exp()
    }
}

/// Threshold whose Rayleigh tail probability is `p`; `+inf` for `p = 0`.
pub fn threshold_for(p: f64, s: f64) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else if p >= 1.0 {
        0.0
    } else {
        s * (-2.0 * p.ln()).sqrt()
    }
}

/// `E[(1/h) 1{h >= t}]` under a Rayleigh gain of scale `s`.
pub fn inverse_gain_tail(t: f64, s: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        (PI / 2.0).sqrt() * erfc(t / s * FRAC_1_SQRT_2) / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateThreshold {
    /// Transmit probability of A, `g1 + g3`.
    pub p: f64,
    /// Transmit probability of B, `g2 + g3`.
    pub q: f64,
    pub h_th_a: f64,
    pub h_th_b: f64,
    /// `|g3 - p q|`: zero iff independent thresholding reproduces the policy.
    pub factorization_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub space: StateSpace,
    pub scale_a: f64,
    pub scale_b: f64,
    pub entries: Vec<StateThreshold>,
    /// States with positive stationary mass.
    pub reachable: Vec<bool>,
}

impl ThresholdTable {
    pub fn get(&self, k: usize) -> &StateThreshold {
        &self.entries[k]
    }

    /// Largest factorization residual over reachable states.
    pub fn max_residual(&self) -> f64 {
        self.entries
            .iter()
            .zip(&self.reachable)
            .filter(|(_, &r)| r)
            .map(|(e, _)| e.factorization_residual)
            .fold(0.0, f64::max)
    }

    /// Thresholds for Rayleigh scales other than one; probabilities are kept.
    pub fn rescaled(&self, scale_a: f64, scale_b: f64) -> Self {
        let mut out = self.clone();
        out.scale_a = scale_a;
        out.scale_b = scale_b;
        for e in &mut out.entries {
            e.h_th_a = threshold_for(e.p, scale_a);
            e.h_th_b = threshold_for(e.q, scale_b);
        }
        out
    }
}

/// Unit-scale thresholds from the policy's per-node transmit marginals.
pub fn thresholds_from_policy(policy: &Policy, pi: &StationaryDistribution) -> ThresholdTable {
    let space = policy.space();
    assert_eq!(pi.len(), space.len(), "distribution does not match policy");
    let entries = policy
        .table()
        .iter()
        .map(|&[g1, g2, g3, _]| {
            let p = (g1 + g3).clamp(0.0, 1.0);
            let q = (g2 + g3).clamp(0.0, 1.0);
            StateThreshold {
                p,
                q,
                h_th_a: threshold_for(p, 1.0),
                h_th_b: threshold_for(q, 1.0),
                factorization_residual: (g3 - p * q).abs(),
            }
        })
        .collect();
    ThresholdTable {
        space,
        scale_a: 1.0,
        scale_b: 1.0,
        entries,
        reachable: pi.pi.iter().map(|&x| x > 0.0).collect(),
    }
}

/// Expected power of A and B in one state, given the two thresholds.
pub fn state_power_pair(
    h_th_a: f64,
    h_th_b: f64,
    scale_a: f64,
    scale_b: f64,
    targets: &SnrTargets,
) -> (f64, f64) {
    let tail_a = rayleigh_tail(h_th_a, scale_a);
    let tail_b = rayleigh_tail(h_th_b, scale_b);
    let inv_a = inverse_gain_tail(h_th_a, scale_a);
    let inv_b = inverse_gain_tail(h_th_b, scale_b);
    // alone when the other is below threshold, lattice-coded when both are above
    let pa = targets.alpha * inv_a * (1.0 - tail_b) + targets.beta * inv_a * tail_b;
    let pb = targets.alpha * inv_b * (1.0 - tail_a) + targets.beta * inv_b * tail_a;
    (pa, pb)
}

/// Per-state expected powers `(P_a, P_b)`.
pub fn state_power(thresholds: &ThresholdTable, targets: &SnrTargets) -> Vec<(f64, f64)> {
    thresholds
        .entries
        .iter()
        .map(|e| {
            state_power_pair(
                e.h_th_a,
                e.h_th_b,
                thresholds.scale_a,
                thresholds.scale_b,
                targets,
            )
        })
        .collect()
}

/// Stationary-weighted average power per node.
pub fn average_power(pi: &StationaryDistribution, per_state: &[(f64, f64)]) -> (f64, f64) {
    assert_eq!(pi.len(), per_state.len());
    pi.pi
        .iter()
        .zip(per_state)
        .filter(|(&p, _)| p > 0.0)
        .fold((0.0, 0.0), |(a, b), (&p, &(pa, pb))| {
            (a + p * pa, b + p * pb)
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub thresholds: ThresholdTable,
    pub per_state: Vec<(f64, f64)>,
    pub avg_power_a: f64,
    pub avg_power_b: f64,
}

impl PowerProfile {
    pub fn total(&self) -> f64 {
        self.avg_power_a + self.avg_power_b
    }
}

/// Thresholds, per-state powers and their averages for a policy.
pub fn power_profile(
    policy: &Policy,
    pi: &StationaryDistribution,
    targets: &SnrTargets,
    scale_a: f64,
    scale_b: f64,
) -> PowerProfile {
    let mut thresholds = thresholds_from_policy(policy, pi);
    if scale_a != 1.0 || scale_b != 1.0 {
        thresholds = thresholds.rescaled(scale_a, scale_b);
    }
    let per_state = state_power(&thresholds, targets);
    let (avg_power_a, avg_power_b) = average_power(pi, &per_state);
    PowerProfile {
        thresholds,
        per_state,
        avg_power_a,
        avg_power_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::QueueState;

    // 40-digit reference values
    const ERFC_REF: [(f64, f64); 10] = [
        (0.0, 1.0),
        (0.5, 0.479_500_122_186_953_462_317_253_346_108_0),
        (1.0, 0.157_299_207_050_285_130_658_779_364_917_4),
        (1.5, 0.033_894_853_524_689_272_933_023_738_354_05),
        (2.0, 0.004_677_734_981_047_265_837_930_743_632_747),
        (3.0, 2.209_049_699_858_544_137_277_612_958_232e-5),
        (4.0, 1.541_725_790_028_001_885_215_967_348_688e-8),
        (5.0, 1.537_459_794_428_034_850_188_343_485_383e-12),
        (6.0, 2.151_973_671_249_891_311_659_335_039_919e-17),
        (8.0, 1.122_429_717_298_292_707_996_788_844_317e-29),
    ];

    #[test]
    fn snr_target_examples() {
        let t = snr_targets(1.0);
        assert_eq!((t.alpha, t.beta), (3.0, 3.5));
        let t = snr_targets(0.0);
        assert_eq!((t.alpha, t.beta), (0.0, 0.5));
        let t = snr_targets(2.0);
        assert_eq!((t.alpha, t.beta), (15.0, 15.5));
    }

    #[test]
    fn erfc_matches_reference() {
        for (x, want) in ERFC_REF {
            assert!((erfc(x) - want).abs() <= 1e-12, "erfc({x})");
            assert!((erfc(-x) - (2.0 - want)).abs() <= 1e-12);
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-15);
        }
        let mut prev = erfc(0.0);
        for k in 1..=800 {
            let v = erfc(k as f64 * 0.01);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn threshold_examples() {
        let space = StateSpace::new(1, 1);
        let policy = Policy::from_table(
            space,
            vec![
                [0.0, 0.0, 0.0, 1.0],
                [0.5, 0.5, 0.0, 0.0],
                [0.25, 0.25, 0.25, 0.25],
                [0.0, 0.0, 1.0, 0.0],
            ],
        );
        let pi = StationaryDistribution::from_probs(vec![0.25; 4]);
        let t = thresholds_from_policy(&policy, &pi);
        let uniform = t.get(space.index(QueueState::new(1, 0)));
        assert_eq!((uniform.p, uniform.q), (0.5, 0.5));
        assert!((uniform.h_th_a - 1.177_410_022_515_474_7).abs() < 1e-12);
        assert!(uniform.factorization_residual.abs() < 1e-15);
        let full = t.get(space.index(QueueState::new(1, 1)));
        assert_eq!(
            (full.h_th_a, full.h_th_b, full.factorization_residual),
            (0.0, 0.0, 0.0)
        );
        let split = t.get(space.index(QueueState::new(0, 1)));
        assert!((split.factorization_residual - 0.25).abs() < 1e-15);
        let idle = t.get(0);
        assert!(idle.h_th_a.is_infinite() && idle.h_th_b.is_infinite());
    }

    #[test]
    fn state_power_examples() {
        let t = snr_targets(1.0);
        assert_eq!(
            state_power_pair(f64::INFINITY, f64::INFINITY, 1.0, 1.0, &t),
            (0.0, 0.0)
        );
        let (pa, pb) = state_power_pair(0.0, f64::INFINITY, 1.0, 1.0, &t);
        assert!((pa - 3.759_942_411_946_500_8).abs() < 1e-12);
        assert_eq!(pb, 0.0);
        // high-precision quadrature reference at the median-style threshold
        let h = 1.177_410_022_515_474_7;
        let (pa, pb) = state_power_pair(h, h, 1.0, 1.0, &t);
        assert!((pa - 0.973_641_658_674_546_3).abs() < 1e-9);
        assert!((pa - pb).abs() < 1e-15);
    }

    #[test]
    fn inversion_recovers_probability() {
        for k in 1..=1000 {
            let p = k as f64 / 1000.0;
            let h = threshold_for(p, 1.0);
            assert!((rayleigh_tail(h, 1.0) - p).abs() < 1e-12);
            let h2 = threshold_for(p, 2.5);
            assert!((rayleigh_tail(h2, 2.5) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_rescales_threshold() {
        for p in [0.1, 0.5, 0.9] {
            assert!((threshold_for(p, 3.0) - 3.0 * threshold_for(p, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn averages_weight_by_pi() {
        let pi = StationaryDistribution::from_probs(vec![0.0, 1.0, 0.0]);
        let powers = [(5.0, 1.0), (2.0, 3.0), (7.0, 7.0)];
        assert_eq!(average_power(&pi, &powers), (2.0, 3.0));
    }
}
