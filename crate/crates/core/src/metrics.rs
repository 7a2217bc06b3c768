//! Analytic throughput and delay of a policy from its stationary distribution.

use crate::chain::{build_transition_matrix, ChainError};
use crate::params::SystemParams;
use crate::policy::Policy;
use crate::state::StateSpace;
use crate::stationary::{stationary_distribution, StationaryDistribution, StationaryError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticMetrics {
    /// Packets per slot carried for A and B over the MAC channel.
    pub mu1: f64,
    /// Fraction of empty MAC slots, i.e. the secondary pair's throughput.
    pub mu2: f64,
    pub mu_tot: f64,
    /// Per-queue service rates `sum pi (g1 + g3)` and `sum pi (g2 + g3)`.
    pub served_a: f64,
    pub served_b: f64,
    /// `E[i + j]` at the end of a slot.
    pub mean_queue: f64,
    /// Little's-law delay in slots; `None` when no traffic arrives.
    pub mean_delay: Option<f64>,
}

pub fn analytic_metrics(
    pi: &StationaryDistribution,
    policy: &Policy,
    params: &SystemParams,
) -> AnalyticMetrics {
    let space = StateSpace::from(params);
    assert_eq!(
        pi.len(),
        space.len(),
        "distribution does not match the grid"
    );
    assert_eq!(policy.space(), space, "policy does not match the grid");
    let mut m = AnalyticMetrics {
        mu1: 0.0,
        mu2: 0.0,
        mu_tot: 0.0,
        served_a: 0.0,
        served_b: 0.0,
        mean_queue: 0.0,
        mean_delay: None,
    };
    for (k, s) in space.states().enumerate() {
        let p = pi.get(k);
        if p == 0.0 {
            continue;
        }
        let [g1, g2, g3, g4] = policy.at_index(k);
        m.mu1 += p * (g1 + g2 + 2.0 * g3);
        m.mu2 += p * g4;
        m.served_a += p * (g1 + g3);
        m.served_b += p * (g2 + g3);
        m.mean_queue += p * (s.i + s.j) as f64;
    }
    m.mu_tot = m.mu1 + m.mu2;
    let load = params.total_arrival_rate();
    if load > 0.0 {
        m.mean_delay = Some(m.mean_queue / load);
    }
    m
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

/// Build the chain for `policy`, solve it, and compute its metrics.
pub fn evaluate_policy(
    params: &SystemParams,
    policy: &Policy,
) -> Result<(StationaryDistribution, AnalyticMetrics), EvaluateError> {
    let matrix = build_transition_matrix(params, policy)?;
    let pi = stationary_distribution(&matrix)?;
    let metrics = analytic_metrics(&pi, policy, params);
    Ok((pi, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::allowed_actions;
    use crate::state::QueueState;

    #[test]
    fn idle_system_has_all_slots_empty() {
        let p = SystemParams::new(0.0, 0.0, 2, 2, 1.0).unwrap();
        let (_, m) = evaluate_policy(&p, &Policy::greedy(StateSpace::new(2, 2))).unwrap();
        assert_eq!(m.mu1, 0.0);
        assert_eq!(m.mu2, 1.0);
        assert_eq!(m.mean_delay, None);
    }

    #[test]
    fn throughput_matches_offered_load() {
        let p = SystemParams::new(0.3, 0.45, 4, 3, 3.0).unwrap();
        let space = StateSpace::from(&p);
        let policy = Policy::from_fn(space, |s| {
            let allowed = allowed_actions(&space, s);
            let mut g = [0.0; 4];
            for a in allowed {
                g[a.index()] = 1.0 / allowed.len() as f64;
            }
            g
        });
        let (pi, m) = evaluate_policy(&p, &policy).unwrap();
        assert!((m.mu1 - 0.75).abs() < 1e-10);
        assert!((m.served_a - 0.3).abs() < 1e-10);
        assert!((m.served_b - 0.45).abs() < 1e-10);
        assert!((m.mu_tot - m.mu1 - m.mu2).abs() < 1e-15);
        assert!((m.mean_delay.unwrap() - m.mean_queue / 0.75).abs() < 1e-15);
        assert!((pi.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_delay_is_one_slot() {
        let p = SystemParams::new(0.5, 0.3, 3, 3, 3.0).unwrap();
        let (pi, m) = evaluate_policy(&p, &Policy::greedy(StateSpace::new(3, 3))).unwrap();
        assert!((m.mean_delay.unwrap() - 1.0).abs() < 1e-12);
        let origin = StateSpace::new(3, 3).index(QueueState::new(0, 0));
        assert!((m.mu2 - pi.get(origin)).abs() < 1e-15);
        assert!((m.mu2 - 0.35).abs() < 1e-12);
    }
}
