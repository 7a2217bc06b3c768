//! One-slot transition structure of the two-queue Markov chain.
//!
//! Within a slot the action is chosen from the start-of-slot state, the
//! departures it implies are applied, and then the slot's arrivals are
//! appended. A packet therefore never leaves in the slot it arrived in.

use thiserror::Error;

use crate::params::{arrival_probs, ArrivalProbs, ParamError, SystemParams};
use crate::policy::{validate_policy, Action, DimensionMismatch, Policy, ValidationReport};
use crate::state::{QueueState, Region, StateSpace};

/// Row-sum tolerance for a stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("policy violates {} constraint(s), worst by {:.3e}", .0.violations.len(), .0.max_magnitude())]
    InvalidPolicy(ValidationReport),
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("row {row} is not stochastic (sum {sum}, min entry {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },
}

/// Next-state distribution when `action` is taken in state `s`.
///
/// Only defined for actions the state may take; targets never leave the
/// grid because full queues are always served.
pub fn action_transitions(
    space: &StateSpace,
    f: &ArrivalProbs,
    s: QueueState,
    action: Action,
) -> Vec<(QueueState, f64)> {
    let (i, j) = (s.i, s.j);
    let st = QueueState::new;
    let out: [(QueueState, f64); 4] = match (space.region(s), action) {
        (Region::Origin, Action::Idle) => [
            (st(0, 0), f.none),
            (st(0, 1), f.b_only),
            (st(1, 0), f.a_only),
            (st(1, 1), f.both),
        ],
        (Region::AxisA, Action::AOnly) => [
            (st(i, 0), f.a_only),
            (st(i - 1, 0), f.none),
            (st(i, 1), f.both),
            (st(i - 1, 1), f.b_only),
        ],
        (Region::AxisA, Action::Idle) => [
            (st(i, 0), f.none),
            (st(i + 1, 0), f.a_only),
            (st(i, 1), f.b_only),
            (st(i + 1, 1), f.both),
        ],
        (Region::AxisB, Action::BOnly) => [
            (st(0, j), f.b_only),
            (st(0, j - 1), f.none),
            (st(1, j), f.both),
            (st(1, j - 1), f.a_only),
        ],
        (Region::AxisB, Action::Idle) => [
            (st(0, j), f.none),
            (st(0, j + 1), f.b_only),
            (st(1, j), f.a_only),
            (st(1, j + 1), f.both),
        ],
        (Region::Interior, Action::Idle) => [
            (st(i, j), f.none),
            (st(i + 1, j + 1), f.both),
            (st(i, j + 1), f.b_only),
            (st(i + 1, j), f.a_only),
        ],
        (Region::Interior, Action::Both) => [
            (st(i, j), f.both),
            (st(i - 1, j - 1), f.none),
            (st(i, j - 1), f.a_only),
            (st(i - 1, j), f.b_only),
        ],
        (Region::Interior, Action::BOnly) => [
            (st(i, j), f.b_only),
            (st(i, j - 1), f.none),
            (st(i + 1, j), f.both),
            (st(i + 1, j - 1), f.a_only),
        ],
        (Region::Interior, Action::AOnly) => [
            (st(i, j), f.a_only),
            (st(i - 1, j), f.none),
            (st(i, j + 1), f.both),
            (st(i - 1, j + 1), f.b_only),
        ],
        (region, action) => panic!("{action:?} is not available in {region:?} state {s:?}"),
    };
    out.into_iter()
        .filter(|&(t, p)| {
            debug_assert!(p == 0.0 || space.contains(t), "{s:?} -> {t:?} leaves grid");
            p > 0.0
        })
        .collect()
}

/// Sparse row-stochastic matrix; each row lists `(column, probability)`
/// sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Build from sparse rows after checking stochasticity.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self, ChainError> {
        let n = rows.len();
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, p) in row.iter() {
                if c >= n {
                    return Err(ChainError::NotSquare {
                        row: r,
                        len: c + 1,
                        expected: n,
                    });
                }
                match merged.last_mut() {
                    Some((lc, lp)) if *lc == c => *lp += p,
                    _ => merged.push((c, p)),
                }
            }
            *row = merged;
        }
        let m = Self { rows };
        m.check_stochastic()?;
        Ok(m)
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self, ChainError> {
        let n = dense.len();
        let mut rows = Vec::with_capacity(n);
        for (r, row) in dense.iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::NotSquare {
                    row: r,
                    len: row.len(),
                    expected: n,
                });
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|&(_, &p)| p != 0.0)
                    .map(|(c, &p)| (c, p))
                    .collect(),
            );
        }
        Self::from_rows(rows)
    }

    pub fn check_stochastic(&self) -> Result<(), ChainError> {
        for (r, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            let min = row.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
            if !(sum - 1.0).abs().le(&STOCHASTIC_TOL) || min < 0.0 || !min.is_finite() {
                return Err(ChainError::NotStochastic { row: r, sum, min });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(k, _)| k)
            .map(|k| self.rows[r][k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &(c, p) in row {
                    d[c] = p;
                }
                d
            })
            .collect()
    }

    /// Row vector times matrix, `v P`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (r, row) in self.rows.iter().enumerate() {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            for &(c, p) in row {
                out[c] += vr * p;
            }
        }
        out
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| (row.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|index(s) - index(t)|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// Transition matrix of the queue-pair chain under `policy`.
pub fn build_transition_matrix(
    params: &SystemParams,
    policy: &Policy,
) -> Result<TransitionMatrix, ChainError> {
    params.validate()?;
    let space = StateSpace::from(params);
    let report = validate_policy(policy, &space)?;
    if !report.passed() {
        return Err(ChainError::InvalidPolicy(report));
    }
    let f = arrival_probs(params);
    let rows = space
        .states()
        .map(|s| {
            let mut row = Vec::with_capacity(9);
            for (action, g) in policy.normalized_allowed(s) {
                if g == 0.0 {
                    continue;
                }
                for (t, p) in action_transitions(&space, &f, s, action) {
                    row.push((space.index(t), g * p));
                }
            }
            row
        })
        .collect();
    TransitionMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::allowed_actions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(la: f64, lb: f64, n_a: usize, n_b: usize) -> SystemParams {
        SystemParams::new(la, lb, n_a, n_b, 3.0).unwrap()
    }

    fn random_policy(space: StateSpace, rng: &mut impl Rng) -> Policy {
        Policy::from_fn(space, |s| {
            let allowed = allowed_actions(&space, s);
            let w: Vec<f64> = allowed.iter().map(|_| rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let mut g = [0.0; 4];
            for (a, wi) in allowed.iter().zip(w) {
                g[a.index()] = wi / total;
            }
            g
        })
    }

    /// Enumerate (action, arrival event) pairs directly: serve, then append.
    fn event_enumeration(p: &SystemParams, policy: &Policy) -> Vec<Vec<f64>> {
        let space = StateSpace::from(p);
        let (la, lb) = (p.lambda_a, p.lambda_b);
        let mut dense = vec![vec![0.0; space.len()]; space.len()];
        for s in space.states() {
            let g = policy.get(s);
            for (k, &gk) in g.iter().enumerate() {
                if gk == 0.0 {
                    continue;
                }
                let (da, db) = [(1, 0), (0, 1), (1, 1), (0, 0)][k];
                for (arr_a, pa) in [(0, 1.0 - la), (1, la)] {
                    for (arr_b, pb) in [(0, 1.0 - lb), (1, lb)] {
                        let t = QueueState::new(s.i - da + arr_a, s.j - db + arr_b);
                        dense[space.index(s)][space.index(t)] += gk * pa * pb;
                    }
                }
            }
        }
        dense
    }

    #[test]
    fn origin_transitions() {
        let p = params(0.5, 0.3, 3, 3);
        let m = build_transition_matrix(&p, &Policy::greedy(StateSpace::new(3, 3))).unwrap();
        let space = StateSpace::new(3, 3);
        let o = space.index(QueueState::new(0, 0));
        let f = arrival_probs(&p);
        assert_eq!(m.get(o, o), f.none);
        assert_eq!(m.get(o, space.index(QueueState::new(1, 1))), f.both);
        assert_eq!(m.get(o, space.index(QueueState::new(1, 0))), f.a_only);
        assert_eq!(m.get(o, space.index(QueueState::new(0, 1))), f.b_only);
    }

    #[test]
    fn no_arrivals_drains_diagonally() {
        let p = params(0.0, 0.0, 4, 4);
        let space = StateSpace::new(4, 4);
        let m = build_transition_matrix(&p, &Policy::greedy(space)).unwrap();
        for s in space.states().filter(|s| s.i >= 1 && s.j >= 1) {
            let t = QueueState::new(s.i - 1, s.j - 1);
            assert_eq!(m.get(space.index(s), space.index(t)), 1.0);
        }
    }

    #[test]
    fn matches_event_enumeration_oracle() {
        let p = params(0.5, 0.3, 2, 2);
        let space = StateSpace::new(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let policy = random_policy(space, &mut rng);
            let m = build_transition_matrix(&p, &policy).unwrap();
            let oracle = event_enumeration(&p, &policy);
            for (r, row) in m.to_dense().iter().enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (c, &v) in row.iter().enumerate() {
                    assert!(
                        (v - oracle[r][c]).abs() < 1e-15,
                        "({r},{c}) {v} vs {}",
                        oracle[r][c]
                    );
                }
            }
        }
    }

    #[test]
    fn asymmetric_grids_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n_a, n_b) in [(1, 3), (3, 1), (2, 4), (5, 2)] {
            let p = params(0.7, 0.2, n_a, n_b);
            let policy = random_policy(StateSpace::new(n_a, n_b), &mut rng);
            let m = build_transition_matrix(&p, &policy).unwrap();
            let oracle = event_enumeration(&p, &policy);
            for (row, orow) in m.to_dense().iter().zip(&oracle) {
                for (v, o) in row.iter().zip(orow) {
                    assert!((v - o).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn vertical_axis_mirrors_horizontal_axis() {
        let p = params(0.6, 0.25, 3, 3);
        let space = StateSpace::new(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let policy = random_policy(space, &mut rng);
        let m = build_transition_matrix(&p, &policy).unwrap();
        let mt = build_transition_matrix(&p.swapped(), &policy.transposed()).unwrap();
        for s in space.states() {
            for t in space.states() {
                let a = m.get(space.index(s), space.index(t));
                let b = mt.get(space.index(s.transposed()), space.index(t.transposed()));
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_invalid_policy_and_bad_matrices() {
        let p = params(0.5, 0.5, 2, 2);
        let mut policy = Policy::greedy(StateSpace::new(2, 2));
        policy.set(QueueState::new(0, 1), [0.0, 0.5, 0.5, 0.0]);
        assert!(matches!(
            build_transition_matrix(&p, &policy),
            Err(ChainError::InvalidPolicy(_))
        ));
        assert!(TransitionMatrix::from_dense(&[vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::from_dense(&[vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn locality_and_bandwidth() {
        let p = params(0.4, 0.9, 6, 5);
        let space = StateSpace::new(6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = build_transition_matrix(&p, &random_policy(space, &mut rng)).unwrap();
        assert!(m.bandwidth() <= space.bandwidth());
        for r in 0..m.len() {
            let s = space.state(r);
            for &(c, _) in m.row(r) {
                let t = space.state(c);
                assert!(s.i.abs_diff(t.i) <= 1 && s.j.abs_diff(t.j) <= 1);
            }
        }
    }
}
