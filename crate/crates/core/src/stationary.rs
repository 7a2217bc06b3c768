//! Stationary distribution of a finite chain started from state 0.
//!
//! States unreachable from state 0 get zero mass. When the reachable part
//! contains transient states they also get zero mass, and if several closed
//! classes are reachable the result is their mixture weighted by the
//! absorption probabilities from state 0, i.e. the long-run occupation
//! fractions of a chain that starts empty.
//!
//! Each closed class is solved by Grassmann-Taksar-Heyman elimination on a
//! band matrix. GTH is subtraction free and, because eliminating one state
//! only couples its band neighbours, never widens the band.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::chain::{ChainError, TransitionMatrix};

/// Classes up to this size are solved directly; larger ones iterate.
pub const DIRECT_LIMIT: usize = 10_000;
/// Residual accepted from power iteration.
pub const ITERATIVE_TOL: f64 = 1e-10;
/// Residual `max |pi P - pi|` a returned distribution is guaranteed to meet.
pub const RESIDUAL_TOL: f64 = 1e-9;
const DEFAULT_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("elimination broke down at state {state}: class is not irreducible")]
    Breakdown { state: usize },
    #[error("{transient} transient states with several closed classes is too many for a dense absorption solve")]
    TooManyTransient { transient: usize },
    #[error("absorption system is singular")]
    SingularAbsorption,
}

/// Long-run state probabilities, indexed like the transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// States visited with positive long-run frequency.
    pub recurrent: Vec<bool>,
    /// `max |pi P - pi|` of the returned vector.
    pub residual: f64,
}

impl StationaryDistribution {
    /// Wrap an externally computed vector (e.g. recovered from an LP).
    pub fn from_probs(pi: Vec<f64>) -> Self {
        let recurrent = pi.iter().map(|&p| p > 0.0).collect();
        Self {
            pi,
            recurrent,
            residual: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.pi[k]
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }
}

/// `max_k |(pi P)_k - pi_k|`
pub fn balance_residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    matrix
        .left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn stationary_distribution(
    matrix: &TransitionMatrix,
) -> Result<StationaryDistribution, StationaryError> {
    stationary_distribution_with(matrix, DEFAULT_MAX_ITERATIONS)
}

/// As [`stationary_distribution`] with an explicit power-iteration budget.
pub fn stationary_distribution_with(
    matrix: &TransitionMatrix,
    max_iterations: usize,
) -> Result<StationaryDistribution, StationaryError> {
    matrix.check_stochastic()?;
    let n = matrix.len();
    if n == 0 {
        return Ok(StationaryDistribution {
            pi: vec![],
            recurrent: vec![],
            residual: 0.0,
        });
    }

    let reachable = reachable_from(matrix, 0);
    let classes = closed_classes(matrix, &reachable);

    let mut pi = vec![0.0; n];
    let weights = if classes.len() == 1 {
        vec![1.0]
    } else {
        absorption_weights(matrix, &reachable, &classes)?
    };
    for (class, w) in classes.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let local = if class.len() <= DIRECT_LIMIT {
            solve_class_gth(matrix, class)?
        } else {
            solve_class_power(matrix, class, max_iterations)?
        };
        for (&s, p) in class.iter().zip(local) {
            pi[s] = w * p;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);

    let residual = balance_residual(matrix, &pi);
    if residual > RESIDUAL_TOL {
        return Err(StationaryError::NotConverged {
            iterations: 0,
            residual,
        });
    }
    let recurrent = pi.iter().map(|&p| p > 0.0).collect();
    Ok(StationaryDistribution {
        pi,
        recurrent,
        residual,
    })
}

fn reachable_from(matrix: &TransitionMatrix, start: usize) -> Vec<bool> {
    let mut seen = vec![false; matrix.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(r) = stack.pop() {
        for &(c, p) in matrix.row(r) {
            if p > 0.0 && !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Closed communicating classes within the reachable set, each sorted by
/// state index; the list is ordered by smallest member.
fn closed_classes(matrix: &TransitionMatrix, reachable: &[bool]) -> Vec<Vec<usize>> {
    let nodes: Vec<usize> = (0..matrix.len()).filter(|&s| reachable[s]).collect();
    let mut local = vec![usize::MAX; matrix.len()];
    let mut graph = DiGraph::<usize, ()>::with_capacity(nodes.len(), nodes.len() * 9);
    for (k, &s) in nodes.iter().enumerate() {
        local[s] = k;
        graph.add_node(s);
    }
    for &s in &nodes {
        for &(c, p) in matrix.row(s) {
            if p > 0.0 {
                graph.add_edge((local[s] as u32).into(), (local[c] as u32).into(), ());
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut states: Vec<usize> = comp.into_iter().map(|ix| graph[ix]).collect();
            states.sort_unstable();
            states
        })
        .filter(|states| {
            let mut member = vec![false; matrix.len()];
            states.iter().for_each(|&s| member[s] = true);
            states
                .iter()
                .all(|&s| matrix.row(s).iter().all(|&(c, p)| p == 0.0 || member[c]))
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Probability of ending in each closed class when starting from state 0.
fn absorption_weights(
    matrix: &TransitionMatrix,
    reachable: &[bool],
    classes: &[Vec<usize>],
) -> Result<Vec<f64>, StationaryError> {
    let n = matrix.len();
    let mut class_of = vec![usize::MAX; n];
    for (c, states) in classes.iter().enumerate() {
        states.iter().for_each(|&s| class_of[s] = c);
    }
    if class_of[0] != usize::MAX {
        let mut w = vec![0.0; classes.len()];
        w[class_of[0]] = 1.0;
        return Ok(w);
    }
    let transient: Vec<usize> = (0..n)
        .filter(|&s| reachable[s] && class_of[s] == usize::MAX)
        .collect();
    if transient.len() > DIRECT_LIMIT / 4 {
        return Err(StationaryError::TooManyTransient {
            transient: transient.len(),
        });
    }
    let mut pos = vec![usize::MAX; n];
    transient.iter().enumerate().for_each(|(k, &s)| pos[s] = k);
    let m = transient.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DMatrix::<f64>::zeros(m, classes.len());
    for (k, &s) in transient.iter().enumerate() {
        for &(c, p) in matrix.row(s) {
            if pos[c] != usize::MAX {
                a[(k, pos[c])] -= p;
            } else if class_of[c] != usize::MAX {
                b[(k, class_of[c])] += p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or(StationaryError::SingularAbsorption)?;
    let start = pos[0];
    Ok((0..classes.len()).map(|c| x[(start, c)].max(0.0)).collect())
}

/// Banded storage: row `r` holds columns `r - w ..= r + w`.
struct Band {
    w: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(m: usize, w: usize) -> Self {
        Self {
            w,
            data: vec![0.0; m * (2 * w + 1)],
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * (2 * self.w + 1) + (c + self.w - r)
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.at(r, c)]
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.at(r, c);
        self.data[k] += v;
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        let k = self.at(r, c);
        self.data[k] = v;
    }
}

fn solve_class_gth(
    matrix: &TransitionMatrix,
    class: &[usize],
) -> Result<Vec<f64>, StationaryError> {
    let m = class.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut pos = vec![usize::MAX; matrix.len()];
    class.iter().enumerate().for_each(|(k, &s)| pos[s] = k);
    let mut w = 0;
    for &s in class {
        for &(c, p) in matrix.row(s) {
            if p > 0.0 {
                w = w.max(pos[s].abs_diff(pos[c]));
            }
        }
    }
    let mut band = Band::new(m, w);
    for &s in class {
        for &(c, p) in matrix.row(s) {
            if p > 0.0 && pos[s] != pos[c] {
                band.add(pos[s], pos[c], p);
            }
        }
    }

    for n in (1..m).rev() {
        let lo = n.saturating_sub(w);
        let s: f64 = (lo..n).map(|j| band.get(n, j)).sum();
        if !(s > 0.0) {
            return Err(StationaryError::Breakdown { state: class[n] });
        }
        for i in lo..n {
            let v = band.get(i, n) / s;
            band.set(i, n, v);
        }
        for i in lo..n {
            let pin = band.get(i, n);
            if pin == 0.0 {
                continue;
            }
            for j in lo..n {
                if j != i {
                    let pnj = band.get(n, j);
                    if pnj != 0.0 {
                        band.add(i, j, pin * pnj);
                    }
                }
            }
        }
    }

    let mut x = vec![0.0; m];
    x[0] = 1.0;
    for n in 1..m {
        let lo = n.saturating_sub(w);
        x[n] = (lo..n).map(|i| x[i] * band.get(i, n)).sum();
    }
    let total: f64 = x.iter().sum();
    Ok(x.into_iter().map(|v| v / total).collect())
}

/// Power iteration on the lazy chain `(I + P) / 2`, which has the same
/// stationary vector and is aperiodic.
fn solve_class_power(
    matrix: &TransitionMatrix,
    class: &[usize],
    max_iterations: usize,
) -> Result<Vec<f64>, StationaryError> {
    let m = class.len();
    let mut pos = vec![usize::MAX; matrix.len()];
    class.iter().enumerate().for_each(|(k, &s)| pos[s] = k);
    let mut x = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (k, &s) in class.iter().enumerate() {
            for &(c, p) in matrix.row(s) {
                next[pos[c]] += x[k] * p;
            }
        }
        if it % 16 == 0 {
            residual = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        for (xv, nv) in x.iter_mut().zip(&next) {
            *xv = 0.5 * (*xv + nv);
        }
        if residual <= ITERATIVE_TOL {
            let total: f64 = x.iter().sum();
            return Ok(x.into_iter().map(|v| v / total).collect());
        }
    }
    Err(StationaryError::NotConverged {
        iterations: max_iterations,
        residual,
    })
}

/// Solve `pi (P - I) = 0, sum pi = 1` densely; used to cross-check the
/// structured solver.
pub fn dense_stationary(matrix: &TransitionMatrix) -> Option<Vec<f64>> {
    let n = matrix.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for &(c, p) in matrix.row(r) {
            a[(c, r)] += p;
        }
        a[(r, r)] -= 1.0;
    }
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).map(|v| v.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_transition_matrix;
    use crate::params::SystemParams;
    use crate::policy::Policy;
    use crate::state::{QueueState, StateSpace};

    #[test]
    fn symmetric_two_state_chain() {
        let m = TransitionMatrix::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let d = stationary_distribution(&m).unwrap();
        assert!((d.pi[0] - 0.5).abs() < 1e-15 && (d.pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn idle_system_sits_at_origin() {
        let p = SystemParams::new(0.0, 0.0, 3, 3, 1.0).unwrap();
        let m = build_transition_matrix(&p, &Policy::greedy(StateSpace::new(3, 3))).unwrap();
        let d = stationary_distribution(&m).unwrap();
        assert_eq!(d.pi[0], 1.0);
        assert_eq!(d.pi.iter().filter(|&&x| x > 0.0).count(), 1);
    }

    #[test]
    fn transient_states_get_zero_mass() {
        // 0 -> 1 -> {1, 2} <-> 2; state 0 is transient
        let m = TransitionMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.5, 0.5],
        ])
        .unwrap();
        let d = stationary_distribution(&m).unwrap();
        assert_eq!(d.pi[0], 0.0);
        assert!(!d.recurrent[0]);
        assert!((d.pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_of_closed_classes() {
        // from 0: to absorbing 1 w.p. 0.25, to absorbing 2 w.p. 0.75
        let m = TransitionMatrix::from_dense(&[
            vec![0.0, 0.25, 0.75, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let d = stationary_distribution(&m).unwrap();
        assert!((d.pi[1] - 0.25).abs() < 1e-14);
        assert!((d.pi[2] - 0.75).abs() < 1e-14);
        assert_eq!(d.pi[3], 0.0);
    }

    #[test]
    fn periodic_chain_has_uniform_distribution() {
        let m = TransitionMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let d = stationary_distribution(&m).unwrap();
        for p in d.pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let class: Vec<usize> = (0..3).collect();
        let iter = solve_class_power(&m, &class, 10_000).unwrap();
        for p in iter {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn power_iteration_agrees_with_direct_solve() {
        let p = SystemParams::new(0.4, 0.6, 6, 6, 3.0).unwrap();
        let m = build_transition_matrix(&p, &Policy::greedy(StateSpace::new(6, 6))).unwrap();
        let direct = stationary_distribution(&m).unwrap();
        let reachable = reachable_from(&m, 0);
        let classes = closed_classes(&m, &reachable);
        assert_eq!(classes.len(), 1);
        let iter = solve_class_power(&m, &classes[0], 100_000).unwrap();
        for (&s, v) in classes[0].iter().zip(iter) {
            assert!((direct.pi[s] - v).abs() < 1e-8);
        }
    }

    #[test]
    fn iteration_budget_is_reported() {
        let p = SystemParams::new(0.45, 0.5, 30, 30, 3.0).unwrap();
        let space = StateSpace::new(30, 30);
        let mut policy = Policy::greedy(space);
        // slow mixing: idle whenever allowed
        for s in space.states() {
            if s.i > 0 && s.j > 0 && s.i < 30 && s.j < 30 {
                policy.set(s, [0.0, 0.0, 0.1, 0.9]);
            }
        }
        let m = build_transition_matrix(&p, &policy).unwrap();
        let reachable = reachable_from(&m, 0);
        let classes = closed_classes(&m, &reachable);
        let err = solve_class_power(&m, &classes[0], 10).unwrap_err();
        assert!(matches!(
            err,
            StationaryError::NotConverged { iterations: 10, .. }
        ));
    }

    #[test]
    fn greedy_policy_has_small_support() {
        // greedy transmission empties every queue each slot, so only states
        // reachable in one slot from the origin recur
        let p = SystemParams::new(0.5, 0.5, 3, 3, 3.0).unwrap();
        let space = StateSpace::new(3, 3);
        let m = build_transition_matrix(&p, &Policy::greedy(space)).unwrap();
        let d = stationary_distribution(&m).unwrap();
        for s in space.states() {
            let positive = d.pi[space.index(s)] > 0.0;
            assert_eq!(positive, s.i <= 1 && s.j <= 1, "{s:?}");
        }
        assert!((d.pi[space.index(QueueState::new(1, 1))] - 0.25).abs() < 1e-14);
    }
}
