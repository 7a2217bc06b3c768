//! Throughput-optimal policy under an average-delay budget, as a linear
//! program in the occupation variables `x[s][k] = pi[s] * g[s][k]`.
//!
//! In these variables the stationarity equations, the normalization and the
//! Little's-law delay bound are all linear; the objective is the fraction
//! of idle MAC slots `sum_s x[s][Idle]`. Variables for actions a state may
//! not take are left out of the program altogether.

mod backend;
pub mod dump;
pub mod simplex;

use log::debug;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::chain::{action_transitions, build_transition_matrix, ChainError};
use crate::metrics::{analytic_metrics, AnalyticMetrics};
use crate::params::{arrival_probs, ParamError, SystemParams};
use crate::policy::{allowed_actions, Action, Policy};
use crate::state::{QueueState, StateSpace};
use crate::stationary::{stationary_distribution, StationaryDistribution, StationaryError};
use simplex::{LinearProgram, Outcome, Row, RowKind};

/// Below this total occupation in solver output a state is treated as unvisited.
pub const UNREACHED_EPS: f64 = 1e-10;
/// Occupation entries at or below this are solver noise.
const ROUNDOFF_X: f64 = 1e-13;
/// Expected per-slot flow along a support edge below which it is noise.
const FLOW_NOISE: f64 = 1e-10;
/// Classes lighter than this are never kept on their own.
const CLASS_MIN_MASS: f64 = 1e-6;
/// Objective loss accepted when collapsing a multi-class optimum to one class.
const CLASS_TIE_TOL: f64 = 1e-8;
/// Agreement required between a refined solution and its recovered chain.
const REFINE_TOL: f64 = 1e-9;
/// Every residual in a [`VerificationReport`] must be at most this.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

/// Bijection between included `(state, action)` pairs and LP columns.
#[derive(Debug, Clone, PartialEq)]
pub struct VarIndex {
    space: StateSpace,
    columns: Vec<(usize, Action)>,
    lookup: Vec<[Option<usize>; 4]>,
}

impl VarIndex {
    pub fn new(space: StateSpace) -> Self {
        Self::restricted(space, &vec![true; space.len()])
    }

    /// Columns only for states with `include[k]`.
    pub fn restricted(space: StateSpace, include: &[bool]) -> Self {
        assert_eq!(include.len(), space.len());
        let mut columns = Vec::new();
        let mut lookup = vec![[None; 4]; space.len()];
        for (k, s) in space.states().enumerate() {
            if !include[k] {
                continue;
            }
            for &a in allowed_actions(&space, s) {
                lookup[k][a.index()] = Some(columns.len());
                columns.push((k, a));
            }
        }
        Self {
            space,
            columns,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn column(&self, s: QueueState, a: Action) -> Option<usize> {
        self.lookup[self.space.index(s)][a.index()]
    }

    pub fn var(&self, col: usize) -> (QueueState, Action) {
        let (k, a) = self.columns[col];
        (self.space.state(k), a)
    }

    /// Column name used in dumps: `x{1..4}_{i}_{j}`.
    pub fn name(&self, col: usize) -> String {
        let (s, a) = self.var(col);
        format!("x{}_{}_{}", a.index() + 1, s.i, s.j)
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, QueueState, Action)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .map(|(c, &(k, a))| (c, self.space.state(k), a))
    }
}

/// The assembled program. Row order: one balance row per state (state
/// order), then normalization, then the delay row.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub params: SystemParams,
    pub vars: VarIndex,
    pub objective: Vec<f64>,
    pub balance: Vec<Vec<(usize, f64)>>,
    pub normalization: Vec<(usize, f64)>,
    /// `sum x (i + j) <= delay_rhs`, the delay budget multiplied through by
    /// the total arrival rate so the row stays defined at zero load.
    pub delay: Vec<(usize, f64)>,
    pub delay_rhs: f64,
}

impl LpProblem {
    pub fn n_rows(&self) -> usize {
        self.balance.len() + 2
    }

    pub fn to_linear_program(&self) -> LinearProgram {
        let mut rows: Vec<Row> = self
            .balance
            .iter()
            .map(|coeffs| Row {
                coeffs: coeffs.clone(),
                kind: RowKind::Eq,
                rhs: 0.0,
            })
            .collect();
        rows.push(Row {
            coeffs: self.normalization.clone(),
            kind: RowKind::Eq,
            rhs: 1.0,
        });
        rows.push(Row {
            coeffs: self.delay.clone(),
            kind: RowKind::Le,
            rhs: self.delay_rhs,
        });
        LinearProgram {
            objective: self.objective.clone(),
            rows,
        }
    }

    /// Row names matching [`LpProblem::to_linear_program`].
    pub fn row_names(&self) -> Vec<String> {
        let space = self.vars.space();
        let mut names: Vec<String> = space
            .states()
            .map(|s| format!("bal_{}_{}", s.i, s.j))
            .collect();
        names.push("norm".into());
        names.push("delay".into());
        names
    }

    /// Largest absolute residual of the equality rows at `x`.
    pub fn balance_residual(&self, x: &[f64]) -> f64 {
        self.balance
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn normalization_residual(&self, x: &[f64]) -> f64 {
        (self
            .normalization
            .iter()
            .map(|&(c, v)| v * x[c])
            .sum::<f64>()
            - 1.0)
            .abs()
    }

    /// `E[i + j]` implied by `x`.
    pub fn mean_queue(&self, x: &[f64]) -> f64 {
        self.delay.iter().map(|&(c, v)| v * x[c]).sum()
    }
}

/// States some action sequence can reach from the empty system.
pub fn reachable_states(params: &SystemParams) -> Vec<bool> {
    let space = StateSpace::from(params);
    let f = arrival_probs(params);
    let mut seen = vec![false; space.len()];
    let mut stack = vec![QueueState::new(0, 0)];
    seen[0] = true;
    while let Some(s) = stack.pop() {
        for &a in allowed_actions(&space, s) {
            for (t, p) in action_transitions(&space, &f, s, a) {
                let k = space.index(t);
                if p > 0.0 && !seen[k] {
                    seen[k] = true;
                    stack.push(t);
                }
            }
        }
    }
    seen
}

/// Build the program. States no policy can reach from the empty system
/// get no columns (their balance rows are empty), so every feasible
/// occupation measure is one the system can actually settle into.
pub fn assemble_lp(params: &SystemParams) -> Result<LpProblem, ParamError> {
    params.validate()?;
    let space = StateSpace::from(params);
    let vars = VarIndex::restricted(space, &reachable_states(params));
    let f = arrival_probs(params);

    let mut objective = vec![0.0; vars.len()];
    let mut balance: Vec<Vec<(usize, f64)>> = vec![Vec::new(); space.len()];
    let mut normalization = Vec::with_capacity(vars.len());
    let mut delay = Vec::with_capacity(vars.len());

    for (col, s, a) in vars.columns() {
        if a == Action::Idle {
            objective[col] = 1.0;
        }
        normalization.push((col, 1.0));
        let occupancy = (s.i + s.j) as f64;
        if occupancy > 0.0 {
            delay.push((col, occupancy));
        }
        // inflow to each target, outflow from s
        let mut self_mass = 0.0;
        for (t, p) in action_transitions(&space, &f, s, a) {
            if t == s {
                self_mass += p;
            } else {
                balance[space.index(t)].push((col, p));
            }
        }
        balance[space.index(s)].push((col, self_mass - 1.0));
    }
    for row in &mut balance {
        row.sort_by_key(|&(c, _)| c);
        row.retain(|&(_, v)| v != 0.0);
    }

    Ok(LpProblem {
        params: *params,
        vars,
        objective,
        balance,
        normalization,
        delay,
        delay_rhs: params.d_max * params.total_arrival_rate(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Cannot happen for a normalized program; reported as an internal fault.
    Unbounded,
    NumericalFailure,
}

/// Why no policy meets the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    /// Row multipliers proving infeasibility, in [`LpProblem`] row order.
    pub farkas: Vec<f64>,
    pub infeasibility: f64,
    /// Smallest mean delay any lossless policy attains, when computable.
    pub min_attainable_delay: Option<f64>,
}

impl InfeasibilityCertificate {
    pub fn summary(&self, d_max: f64) -> String {
        match self.min_attainable_delay {
            Some(d) => format!(
                "delay budget d_max = {d_max} is below the minimum attainable mean delay {d:.6} slots"
            ),
            None => format!(
                "constraints are inconsistent (phase-one residual {:.3e})",
                self.infeasibility
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub vars: VarIndex,
    pub x: Vec<f64>,
    /// `sum x[Idle]`, the secondary pair's throughput.
    pub objective: f64,
    pub duality_gap: f64,
    pub certificate: Option<InfeasibilityCertificate>,
    pub diagnostics: Option<String>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, s: QueueState, a: Action) -> f64 {
        self.vars.column(s, a).map_or(0.0, |c| self.x[c])
    }

    /// `pi[s] = sum_k x[s][k]` over the grid.
    pub fn occupation(&self) -> Vec<f64> {
        let mut pi = vec![0.0; self.vars.space().len()];
        for (c, s, _) in self.vars.columns() {
            pi[self.vars.space().index(s)] += self.x[c];
        }
        pi
    }
}

/// Solve the program. An origin-free optimal support is replaced by the
/// least-delay optimum, since the system starts empty.
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let lp = problem.to_linear_program();
    let outcome = backend::solve(&lp);
    let mut solution = into_solution(problem, outcome);
    if solution.is_optimal() {
        let origin = problem.vars.column(QueueState::new(0, 0), Action::Idle);
        let origin_mass = origin.map_or(0.0, |c| solution.x[c]);
        if origin_mass <= UNREACHED_EPS {
            debug!("optimum avoids the empty state; re-solving for least delay");
            if let Some(mut better) = least_delay_optimum(problem, solution.objective) {
                // the certificate is still the first stage's, less any idle fraction given up
                better.duality_gap =
                    solution.duality_gap + (solution.objective - better.objective).max(0.0);
                solution = better;
            }
        }
    } else if solution.status == LpStatus::Infeasible {
        if let Some(cert) = solution.certificate.as_mut() {
            cert.min_attainable_delay = min_attainable_delay(problem);
        }
    }
    if solution.is_optimal() {
        single_class(problem, &mut solution);
        refine(problem, &mut solution);
    }
    solution
}

/// Replace the solver's occupation measure by the exact stationary measure
/// of the policy it induces, `x[s][a] = pi[s] g[s][a]`. Balance then holds to
/// round-off and the policy reproduces the solution. The refined point is
/// kept only if it still meets the delay budget and loses at most
/// [`CLASS_TIE_TOL`] of the objective.
fn refine(problem: &LpProblem, solution: &mut LpSolution) {
    let params = &problem.params;
    let chain_pi = |policy: &Policy| {
        build_transition_matrix(params, policy)
            .map_err(LpError::from)
            .and_then(|m| stationary_distribution(&m).map_err(LpError::from))
    };
    let Ok((policy, _)) = recover_policy(solution, params) else {
        return;
    };
    let Ok(pi) = chain_pi(&policy) else {
        return;
    };
    let space = problem.vars.space();
    let mut x = vec![0.0; problem.vars.len()];
    let mut outside = 0.0;
    for (k, s) in space.states().enumerate() {
        for a in Action::ALL {
            let v = pi.get(k) * policy.prob(s, a);
            match problem.vars.column(s, a) {
                Some(c) => x[c] = v,
                None => outside += v,
            }
        }
    }
    let budget = params.d_max * params.total_arrival_rate();
    let delay: f64 = problem.delay.iter().map(|&(c, v)| v * x[c]).sum();
    let objective: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let loss = solution.objective - objective;
    if outside > 0.0 || delay > budget + 1e-9 * budget.max(1.0) || loss > CLASS_TIE_TOL {
        debug!("refinement rejected: delay row {delay:.3e} of {budget:.3e}, objective change {:.3e}", -loss);
        return;
    }
    let refined = LpSolution {
        x,
        objective,
        duality_gap: solution.duality_gap + loss.max(0.0),
        ..solution.clone()
    };
    // states too light for recovery are steered anew, which can move the chain
    let mismatch = recover_policy(&refined, params)
        .ok()
        .and_then(|(p, lp_pi)| {
            chain_pi(&p).ok().map(|c| {
                c.pi.iter()
                    .zip(&lp_pi.pi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
        })
        .unwrap_or(f64::INFINITY);
    if mismatch <= REFINE_TOL {
        *solution = refined;
    } else {
        debug!("refinement rejected: recovered policy is off by {mismatch:.3e}");
    }
}

/// Reduce an optimum to one recurrent class of its own support.
///
/// An optimal vertex can spread its mass over several classes, usually as a
/// tie, and a chain started empty only ever sees one of them. Classes are
/// the strongly connected components of the support graph over states above
/// [`UNREACHED_EPS`], keeping only edges that carry more than [`FLOW_NOISE`].
/// Noise-sized flows would otherwise bridge classes that are separate in
/// exact arithmetic, leaving the chain's split between them to noise. No
/// closure test is applied: a balanced solution can
/// only carry noise-sized flow out of a heavy component, and such leaks are
/// steered back by [`recover_policy`]. The best component that meets the
/// delay budget on its own is kept and renormalized; when it falls short of
/// the optimum by more than [`CLASS_TIE_TOL`], the loss is reported in the
/// diagnostics.
fn single_class(problem: &LpProblem, solution: &mut LpSolution) {
    let space = problem.vars.space();
    let probs = arrival_probs(&problem.params);
    let heavy: Vec<bool> = solution
        .occupation()
        .into_iter()
        .map(|p| p > UNREACHED_EPS)
        .collect();
    let x: Vec<f64> = problem
        .vars
        .columns()
        .map(|(c, s, _)| {
            let v = solution.x[c];
            if heavy[space.index(s)] && v > ROUNDOFF_X {
                v
            } else {
                0.0
            }
        })
        .collect();
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..space.len()).map(|k| graph.add_node(k)).collect();
    for (c, s, a) in problem.vars.columns() {
        if x[c] == 0.0 {
            continue;
        }
        let k = space.index(s);
        for (t, p) in action_transitions(&space, &probs, s, a) {
            let kt = space.index(t);
            if x[c] * p > FLOW_NOISE && heavy[kt] {
                graph.update_edge(nodes[k], nodes[kt], ());
            }
        }
    }
    let mut class_of = vec![usize::MAX; space.len()];
    let sccs = tarjan_scc(&graph);
    for (id, scc) in sccs.iter().enumerate() {
        for n in scc {
            class_of[n.index()] = id;
        }
    }
    let budget = problem.params.d_max * problem.params.total_arrival_rate();
    let slack = 1e-9 * budget.max(1.0);
    let mut feasible: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let mut candidates = 0;
    for id in 0..sccs.len() {
        let mut xc: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let (s, _) = problem.vars.var(c);
                if class_of[space.index(s)] == id {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        let mass: f64 = xc.iter().sum();
        if mass < CLASS_MIN_MASS {
            continue;
        }
        candidates += 1;
        xc.iter_mut().for_each(|v| *v /= mass);
        let delay: f64 = problem.delay.iter().map(|&(c, v)| v * xc[c]).sum();
        let objective: f64 = problem.objective.iter().zip(&xc).map(|(c, v)| c * v).sum();
        if delay <= budget + slack {
            feasible.push((objective, mass, xc));
        }
    }
    // ties within tolerance go to the heaviest class
    let top = feasible
        .iter()
        .map(|f| f.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = feasible
        .into_iter()
        .filter(|f| f.0 >= top - CLASS_TIE_TOL)
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((objective, _, xc)) = best else {
        solution.diagnostics = Some(format!(
            "none of the {candidates} recurrent classes of the optimum meets the delay budget alone"
        ));
        let objective: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        solution.duality_gap += (solution.objective - objective).max(0.0);
        solution.objective = objective;
        solution.x = x;
        return;
    };
    let loss = solution.objective - objective;
    if candidates > 1 {
        debug!("optimum spans {candidates} classes; keeping one (objective change {:.3e})", -loss);
    }
    if loss > CLASS_TIE_TOL {
        solution.diagnostics = Some(format!(
            "optimum mixes {candidates} recurrent classes; the best single class gives up {loss:.3e} of idle fraction"
        ));
    }
    solution.duality_gap += loss.max(0.0);
    solution.objective = objective;
    solution.x = xc;
}

fn into_solution(problem: &LpProblem, outcome: Outcome) -> LpSolution {
    let vars = problem.vars.clone();
    let empty = vec![0.0; vars.len()];
    match outcome {
        Outcome::Optimal { x, duality_gap, .. } => {
            let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            LpSolution {
                status: LpStatus::Optimal,
                vars,
                x,
                objective,
                duality_gap,
                certificate: None,
                diagnostics: None,
            }
        }
        Outcome::Infeasible {
            farkas,
            infeasibility,
        } => LpSolution {
            status: LpStatus::Infeasible,
            vars,
            x: empty,
            objective: f64::NAN,
            duality_gap: f64::NAN,
            certificate: Some(InfeasibilityCertificate {
                farkas,
                infeasibility,
                min_attainable_delay: None,
            }),
            diagnostics: None,
        },
        Outcome::Unbounded { column } => LpSolution {
            status: LpStatus::Unbounded,
            vars,
            x: empty,
            objective: f64::NAN,
            duality_gap: f64::NAN,
            certificate: None,
            diagnostics: Some(format!(
                "internal inconsistency: solver reports unbounded ray on column {column}"
            )),
        },
        Outcome::IterationLimit { pivots } => LpSolution {
            status: LpStatus::NumericalFailure,
            vars,
            x: empty,
            objective: f64::NAN,
            duality_gap: f64::NAN,
            certificate: None,
            diagnostics: Some(format!("pivot limit reached after {pivots} pivots")),
        },
        Outcome::Unstable { residual } => LpSolution {
            status: LpStatus::NumericalFailure,
            vars,
            x: empty,
            objective: f64::NAN,
            duality_gap: f64::NAN,
            certificate: None,
            diagnostics: Some(format!(
                "final basis is ill-conditioned: row violation {residual:.3e}"
            )),
        },
    }
}

/// Minimize the delay row subject to stationarity and normalization only.
fn min_attainable_delay(problem: &LpProblem) -> Option<f64> {
    let load = problem.params.total_arrival_rate();
    if load <= 0.0 {
        return None;
    }
    let mut lp = problem.to_linear_program();
    lp.rows.pop();
    lp.objective = vec![0.0; problem.vars.len()];
    for &(c, v) in &problem.delay {
        lp.objective[c] = -v;
    }
    match backend::solve(&lp) {
        Outcome::Optimal { objective, .. } => Some(-objective / load),
        _ => None,
    }
}

/// Among programs at the optimal idle fraction, minimize delay. A failed
/// second stage simply keeps the first-stage solution.
fn least_delay_optimum(problem: &LpProblem, best: f64) -> Option<LpSolution> {
    let mut lp = problem.to_linear_program();
    // keep the idle fraction at its optimum: -sum x[Idle] <= -best
    let floor: Vec<(usize, f64)> = problem
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 0.0)
        .map(|(k, _)| (k, -1.0))
        .collect();
    lp.rows.push(Row {
        coeffs: floor,
        kind: RowKind::Le,
        rhs: -(best - 1e-11),
    });
    lp.objective = vec![0.0; problem.vars.len()];
    for &(c, v) in &problem.delay {
        lp.objective[c] = -v;
    }
    match backend::solve_once(&lp) {
        Outcome::Optimal { x, .. } => {
            let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            Some(LpSolution {
                status: LpStatus::Optimal,
                vars: problem.vars.clone(),
                x,
                objective,
                duality_gap: f64::NAN,
                certificate: None,
                diagnostics: None,
            })
        }
        _ => None,
    }
}

/// Map occupation variables back to a policy and its stationary vector.
///
/// States without occupation beyond round-off get the greedy draining action,
/// unless that would trap the chain away from the occupied states; those
/// get an allowed action that can move toward them instead, so the chain
/// started empty always ends up in the occupied class.
pub fn recover_policy(
    solution: &LpSolution,
    params: &SystemParams,
) -> Result<(Policy, StationaryDistribution), LpError> {
    if !solution.is_optimal() {
        return Err(LpError::NotOptimal(solution.status));
    }
    params.validate()?;
    let space = StateSpace::from(params);
    assert_eq!(solution.vars.space(), space, "solution is for another grid");
    let mut policy = Policy::greedy(space);
    let mut pi = vec![0.0; space.len()];
    for (k, s) in space.states().enumerate() {
        let mut xs = [0.0; 4];
        for a in Action::ALL {
            // round-off sized entries would open spurious exits from the support
            let v = solution.value(s, a);
            xs[a.index()] = if v > ROUNDOFF_X { v } else { 0.0 };
        }
        // solver noise is gone by now; what remains is exact, however light
        let total: f64 = xs.iter().sum();
        if total > 0.0 {
            policy.set(s, xs.map(|v| v / total));
            pi[k] = total;
        }
    }
    steer_unvisited(&mut policy, &pi, params);
    let mass: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= mass);
    Ok((policy, StationaryDistribution::from_probs(pi)))
}

/// Give unvisited states that cannot reach the support an action that can.
fn steer_unvisited(policy: &mut Policy, pi: &[f64], params: &SystemParams) {
    let space = policy.space();
    let probs = arrival_probs(params);
    let moves = |s: QueueState, a: Action| -> Vec<usize> {
        action_transitions(&space, &probs, s, a)
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(t, _)| space.index(t))
            .collect()
    };
    let mut reaches: Vec<bool> = pi.iter().map(|&p| p > 0.0).collect();
    // backward closure under the current policy
    let mut changed = true;
    while changed {
        changed = false;
        for (k, s) in space.states().enumerate() {
            if reaches[k] {
                continue;
            }
            let g = policy.at_index(k);
            let hits = Action::ALL
                .into_iter()
                .filter(|a| g[a.index()] > 0.0)
                .any(|a| moves(s, a).into_iter().any(|t| reaches[t]));
            if hits {
                reaches[k] = true;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        // nothing propagates: re-route one trapped state
        for (k, s) in space.states().enumerate() {
            if reaches[k] || pi[k] > 0.0 {
                continue;
            }
            let exit = allowed_actions(&space, s)
                .iter()
                .copied()
                .find(|&a| moves(s, a).into_iter().any(|t| reaches[t]));
            if let Some(a) = exit {
                let mut g = [0.0; 4];
                g[a.index()] = 1.0;
                policy.set(s, g);
                reaches[k] = true;
                changed = true;
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub max_balance_residual: f64,
    pub normalization_residual: f64,
    pub min_x: f64,
    pub mean_delay: Option<f64>,
    pub d_max: f64,
    /// `d_max - mean_delay`; positive when the budget is not binding.
    pub delay_slack: Option<f64>,
    pub mu1: f64,
    /// `|mu1 - (lambda_a + lambda_b)|`
    pub flow_residual: f64,
    /// Max difference between the LP's `pi` and the one obtained by solving
    /// the chain of the recovered policy.
    pub pi_consistency: f64,
    /// Grid states the solution never visits.
    pub unvisited: Vec<QueueState>,
    pub metrics: AnalyticMetrics,
    pub passed: bool,
}

pub fn verify_solution(
    solution: &LpSolution,
    params: &SystemParams,
) -> Result<VerificationReport, LpError> {
    let problem = assemble_lp(params)?;
    let (policy, lp_pi) = recover_policy(solution, params)?;
    let x = &solution.x;
    let max_balance_residual = problem.balance_residual(x);
    let normalization_residual = problem.normalization_residual(x);
    let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let load = params.total_arrival_rate();
    let mean_queue = problem.mean_queue(x);
    let mean_delay = (load > 0.0).then(|| mean_queue / load);

    let matrix = build_transition_matrix(params, &policy)?;
    let chain_pi = stationary_distribution(&matrix)?;
    let pi_consistency = chain_pi
        .pi
        .iter()
        .zip(&lp_pi.pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let metrics = analytic_metrics(&lp_pi, &policy, params);
    let flow_residual = (metrics.mu1 - load).abs();
    let space = StateSpace::from(params);
    let unvisited = space
        .states()
        .filter(|&s| lp_pi.get(space.index(s)) == 0.0)
        .collect();

    let delay_ok = mean_delay.is_none_or(|d| d <= params.d_max + 1e-8);
    let passed = max_balance_residual <= VERIFY_TOL
        && normalization_residual <= VERIFY_TOL
        && min_x >= -1e-9
        && flow_residual <= VERIFY_TOL
        && pi_consistency <= VERIFY_TOL
        && delay_ok;
    Ok(VerificationReport {
        max_balance_residual,
        normalization_residual,
        min_x,
        mean_delay,
        d_max: params.d_max,
        delay_slack: mean_delay.map(|d| params.d_max - d),
        mu1: metrics.mu1,
        flow_residual,
        pi_consistency,
        unvisited,
        metrics,
        passed,
    })
}

/// Assemble, solve and recover in one go.
pub fn optimal_policy(
    params: &SystemParams,
) -> Result<(LpSolution, Policy, StationaryDistribution), LpError> {
    let problem = assemble_lp(params)?;
    let solution = solve_lp(&problem);
    let (policy, pi) = recover_policy(&solution, params)?;
    Ok((solution, policy, pi))
}
