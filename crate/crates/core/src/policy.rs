//! Randomized stationary transmission policies and their feasibility rules.

use std::fmt;

use thiserror::Error;

use crate::state::{QueueState, Region, StateSpace};

/// Tolerance on per-state normalization and on the structural fixings.
pub const POLICY_TOL: f64 = 1e-9;

/// The four per-slot choices, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Only A transmits one packet.
    AOnly = 0,
    /// Only B transmits one packet.
    BOnly = 1,
    /// A and B transmit simultaneously (lattice-coded).
    Both = 2,
    /// Nobody transmits; the MAC slot is left to the secondary pair.
    Idle = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::AOnly, Action::BOnly, Action::Both, Action::Idle];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Packets leaving (A, B) when this action is taken.
    pub fn departures(self) -> (usize, usize) {
        match self {
            Action::AOnly => (1, 0),
            Action::BOnly => (0, 1),
            Action::Both => (1, 1),
            Action::Idle => (0, 0),
        }
    }

    pub fn a_transmits(self) -> bool {
        matches!(self, Action::AOnly | Action::Both)
    }

    pub fn b_transmits(self) -> bool {
        matches!(self, Action::BOnly | Action::Both)
    }

    /// The action with the roles of A and B exchanged.
    pub fn swapped(self) -> Self {
        match self {
            Action::AOnly => Action::BOnly,
            Action::BOnly => Action::AOnly,
            other => other,
        }
    }

    /// 1-based label matching the `g1..g4` column names.
    pub fn label(self) -> &'static str {
        match self {
            Action::AOnly => "g1",
            Action::BOnly => "g2",
            Action::Both => "g3",
            Action::Idle => "g4",
        }
    }
}

/// Actions a state may use with positive probability.
///
/// Empty queues cannot transmit. A full queue must transmit: with the other
/// queue nonempty that means the combined action, and at the corners
/// `(n_a, 0)` / `(0, n_b)` the full node transmits alone.
pub fn allowed_actions(space: &StateSpace, s: QueueState) -> &'static [Action] {
    let full = space.a_full(s) || space.b_full(s);
    match space.region(s) {
        Region::Origin => &[Action::Idle],
        Region::AxisA if full => &[Action::AOnly],
        Region::AxisA => &[Action::AOnly, Action::Idle],
        Region::AxisB if full => &[Action::BOnly],
        Region::AxisB => &[Action::BOnly, Action::Idle],
        Region::Interior if full => &[Action::Both],
        Region::Interior => &Action::ALL,
    }
}

pub fn is_allowed(space: &StateSpace, s: QueueState, action: Action) -> bool {
    allowed_actions(space, s).contains(&action)
}

/// Per-state action probabilities `g = (g1, g2, g3, g4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    space: StateSpace,
    table: Vec<[f64; 4]>,
}

impl Policy {
    /// Wrap a raw table; no feasibility checks (see [`validate_policy`]).
    pub fn from_table(space: StateSpace, table: Vec<[f64; 4]>) -> Self {
        Self { space, table }
    }

    pub fn from_fn(space: StateSpace, mut f: impl FnMut(QueueState) -> [f64; 4]) -> Self {
        let table = space.states().map(&mut f).collect();
        Self { space, table }
    }

    /// Transmit everything queued: combined when both queues are nonempty,
    /// alone otherwise. Minimal delay; also the default for unreachable states.
    pub fn greedy(space: StateSpace) -> Self {
        Self::from_fn(space, |s| {
            let mut g = [0.0; 4];
            let a = match space.region(s) {
                Region::Origin => Action::Idle,
                Region::AxisA => Action::AOnly,
                Region::AxisB => Action::BOnly,
                Region::Interior => Action::Both,
            };
            g[a.index()] = 1.0;
            g
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn table(&self) -> &[[f64; 4]] {
        &self.table
    }

    pub fn get(&self, s: QueueState) -> [f64; 4] {
        self.table[self.space.index(s)]
    }

    pub fn at_index(&self, k: usize) -> [f64; 4] {
        self.table[k]
    }

    pub fn prob(&self, s: QueueState, action: Action) -> f64 {
        self.get(s)[action.index()]
    }

    pub fn set(&mut self, s: QueueState, g: [f64; 4]) {
        let k = self.space.index(s);
        self.table[k] = g;
    }

    /// Probabilities of the allowed actions at `s`, renormalized so they sum
    /// to exactly one. Tolerated residue on forbidden actions is dropped.
    pub fn normalized_allowed(&self, s: QueueState) -> Vec<(Action, f64)> {
        let g = self.get(s);
        let allowed = allowed_actions(&self.space, s);
        let total: f64 = allowed.iter().map(|a| g[a.index()].max(0.0)).sum();
        if total <= 0.0 {
            // only reachable through an invalid policy; fall back to the forced action
            return vec![(allowed[0], 1.0)];
        }
        allowed
            .iter()
            .map(|&a| (a, g[a.index()].max(0.0) / total))
            .collect()
    }

    /// Policy for the relabelled system (A and B exchanged).
    pub fn transposed(&self) -> Self {
        let space = self.space.transposed();
        Self::from_fn(space, |s| {
            let g = self.get(s.transposed());
            [g[1], g[0], g[2], g[3]]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("policy table covers {got:?} states but the scenario has {expected:?}")]
pub struct DimensionMismatch {
    pub expected: StateSpace,
    pub got: StateSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `sum_k g^k` differs from one.
    Normalization { state: QueueState, sum: f64 },
    /// An entry outside `[0, 1]`.
    OutOfRange {
        state: QueueState,
        action: Action,
        value: f64,
    },
    /// Positive probability on an action the state cannot take.
    Forbidden {
        state: QueueState,
        action: Action,
        value: f64,
    },
    /// A full-buffer state that does not transmit with probability one.
    NotForced {
        state: QueueState,
        action: Action,
        value: f64,
    },
}

impl Violation {
    /// Size of the violation in probability units.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::Normalization { sum, .. } => (sum - 1.0).abs(),
            Violation::OutOfRange { value, .. } => {
                if value < 0.0 {
                    -value
                } else {
                    value - 1.0
                }
            }
            Violation::Forbidden { value, .. } => value.abs(),
            Violation::NotForced { value, .. } => (1.0 - value).abs(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Normalization { state, sum } => write!(
                f,
                "({}, {}): probabilities sum to {sum} (off by {:.3e})",
                state.i,
                state.j,
                self.magnitude()
            ),
            Violation::OutOfRange {
                state,
                action,
                value,
            } => write!(
                f,
                "({}, {}): {} = {value} outside [0, 1]",
                state.i,
                state.j,
                action.label()
            ),
            Violation::Forbidden {
                state,
                action,
                value,
            } => {
                let why = match (action.a_transmits(), action.b_transmits()) {
                    (true, _) if state.i == 0 => "when i=0",
                    (_, true) if state.j == 0 => "when j=0",
                    _ => "at a full buffer",
                };
                write!(
                    f,
                    "({}, {}): {} must be 0 {why}, got {value}",
                    state.i,
                    state.j,
                    action.label()
                )
            }
            Violation::NotForced {
                state,
                action,
                value,
            } => write!(
                f,
                "({}, {}): full buffer requires {} = 1, got {value}",
                state.i,
                state.j,
                action.label()
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.violations
            .iter()
            .map(Violation::magnitude)
            .fold(0.0, f64::max)
    }
}

/// Check every policy invariant, collecting all violations.
pub fn validate_policy(
    policy: &Policy,
    space: &StateSpace,
) -> Result<ValidationReport, DimensionMismatch> {
    if policy.space != *space || policy.table.len() != space.len() {
        return Err(DimensionMismatch {
            expected: *space,
            got: policy.space,
        });
    }
    let mut violations = Vec::new();
    for s in space.states() {
        let g = policy.get(s);
        let sum: f64 = g.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > POLICY_TOL {
            violations.push(Violation::Normalization { state: s, sum });
        }
        for a in Action::ALL {
            let v = g[a.index()];
            if !(-POLICY_TOL..=1.0 + POLICY_TOL).contains(&v) {
                violations.push(Violation::OutOfRange {
                    state: s,
                    action: a,
                    value: v,
                });
            }
        }
        let allowed = allowed_actions(space, s);
        for a in Action::ALL {
            let v = g[a.index()];
            if !allowed.contains(&a) && v.abs() > POLICY_TOL {
                violations.push(Violation::Forbidden {
                    state: s,
                    action: a,
                    value: v,
                });
            }
        }
        if let [forced] = allowed {
            // origin idles by necessity; only full buffers are compelled to send
            if *forced != Action::Idle {
                let v = g[forced.index()];
                if (v - 1.0).abs() > POLICY_TOL {
                    violations.push(Violation::NotForced {
                        state: s,
                        action: *forced,
                        value: v,
                    });
                }
            }
        }
    }
    Ok(ValidationReport { violations })
}
