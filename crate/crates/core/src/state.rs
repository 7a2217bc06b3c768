//! The queue-length grid `(i, j)`, `0 <= i <= n_a`, `0 <= j <= n_b`.

use crate::params::SystemParams;

/// Packets queued at A (`i`) and at B (`j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueueState {
    pub i: usize,
    pub j: usize,
}

impl QueueState {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn transposed(self) -> Self {
        Self::new(self.j, self.i)
    }
}

/// Where a state sits on the grid; the transition structure differs per region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Origin,
    /// `i > 0, j = 0`
    AxisA,
    /// `i = 0, j > 0`
    AxisB,
    Interior,
}

/// Row-major enumeration of the state grid with a bijective index map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub n_a: usize,
    pub n_b: usize,
}

impl StateSpace {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        Self { n_a, n_b }
    }

    pub fn len(&self) -> usize {
        (self.n_a + 1) * (self.n_b + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: QueueState) -> bool {
        s.i <= self.n_a && s.j <= self.n_b
    }

    pub fn index(&self, s: QueueState) -> usize {
        debug_assert!(self.contains(s), "{s:?} outside {self:?}");
        s.i * (self.n_b + 1) + s.j
    }

    pub fn state(&self, index: usize) -> QueueState {
        debug_assert!(index < self.len());
        QueueState::new(index / (self.n_b + 1), index % (self.n_b + 1))
    }

    pub fn states(&self) -> impl Iterator<Item = QueueState> + '_ {
        (0..self.len()).map(|k| self.state(k))
    }

    pub fn region(&self, s: QueueState) -> Region {
        match (s.i, s.j) {
            (0, 0) => Region::Origin,
            (_, 0) => Region::AxisA,
            (0, _) => Region::AxisB,
            _ => Region::Interior,
        }
    }

    pub fn a_full(&self, s: QueueState) -> bool {
        s.i == self.n_a
    }

    pub fn b_full(&self, s: QueueState) -> bool {
        s.j == self.n_b
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.n_b, self.n_a)
    }

    /// Largest index distance between grid neighbours; the bandwidth of any
    /// matrix whose nonzeros connect states differing by at most one per axis.
    pub fn bandwidth(&self) -> usize {
        self.n_b + 2
    }
}

impl From<&SystemParams> for StateSpace {
    fn from(p: &SystemParams) -> Self {
        Self::new(p.n_a, p.n_b)
    }
}

/// Enumerate the state space of `params` in row-major order.
pub fn state_space(params: &SystemParams) -> (StateSpace, Vec<QueueState>) {
    let space = StateSpace::from(params);
    let states = space.states().collect();
    (space, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_counts() {
        assert_eq!(
            StateSpace::new(1, 1).states().collect::<Vec<_>>(),
            vec![
                QueueState::new(0, 0),
                QueueState::new(0, 1),
                QueueState::new(1, 0),
                QueueState::new(1, 1)
            ]
        );
        let p = SystemParams::default();
        assert_eq!(state_space(&p).1.len(), 256);
        assert_eq!(StateSpace::new(2, 3).len(), 12);
    }

    #[test]
    fn index_is_bijective() {
        let space = StateSpace::new(4, 7);
        for (k, s) in space.states().enumerate() {
            assert_eq!(space.index(s), k);
            assert_eq!(space.state(k), s);
        }
    }

    #[test]
    fn regions() {
        let space = StateSpace::new(3, 3);
        assert_eq!(space.region(QueueState::new(0, 0)), Region::Origin);
        assert_eq!(space.region(QueueState::new(2, 0)), Region::AxisA);
        assert_eq!(space.region(QueueState::new(0, 3)), Region::AxisB);
        assert_eq!(space.region(QueueState::new(1, 1)), Region::Interior);
    }
}
