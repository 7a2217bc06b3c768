//! Dense two-phase tableau simplex for small linear programs.
//!
//! Maximizes `c x` subject to equality and `<=` rows and `x >= 0`.
//! Pivoting is Dantzig's largest-reduced-cost rule with ties broken by the
//! lowest column index; after a run of degenerate pivots it switches to
//! Bland's rule until the objective moves again, which rules out cycling.
//! Every choice is deterministic, so identical input gives bit-identical
//! output.
//!
//! The optimal basis is refactorized with a dense LU at the end to clean up
//! the primal values and recover duals.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const NOISE_COST: f64 = 1e-7;
const RATIO_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
/// Accepted row violation of a returned optimum.
const CHECK_TOL: f64 = 1e-8;
const REFINE_STEPS: usize = 3;
const DEGENERATE_RUN: usize = 50;
/// Pivots between rebuilds of the tableau from the original data.
const REFACTOR_EVERY: usize = 200;
const DEFAULT_MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `max objective . x  s.t.  rows, x >= 0`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        /// One multiplier per row; `<=` rows have nonnegative duals.
        duals: Vec<f64>,
        /// `b . y - c . x`, nonnegative up to rounding.
        duality_gap: f64,
        /// Final basic columns (structural, then one slack per `<=` row);
        /// usable as a warm start for a related program.
        basis: Vec<usize>,
    },
    /// Row multipliers `y` with `y A <= 0` column-wise, `y_r <= 0` on `<=`
    /// rows and `y b > 0`; no `x >= 0` can satisfy all rows.
    Infeasible {
        farkas: Vec<f64>,
        /// Minimum total artificial mass left by phase one.
        infeasibility: f64,
    },
    Unbounded {
        column: usize,
    },
    IterationLimit {
        pivots: usize,
    },
    /// The final basis does not reproduce a feasible point of the original
    /// rows; `residual` is the worst row or bound violation.
    Unstable {
        residual: f64,
    },
}

impl Outcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Outcome::Optimal { .. })
    }
}

struct Tableau {
    m: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    stride: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    /// Initial tableau rows, used to rebuild after accumulated round-off.
    orig: Vec<f64>,
    /// Cost vector of the current phase.
    cost: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.stride + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.stride + self.cols]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let stride = self.stride;
        let inv = 1.0 / self.at(p, q);
        {
            let row = &mut self.t[p * stride..(p + 1) * stride];
            row.iter_mut().for_each(|v| *v *= inv);
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(p * stride);
        let (prow, after) = rest.split_at_mut(stride);
        for chunk in before
            .chunks_exact_mut(stride)
            .chain(after.chunks_exact_mut(stride))
        {
            let f = chunk[q];
            if f != 0.0 {
                for (v, &pv) in chunk.iter_mut().zip(prow.iter()) {
                    if pv != 0.0 {
                        *v -= f * pv;
                    }
                }
                chunk[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for (v, &pv) in self.obj.iter_mut().zip(prow.iter()) {
                if pv != 0.0 {
                    *v -= f * pv;
                }
            }
            self.obj[q] = 0.0;
        }
        self.basis[p] = q;
        self.pivots += 1;
    }

    /// Run simplex iterations over columns `< allowed`; returns `Err(col)`
    /// on unboundedness.
    fn optimize(&mut self, allowed: usize, max_pivots: usize) -> Result<bool, usize> {
        let mut degenerate = 0usize;
        while self.pivots < max_pivots {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = COST_TOL;
            for j in 0..allowed {
                let d = self.obj[j];
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(true);
            };
            // two-pass ratio test: minimum ratio, then the best pivot among near-ties
            let mut min_ratio = f64::INFINITY;
            for r in 0..self.m {
                let a = self.at(r, q);
                if a > PIVOT_TOL {
                    min_ratio = min_ratio.min(self.rhs(r).max(0.0) / a);
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            if min_ratio.is_finite() {
                let cutoff = min_ratio + RATIO_TOL * (1.0 + min_ratio);
                let mut best_a = 0.0;
                for r in 0..self.m {
                    let a = self.at(r, q);
                    if a <= PIVOT_TOL || self.rhs(r).max(0.0) / a > cutoff {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((lr, _)) if bland => self.basis[r] < self.basis[lr],
                        Some(_) => a > best_a,
                    };
                    if better {
                        leave = Some((r, self.rhs(r).max(0.0) / a));
                        best_a = a;
                    }
                }
            }
            let Some((p, ratio)) = leave else {
                // a column with no usable pivot and a drift-sized reduced cost is noise
                if self.obj[q] < NOISE_COST {
                    self.obj[q] = 0.0;
                    continue;
                }
                return Err(q);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(p, q);
            if self.pivots % REFACTOR_EVERY == 0 {
                self.refactor();
            }
        }
        Ok(false)
    }

    /// Recompute `B^-1 [A | b]` and the reduced costs from the original
    /// rows. Leaves the tableau untouched if the basis looks singular.
    fn refactor(&mut self) {
        let (m, stride) = (self.m, self.stride);
        let orig = DMatrix::from_row_slice(m, stride, &self.orig[..m * stride]);
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (b, &c) in self.basis.iter().enumerate() {
            bmat.set_column(b, &orig.column(c));
        }
        let lu = bmat.clone().lu();
        let Some(inv_full) = lu.solve(&orig) else {
            return;
        };
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&c| self.cost[c]));
        let Some(y) = bmat.transpose().lu().solve(&cb) else {
            return;
        };
        for r in 0..m {
            for c in 0..stride {
                let v = inv_full[(r, c)];
                self.t[r * stride + c] = if v.abs() < 1e-15 { 0.0 } else { v };
            }
        }
        for (b, &c) in self.basis.iter().enumerate() {
            for r in 0..m {
                self.t[r * stride + c] = if r == b { 1.0 } else { 0.0 };
            }
        }
        let yt = y.transpose() * &orig;
        for c in 0..stride {
            let base = if c < self.cols { self.cost[c] } else { 0.0 };
            self.obj[c] = base - yt[(0, c)];
        }
        for &c in &self.basis {
            self.obj[c] = 0.0;
        }
    }

    /// Pivot `start` columns into rows held by artificials, then repair
    /// overshot `<=` rows with their surplus column. Returns false if the
    /// resulting basis is not primal feasible.
    fn crash(
        &mut self,
        start: &[usize],
        n_struct: usize,
        slack_col: &[usize],
        surplus_col: &[usize],
    ) -> bool {
        for &q in start {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, q).abs();
                if self.basis[r] >= n_struct && a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                    best = Some((r, a));
                }
            }
            if let Some((r, _)) = best {
                self.pivot(r, q);
            }
        }
        self.pivots = 0;
        self.refactor();
        for r in 0..self.m {
            let v = self.rhs(r);
            if v >= 0.0 {
                continue;
            }
            if v > -FEAS_TOL {
                self.t[r * self.stride + self.cols] = 0.0;
                continue;
            }
            let row = slack_col.iter().position(|&c| c == self.basis[r]);
            match row.map(|k| surplus_col[k]) {
                Some(sur) if sur != usize::MAX && self.at(r, sur) < -PIVOT_TOL => {
                    self.pivot(r, sur)
                }
                _ => return false,
            }
        }
        true
    }

    fn remove_row(&mut self, r: usize) {
        let stride = self.stride;
        self.t.drain(r * stride..(r + 1) * stride);
        self.orig.drain(r * stride..(r + 1) * stride);
        self.basis.remove(r);
        self.m -= 1;
    }
}

/// Solve with the default pivot budget.
pub fn solve(lp: &LinearProgram) -> Outcome {
    solve_with_limit(lp, DEFAULT_MAX_PIVOTS)
}

pub fn solve_with_limit(lp: &LinearProgram, max_pivots: usize) -> Outcome {
    solve_from(lp, &[], max_pivots)
}

/// Solve starting from a crash basis: the columns in `start` are pivoted
/// in before phase one. A start whose columns determine a point satisfying
/// all equality rows lets phase one begin at (or near) feasibility, which
/// avoids long degenerate stalls. A start that does not fit is ignored.
pub fn solve_from(lp: &LinearProgram, start: &[usize], max_pivots: usize) -> Outcome {
    let outcome = run(lp, start, max_pivots);
    let Outcome::Optimal { x, .. } = &outcome else {
        return outcome;
    };
    let residual = primal_violation(lp, x);
    if residual <= CHECK_TOL {
        outcome
    } else if !start.is_empty() {
        // a crash basis can steer into ill-conditioned territory; start over cold
        run(lp, &[], max_pivots).validated(lp)
    } else {
        Outcome::Unstable { residual }
    }
}

impl Outcome {
    fn validated(self, lp: &LinearProgram) -> Outcome {
        match &self {
            Outcome::Optimal { x, .. } => {
                let residual = primal_violation(lp, x);
                if residual <= CHECK_TOL {
                    self
                } else {
                    Outcome::Unstable { residual }
                }
            }
            _ => self,
        }
    }
}

/// Largest violation of a row or of nonnegativity at `x`.
pub fn primal_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
    for row in &lp.rows {
        let lhs: f64 = row.coeffs.iter().map(|&(c, a)| a * x[c]).sum();
        let v = lhs - row.rhs;
        let v = match row.kind {
            RowKind::Eq => v.abs(),
            RowKind::Le => v.max(0.0),
        };
        if !v.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(v);
    }
    worst
}

fn run(lp: &LinearProgram, start: &[usize], max_pivots: usize) -> Outcome {
    let n = lp.objective.len();
    let m = lp.rows.len();

    // Column layout: structural | slack per <= row | artificial per row that needs one.
    let le_rows: Vec<usize> = (0..m).filter(|&r| lp.rows[r].kind == RowKind::Le).collect();
    let mut slack_col = vec![usize::MAX; m];
    for (k, &r) in le_rows.iter().enumerate() {
        slack_col[r] = n + k;
    }
    let n_struct = n + le_rows.len();
    // flip rows with negative rhs so the start basis is feasible
    let sign: Vec<f64> = lp
        .rows
        .iter()
        .map(|row| if row.rhs < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let needs_art: Vec<bool> = (0..m)
        .map(|r| lp.rows[r].kind == RowKind::Eq || sign[r] < 0.0)
        .collect();
    let mut art_col = vec![usize::MAX; m];
    let mut n_art = 0;
    for r in 0..m {
        if needs_art[r] {
            art_col[r] = n_struct + n_art;
            n_art += 1;
        }
    }
    // `<=` rows that a crash basis may overshoot get a surplus artificial
    let mut surplus_col = vec![usize::MAX; m];
    if !start.is_empty() {
        for r in 0..m {
            if !needs_art[r] {
                surplus_col[r] = n_struct + n_art;
                n_art += 1;
            }
        }
    }
    let cols = n_struct + n_art;
    let stride = cols + 1;

    let mut t = vec![0.0; m * stride];
    let mut basis = vec![0; m];
    for (r, row) in lp.rows.iter().enumerate() {
        let base = r * stride;
        for &(c, v) in &row.coeffs {
            t[base + c] += sign[r] * v;
        }
        if slack_col[r] != usize::MAX {
            t[base + slack_col[r]] = sign[r];
        }
        t[base + cols] = sign[r] * row.rhs;
        if needs_art[r] {
            t[base + art_col[r]] = 1.0;
            basis[r] = art_col[r];
        } else {
            basis[r] = slack_col[r];
        }
        if surplus_col[r] != usize::MAX {
            t[base + surplus_col[r]] = -1.0;
        }
    }

    // phase one: maximize -sum(artificials); reduced costs d = c - c_B B^-1 A
    let mut obj = vec![0.0; stride];
    for (r, &art) in art_col.iter().enumerate() {
        if art != usize::MAX {
            for c in 0..stride {
                obj[c] += t[r * stride + c];
            }
        }
    }
    for &art in art_col.iter().filter(|&&a| a != usize::MAX) {
        obj[art] = 0.0;
    }
    for &sur in surplus_col.iter().filter(|&&a| a != usize::MAX) {
        obj[sur] = -1.0;
    }

    let mut phase_one_cost = vec![0.0; cols];
    for &art in art_col
        .iter()
        .chain(&surplus_col)
        .filter(|&&a| a != usize::MAX)
    {
        phase_one_cost[art] = -1.0;
    }
    let mut tab = Tableau {
        m,
        cols,
        stride,
        orig: t.clone(),
        t,
        obj,
        basis,
        pivots: 0,
        cost: phase_one_cost,
    };

    if !start.is_empty() && !tab.crash(start, n_struct, &slack_col, &surplus_col) {
        // fall back to the all-artificial start
        return run(lp, &[], max_pivots);
    }

    if n_art > 0 {
        match tab.optimize(n_struct, max_pivots) {
            Ok(true) => {}
            Ok(false) => return Outcome::IterationLimit { pivots: tab.pivots },
            // phase one is bounded above by zero; a ray here is round-off
            Err(_) => return Outcome::IterationLimit { pivots: tab.pivots },
        }
        let infeasibility: f64 = (0..tab.m)
            .filter(|&r| tab.basis[r] >= n_struct)
            .map(|r| tab.rhs(r))
            .sum();
        if infeasibility > FEAS_TOL {
            // Phase-one duals y satisfy d_j = c_j - y A_j <= 0 and y b = -infeasibility,
            // so z = -y is a Farkas ray. Read y off the unit columns: artificials
            // (cost -1) give z_r = 1 + d, untouched slacks (cost 0) give z_r = d.
            let farkas = (0..m)
                .map(|r| {
                    let z = if art_col[r] != usize::MAX {
                        1.0 + tab.obj[art_col[r]]
                    } else {
                        tab.obj[slack_col[r]]
                    };
                    z * sign[r]
                })
                .collect();
            return Outcome::Infeasible {
                farkas,
                infeasibility,
            };
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.m {
            if tab.basis[r] >= n_struct {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..n_struct {
                    let a = tab.at(r, c).abs();
                    if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                        best = Some((c, a));
                    }
                }
                match best {
                    Some((c, _)) => tab.pivot(r, c),
                    None => {
                        tab.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // phase two
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let mut obj = vec![0.0; stride];
    obj[..cols].copy_from_slice(&cost);
    for r in 0..tab.m {
        let cb = cost[tab.basis[r]];
        if cb != 0.0 {
            for c in 0..stride {
                obj[c] -= cb * tab.at(r, c);
            }
        }
    }
    tab.obj = obj;
    tab.cost = cost;
    match tab.optimize(n_struct, max_pivots) {
        Ok(true) => {}
        Ok(false) => return Outcome::IterationLimit { pivots: tab.pivots },
        Err(column) => return Outcome::Unbounded { column },
    }

    polish(lp, &tab, n_struct, &slack_col)
}

/// Recompute the basic solution and duals from the original data.
fn polish(lp: &LinearProgram, tab: &Tableau, n_struct: usize, slack_col: &[usize]) -> Outcome {
    let n = lp.objective.len();
    let m_all = lp.rows.len();
    let basis = &tab.basis;
    let k = basis.len();

    let mut dense_rows: Vec<Vec<f64>> = vec![vec![0.0; n_struct]; m_all];
    for (r, row) in lp.rows.iter().enumerate() {
        for &(c, v) in &row.coeffs {
            dense_rows[r][c] += v;
        }
        if slack_col[r] != usize::MAX {
            dense_rows[r][slack_col[r]] = 1.0;
        }
    }
    // basic columns over all original rows; redundant rows were dropped from
    // the tableau, so pick an independent subset of size k
    let mut full = DMatrix::<f64>::zeros(m_all, k);
    for r in 0..m_all {
        for (b, &c) in basis.iter().enumerate() {
            full[(r, b)] = dense_rows[r][c];
        }
    }
    // choose k independent rows greedily via QR-free elimination on a copy
    let rows_kept = independent_rows(&full, k);
    let mut bmat = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (i, &r) in rows_kept.iter().enumerate() {
        for b in 0..k {
            bmat[(i, b)] = full[(r, b)];
        }
        rhs[i] = lp.rows[r].rhs;
    }
    let lu = bmat.clone().lu();
    let mut xb = match lu.solve(&rhs) {
        Some(v) => v,
        None => return tableau_solution(lp, tab, n),
    };
    // iterative refinement with twice-working-precision residuals, so
    // small components come out accurate relative to themselves
    for _ in 0..REFINE_STEPS {
        let r = DVector::from_iterator(
            k,
            (0..k).map(|i| {
                dot2((0..k).map(|b| (bmat[(i, b)], -xb[b])).chain([(rhs[i], 1.0)]))
            }),
        );
        match lu.solve(&r) {
            Some(d) if d.iter().all(|v| v.is_finite()) => xb += d,
            _ => break,
        }
    }
    let mut xs = vec![0.0; n_struct];
    for (b, &c) in basis.iter().enumerate() {
        xs[c] = xb[b];
    }
    if xs.iter().any(|&v| v < -FEAS_TOL || !v.is_finite()) {
        return tableau_solution(lp, tab, n);
    }
    let x: Vec<f64> = xs[..n].iter().map(|&v| v.max(0.0)).collect();

    let mut cb = DVector::<f64>::zeros(k);
    for (b, &c) in basis.iter().enumerate() {
        cb[b] = if c < n { lp.objective[c] } else { 0.0 };
    }
    let y_kept = bmat
        .transpose()
        .lu()
        .solve(&cb)
        .unwrap_or_else(|| DVector::zeros(k));
    let mut duals = vec![0.0; m_all];
    for (i, &r) in rows_kept.iter().enumerate() {
        duals[r] = y_kept[i];
    }
    let objective: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    let dual_obj: f64 = duals.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum();
    Outcome::Optimal {
        x,
        objective,
        duals,
        duality_gap: dual_obj - objective,
        basis: basis.clone(),
    }
}

/// Dot product accumulated in about twice the working precision
/// (Ogita, Rump and Oishi's `Dot2`).
fn dot2(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (a, b) in terms {
        let p = a * b;
        let perr = a.mul_add(b, -p);
        let t = sum + p;
        let z = t - sum;
        let serr = (sum - (t - z)) + (p - z);
        sum = t;
        comp += perr + serr;
    }
    sum + comp
}

fn tableau_solution(lp: &LinearProgram, tab: &Tableau, n: usize) -> Outcome {
    let mut x = vec![0.0; n];
    for r in 0..tab.m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let objective: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Outcome::Optimal {
        x,
        objective,
        duals: vec![f64::NAN; lp.rows.len()],
        duality_gap: f64::NAN,
        basis: tab.basis.clone(),
    }
}

/// Indices of `k` linearly independent rows of `a` (m x k, rank k),
/// chosen by Gaussian elimination with partial pivoting over rows.
fn independent_rows(a: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let m = a.nrows();
    let mut work = a.clone();
    let mut used = vec![false; m];
    let mut chosen = Vec::with_capacity(k);
    for col in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..m {
            if !used[r] {
                let v = work[(r, col)].abs();
                if v > 1e-12 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
        }
        let Some((p, _)) = best else { continue };
        used[p] = true;
        chosen.push(p);
        let pv = work[(p, col)];
        for r in 0..m {
            if !used[r] {
                let f = work[(r, col)] / pv;
                if f != 0.0 {
                    for c in col..k {
                        let sub = f * work[(p, c)];
                        work[(r, c)] -= sub;
                    }
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}
