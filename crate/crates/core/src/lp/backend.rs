//! HiGHS-backed solver returning the same [`Outcome`] as the dense simplex.
//!
//! Optima come with HiGHS row duals, so the duality gap is `b.y - c.x`. On
//! infeasible input, a box-normalized Farkas program is solved as well; its
//! optimum is both the ray and the minimum L1 row violation, since the two
//! programs are dual to each other.

use highs::{HighsModelStatus, Model, RowProblem, Sense};

use super::simplex::{primal_violation, LinearProgram, Outcome, RowKind};

/// Accepted row violation of a returned optimum.
const CHECK_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-10;

/// Solver settings tried in turn until an optimum passes [`CHECK_TOL`].
#[derive(Clone, Copy)]
enum Attempt {
    Simplex,
    Presolved,
    InteriorPoint,
}

const ATTEMPTS: [Attempt; 3] = [Attempt::Simplex, Attempt::Presolved, Attempt::InteriorPoint];

fn configure(model: &mut Model) {
    configure_for(model, Attempt::Simplex);
}

fn configure_for(model: &mut Model, attempt: Attempt) {
    model.set_option("output_flag", false);
    model.set_option("threads", 1);
    model.set_option("primal_feasibility_tolerance", FEASIBILITY_TOL);
    model.set_option("dual_feasibility_tolerance", FEASIBILITY_TOL);
    let (solver, presolve) = match attempt {
        Attempt::Simplex => ("simplex", "off"),
        Attempt::Presolved => ("simplex", "on"),
        Attempt::InteriorPoint => ("ipm", "off"),
    };
    model.set_option("solver", solver);
    model.set_option("presolve", presolve);
    if let Attempt::InteriorPoint = attempt {
        model.set_option("run_crossover", "on");
        model.set_option("ipm_optimality_tolerance", FEASIBILITY_TOL);
    }
}

fn primal_model(lp: &LinearProgram, attempt: Attempt) -> Model {
    let mut pb = RowProblem::default();
    let cols: Vec<_> = lp
        .objective
        .iter()
        .map(|&c| pb.add_column(c, 0.0..))
        .collect();
    for row in &lp.rows {
        let terms: Vec<_> = row.coeffs.iter().map(|&(c, v)| (cols[c], v)).collect();
        match row.kind {
            RowKind::Eq => pb.add_row(row.rhs..=row.rhs, terms),
            RowKind::Le => pb.add_row(..=row.rhs, terms),
        }
    }
    let mut model = pb.optimise(Sense::Maximise);
    configure_for(&mut model, attempt);
    model
}

/// `max b.y  s.t.  A^T y <= 0`, `y` in `[-1, 1]` (`[-1, 0]` on `<=` rows).
fn farkas(lp: &LinearProgram) -> Option<(Vec<f64>, f64)> {
    let mut pb = RowProblem::default();
    let ys: Vec<_> = lp
        .rows
        .iter()
        .map(|row| match row.kind {
            RowKind::Eq => pb.add_column(row.rhs, -1.0..=1.0),
            RowKind::Le => pb.add_column(row.rhs, -1.0..=0.0),
        })
        .collect();
    let mut by_col = vec![Vec::new(); lp.objective.len()];
    for (r, row) in lp.rows.iter().enumerate() {
        for &(c, v) in &row.coeffs {
            by_col[c].push((ys[r], v));
        }
    }
    for terms in by_col {
        pb.add_row(..=0.0, terms);
    }
    let mut model = pb.optimise(Sense::Maximise);
    configure(&mut model);
    let solved = model.try_solve().ok()?;
    if solved.status() != HighsModelStatus::Optimal {
        return None;
    }
    let y = solved.get_solution().columns().to_vec();
    let value = y.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum();
    Some((y, value))
}

pub fn solve(lp: &LinearProgram) -> Outcome {
    let mut last = Outcome::Unstable { residual: f64::NAN };
    for attempt in ATTEMPTS {
        match solve_with(lp, attempt) {
            Outcome::Unstable { residual } => last = Outcome::Unstable { residual },
            done => return done,
        }
    }
    last
}

/// Primary settings only, for best-effort programs that have a fallback.
pub fn solve_once(lp: &LinearProgram) -> Outcome {
    solve_with(lp, Attempt::Simplex)
}

fn solve_with(lp: &LinearProgram, attempt: Attempt) -> Outcome {
    let Ok(solved) = primal_model(lp, attempt).try_solve() else {
        return Outcome::Unstable { residual: f64::NAN };
    };
    match solved.status() {
        HighsModelStatus::Optimal => {}
        HighsModelStatus::Infeasible => {
            return match farkas(lp) {
                Some((farkas, infeasibility)) if infeasibility > 0.0 => Outcome::Infeasible {
                    farkas,
                    infeasibility,
                },
                _ => Outcome::Unstable { residual: f64::NAN },
            }
        }
        HighsModelStatus::Unbounded => return Outcome::Unbounded { column: 0 },
        _ => return Outcome::Unstable { residual: f64::NAN },
    }
    let sol = solved.get_solution();
    let x: Vec<f64> = sol.columns().iter().map(|v| v.max(0.0)).collect();
    let residual = primal_violation(lp, &x);
    if residual > CHECK_TOL {
        return Outcome::Unstable { residual };
    }
    let duals = sol.dual_rows().to_vec();
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let by: f64 = duals.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum();
    Outcome::Optimal {
        x,
        objective,
        duals,
        duality_gap: by - objective,
        basis: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::simplex::{self, Row};

    fn row(coeffs: &[(usize, f64)], kind: RowKind, rhs: f64) -> Row {
        Row {
            coeffs: coeffs.to_vec(),
            kind,
            rhs,
        }
    }

    #[test]
    fn small_program_matches_dense_simplex() {
        // max x0 + 2 x1  s.t.  x0 + x1 <= 4, x0 + 3 x1 <= 6, x0 - x1 = 1
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], RowKind::Le, 4.0),
                row(&[(0, 1.0), (1, 3.0)], RowKind::Le, 6.0),
                row(&[(0, 1.0), (1, -1.0)], RowKind::Eq, 1.0),
            ],
        };
        let Outcome::Optimal { objective: a, .. } = simplex::solve(&lp) else {
            panic!("dense simplex should be optimal");
        };
        let Outcome::Optimal {
            objective: b,
            duality_gap,
            duals,
            ..
        } = solve(&lp)
        else {
            panic!("backend should be optimal");
        };
        assert!((a - b).abs() < 1e-12);
        assert!((b - 4.75).abs() < 1e-12);
        assert!(duality_gap.abs() < 1e-12);
        // only the second row binds
        assert!(duals[0].abs() < 1e-12 && duals[1] > 0.0);
    }

    #[test]
    fn infeasible_program_has_ray() {
        // x0 + x1 = 1 and x0 + x1 <= 0.5
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], RowKind::Eq, 1.0),
                row(&[(0, 1.0), (1, 1.0)], RowKind::Le, 0.5),
            ],
        };
        let Outcome::Infeasible {
            farkas,
            infeasibility,
        } = solve(&lp)
        else {
            panic!("should be infeasible");
        };
        assert!((infeasibility - 0.5).abs() < 1e-12);
        assert!(farkas[1] <= 0.0);
        assert!(farkas[0] * 1.0 + farkas[1] * 0.5 > 0.0);
        // y A <= 0 on both columns
        assert!(farkas[0] + farkas[1] <= 1e-12);
    }
}
