//! Plain-text LP dump in a CPLEX-LP-like layout, one constraint per line:
//!
//! ```text
//! \ two-way relay ONC policy LP
//! Maximize
//!  obj: 1 x4_0_0 + 1 x4_1_1
//! Subject To
//!  bal_0_0: -0.75 x4_0_0 + 0.5 x2_0_1 = 0
//!  norm: 1 x4_0_0 + 1 x2_0_1 = 1
//!  delay: 1 x2_0_1 <= 3
//! End
//! ```
//!
//! Coefficients are written with shortest round-trip precision, so parsing a
//! dump reproduces the program exactly. All variables are nonnegative.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::simplex::{LinearProgram, Row, RowKind};
use super::LpProblem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
}

/// A parsed dump: named rows and columns plus the program itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDump {
    pub columns: Vec<String>,
    pub row_names: Vec<String>,
    pub program: LinearProgram,
}

pub fn write_dump(problem: &LpProblem) -> String {
    let lp = problem.to_linear_program();
    let names: Vec<String> = (0..problem.vars.len())
        .map(|c| problem.vars.name(c))
        .collect();
    let p = &problem.params;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ two-way relay ONC policy LP: lambda_a={} lambda_b={} n_a={} n_b={} d_max={}",
        p.lambda_a, p.lambda_b, p.n_a, p.n_b, p.d_max
    );
    out.push_str("Maximize\n obj:");
    let obj: Vec<(usize, f64)> = lp
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0.0)
        .map(|(c, &v)| (c, v))
        .collect();
    write_terms(&mut out, &obj, &names);
    out.push_str("\nSubject To\n");
    for (row, name) in lp.rows.iter().zip(problem.row_names()) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &row.coeffs, &names);
        let op = match row.kind {
            RowKind::Eq => "=",
            RowKind::Le => "<=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    // columns that appear in no row still have to be declared
    out.push_str("Bounds\n");
    for name in &names {
        let _ = writeln!(out, " {name} >= 0");
    }
    out.push_str("End\n");
    out
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(c, v)) in terms.iter().enumerate() {
        if k == 0 {
            let _ = write!(out, " {v} {}", names[c]);
        } else if v < 0.0 {
            let _ = write!(out, " - {} {}", -v, names[c]);
        } else {
            let _ = write!(out, " + {v} {}", names[c]);
        }
    }
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Done,
}

pub fn parse_dump(text: &str) -> Result<LpDump, DumpError> {
    let mut section = Section::Preamble;
    let mut columns: Vec<String> = Vec::new();
    let mut col_of: HashMap<String, usize> = HashMap::new();
    let mut objective_terms: Vec<(usize, f64)> = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut row_names = Vec::new();
    let mut saw_objective = false;
    let mut declared: Vec<usize> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "maximize" => {
                section = Section::Objective;
                continue;
            }
            "subject to" => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        let err = |msg: String| DumpError::Syntax { line: line_no, msg };
        match section {
            Section::Preamble | Section::Done => {
                return Err(err(format!("unexpected content `{line}`")))
            }
            Section::Objective => {
                let body = strip_label(line).1;
                objective_terms = parse_terms(body, &mut columns, &mut col_of).map_err(err)?;
                saw_objective = true;
            }
            Section::Constraints => {
                let (name, body) = strip_label(line);
                let (lhs, kind, rhs) = if let Some((l, r)) = body.split_once("<=") {
                    (l, RowKind::Le, r)
                } else if let Some((l, r)) = body.split_once('=') {
                    (l, RowKind::Eq, r)
                } else {
                    return Err(err("constraint without `=` or `<=`".into()));
                };
                let rhs: f64 = rhs
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad right-hand side `{}`", rhs.trim())))?;
                let coeffs = parse_terms(lhs, &mut columns, &mut col_of).map_err(err)?;
                row_names.push(name.unwrap_or("").to_string());
                rows.push(Row { coeffs, kind, rhs });
            }
            Section::Bounds => {
                let Some((name, bound)) = line.split_once(">=") else {
                    return Err(err(format!("unsupported bound `{line}`")));
                };
                if bound.trim().parse::<f64>() != Ok(0.0) {
                    return Err(err("only `>= 0` bounds are supported".into()));
                }
                declared.push(intern(name.trim(), &mut columns, &mut col_of));
            }
        }
    }
    if !saw_objective {
        return Err(DumpError::MissingSection("Maximize"));
    }
    // declared bounds fix the column order; undeclared columns follow
    let mut order = declared;
    let mut seen = vec![false; columns.len()];
    order.retain(|&c| !std::mem::replace(&mut seen[c], true));
    order.extend((0..columns.len()).filter(|&c| !seen[c]));
    let mut new_index = vec![0; columns.len()];
    for (k, &c) in order.iter().enumerate() {
        new_index[c] = k;
    }
    let columns = order.iter().map(|&c| columns[c].clone()).collect();
    let mut objective = vec![0.0; new_index.len()];
    for (c, v) in objective_terms {
        objective[new_index[c]] += v;
    }
    for row in &mut rows {
        for term in &mut row.coeffs {
            term.0 = new_index[term.0];
        }
        row.coeffs.sort_by_key(|t| t.0);
    }
    Ok(LpDump {
        columns,
        row_names,
        program: LinearProgram { objective, rows },
    })
}

fn strip_label(line: &str) -> (Option<&str>, &str) {
    match line.split_once(':') {
        Some((name, rest)) => (Some(name.trim()), rest),
        None => (None, line),
    }
}

fn intern(name: &str, columns: &mut Vec<String>, col_of: &mut HashMap<String, usize>) -> usize {
    *col_of.entry(name.to_string()).or_insert_with(|| {
        columns.push(name.to_string());
        columns.len() - 1
    })
}

fn parse_terms(
    body: &str,
    columns: &mut Vec<String>,
    col_of: &mut HashMap<String, usize>,
) -> Result<Vec<(usize, f64)>, String> {
    let tokens: Vec<&str> = body.split_whitespace().collect();
    if tokens == ["0"] {
        return Ok(vec![]);
    }
    let mut terms = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let mut sign = 1.0;
        if tokens[k] == "+" || tokens[k] == "-" {
            if tokens[k] == "-" {
                sign = -1.0;
            }
            k += 1;
        }
        let coef: f64 = tokens
            .get(k)
            .ok_or("dangling sign")?
            .parse()
            .map_err(|_| format!("expected coefficient, got `{}`", tokens[k]))?;
        let name = tokens.get(k + 1).ok_or("coefficient without variable")?;
        terms.push((intern(name, columns, col_of), sign * coef));
        k += 2;
    }
    Ok(terms)
}
