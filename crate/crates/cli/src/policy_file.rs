//! Plain-text policy tables.
//!
//! ```text
//! # onc policy
//! n_a 15
//! n_b 15
//! # i j g_a g_b g_both g_idle pi
//! 0 0 0.0 0.0 0.0 1.0 0.2513
//! ...
//! ```
//!
//! Probabilities are written with Rust's shortest round-trip formatting, so a
//! table survives a write/read cycle bit for bit. The `pi` column is
//! informational; readers recompute it from the chain.

use std::fmt::Write as _;

use onc_core::{Policy, QueueState, StateSpace, StationaryDistribution};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
    #[error("state ({i}, {j}) listed twice")]
    Duplicate { i: usize, j: usize },
    #[error("state ({i}, {j}) missing")]
    Missing { i: usize, j: usize },
}

pub struct PolicyTable {
    pub policy: Policy,
    pub pi: Option<Vec<f64>>,
}

pub fn write_policy(policy: &Policy, pi: Option<&StationaryDistribution>) -> String {
    let space = policy.space();
    let mut out = String::new();
    let _ = writeln!(out, "# onc policy");
    let _ = writeln!(out, "n_a {}", space.n_a);
    let _ = writeln!(out, "n_b {}", space.n_b);
    let _ = writeln!(out, "# i j g_a g_b g_both g_idle pi");
    for (k, s) in space.states().enumerate() {
        let g = policy.get(s);
        let _ = write!(out, "{} {} {:?} {:?} {:?} {:?}", s.i, s.j, g[0], g[1], g[2], g[3]);
        match pi {
            Some(pi) => {
                let _ = writeln!(out, " {:?}", pi.get(k));
            }
            None => out.push('\n'),
        }
    }
    out
}

pub fn read_policy(text: &str) -> Result<PolicyTable, PolicyFileError> {
    let mut n_a = None;
    let mut n_b = None;
    let mut rows: Vec<(usize, QueueState, [f64; 4], Option<f64>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let syntax = |message: String| PolicyFileError::Syntax { line, message };
        match fields[0] {
            "n_a" | "n_b" => {
                let [_, v] = fields[..] else {
                    return Err(syntax(format!("expected `{} <size>`", fields[0])));
                };
                let v: usize = v
                    .parse()
                    .map_err(|_| syntax(format!("bad buffer size `{v}`")))?;
                if fields[0] == "n_a" {
                    n_a = Some(v);
                } else {
                    n_b = Some(v);
                }
            }
            _ => {
                if fields.len() != 6 && fields.len() != 7 {
                    return Err(syntax(format!(
                        "expected 6 or 7 fields, found {}",
                        fields.len()
                    )));
                }
                let idx = |f: &str| {
                    f.parse::<usize>()
                        .map_err(|_| syntax(format!("bad state index `{f}`")))
                };
                let num = |f: &str| {
                    f.parse::<f64>()
                        .map_err(|_| syntax(format!("bad number `{f}`")))
                };
                let s = QueueState::new(idx(fields[0])?, idx(fields[1])?);
                let mut g = [0.0; 4];
                for (slot, f) in g.iter_mut().zip(&fields[2..6]) {
                    *slot = num(f)?;
                }
                let pi = fields.get(6).map(|f| num(f)).transpose()?;
                rows.push((line, s, g, pi));
            }
        }
    }
    let space = StateSpace::new(
        n_a.ok_or(PolicyFileError::MissingHeader("n_a"))?,
        n_b.ok_or(PolicyFileError::MissingHeader("n_b"))?,
    );
    let mut table: Vec<Option<[f64; 4]>> = vec![None; space.len()];
    let mut pi = vec![0.0; space.len()];
    let mut all_pi = true;
    for (line, s, g, p) in rows {
        if !space.contains(s) {
            return Err(PolicyFileError::Syntax {
                line,
                message: format!("state ({}, {}) outside {}x{}", s.i, s.j, space.n_a, space.n_b),
            });
        }
        let k = space.index(s);
        if table[k].replace(g).is_some() {
            return Err(PolicyFileError::Duplicate { i: s.i, j: s.j });
        }
        match p {
            Some(p) => pi[k] = p,
            None => all_pi = false,
        }
    }
    let table = table
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            let s = space.state(k);
            g.ok_or(PolicyFileError::Missing { i: s.i, j: s.j })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolicyTable {
        policy: Policy::from_table(space, table),
        pi: all_pi.then_some(pi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let space = StateSpace::new(2, 3);
        let policy = Policy::from_fn(space, |s| {
            let x = 1.0 / (3.0 + s.i as f64 + 7.0 * s.j as f64);
            [x, 0.1 * x, 1e-300, 1.0 - 1.1 * x - 1e-300]
        });
        let pi = StationaryDistribution::from_probs(
            (0..space.len()).map(|k| (k as f64 + 0.5) / 97.0).collect(),
        );
        let read = read_policy(&write_policy(&policy, Some(&pi))).unwrap();
        assert_eq!(read.policy, policy);
        assert_eq!(read.pi.unwrap(), pi.pi);
    }

    #[test]
    fn reports_line_of_bad_number() {
        let text = "n_a 1\nn_b 1\n0 0 0 0 0 1\n0 1 0 one 0 0\n";
        assert_eq!(
            read_policy(text).err().unwrap(),
            PolicyFileError::Syntax {
                line: 4,
                message: "bad number `one`".into()
            }
        );
    }

    #[test]
    fn missing_state_detected() {
        let text = "n_a 1\nn_b 1\n0 0 0 0 0 1\n0 1 0 1 0 0\n1 0 1 0 0 0\n";
        assert_eq!(
            read_policy(text).err().unwrap(),
            PolicyFileError::Missing { i: 1, j: 1 }
        );
    }
}
