//! Flat text format for tabular MDPs.
//!
//! ```text
//! # comment
//! states 3
//! actions 2
//! terminal 2
//! 0 1 1 1.0 0.0      # s a s' prob reward
//! 1 1 2 1.0 1.0
//! ```
//!
//! `states` and `actions` must precede any transition line. `terminal` may be
//! repeated and lists any number of state ids. Transition lines for the same
//! `(s, a)` accumulate. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;

use super::{Outcome, TabularMdp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn parse_mdp<F: Scalar>(text: &str) -> Result<TabularMdp<F>> {
    let mut states: Option<usize> = None;
    let mut actions: Option<usize> = None;
    let mut terminals = Vec::new();
    let mut outcomes: Vec<Vec<Outcome<F>>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut fields = line.split_whitespace();
        let head = fields.next().expect("non-empty line");
        match head {
            "states" | "actions" => {
                let n: usize = fields
                    .next()
                    .ok_or_else(|| err(format!("`{head}` needs a count")))?
                    .parse()
                    .map_err(|e| err(format!("bad count: {e}")))?;
                if fields.next().is_some() {
                    return Err(err(format!("trailing fields after `{head}`")));
                }
                let slot = if head == "states" { &mut states } else { &mut actions };
                if slot.replace(n).is_some() {
                    return Err(err(format!("duplicate `{head}` header")));
                }
                if let (Some(s), Some(a)) = (states, actions) {
                    outcomes = vec![Vec::new(); s * a];
                }
            }
            "terminal" => {
                for f in fields {
                    terminals.push(f.parse().map_err(|e| err(format!("bad terminal id: {e}")))?);
                }
            }
            _ => {
                let (Some(ns), Some(na)) = (states, actions) else {
                    return Err(err("transition before `states`/`actions` headers".into()));
                };
                let cols: Vec<&str> = std::iter::once(head).chain(fields).collect();
                if cols.len() != 5 {
                    return Err(err(format!("expected `s a s' prob reward`, got {} fields", cols.len())));
                }
                let idx = |c: &str, what: &str, limit: usize| -> Result<usize> {
                    let v: usize = c.parse().map_err(|e| err(format!("bad {what}: {e}")))?;
                    if v >= limit {
                        return Err(err(format!("{what} {v} out of range (limit {limit})")));
                    }
                    Ok(v)
                };
                let s = idx(cols[0], "state", ns)?;
                let a = idx(cols[1], "action", na)?;
                let next = idx(cols[2], "next state", ns)?;
                let real = |c: &str, what: &str| -> Result<F> {
                    let v: f64 = c.parse().map_err(|e| err(format!("bad {what}: {e}")))?;
                    Ok(F::of(v))
                };
                let prob = real(cols[3], "probability")?;
                let reward = real(cols[4], "reward")?;
                outcomes[s * na + a].push(Outcome { next, prob, reward });
            }
        }
    }
    let (Some(ns), Some(na)) = (states, actions) else {
        return Err(Error::Parse {
            line: 0,
            msg: "missing `states` or `actions` header".into(),
        });
    };
    TabularMdp::new(ns, na, outcomes, &terminals)
}

pub fn write_mdp<F: Scalar>(mdp: &TabularMdp<F>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states {}", mdp.num_states());
    let _ = writeln!(out, "actions {}", mdp.num_actions());
    let terms: Vec<String> = mdp.terminals().map(|t| t.to_string()).collect();
    if !terms.is_empty() {
        let _ = writeln!(out, "terminal {}", terms.join(" "));
    }
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            for o in mdp.outcomes(s, a) {
                let _ = writeln!(out, "{s} {a} {} {} {}", o.next, o.prob.as_f64(), o.reward.as_f64());
            }
        }
    }
    out
}
