use std::fmt;

use crate::error::Result;
use crate::mdp::argmax;
use crate::neural::{QNetwork, Workspace};
use crate::scalar::Scalar;

/// Action values for one input, labeled by action name.
#[derive(Debug, Clone, PartialEq)]
pub struct QProbe {
    pub action_names: Vec<String>,
    pub values: Vec<f64>,
    pub argmax: usize,
}

impl QProbe {
    /// `action,q,greedy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("action,q,greedy\n");
        for (i, (name, q)) in self.action_names.iter().zip(&self.values).enumerate() {
            out.push_str(&format!("{name},{q},{}\n", u8::from(i == self.argmax)));
        }
        out
    }
}

impl fmt::Display for QProbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.action_names.iter().map(String::len).max().unwrap_or(0).max(6);
        writeln!(f, "{:<width$}  {:>12}", "action", "Q")?;
        for (i, (name, q)) in self.action_names.iter().zip(&self.values).enumerate() {
            let mark = if i == self.argmax { "  <- argmax" } else { "" };
            writeln!(f, "{name:<width$}  {q:>12.6}{mark}")?;
        }
        Ok(())
    }
}

/// Evaluates `net` on one scaled input. Names beyond `action_names` are
/// filled in as `a<id>`.
pub fn q_probe<F: Scalar>(net: &QNetwork<F>, input: &[F], action_names: &[String]) -> Result<QProbe> {
    let mut ws = Workspace::new(net, 1);
    let q = net.q_values(&mut ws, input)?;
    let names = (0..q.len())
        .map(|i| action_names.get(i).cloned().unwrap_or_else(|| format!("a{i}")))
        .collect();
    Ok(QProbe {
        action_names: names,
        values: q.iter().map(|v| v.as_f64()).collect(),
        argmax: argmax(q),
    })
}
