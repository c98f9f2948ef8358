//! Versioned CSV schemas for everything the CLI writes.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Int,
    Real,
    Text,
}

pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [(&'static str, Column)],
}

use Column::*;

pub const LEARNING_CURVE: Schema = Schema {
    name: "learning_curve",
    version: 1,
    columns: &[("step", Int), ("episodes", Int), ("train_return_mean", Real), ("eval_mean", Real), ("eval_sigma", Real), ("fps", Real)],
};

pub const EVAL_SCORES: Schema = Schema {
    name: "eval_scores",
    version: 1,
    columns: &[("episode", Int), ("noops", Int), ("score", Real)],
};

pub const PROBE: Schema = Schema {
    name: "probe",
    version: 1,
    columns: &[("step", Int), ("action", Text), ("q", Real), ("greedy", Int)],
};

pub const BENCH: Schema = Schema {
    name: "bench",
    version: 1,
    columns: &[("mode", Text), ("frames", Int), ("seconds", Real), ("fps", Real)],
};

pub const ALL: [&Schema; 4] = [&LEARNING_CURVE, &EVAL_SCORES, &PROBE, &BENCH];

/// `name/version` pairs, echoed into every run directory.
pub fn versions() -> String {
    ALL.iter().map(|s| format!("{}/{}", s.name, s.version)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("{schema}: header `{found}` does not match `{expected}`")]
    Header { schema: &'static str, expected: String, found: String },

    #[error("{schema} row {row}: expected {expected} fields, found {found}")]
    Width { schema: &'static str, row: usize, expected: usize, found: usize },

    #[error("{schema} row {row}: column `{column}` has bad value `{value}`")]
    Value { schema: &'static str, row: usize, column: &'static str, value: String },
}

impl Schema {
    pub fn header(&self) -> String {
        self.columns.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(",")
    }

    /// Checks the header and every cell; returns the number of data rows.
    pub fn validate(&self, csv: &str) -> Result<usize, SchemaError> {
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or("");
        if header != self.header() {
            return Err(SchemaError::Header { schema: self.name, expected: self.header(), found: header.into() });
        }
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != self.columns.len() {
                return Err(SchemaError::Width { schema: self.name, row: i + 1, expected: self.columns.len(), found: cells.len() });
            }
            for (&(column, kind), cell) in self.columns.iter().zip(&cells) {
                let ok = match kind {
                    Int => cell.parse::<u64>().is_ok(),
                    // NaN marks "no data" (e.g. no finished training episode)
                    Real => cell.parse::<f64>().is_ok(),
                    Text => !cell.is_empty(),
                };
                if !ok {
                    return Err(SchemaError::Value { schema: self.name, row: i + 1, column, value: cell.to_string() });
                }
            }
            rows += 1;
        }
        Ok(rows)
    }
}
