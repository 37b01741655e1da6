//! The result of a run and its text rendering.

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

use crate::model::{Backends, NumericKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Header {
    pub bool_vars: usize,
    pub clauses: usize,
    pub numeric_vars: usize,
    pub linear_constraints: usize,
    pub numeric_kind: Option<NumericKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSettings {
    pub word_length: u32,
    pub min_coeff: u64,
    pub max_coeff: u64,
    pub seed: u64,
    pub burnin: usize,
    pub backends: Backends,
}

/// A per-bunch backend value or the error that prevented it.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome<T> {
    Value(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Outcome::Value(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub volume: f64,
    /// Phase count `l`; zero when no sampling was needed.
    pub phases: usize,
    pub round1_volume: Option<f64>,
    /// Per-phase sample size of the value reported (first or second round).
    pub samples_per_phase: usize,
    pub second_round: bool,
    /// Fresh hit-and-run points over both rounds.
    pub fresh_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BunchRecord {
    pub index: usize,
    /// Signed literals of the partial assignment.
    pub literals: Vec<i32>,
    pub free_user_bools: usize,
    /// `2^free_user_bools`, in decimal.
    pub multiplier: String,
    pub estimate: Option<Outcome<Estimate>>,
    pub exact_volume: Option<Outcome<f64>>,
    /// Decimal integer.
    pub integer_count: Option<Outcome<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Totals {
    /// `None` when the backend did not run or failed on some bunch.
    pub estimate: Option<f64>,
    pub exact_volume: Option<f64>,
    pub integer_count: Option<String>,
    /// `count / (2^w)^n`, when counting with bounds enabled.
    pub frequency: Option<f64>,
    /// Mean per-phase sample size of sampled bunches divided by `l`.
    pub average_coefficient: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub input: String,
    pub header: Header,
    pub settings: RunSettings,
    pub satisfiable: bool,
    pub bunches: Vec<BunchRecord>,
    pub totals: Totals,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Plain decimal for ordinary magnitudes, scientific otherwise.
fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e9).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Report {
    pub fn has_backend_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let h = &self.header;
        let _ = writeln!(s, "Input: {}", self.input);
        let _ = writeln!(s, "Number of bool vars: {}", h.bool_vars);
        let _ = writeln!(s, "Number of clauses: {}", h.clauses);
        let _ = writeln!(s, "Number of numeric vars: {}", h.numeric_vars);
        let _ = writeln!(s, "Number of linear constraints: {}", h.linear_constraints);
        if !self.satisfiable {
            let _ = writeln!(s, "The formula is unsatisfiable.");
        }
        let _ = writeln!(s, "Bunches: {}", self.bunches.len());
        for b in &self.bunches {
            let lits: Vec<String> = b.literals.iter().map(i32::to_string).collect();
            let _ = writeln!(s, "Bunch {}: [{}]", b.index + 1, lits.join(" "));
            if let Some(e) = &b.estimate {
                match e {
                    Outcome::Value(e) => {
                        let _ = write!(s, "  estimate: {:.8} * {}", e.volume, b.multiplier);
                        if e.phases > 0 {
                            let _ = write!(
                                s,
                                "  (l = {}, S = {}{})",
                                e.phases,
                                e.samples_per_phase,
                                if e.second_round { ", second round" } else { "" }
                            );
                        }
                        s.push('\n');
                    }
                    Outcome::Error(m) => {
                        let _ = writeln!(s, "  estimate: error: {m}");
                    }
                }
            }
            if let Some(v) = &b.exact_volume {
                match v {
                    Outcome::Value(v) => {
                        let _ = writeln!(s, "  volume: {:.8} * {}", v, b.multiplier);
                    }
                    Outcome::Error(m) => {
                        let _ = writeln!(s, "  volume: error: {m}");
                    }
                }
            }
            if let Some(c) = &b.integer_count {
                match c {
                    Outcome::Value(c) => {
                        let _ = writeln!(s, "  count: {} * {}", c, b.multiplier);
                    }
                    Outcome::Error(m) => {
                        let _ = writeln!(s, "  count: error: {m}");
                    }
                }
            }
        }
        let backends = self.settings.backends;
        let undefined = || "undefined".to_string();
        let t = &self.totals;
        if backends.estimate {
            let _ = writeln!(s, "Total approximation: {}", t.estimate.map_or_else(undefined, num));
            if let Some(c) = t.average_coefficient {
                let _ = writeln!(s, "Average sampling coefficient: {c:.2}");
            }
        }
        if backends.exact_volume {
            let _ = writeln!(s, "Total volume: {}", t.exact_volume.map_or_else(undefined, num));
        }
        if backends.integer_count {
            let _ = writeln!(s, "Total count: {}", t.integer_count.clone().unwrap_or_else(undefined));
            if let Some(f) = t.frequency {
                let _ = writeln!(s, "Frequency: {}", num(f));
            }
        }
        for e in &self.errors {
            let _ = writeln!(s, "Error: {e}");
        }
        let _ = writeln!(s, "Seed: {}", self.settings.seed);
        let _ = writeln!(s, "Time: {:.3} s", self.wall_time.as_secs_f64());
        s
    }
}
