//! Input formats. Files ending in `.smt2` are read as SMT-LIBv2, everything
//! else as the DIMACS-like `.vs` format.

use std::path::Path;

use crate::error::{Error, ParseError};
use crate::model::Formula;

pub mod smt2;
pub mod tseitin;
pub mod volce;

pub use smt2::parse_smt2;
pub use tseitin::{tseitin_cnf, BoolExpr, Cnf};
pub use volce::{parse_volce, print_volce};

/// The running example in `.vs` form.
pub const F1_VS: &str = "c It is an example, f1.vs.
p cnf v lc 7 7 2 6
c Linear Constraints part.
m1 1 -1 < 0
m3 1 1 < 1
m4 1 0 <= 1
m5 0 1 <= 1
m6 1 0 >= 0
m7 0 1 >= 0
c CNF part.
1 -3 0
1 -2 3 0
-1 3 0
4 0
5 0
6 0
7 0
";

/// The same formula in SMT-LIBv2.
pub const F1_SMT2: &str = "(set-logic QF_LRA)
(set-info :f1.smt2)
(set-info :smt-lib-version 2.0)
(set-info :status sat)
(declare-fun x () Real)
(declare-fun y () Real)
(declare-fun b () Bool)
(assert (and (<= x 1) (<= y 1) (>= x 0) (>= y 0)))
(assert (let ((v1 (< (+ x y) 1)) (v2 (< x y)))
(and (or v1 (not v2)) (or v1 v2 b) (or (not v1) v2))))
(check-sat)
(exit)
";

pub fn is_smt2_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "smt2")
}

pub fn parse_bytes(bytes: &[u8], smt2: bool) -> Result<Formula, ParseError> {
    if smt2 {
        parse_smt2(bytes)
    } else {
        parse_volce(bytes)
    }
}

pub fn parse_file(path: &Path) -> Result<Formula, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_bytes(&bytes, is_smt2_path(path))
        .map_err(|source| Error::Parse { path: path.display().to_string(), source })
}
