//! The "Enhanced DIMACS" format: a DIMACS CNF whose header also declares
//! numeric variables and linear constraints, with `m` lines binding a
//! Boolean variable to a constraint.
//!
//! ```text
//! c comment
//! p cnf v lc BOOLS CLAUSES NUMVARS LACS
//! m1 1 -1 < 0
//! 1 -3 0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::ParseError;
use crate::model::{CmpOp, Formula, LinearConstraint, Lit};

struct Header {
    bools: usize,
    clauses: usize,
    numvars: usize,
    lacs: usize,
}

pub fn parse_volce(text: &[u8]) -> Result<Formula, ParseError> {
    let text = std::str::from_utf8(text).map_err(|_| ParseError::new(0, "input is not valid UTF-8"))?;
    let mut header: Option<Header> = None;
    let mut atoms: BTreeMap<usize, LinearConstraint> = BTreeMap::new();
    let mut clauses: Vec<Vec<Lit>> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(ParseError::new(lineno, "duplicate header line"));
            }
            header = Some(parse_header(rest, lineno)?);
            continue;
        }
        let Some(h) = header.as_ref() else {
            return Err(ParseError::new(lineno, "expected header `p cnf v lc ...` before data"));
        };
        if let Some(rest) = line.strip_prefix('m') {
            let (var, c) = parse_m_line(rest, h, lineno)?;
            if atoms.insert(var, c).is_some() {
                return Err(ParseError::new(lineno, format!("duplicate constraint for variable {var}")));
            }
            continue;
        }
        parse_clause_line(line, h, lineno, &mut clauses)?;
    }

    let h = header.ok_or_else(|| ParseError::new(0, "missing header line `p cnf v lc ...`"))?;
    if clauses.len() != h.clauses {
        return Err(ParseError::new(
            0,
            format!("header declares {} clauses, found {}", h.clauses, clauses.len()),
        ));
    }
    if atoms.len() != h.lacs {
        return Err(ParseError::new(
            0,
            format!("header declares {} linear constraints, found {}", h.lacs, atoms.len()),
        ));
    }
    Ok(Formula {
        num_bool_vars: h.bools,
        clauses,
        atoms,
        num_numeric_vars: h.numvars,
        numeric_kind: None,
        var_names: (1..=h.numvars).map(|j| format!("x{j}")).collect(),
        aux_vars: BTreeSet::new(),
    })
}

fn parse_header(rest: &str, lineno: usize) -> Result<Header, ParseError> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    if toks.len() != 7 || toks[0] != "cnf" || toks[1] != "v" || toks[2] != "lc" {
        return Err(ParseError::new(lineno, "header must read `p cnf v lc BOOLS CLAUSES NUMVARS LACS`"));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ParseError::new(lineno, format!("bad header count `{s}`")))
    };
    Ok(Header {
        bools: num(toks[3])?,
        clauses: num(toks[4])?,
        numvars: num(toks[5])?,
        lacs: num(toks[6])?,
    })
}

fn parse_m_line(rest: &str, h: &Header, lineno: usize) -> Result<(usize, LinearConstraint), ParseError> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    if toks.len() != h.numvars + 3 {
        return Err(ParseError::new(
            lineno,
            format!(
                "constraint line needs {} coefficients, an operator and a bound; found {} tokens",
                h.numvars,
                toks.len().saturating_sub(1)
            ),
        ));
    }
    let var: usize = toks[0]
        .parse()
        .map_err(|_| ParseError::new(lineno, format!("bad variable index `{}`", toks[0])))?;
    if var == 0 || var > h.bools {
        return Err(ParseError::new(lineno, format!("variable {var} outside 1..={}", h.bools)));
    }
    let coeffs = toks[1..=h.numvars]
        .iter()
        .map(|t| parse_number(t).ok_or_else(|| ParseError::new(lineno, format!("bad coefficient `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let op_tok = toks[h.numvars + 1];
    let op = CmpOp::from_symbol(op_tok)
        .ok_or_else(|| ParseError::new(lineno, format!("unknown operator `{op_tok}`")))?;
    let rhs_tok = toks[h.numvars + 2];
    let rhs = parse_number(rhs_tok).ok_or_else(|| ParseError::new(lineno, format!("bad bound `{rhs_tok}`")))?;
    Ok((var, LinearConstraint::new(coeffs, op, rhs)))
}

fn parse_clause_line(
    line: &str,
    h: &Header,
    lineno: usize,
    clauses: &mut Vec<Vec<Lit>>,
) -> Result<(), ParseError> {
    let mut current: Vec<Lit> = Vec::new();
    let mut open = false;
    for tok in line.split_whitespace() {
        let v: i64 = tok
            .parse()
            .map_err(|_| ParseError::new(lineno, format!("bad literal `{tok}`")))?;
        if v == 0 {
            clauses.push(std::mem::take(&mut current));
            open = false;
            continue;
        }
        open = true;
        let var = v.unsigned_abs() as usize;
        if var > h.bools {
            return Err(ParseError::new(lineno, format!("variable {var} outside 1..={}", h.bools)));
        }
        if current.iter().any(|l| l.var() == var) {
            return Err(ParseError::new(lineno, format!("variable {var} repeated in a clause")));
        }
        current.push(Lit::from_dimacs(v as i32));
    }
    if open {
        return Err(ParseError::new(lineno, "clause is missing its terminating 0"));
    }
    Ok(())
}

/// Integer, decimal (`0.25`, `-3.`) or fraction (`1/3`) literal as an exact rational.
pub(crate) fn parse_number(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((num, den)) = body.split_once('/') {
        let n: BigInt = num.parse().ok()?;
        let d: BigInt = den.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        BigRational::new(n, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        if (int.is_empty() && frac.is_empty())
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return None;
        }
        let digits = format!("{int}{frac}");
        let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        BigRational::new(n, d)
    } else {
        if !body.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        BigRational::from_integer(body.parse().ok()?)
    };
    Some(if neg { -value } else { value })
}

fn format_number(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Serializes a formula in the Enhanced DIMACS format.
pub fn print_volce(f: &Formula) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "p cnf v lc {} {} {} {}",
        f.num_bool_vars,
        f.clauses.len(),
        f.num_numeric_vars,
        f.atoms.len()
    );
    for (var, c) in &f.atoms {
        let _ = write!(out, "m{var}");
        for a in &c.coeffs {
            let _ = write!(out, " {}", format_number(a));
        }
        let _ = writeln!(out, " {} {}", c.op.symbol(), format_number(&c.rhs));
    }
    for clause in &f.clauses {
        for lit in clause {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}
