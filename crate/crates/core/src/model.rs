//! Shared domain types: linear constraints, formulas, bunches and polytopes,
//! plus the rules that canonicalize constraints and turn a bunch into the
//! polytope it denotes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

/// Comparison operator of a raw linear constraint `a·x op b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "=" => CmpOp::Eq,
            _ => return None,
        })
    }

    fn holds(self, lhs: &BigRational, rhs: &BigRational) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }
}

/// A constraint `coeffs · x op rhs` as written in the input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub coeffs: Vec<BigRational>,
    pub op: CmpOp,
    pub rhs: BigRational,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<BigRational>, op: CmpOp, rhs: BigRational) -> Self {
        LinearConstraint { coeffs, op, rhs }
    }

    /// Convenience constructor from integer data.
    pub fn from_ints(coeffs: &[i64], op: CmpOp, rhs: i64) -> Self {
        LinearConstraint {
            coeffs: coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect(),
            op,
            rhs: BigRational::from_integer(rhs.into()),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_satisfied_by(&self, point: &[BigRational]) -> bool {
        self.op.holds(&dot_rational(&self.coeffs, point), &self.rhs)
    }

    pub fn normalize(&self) -> CanonicalConstraint {
        normalize_constraint(self)
    }
}

fn dot_rational(coeffs: &[BigRational], point: &[BigRational]) -> BigRational {
    coeffs
        .iter()
        .zip(point)
        .fold(BigRational::zero(), |acc, (a, x)| acc + a * x)
}

/// Kind of a canonical row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RowKind {
    Le,
    LeStrict,
    Eq,
}

impl RowKind {
    pub fn is_strict(self) -> bool {
        self == RowKind::LeStrict
    }
}

/// Classification of a constraint whose coefficients are all zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Triviality {
    Proper,
    Tautology,
    Contradiction,
}

/// A constraint in canonical form: `coeffs · x (<= | < | =) rhs` with integer
/// data whose overall GCD is one. Equalities have a positive leading coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalConstraint {
    pub coeffs: Vec<BigInt>,
    pub kind: RowKind,
    pub rhs: BigInt,
    pub triviality: Triviality,
}

impl CanonicalConstraint {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_strict(&self) -> bool {
        self.kind.is_strict()
    }

    /// Back to the raw representation (op `<`, `<=` or `=`).
    pub fn to_raw(&self) -> LinearConstraint {
        let op = match self.kind {
            RowKind::Le => CmpOp::Le,
            RowKind::LeStrict => CmpOp::Lt,
            RowKind::Eq => CmpOp::Eq,
        };
        LinearConstraint {
            coeffs: self.coeffs.iter().cloned().map(BigRational::from_integer).collect(),
            op,
            rhs: BigRational::from_integer(self.rhs.clone()),
        }
    }

    pub fn is_satisfied_by(&self, point: &[BigRational]) -> bool {
        self.to_raw().is_satisfied_by(point)
    }

    /// The constraint describing the complement, when it is a single halfspace.
    /// Returns `None` for equalities, whose complement is a disequality.
    pub fn complement(&self) -> Option<CanonicalConstraint> {
        let neg: Vec<BigInt> = self.coeffs.iter().map(|c| -c).collect();
        let kind = match self.kind {
            // not (a.x <= b)  <=>  -a.x < -b
            RowKind::Le => RowKind::LeStrict,
            // not (a.x < b)   <=>  -a.x <= -b
            RowKind::LeStrict => RowKind::Le,
            RowKind::Eq => return None,
        };
        let raw = LinearConstraint {
            coeffs: neg.into_iter().map(BigRational::from_integer).collect(),
            op: if kind == RowKind::Le { CmpOp::Le } else { CmpOp::Lt },
            rhs: BigRational::from_integer(-self.rhs.clone()),
        };
        Some(normalize_constraint(&raw))
    }

    pub fn to_f64_row(&self) -> (Vec<f64>, f64) {
        (
            self.coeffs.iter().map(big_to_f64).collect(),
            big_to_f64(&self.rhs),
        )
    }
}

pub(crate) fn big_to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or(if v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Canonicalize a raw constraint.
///
/// `>`/`>=` are flipped to `<`/`<=` by negating both sides, then the whole row
/// is scaled by the LCM of all denominators and divided by the GCD of all
/// entries (coefficients and right-hand side together), which keeps the
/// scaling factor positive. Equalities additionally get a positive leading
/// coefficient. All-zero rows are classified as tautology or contradiction.
pub fn normalize_constraint(raw: &LinearConstraint) -> CanonicalConstraint {
    let (mut coeffs, mut rhs, kind) = match raw.op {
        CmpOp::Le => (raw.coeffs.clone(), raw.rhs.clone(), RowKind::Le),
        CmpOp::Lt => (raw.coeffs.clone(), raw.rhs.clone(), RowKind::LeStrict),
        CmpOp::Ge => (negate_all(&raw.coeffs), -raw.rhs.clone(), RowKind::Le),
        CmpOp::Gt => (negate_all(&raw.coeffs), -raw.rhs.clone(), RowKind::LeStrict),
        CmpOp::Eq => (raw.coeffs.clone(), raw.rhs.clone(), RowKind::Eq),
    };

    if kind == RowKind::Eq {
        if let Some(lead) = coeffs.iter().find(|c| !c.is_zero()) {
            if lead.is_negative() {
                coeffs = negate_all(&coeffs);
                rhs = -rhs;
            }
        }
    }

    let lcm = coeffs
        .iter()
        .chain(std::iter::once(&rhs))
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let mut ints: Vec<BigInt> = coeffs
        .iter()
        .map(|q| (q * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let mut rhs_int = (&rhs * BigRational::from_integer(lcm)).to_integer();

    let gcd = ints
        .iter()
        .chain(std::iter::once(&rhs_int))
        .fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if !gcd.is_zero() && !gcd.is_one() {
        for v in ints.iter_mut() {
            *v = &*v / &gcd;
        }
        rhs_int = &rhs_int / &gcd;
    }

    let triviality = if ints.iter().all(|c| c.is_zero()) {
        let holds = match kind {
            RowKind::Le => !rhs_int.is_negative(),
            RowKind::LeStrict => rhs_int.is_positive(),
            RowKind::Eq => rhs_int.is_zero(),
        };
        if holds {
            Triviality::Tautology
        } else {
            Triviality::Contradiction
        }
    } else {
        Triviality::Proper
    };

    CanonicalConstraint {
        coeffs: ints,
        kind,
        rhs: rhs_int,
        triviality,
    }
}

fn negate_all(v: &[BigRational]) -> Vec<BigRational> {
    v.iter().map(|c| -c.clone()).collect()
}

/// A propositional literal over 1-based variable ids (DIMACS convention).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: usize, positive: bool) -> Lit {
        assert!(var >= 1 && var <= i32::MAX as usize, "variable id out of range");
        let v = var as i32;
        Lit(if positive { v } else { -v })
    }

    pub fn from_dimacs(v: i32) -> Lit {
        assert!(v != 0);
        Lit(v)
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Whether the literal is true when its variable takes `value`.
    pub fn satisfied_by(self, value: bool) -> bool {
        self.is_positive() == value
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Clause = Vec<Lit>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericKind {
    Int,
    Real,
}

/// CNF skeleton with theory atoms attached to some of its Boolean variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    pub num_bool_vars: usize,
    pub clauses: Vec<Clause>,
    /// Boolean variable id -> the constraint it stands for.
    pub atoms: BTreeMap<usize, LinearConstraint>,
    pub num_numeric_vars: usize,
    /// `None` when the input format does not declare sorts.
    pub numeric_kind: Option<NumericKind>,
    pub var_names: Vec<String>,
    /// Auxiliary variables introduced by CNF conversion.
    pub aux_vars: BTreeSet<usize>,
}

impl Formula {
    pub fn is_atom(&self, var: usize) -> bool {
        self.atoms.contains_key(&var)
    }

    pub fn is_aux(&self, var: usize) -> bool {
        self.aux_vars.contains(&var)
    }

    /// Boolean variables that are neither atoms nor auxiliaries.
    pub fn is_user_bool(&self, var: usize) -> bool {
        !self.is_atom(var) && !self.is_aux(var)
    }

    pub fn canonical_atoms(&self) -> BTreeMap<usize, CanonicalConstraint> {
        self.atoms
            .iter()
            .map(|(&v, c)| (v, normalize_constraint(c)))
            .collect()
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for (ci, clause) in self.clauses.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for lit in clause {
                if lit.var() == 0 || lit.var() > self.num_bool_vars {
                    return Err(format!("clause {} references undeclared variable {}", ci + 1, lit.var()));
                }
                if !seen.insert(lit.var()) {
                    return Err(format!("clause {} repeats variable {}", ci + 1, lit.var()));
                }
            }
        }
        for (&v, c) in &self.atoms {
            if v == 0 || v > self.num_bool_vars {
                return Err(format!("atom bound to undeclared variable {v}"));
            }
            if c.dim() != self.num_numeric_vars {
                return Err(format!("atom {v} has {} coefficients, expected {}", c.dim(), self.num_numeric_vars));
            }
            if self.aux_vars.contains(&v) {
                return Err(format!("variable {v} is both an atom and an auxiliary"));
            }
        }
        Ok(())
    }
}

/// A partial assignment that propositionally satisfies every clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bunch {
    pub assignment: BTreeMap<usize, bool>,
    /// Unassigned Boolean variables that are neither atoms nor auxiliaries.
    pub free_user_bools: usize,
}

impl Bunch {
    pub fn literals(&self) -> Vec<Lit> {
        self.assignment.iter().map(|(&v, &b)| Lit::new(v, b)).collect()
    }

    pub fn satisfies(&self, clause: &[Lit]) -> bool {
        clause
            .iter()
            .any(|l| self.assignment.get(&l.var()).is_some_and(|&b| l.satisfied_by(b)))
    }
}

/// `2^k` where `k` counts the free user Booleans of the bunch.
pub fn bunch_multiplier(bunch: &Bunch) -> BigUint {
    BigUint::one() << bunch.free_user_bools
}

/// A row `coeffs · x (<= | < | =) rhs` with exact integer data.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactRow {
    pub coeffs: Vec<BigInt>,
    pub rhs: BigInt,
    pub kind: RowKind,
}

/// Exact H-representation of a bunch's solution set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polytope {
    pub dim: usize,
    pub rows: Vec<ExactRow>,
    /// Set when a contradiction row was met; the polytope is then empty.
    pub empty: bool,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Polytope { dim, rows: Vec::new(), empty: false }
    }

    /// Adds a canonical inequality or equality; trivial rows are folded away.
    pub fn push(&mut self, c: &CanonicalConstraint) {
        debug_assert_eq!(c.dim(), self.dim);
        match c.triviality {
            Triviality::Tautology => {}
            Triviality::Contradiction => self.empty = true,
            Triviality::Proper => self.rows.push(ExactRow {
                coeffs: c.coeffs.clone(),
                rhs: c.rhs.clone(),
                kind: c.kind,
            }),
        }
    }

    pub fn has_equality(&self) -> bool {
        self.rows.iter().any(|r| r.kind == RowKind::Eq)
    }

    pub fn contains(&self, point: &[BigRational]) -> bool {
        !self.empty
            && self.rows.iter().all(|r| {
                let lhs = r
                    .coeffs
                    .iter()
                    .zip(point)
                    .fold(BigRational::zero(), |acc, (a, x)| acc + BigRational::from_integer(a.clone()) * x);
                let rhs = BigRational::from_integer(r.rhs.clone());
                match r.kind {
                    RowKind::Le => lhs <= rhs,
                    RowKind::LeStrict => lhs < rhs,
                    RowKind::Eq => lhs == rhs,
                }
            })
    }

    /// Floating-point view for the numeric backends.
    pub fn to_real(&self) -> RealPolytope {
        let mut p = RealPolytope::new(self.dim);
        for r in &self.rows {
            p.push(r.coeffs.iter().map(big_to_f64).collect(), big_to_f64(&r.rhs), r.kind);
        }
        if self.empty {
            // 0 <= -1
            p.push(vec![0.0; self.dim], -1.0, RowKind::Le);
        }
        p
    }
}

/// Floating-point H-representation `A·x (<= | =) b`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPolytope {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

impl RealPolytope {
    pub fn new(dim: usize) -> Self {
        RealPolytope { dim, rows: Vec::new(), rhs: Vec::new(), kinds: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>, rhs: f64, kind: RowKind) {
        assert_eq!(row.len(), self.dim, "row length must match dimension");
        self.rows.push(row);
        self.rhs.push(rhs);
        self.kinds.push(kind);
    }

    pub fn push_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.push(row, rhs, RowKind::Le);
    }

    /// The box `lo <= x_j <= hi` for every coordinate.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        let mut p = RealPolytope::new(dim);
        for j in 0..dim {
            let mut up = vec![0.0; dim];
            up[j] = 1.0;
            p.push_le(up, hi);
            let mut down = vec![0.0; dim];
            down[j] = -1.0;
            p.push_le(down, -lo);
        }
        p
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn has_equality(&self) -> bool {
        self.kinds.contains(&RowKind::Eq)
    }

    /// Non-strict membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().zip(&self.rhs).zip(&self.kinds).all(|((a, &b), &k)| {
            let lhs = dot(a, x);
            match k {
                RowKind::Eq => (lhs - b).abs() <= tol,
                _ => lhs <= b + tol,
            }
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Which backends a run should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub struct Backends {
    pub estimate: bool,
    pub exact_volume: bool,
    pub integer_count: bool,
}

impl Backends {
    pub fn any(&self) -> bool {
        self.estimate || self.exact_volume || self.integer_count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputMode {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Word length; 0 disables the implicit box bounds.
    pub word_length: u32,
    pub min_coeff: u64,
    pub max_coeff: u64,
    pub backends: Backends,
    pub seed: u64,
    pub output: OutputMode,
    pub timeout: Option<std::time::Duration>,
    /// Hit-and-run steps discarded before the first stored point of a phase.
    pub burnin: usize,
    /// Worker threads for per-bunch backends; 0 runs sequentially.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            word_length: 8,
            min_coeff: 40,
            max_coeff: 1600,
            backends: Backends { estimate: true, ..Backends::default() },
            seed: 0,
            output: OutputMode::Text,
            timeout: None,
            burnin: 0,
            threads: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_coeff == 0 || self.max_coeff == 0 {
            return Err("sampling coefficients must be positive".into());
        }
        if self.min_coeff > self.max_coeff {
            return Err(format!(
                "minimum sampling coefficient {} exceeds maximum {}",
                self.min_coeff, self.max_coeff
            ));
        }
        if self.word_length > 62 {
            return Err(format!("word length {} is outside 0..=62", self.word_length));
        }
        Ok(())
    }

    /// Inclusive bounds `[-2^(w-1), 2^(w-1)-1]`, or `None` when disabled.
    pub fn word_bounds(&self) -> Option<(i64, i64)> {
        if self.word_length == 0 {
            return None;
        }
        let half = 1i64 << (self.word_length - 1);
        Some((-half, half - 1))
    }
}

/// The polytope selected by a bunch, plus the negated equalities it asserts.
///
/// Positive atoms contribute their constraint, negative atoms its complement;
/// a negated equality cannot be written as a halfspace and is returned in the
/// deferred list. Word-length bounds are appended when enabled.
pub fn bunch_polytope(
    bunch: &Bunch,
    formula: &Formula,
    config: &SolverConfig,
) -> (Polytope, Vec<CanonicalConstraint>) {
    let n = formula.num_numeric_vars;
    let mut poly = Polytope::new(n);
    let mut deferred = Vec::new();
    for (&var, &value) in &bunch.assignment {
        let Some(raw) = formula.atoms.get(&var) else { continue };
        let canon = normalize_constraint(raw);
        if value {
            poly.push(&canon);
        } else {
            match canon.complement() {
                Some(c) => poly.push(&c),
                None => match canon.triviality {
                    // not (0 = 0) is unsatisfiable, not (0 = c) always holds
                    Triviality::Tautology => poly.empty = true,
                    Triviality::Contradiction => {}
                    Triviality::Proper => deferred.push(canon),
                },
            }
        }
    }
    if let Some((lo, hi)) = config.word_bounds() {
        for j in 0..n {
            let mut up = vec![BigInt::zero(); n];
            up[j] = BigInt::one();
            poly.push(&normalize_constraint(&LinearConstraint {
                coeffs: up.into_iter().map(BigRational::from_integer).collect(),
                op: CmpOp::Le,
                rhs: BigRational::from_integer(hi.into()),
            }));
            let mut down = vec![BigInt::zero(); n];
            down[j] = -BigInt::one();
            poly.push(&normalize_constraint(&LinearConstraint {
                coeffs: down.into_iter().map(BigRational::from_integer).collect(),
                op: CmpOp::Le,
                rhs: BigRational::from_integer((-lo).into()),
            }));
        }
    }
    (poly, deferred)
}
