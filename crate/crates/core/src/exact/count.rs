//! Exact integer point counting by branch and bound over LP ranges.
//!
//! Equations with a unit coefficient are eliminated by substitution, negated
//! equations are removed by inclusion–exclusion, and variables that share no
//! row are counted independently.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::deadline::Deadline;
use crate::error::BackendError;
use crate::lp::{integer_bounds, IntegerBounds};
use crate::model::{CanonicalConstraint, Polytope, RealPolytope, RowKind};

/// `coeffs · x (<= | = | !=) rhs` over the integers.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Row {
    a: Vec<i128>,
    b: i128,
}

impl Row {
    fn is_constant(&self) -> bool {
        self.a.iter().all(|&c| c == 0)
    }
}

#[derive(Clone, Debug, Default)]
struct System {
    n: usize,
    le: Vec<Row>,
    eq: Vec<Row>,
    ne: Vec<Row>,
}

fn to_i128(v: &BigInt) -> Result<i128, BackendError> {
    v.to_i128().ok_or(BackendError::Overflow)
}

fn row_from(coeffs: &[BigInt], rhs: &BigInt) -> Result<Row, BackendError> {
    Ok(Row {
        a: coeffs.iter().map(to_i128).collect::<Result<_, _>>()?,
        b: to_i128(rhs)?,
    })
}

fn mul(a: i128, b: i128) -> Result<i128, BackendError> {
    a.checked_mul(b).ok_or(BackendError::Overflow)
}

fn sub(a: i128, b: i128) -> Result<i128, BackendError> {
    a.checked_sub(b).ok_or(BackendError::Overflow)
}

/// Replaces `x_k` by `(b - Σ_{j≠k} e_j x_j) / e_k` where `e_k = ±1`, and drops column `k`.
fn substitute(row: &Row, e: &Row, k: usize) -> Result<Row, BackendError> {
    let f = mul(row.a[k], e.a[k])?; // row.a[k] / e.a[k] since e.a[k] = ±1
    let mut a = Vec::with_capacity(row.a.len() - 1);
    for j in 0..row.a.len() {
        if j != k {
            a.push(sub(row.a[j], mul(f, e.a[j])?)?);
        }
    }
    Ok(Row { a, b: sub(row.b, mul(f, e.b)?)? })
}

/// Fixes `x_k = v` and drops column `k`.
fn fix(row: &Row, k: usize, v: i128) -> Result<Row, BackendError> {
    let mut a = row.a.clone();
    let c = a.remove(k);
    Ok(Row { a, b: sub(row.b, mul(c, v)?)? })
}

fn gcd_all(a: &[i128]) -> i128 {
    a.iter().fold(0i128, |g, &c| g.gcd(&c))
}

enum Count {
    Finite(BigInt),
    Infinite,
}

struct Counter<'a> {
    deadline: &'a Deadline,
}

impl Counter<'_> {
    fn count(&self, mut sys: System) -> Result<Count, BackendError> {
        self.deadline.check()?;
        // equations: substitute unit pivots, keep the rest as inequality pairs
        while let Some(pos) = sys.eq.iter().position(|e| e.a.iter().any(|&c| c == 1 || c == -1)) {
            let e = sys.eq.swap_remove(pos);
            let k = e.a.iter().position(|&c| c == 1 || c == -1).unwrap();
            let rewrite = |rows: &[Row]| rows.iter().map(|r| substitute(r, &e, k)).collect::<Result<Vec<_>, _>>();
            sys.le = rewrite(&sys.le)?;
            sys.eq = rewrite(&sys.eq)?;
            sys.ne = rewrite(&sys.ne)?;
            sys.n -= 1;
        }
        for e in std::mem::take(&mut sys.eq) {
            let g = gcd_all(&e.a);
            if g == 0 {
                if e.b != 0 {
                    return Ok(Count::Finite(BigInt::zero()));
                }
                continue;
            }
            if e.b % g != 0 {
                return Ok(Count::Finite(BigInt::zero()));
            }
            let neg = Row { a: e.a.iter().map(|c| -c).collect(), b: -e.b };
            sys.le.push(e);
            sys.le.push(neg);
        }
        // constant rows
        let mut le = Vec::with_capacity(sys.le.len());
        for r in sys.le {
            if r.is_constant() {
                if r.b < 0 {
                    return Ok(Count::Finite(BigInt::zero()));
                }
            } else {
                le.push(r);
            }
        }
        sys.le = le;
        let mut ne = Vec::with_capacity(sys.ne.len());
        for r in sys.ne {
            if r.is_constant() {
                if r.b == 0 {
                    return Ok(Count::Finite(BigInt::zero()));
                }
            } else {
                let g = gcd_all(&r.a);
                if r.b % g == 0 {
                    ne.push(r);
                }
            }
        }
        sys.ne = ne;

        if let Some(first) = sys.ne.pop() {
            // |A \ {e}| = |A| - |A ∩ {e}|
            let mut with_eq = sys.clone();
            with_eq.eq.push(first);
            let all = self.count(sys)?;
            let on = self.count(with_eq)?;
            return Ok(match (all, on) {
                (Count::Finite(a), Count::Finite(b)) => Count::Finite(a - b),
                (Count::Finite(a), Count::Infinite) if a.is_zero() => Count::Finite(a),
                _ => Count::Infinite,
            });
        }
        self.count_inequalities(sys.n, sys.le)
    }

    fn count_inequalities(&self, n: usize, rows: Vec<Row>) -> Result<Count, BackendError> {
        if n == 0 {
            return Ok(Count::Finite(BigInt::one()));
        }
        let comps = components(n, &rows);
        if comps.len() > 1 {
            let mut product = BigInt::one();
            let mut infinite = false;
            for (vars, rs) in comps {
                let sub_rows = rs
                    .iter()
                    .map(|&r| Row { a: vars.iter().map(|&j| rows[r].a[j]).collect(), b: rows[r].b })
                    .collect();
                match self.count_inequalities(vars.len(), sub_rows)? {
                    Count::Finite(c) if c.is_zero() => return Ok(Count::Finite(c)),
                    Count::Finite(c) => product *= c,
                    Count::Infinite => infinite = true,
                }
            }
            return Ok(if infinite { Count::Infinite } else { Count::Finite(product) });
        }
        if n == 1 {
            let (mut lo, mut hi): (Option<i128>, Option<i128>) = (None, None);
            for r in &rows {
                let c = r.a[0];
                if c > 0 {
                    let v = Integer::div_floor(&r.b, &c);
                    hi = Some(hi.map_or(v, |h| h.min(v)));
                } else {
                    let v = Integer::div_ceil(&r.b, &c);
                    lo = Some(lo.map_or(v, |l| l.max(v)));
                }
            }
            return Ok(match (lo, hi) {
                (Some(l), Some(h)) if h >= l => Count::Finite(BigInt::from(h) - BigInt::from(l) + 1),
                (Some(l), Some(h)) if h < l => Count::Finite(BigInt::zero()),
                _ => Count::Infinite,
            });
        }

        let mut relaxed = RealPolytope::new(n);
        for r in &rows {
            relaxed.push_le(r.a.iter().map(|&c| c as f64).collect(), r.b as f64);
        }
        let mut occurrences = vec![0usize; n];
        for r in &rows {
            for (j, &c) in r.a.iter().enumerate() {
                if c != 0 {
                    occurrences[j] += 1;
                }
            }
        }
        // smallest range first, then the most connected variable
        let mut best: Option<(usize, i128, i128)> = None;
        for j in 0..n {
            match integer_bounds(&relaxed, j)? {
                IntegerBounds::Empty => return Ok(Count::Finite(BigInt::zero())),
                IntegerBounds::Unbounded => return Ok(Count::Infinite),
                IntegerBounds::Range(lo, hi) => {
                    let better = match best {
                        None => true,
                        Some((k, l, h)) => {
                            (hi - lo, std::cmp::Reverse(occurrences[j])) < (h - l, std::cmp::Reverse(occurrences[k]))
                        }
                    };
                    if better {
                        best = Some((j, lo, hi));
                    }
                }
            }
        }
        let (k, lo, hi) = best.expect("n >= 2");
        let mut total = BigInt::zero();
        let mut v = lo;
        while v <= hi {
            let fixed = rows.iter().map(|r| fix(r, k, v)).collect::<Result<Vec<_>, _>>()?;
            if fixed.iter().all(|r| !r.is_constant() || r.b >= 0) {
                let rest: Vec<Row> = fixed.into_iter().filter(|r| !r.is_constant()).collect();
                match self.count_inequalities(n - 1, rest)? {
                    Count::Finite(c) => total += c,
                    Count::Infinite => return Ok(Count::Infinite),
                }
            }
            v += 1;
        }
        Ok(Count::Finite(total))
    }
}

/// Groups variables connected through shared rows; returns (variables, rows) per group.
fn components(n: usize, rows: &[Row]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for r in rows {
        let mut vars = r.a.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, _)| j);
        if let Some(first) = vars.next() {
            for j in vars {
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for j in 0..n {
        let root = find(&mut parent, j);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => g.1.push(j),
            None => groups.push((root, vec![j], Vec::new())),
        }
    }
    for (ri, r) in rows.iter().enumerate() {
        if let Some(j) = r.a.iter().position(|&c| c != 0) {
            let root = find(&mut parent, j);
            groups.iter_mut().find(|g| g.0 == root).unwrap().2.push(ri);
        }
    }
    groups.into_iter().map(|(_, v, r)| (v, r)).collect()
}

/// Number of integer points of `p` avoiding every hyperplane in `deferred`
/// (negated equalities). Strict rows `a·x < b` become `a·x <= b - 1`.
pub fn count_integer_points(
    p: &Polytope,
    deferred: &[CanonicalConstraint],
    deadline: &Deadline,
) -> Result<BigInt, BackendError> {
    if p.empty {
        return Ok(BigInt::zero());
    }
    let mut sys = System { n: p.dim, ..System::default() };
    for r in &p.rows {
        let mut row = row_from(&r.coeffs, &r.rhs)?;
        match r.kind {
            RowKind::Le => sys.le.push(row),
            RowKind::LeStrict => {
                row.b = sub(row.b, 1)?;
                sys.le.push(row);
            }
            RowKind::Eq => sys.eq.push(row),
        }
    }
    for c in deferred {
        sys.ne.push(row_from(&c.coeffs, &c.rhs)?);
    }
    match (Counter { deadline }).count(sys)? {
        Count::Finite(c) => Ok(c),
        Count::Infinite => Err(BackendError::InfiniteCount),
    }
}
