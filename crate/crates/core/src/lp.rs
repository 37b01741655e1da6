//! Dense two-phase simplex over free variables, and the LP queries built on
//! it: directional optimization, feasibility witnesses, Chebyshev centers and
//! integer variable ranges.
//!
//! Strict rows are relaxed to non-strict ones. Pivoting uses Dantzig's rule
//! and falls back to Bland's rule after a run of degenerate pivots, so results
//! are deterministic for identical inputs.

use crate::error::LpError;
use crate::model::{dot, norm, RealPolytope, RowKind};

/// Feasibility tolerance of the simplex.
pub const FEAS_TOL: f64 = 1e-7;
/// Inscribed radius at or below which a body is treated as flat.
pub const FLAT_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-6;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Interior {
    Center { point: Vec<f64>, radius: f64 },
    Degenerate,
    Infeasible,
    /// Arbitrarily large balls fit inside.
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegerBounds {
    Range(i128, i128),
    Empty,
    Unbounded,
}

/// Optimizes `objective · x` over the non-strict relaxation of `p`.
pub fn lp_optimize(p: &RealPolytope, objective: &[f64], sense: Sense) -> Result<LpOutcome, LpError> {
    assert_eq!(objective.len(), p.dim);
    let c: Vec<f64> = match sense {
        Sense::Max => objective.to_vec(),
        Sense::Min => objective.iter().map(|v| -v).collect(),
    };
    let out = solve(p.dim, &p.rows, &p.rhs, &p.kinds, Some(&c))?;
    Ok(match out {
        Solved::Point(x) => {
            let value = dot(objective, &x);
            LpOutcome::Optimal { value, point: x }
        }
        Solved::Infeasible => LpOutcome::Infeasible,
        Solved::Unbounded => LpOutcome::Unbounded,
    })
}

/// A point of the non-strict relaxation, or `None` when it is empty.
pub fn lp_feasible(p: &RealPolytope) -> Result<Option<Vec<f64>>, LpError> {
    match solve(p.dim, &p.rows, &p.rhs, &p.kinds, None)? {
        Solved::Point(x) => Ok(Some(x)),
        Solved::Infeasible => Ok(None),
        Solved::Unbounded => unreachable!("feasibility has no objective"),
    }
}

/// Chebyshev center: maximize `r` subject to `a_i·x + r‖a_i‖ <= b_i`.
pub fn interior_point(p: &RealPolytope) -> Result<Interior, LpError> {
    let n = p.dim;
    let mut aug = RealPolytope::new(n + 1);
    for ((row, &b), &k) in p.rows.iter().zip(&p.rhs).zip(&p.kinds) {
        let nrm = norm(row);
        let mut r = row.clone();
        if k == RowKind::Eq {
            // an equality leaves no room for a ball
            r.push(nrm);
            aug.push_le(r.clone(), b);
            let mut neg: Vec<f64> = row.iter().map(|v| -v).collect();
            neg.push(nrm);
            aug.push_le(neg, -b);
        } else {
            r.push(nrm);
            aug.push_le(r, b);
        }
    }
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    match lp_optimize(&aug, &obj, Sense::Max)? {
        LpOutcome::Optimal { value, mut point } => {
            if value < -FEAS_TOL {
                return Ok(Interior::Infeasible);
            }
            if value <= FLAT_TOL {
                return Ok(Interior::Degenerate);
            }
            point.truncate(n);
            Ok(Interior::Center { point, radius: value })
        }
        LpOutcome::Infeasible => Ok(Interior::Infeasible),
        LpOutcome::Unbounded => Ok(Interior::Unbounded),
    }
}

/// `[ceil(min x_j), floor(max x_j)]` over the relaxation.
///
/// The rounding is widened by a small tolerance so that floating-point error
/// can only enlarge the range; callers verify candidate values exactly.
pub fn integer_bounds(p: &RealPolytope, j: usize) -> Result<IntegerBounds, LpError> {
    let mut e = vec![0.0; p.dim];
    e[j] = 1.0;
    let lo = match lp_optimize(p, &e, Sense::Min)? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible => return Ok(IntegerBounds::Empty),
        LpOutcome::Unbounded => return Ok(IntegerBounds::Unbounded),
    };
    let hi = match lp_optimize(p, &e, Sense::Max)? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible => return Ok(IntegerBounds::Empty),
        LpOutcome::Unbounded => return Ok(IntegerBounds::Unbounded),
    };
    let lo = (lo - FEAS_TOL * (1.0 + lo.abs())).ceil();
    let hi = (hi + FEAS_TOL * (1.0 + hi.abs())).floor();
    if !(lo.is_finite() && hi.is_finite()) || lo.abs() > 1.7e38 || hi.abs() > 1.7e38 {
        return Ok(IntegerBounds::Unbounded);
    }
    if lo > hi {
        return Ok(IntegerBounds::Empty);
    }
    Ok(IntegerBounds::Range(lo as i128, hi as i128))
}

enum Solved {
    Point(Vec<f64>),
    Infeasible,
    Unbounded,
}

/// Standard-form tableau: columns are x+ (n), x- (n), one slack per
/// inequality, then artificials. The last row holds reduced costs and the
/// negated objective value; the last column holds right-hand sides.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
    first_artificial: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.cols + 1;
        let piv = self.data[r * w + q];
        for j in 0..w {
            self.data[r * w + j] /= piv;
        }
        self.data[r * w + q] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for (i, row) in before.chunks_mut(w).chain(after.chunks_mut(w)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            if i < self.rows && !self.active[i] {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[q] = 0.0;
            }
        }
        self.basis[r] = q;
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows * w;
        self.data[obj..obj + self.cols].copy_from_slice(&costs[..self.cols]);
        self.data[obj + self.cols] = 0.0;
        for i in 0..self.rows {
            if !self.active[i] {
                continue;
            }
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.data[obj + j] -= cb * self.data[i * w + j];
                }
            }
        }
    }

    /// Runs primal simplex on the current cost row; `allowed` bounds entering columns.
    fn run(&mut self, allowed: usize) -> Result<bool, LpError> {
        let w = self.cols + 1;
        let obj = self.rows * w;
        let mut bland = false;
        let mut degenerate_run = 0;
        let limit = 10_000 + 200 * (self.rows + self.cols);
        for _ in 0..limit {
            let mut enter = None;
            let mut best = COST_TOL;
            for j in 0..allowed {
                let d = self.data[obj + j];
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else { return Ok(true) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if !self.active[i] {
                    continue;
                }
                let a = self.at(i, q);
                if a > PIVOT_TOL {
                    let theta = self.rhs(i).max(0.0) / a;
                    match leave {
                        None => leave = Some((i, theta)),
                        Some((li, lt)) => {
                            if theta < lt - 1e-12 * (1.0 + lt)
                                || (theta <= lt + 1e-12 * (1.0 + lt) && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, theta.min(lt)));
                            }
                        }
                    }
                }
            }
            let Some((r, theta)) = leave else { return Ok(false) };
            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q);
        }
        Err(LpError::IterationLimit)
    }
}

fn solve(
    n: usize,
    rows: &[Vec<f64>],
    rhs: &[f64],
    kinds: &[RowKind],
    objective: Option<&[f64]>,
) -> Result<Solved, LpError> {
    // scaled copies of the non-trivial rows
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut b: Vec<f64> = Vec::with_capacity(rows.len());
    let mut is_eq: Vec<bool> = Vec::with_capacity(rows.len());
    for ((row, &bi), &k) in rows.iter().zip(rhs).zip(kinds) {
        let nrm = norm(row);
        if nrm == 0.0 {
            let ok = match k {
                RowKind::Eq => bi.abs() <= FEAS_TOL,
                _ => bi >= -FEAS_TOL,
            };
            if !ok {
                return Ok(Solved::Infeasible);
            }
            continue;
        }
        a.push(row.iter().map(|v| v / nrm).collect());
        b.push(bi / nrm);
        is_eq.push(k == RowKind::Eq);
    }
    let m = a.len();
    if m == 0 {
        return Ok(match objective {
            Some(c) if c.iter().any(|&v| v.abs() > COST_TOL) => Solved::Unbounded,
            _ => Solved::Point(vec![0.0; n]),
        });
    }

    let num_slack = is_eq.iter().filter(|&&e| !e).count();
    let needs_art: Vec<bool> = (0..m).map(|i| is_eq[i] || b[i] < 0.0).collect();
    let num_art = needs_art.iter().filter(|&&x| x).count();
    let first_slack = 2 * n;
    let first_artificial = first_slack + num_slack;
    let cols = first_artificial + num_art;
    let w = cols + 1;

    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
        active: vec![true; m],
        first_artificial,
    };
    let mut slack = first_slack;
    let mut art = first_artificial;
    let mut art_rhs_sum = 0.0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let base = i * w;
        for j in 0..n {
            t.data[base + j] = sign * a[i][j];
            t.data[base + n + j] = -sign * a[i][j];
        }
        t.data[base + cols] = sign * b[i];
        if !is_eq[i] {
            t.data[base + slack] = sign;
            if !needs_art[i] {
                t.basis[i] = slack;
            }
            slack += 1;
        }
        if needs_art[i] {
            t.data[base + art] = 1.0;
            t.basis[i] = art;
            art += 1;
            art_rhs_sum += b[i].abs();
        }
    }
    let original = t.data[..m * w].to_vec();

    if num_art > 0 {
        let mut c1 = vec![0.0; cols];
        for c in c1.iter_mut().skip(first_artificial) {
            *c = -1.0;
        }
        t.set_costs(&c1);
        t.run(cols)?;
        let infeasibility = t.data[m * w + cols];
        if infeasibility > FEAS_TOL * (1.0 + art_rhs_sum) {
            return Ok(Solved::Infeasible);
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if t.basis[i] < first_artificial {
                continue;
            }
            let mut best = None;
            let mut best_mag = PIVOT_TOL;
            for j in 0..first_artificial {
                let v = t.at(i, j).abs();
                if v > best_mag {
                    best_mag = v;
                    best = Some(j);
                }
            }
            match best {
                Some(j) => t.pivot(i, j),
                None => t.active[i] = false,
            }
        }
    }

    if let Some(c) = objective {
        let mut c2 = vec![0.0; cols];
        for j in 0..n {
            c2[j] = c[j];
            c2[n + j] = -c[j];
        }
        t.set_costs(&c2);
        if !t.run(t.first_artificial)? {
            return Ok(Solved::Unbounded);
        }
    }

    let x = refine(&t, &original, n);
    for i in 0..m {
        let lhs = dot(&a[i], &x);
        let viol = if is_eq[i] { (lhs - b[i]).abs() } else { lhs - b[i] };
        if viol > RESIDUAL_TOL * (1.0 + b[i].abs()) {
            return Err(LpError::Numerical(viol));
        }
    }
    Ok(Solved::Point(x))
}

/// Recomputes the basic solution from the original standard-form data by
/// Gaussian elimination, falling back to tableau values if the basis is singular.
fn refine(t: &Tableau, original: &[f64], n: usize) -> Vec<f64> {
    let w = t.cols + 1;
    let rows: Vec<usize> = (0..t.rows).filter(|&i| t.active[i]).collect();
    let k = rows.len();
    let mut mat = vec![0.0; k * (k + 1)];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &ri2) in rows.iter().enumerate() {
            mat[ri * (k + 1) + ci] = original[i * w + t.basis[ri2]];
        }
        mat[ri * (k + 1) + k] = original[i * w + t.cols];
    }
    let mut values = vec![0.0; t.cols];
    let solved = gauss_solve(&mut mat, k);
    match solved {
        Some(z) => {
            for (ci, &ri2) in rows.iter().enumerate() {
                values[t.basis[ri2]] = z[ci];
            }
        }
        None => {
            for &i in &rows {
                values[t.basis[i]] = t.rhs(i);
            }
        }
    }
    (0..n).map(|j| values[j] - values[n + j]).collect()
}

fn gauss_solve(mat: &mut [f64], k: usize) -> Option<Vec<f64>> {
    let w = k + 1;
    for col in 0..k {
        let (p, mag) = (col..k)
            .map(|r| (r, mat[r * w + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag < 1e-13 {
            return None;
        }
        if p != col {
            for j in 0..w {
                mat.swap(p * w + j, col * w + j);
            }
        }
        let piv = mat[col * w + col];
        for r in (col + 1)..k {
            let f = mat[r * w + col] / piv;
            if f != 0.0 {
                for j in col..w {
                    mat[r * w + j] -= f * mat[col * w + j];
                }
            }
        }
    }
    let mut z = vec![0.0; k];
    for col in (0..k).rev() {
        let mut s = mat[col * w + k];
        for j in (col + 1)..k {
            s -= mat[col * w + j] * z[j];
        }
        z[col] = s / mat[col * w + col];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(dim: usize, rows: &[(&[f64], f64)]) -> RealPolytope {
        let mut p = RealPolytope::new(dim);
        for (r, b) in rows {
            p.push_le(r.to_vec(), *b);
        }
        p
    }

    /// f1 area I: x1 < x2, x1 + x2 < 1, 0 <= x1, x2 <= 1.
    fn area_one() -> RealPolytope {
        poly(
            2,
            &[
                (&[1.0, -1.0], 0.0),
                (&[1.0, 1.0], 1.0),
                (&[1.0, 0.0], 1.0),
                (&[0.0, 1.0], 1.0),
                (&[-1.0, 0.0], 0.0),
                (&[0.0, -1.0], 0.0),
            ],
        )
    }

    #[test]
    fn max_on_interval() {
        let p = poly(1, &[(&[1.0], 1.0), (&[-1.0], 0.0)]);
        assert_eq!(lp_optimize(&p, &[1.0], Sense::Max).unwrap().value(), Some(1.0));
        assert_eq!(lp_optimize(&p, &[1.0], Sense::Min).unwrap().value(), Some(0.0));
    }

    #[test]
    fn triangle_max_sum() {
        let out = lp_optimize(&area_one(), &[1.0, 1.0], Sense::Max).unwrap();
        assert!((out.value().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_line_is_unbounded() {
        let p = poly(1, &[(&[-1.0], 0.0)]);
        assert_eq!(lp_optimize(&p, &[1.0], Sense::Max).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn strict_pair_relaxes_to_line() {
        // x < y and y < x: the relaxation is the line x = y
        let mut p = RealPolytope::new(2);
        p.push(vec![1.0, -1.0], 0.0, RowKind::LeStrict);
        p.push(vec![-1.0, 1.0], 0.0, RowKind::LeStrict);
        let w = lp_feasible(&p).unwrap().expect("relaxation is feasible");
        assert!((w[0] - w[1]).abs() < 1e-9);
    }

    #[test]
    fn witness_inside_triangle() {
        let p = area_one();
        let w = lp_feasible(&p).unwrap().unwrap();
        assert!(p.contains(&w, 1e-9));
    }

    #[test]
    fn infeasible_interval() {
        let p = poly(1, &[(&[1.0], 0.0), (&[-1.0], -1.0)]);
        assert_eq!(lp_feasible(&p).unwrap(), None);
    }

    #[test]
    fn equality_rows_are_honored() {
        let mut p = RealPolytope::cube(2, 0.0, 4.0);
        p.push(vec![1.0, -1.0], 1.0, RowKind::Eq);
        let out = lp_optimize(&p, &[0.0, 1.0], Sense::Max).unwrap();
        assert!((out.value().unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn chebyshev_center_of_square() {
        match interior_point(&RealPolytope::cube(2, 0.0, 1.0)).unwrap() {
            Interior::Center { point, radius } => {
                assert!((radius - 0.5).abs() < 1e-9);
                assert!((point[0] - 0.5).abs() < 1e-9 && (point[1] - 0.5).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_body_is_degenerate() {
        let p = poly(
            2,
            &[(&[1.0, 0.0], 0.0), (&[-1.0, 0.0], 0.0), (&[0.0, 1.0], 1.0), (&[0.0, -1.0], 0.0)],
        );
        assert_eq!(interior_point(&p).unwrap(), Interior::Degenerate);
    }

    #[test]
    fn triangle_interior_is_strict() {
        let p = area_one();
        match interior_point(&p).unwrap() {
            Interior::Center { point, radius } => {
                assert!(radius > 0.0);
                for (row, b) in p.rows.iter().zip(&p.rhs) {
                    assert!(dot(row, &point) < *b);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integer_bounds_examples() {
        let p = RealPolytope::cube(1, -128.0, 127.0);
        assert_eq!(integer_bounds(&p, 0).unwrap(), IntegerBounds::Range(-128, 127));
        let p = poly(1, &[(&[2.0], 1.0), (&[-2.0], 1.0)]);
        assert_eq!(integer_bounds(&p, 0).unwrap(), IntegerBounds::Range(0, 0));
        // f1 area III over the integers (x1 >= x2, x1 + x2 >= 1 with strict rows tightened)
        let p = poly(
            2,
            &[
                (&[-1.0, 1.0], 0.0),
                (&[-1.0, -1.0], -1.0),
                (&[1.0, 0.0], 1.0),
                (&[0.0, 1.0], 1.0),
                (&[-1.0, 0.0], 0.0),
                (&[0.0, -1.0], 0.0),
            ],
        );
        assert_eq!(integer_bounds(&p, 0).unwrap(), IntegerBounds::Range(1, 1));
        let p = poly(1, &[(&[-1.0], 0.0)]);
        assert_eq!(integer_bounds(&p, 0).unwrap(), IntegerBounds::Unbounded);
        let p = poly(1, &[(&[3.0], 1.0), (&[-3.0], -2.0)]);
        assert_eq!(integer_bounds(&p, 0).unwrap(), IntegerBounds::Empty);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // many constraints through the same vertex
        let mut p = RealPolytope::new(3);
        for i in 0..30 {
            let t = i as f64 * 0.2;
            p.push_le(vec![t.cos(), t.sin(), 1.0], 1.0);
        }
        p.push_le(vec![0.0, 0.0, -1.0], 5.0);
        let out = lp_optimize(&p, &[0.0, 0.0, 1.0], Sense::Max).unwrap();
        assert!(out.value().is_some());
    }

    proptest! {
        #[test]
        fn optimum_matches_point_and_is_deterministic(
            rows in prop::collection::vec((prop::collection::vec(-5i32..=5, 2), -10i32..=10), 1..8),
            obj in prop::collection::vec(-3i32..=3, 2)
        ) {
            let mut p = RealPolytope::cube(2, -20.0, 20.0);
            for (r, b) in &rows {
                p.push_le(r.iter().map(|&v| v as f64).collect(), *b as f64);
            }
            let c: Vec<f64> = obj.iter().map(|&v| v as f64).collect();
            let first = lp_optimize(&p, &c, Sense::Max).unwrap();
            let second = lp_optimize(&p, &c, Sense::Max).unwrap();
            prop_assert_eq!(&first, &second);
            if let LpOutcome::Optimal { value, point } = &first {
                prop_assert!((dot(&c, point) - value).abs() <= 1e-9 * (1.0 + value.abs()));
                prop_assert!(p.contains(point, 1e-6));
            }
        }

        #[test]
        fn integer_bounds_match_scan(
            rows in prop::collection::vec((prop::collection::vec(-4i32..=4, 2), -8i32..=8), 1..5)
        ) {
            let mut p = RealPolytope::cube(2, -6.0, 6.0);
            for (r, b) in &rows {
                p.push_le(r.iter().map(|&v| v as f64).collect(), *b as f64);
            }
            // exhaustive scan of the relaxation restricted to a fine grid of candidate
            // values: x_j = v is attainable iff the slice is LP-feasible
            for j in 0..2 {
                let mut lo = None;
                let mut hi = None;
                for v in -6i32..=6 {
                    let mut slice = p.clone();
                    let mut e = vec![0.0; 2];
                    e[j] = 1.0;
                    slice.push(e, v as f64, RowKind::Eq);
                    if lp_feasible(&slice).unwrap().is_some() {
                        lo.get_or_insert(v);
                        hi = Some(v);
                    }
                }
                let got = integer_bounds(&p, j).unwrap();
                match (lo, hi) {
                    (Some(l), Some(h)) => prop_assert_eq!(got, IntegerBounds::Range(l as i128, h as i128)),
                    _ => prop_assert_eq!(got, IntegerBounds::Empty),
                }
            }
        }
    }
}
