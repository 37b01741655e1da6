//! Exact volume by the divergence-theorem recursion
//! `d · vol(P) = Σ_i (b_i / ‖a_i‖) · vol_{d-1}(P ∩ {a_i·x = b_i})`.

use std::collections::HashMap;

use crate::deadline::Deadline;
use crate::error::BackendError;
use crate::lp::{interior_point, lp_optimize, Interior, LpOutcome, Sense};
use crate::model::{dot, norm, RealPolytope, RowKind};
use crate::polyvest::cholesky;

const ZERO_COEFF: f64 = 1e-12;
const SAME_ROW: f64 = 1e-10;
const REDUNDANT: f64 = 1e-9;
const EMPTY_SLACK: f64 = 1e-9;

/// A facet hyperplane eliminated by solving its equation for `x_pivot`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceRestriction {
    /// The face, projected onto the coordinates other than `pivot`.
    pub polytope: RealPolytope,
    pub pivot: usize,
    /// `‖a_i‖ / |a_i,pivot|`: face measure over projected volume.
    pub scale: f64,
}

/// Restricts `p` to the hyperplane of row `i`. `None` when the face is empty
/// (another row becomes a violated constant) or the row is numerically zero.
pub fn face_restrict(p: &RealPolytope, i: usize) -> Option<FaceRestriction> {
    let node = Node {
        a: p.rows.clone(),
        b: p.rhs.clone(),
        ids: (0..p.num_rows()).collect(),
        param: identity(p.dim),
        tight: Vec::new(),
    };
    let (child, pivot) = node.restrict(i)?;
    let scale = norm(&p.rows[i]) / p.rows[i][pivot].abs();
    let mut poly = RealPolytope::new(p.dim - 1);
    for (a, b) in child.a.into_iter().zip(child.b) {
        poly.push_le(a, b);
    }
    Some(FaceRestriction { polytope: poly, pivot, scale })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// A face of the input polytope in local coordinates `y`, where the input
/// coordinates are `x = param · y + const`.
#[derive(Clone, Debug)]
struct Node {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Input row each local row descends from.
    ids: Vec<usize>,
    param: Vec<Vec<f64>>,
    /// Input rows forced to equality, sorted.
    tight: Vec<usize>,
}

impl Node {
    fn dim(&self) -> usize {
        self.param.first().map_or(0, Vec::len)
    }

    fn as_polytope(&self, skip: Option<usize>) -> RealPolytope {
        let mut p = RealPolytope::new(self.dim());
        for (r, (a, &b)) in self.a.iter().zip(&self.b).enumerate() {
            if Some(r) != skip {
                p.push_le(a.clone(), b);
            }
        }
        p
    }

    fn restrict(&self, i: usize) -> Option<(Node, usize)> {
        let d = self.dim();
        let ai = &self.a[i];
        let pivot = (0..d).max_by(|&x, &y| ai[x].abs().total_cmp(&ai[y].abs()))?;
        let piv = ai[pivot];
        if piv.abs() < ZERO_COEFF {
            return None;
        }
        let mut child = Node { a: Vec::new(), b: Vec::new(), ids: Vec::new(), param: Vec::new(), tight: Vec::new() };
        for (r, (aj, &bj)) in self.a.iter().zip(&self.b).enumerate() {
            if r == i {
                continue;
            }
            let f = aj[pivot] / piv;
            let row: Vec<f64> = (0..d).filter(|&k| k != pivot).map(|k| aj[k] - f * ai[k]).collect();
            let rhs = bj - f * self.b[i];
            if row.iter().all(|v| v.abs() < ZERO_COEFF) {
                if rhs < -EMPTY_SLACK {
                    return None;
                }
                continue;
            }
            child.a.push(row);
            child.b.push(rhs);
            child.ids.push(self.ids[r]);
        }
        // y_pivot = (b_i - Σ_{k≠pivot} a_ik y_k) / a_i,pivot
        child.param = self
            .param
            .iter()
            .map(|mrow| {
                (0..d)
                    .filter(|&k| k != pivot)
                    .map(|k| mrow[k] - mrow[pivot] * ai[k] / piv)
                    .collect()
            })
            .collect();
        child.tight = self.tight.clone();
        child.tight.push(self.ids[i]);
        child.tight.sort_unstable();
        Some((child, pivot))
    }
}

/// `sqrt(det(MᵀM))`: how a parametrization stretches `d`-volume.
fn stretch(m: &[Vec<f64>]) -> f64 {
    let d = m.first().map_or(0, Vec::len);
    let mut g = vec![vec![0.0; d]; d];
    for row in m {
        for i in 0..d {
            for j in 0..d {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    match cholesky(&g) {
        Some(l) => (0..d).map(|i| l[i][i]).product(),
        None => 0.0,
    }
}

struct Lasserre<'a> {
    /// Intrinsic measure of faces already computed, by tight row set.
    memo: HashMap<Vec<usize>, f64>,
    deadline: &'a Deadline,
}

impl Lasserre<'_> {
    /// Volume of `node` in its local coordinates.
    fn volume(&mut self, mut node: Node) -> Result<f64, BackendError> {
        self.deadline.check()?;
        let d = node.dim();
        let sigma = stretch(&node.param);
        if sigma == 0.0 {
            return Ok(0.0);
        }
        if !node.tight.is_empty() {
            if let Some(&m) = self.memo.get(&node.tight) {
                return Ok(m / sigma);
            }
        }
        let v = self.volume_uncached(&mut node, d)?;
        if !node.tight.is_empty() {
            self.memo.insert(node.tight.clone(), v * sigma);
        }
        Ok(v)
    }

    fn volume_uncached(&mut self, node: &mut Node, d: usize) -> Result<f64, BackendError> {
        if d == 1 {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (a, &b) in node.a.iter().zip(&node.b) {
                if a[0] > ZERO_COEFF {
                    hi = hi.min(b / a[0]);
                } else if a[0] < -ZERO_COEFF {
                    lo = lo.max(b / a[0]);
                } else if b < -EMPTY_SLACK {
                    return Ok(0.0);
                }
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(BackendError::Unbounded);
            }
            return Ok((hi - lo).max(0.0));
        }

        let center = match interior_point(&node.as_polytope(None))? {
            Interior::Center { point, .. } => point,
            Interior::Degenerate | Interior::Infeasible => return Ok(0.0),
            Interior::Unbounded => return Err(BackendError::Unbounded),
        };
        // move the center to the origin and normalize rows; every rhs is then
        // positive and the facet sum has no cancellation
        for (a, b) in node.a.iter_mut().zip(node.b.iter_mut()) {
            *b -= dot(a, &center);
            let s = norm(a);
            a.iter_mut().for_each(|v| *v /= s);
            *b /= s;
        }
        let mut keep: Vec<usize> = Vec::new();
        for r in 0..node.a.len() {
            let dup = keep.iter().any(|&k| {
                (node.b[k] - node.b[r]).abs() <= SAME_ROW * (1.0 + node.b[r].abs())
                    && node.a[k].iter().zip(&node.a[r]).all(|(x, y)| (x - y).abs() <= SAME_ROW)
            });
            if !dup {
                keep.push(r);
            }
        }
        retain_rows(node, &keep);
        let mut r = 0;
        while r < node.a.len() {
            // the foot of the perpendicular from the center strictly inside
            // every other row certifies a facet without an LP
            let foot: Vec<f64> = node.a[r].iter().map(|v| v * node.b[r]).collect();
            let certified = (0..node.a.len())
                .all(|k| k == r || dot(&node.a[k], &foot) < node.b[k] - REDUNDANT);
            if certified {
                r += 1;
                continue;
            }
            let others = node.as_polytope(Some(r));
            let redundant = match lp_optimize(&others, &node.a[r], Sense::Max)? {
                LpOutcome::Optimal { value, .. } => value <= node.b[r] - REDUNDANT,
                _ => false,
            };
            if redundant {
                let keep: Vec<usize> = (0..node.a.len()).filter(|&k| k != r).collect();
                retain_rows(node, &keep);
            } else {
                r += 1;
            }
        }

        let mut sum = 0.0;
        for i in 0..node.a.len() {
            let Some((child, pivot)) = node.restrict(i) else { continue };
            let facet = self.volume(child)?;
            sum += node.b[i] / node.a[i][pivot].abs() * facet;
        }
        Ok(sum / d as f64)
    }
}

fn retain_rows(node: &mut Node, keep: &[usize]) {
    node.a = keep.iter().map(|&k| node.a[k].clone()).collect();
    node.b = keep.iter().map(|&k| node.b[k]).collect();
    node.ids = keep.iter().map(|&k| node.ids[k]).collect();
}

/// Volume of the closure of `p`. Equality rows give 0; an unbounded body is
/// an error. A 0-dimensional space has volume 1 when `p` is consistent.
pub fn exact_volume(p: &RealPolytope, deadline: &Deadline) -> Result<f64, BackendError> {
    let n = p.dim;
    if p.kinds.contains(&RowKind::Eq) {
        return Ok(0.0);
    }
    if n == 0 {
        let ok = p.rhs.iter().all(|&b| b >= -EMPTY_SLACK);
        return Ok(if ok { 1.0 } else { 0.0 });
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for sense in [Sense::Max, Sense::Min] {
            match lp_optimize(p, &e, sense)? {
                LpOutcome::Optimal { .. } => {}
                LpOutcome::Infeasible => return Ok(0.0),
                LpOutcome::Unbounded => return Err(BackendError::Unbounded),
            }
        }
    }
    let node = Node {
        a: p.rows.clone(),
        b: p.rhs.clone(),
        ids: (0..p.num_rows()).collect(),
        param: identity(n),
        tight: Vec::new(),
    };
    let mut zero_rows = Vec::new();
    for (r, a) in node.a.iter().enumerate() {
        if a.iter().all(|v| v.abs() < ZERO_COEFF) {
            if node.b[r] < -EMPTY_SLACK {
                return Ok(0.0);
            }
            zero_rows.push(r);
        }
    }
    let mut node = node;
    let keep: Vec<usize> = (0..node.a.len()).filter(|r| !zero_rows.contains(r)).collect();
    retain_rows(&mut node, &keep);
    let mut solver = Lasserre { memo: HashMap::new(), deadline };
    solver.volume(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vol(p: &RealPolytope) -> f64 {
        exact_volume(p, &Deadline::none()).unwrap()
    }

    fn triangle() -> RealPolytope {
        let mut p = RealPolytope::new(2);
        p.push_le(vec![-1.0, 0.0], 0.0);
        p.push_le(vec![0.0, -1.0], 0.0);
        p.push_le(vec![1.0, 1.0], 1.0);
        p
    }

    #[test]
    fn closed_forms() {
        assert!((vol(&triangle()) - 0.5).abs() < 1e-12);
        for n in 1..=5 {
            let v = vol(&RealPolytope::cube(n, -1.0, 2.0));
            assert!((v - 3f64.powi(n as i32)).abs() < 1e-9 * v, "cube {n}: {v}");
        }
        // standard simplex and cross-polytope in 4-D
        let mut s = RealPolytope::new(4);
        for j in 0..4 {
            let mut r = vec![0.0; 4];
            r[j] = -1.0;
            s.push_le(r, 0.0);
        }
        s.push_le(vec![1.0; 4], 1.0);
        assert!((vol(&s) - 1.0 / 24.0).abs() < 1e-12);
        let mut c = RealPolytope::new(3);
        for m in 0..8 {
            let r: Vec<f64> = (0..3).map(|j| if m >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            c.push_le(r, 1.0);
        }
        assert!((vol(&c) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let mut p = RealPolytope::cube(2, 0.0, 1.0);
        p.push(vec![1.0, -1.0], 0.0, RowKind::Eq);
        assert_eq!(vol(&p), 0.0);
        let mut p = RealPolytope::cube(2, 0.0, 1.0);
        p.push_le(vec![1.0, 1.0], -1.0);
        assert_eq!(vol(&p), 0.0);
        let mut p = RealPolytope::new(2);
        p.push_le(vec![1.0, 0.0], 1.0);
        p.push_le(vec![-1.0, 0.0], 0.0);
        assert_eq!(exact_volume(&p, &Deadline::none()), Err(BackendError::Unbounded));
        // a flat box
        let mut p = RealPolytope::cube(2, 0.0, 1.0);
        p.push_le(vec![0.0, 1.0], 0.0);
        assert_eq!(vol(&p), 0.0);
    }

    #[test]
    fn face_restriction_examples() {
        let sq = RealPolytope::cube(2, 0.0, 1.0);
        // row 0 is x <= 1
        let f = face_restrict(&sq, 0).unwrap();
        assert_eq!(f.pivot, 0);
        assert!((f.scale - 1.0).abs() < 1e-15);
        assert!((vol(&f.polytope) - 1.0).abs() < 1e-12);

        let t = triangle();
        let f = face_restrict(&t, 2).unwrap();
        assert!((f.scale - 2f64.sqrt()).abs() < 1e-12);
        assert!((vol(&f.polytope) * f.scale - 2f64.sqrt()).abs() < 1e-12);

        let mut p = RealPolytope::cube(2, 0.0, 1.0);
        p.push_le(vec![1.0, 0.0], 3.0);
        // the face x = 3 misses the square
        assert!(face_restrict(&p, 4).is_none());
    }

    fn det(m: &mut [Vec<f64>]) -> f64 {
        let n = m.len();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
            if m[p][c] == 0.0 {
                return 0.0;
            }
            if p != c {
                m.swap(p, c);
                d = -d;
            }
            d *= m[c][c];
            for r in (c + 1)..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        d
    }

    /// H-representation of the simplex with the given 5 vertices in 4-D,
    /// obtained from the barycentric coordinates.
    fn simplex_from_vertices(v: &[Vec<f64>]) -> RealPolytope {
        let n = v.len() - 1;
        // columns v_i - v_0
        let m: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| v[c + 1][r] - v[0][r]).collect()).collect();
        let inv = invert(&m);
        let mut p = RealPolytope::new(n);
        // λ = inv (x - v0) >= 0 and Σλ <= 1
        for row in &inv {
            p.push_le(row.iter().map(|x| -x).collect(), -dot(row, &v[0]));
        }
        let sum: Vec<f64> = (0..n).map(|c| inv.iter().map(|r| r[c]).sum()).collect();
        p.push_le(sum.clone(), 1.0 + dot(&sum, &v[0]));
        p
    }

    fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut r = r.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(p, c);
            let piv = a[c][c];
            a[c].iter_mut().for_each(|v| *v /= piv);
            for r in 0..n {
                if r != c {
                    let f = a[r][c];
                    let pivot_row = a[c].clone();
                    a[r].iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                }
            }
        }
        a.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn random_simplices_match_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        while done < 10 {
            let v: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let mut m: Vec<Vec<f64>> = (0..4).map(|r| (0..4).map(|c| v[c + 1][r] - v[0][r]).collect()).collect();
            let expected = det(&mut m).abs() / 24.0;
            if expected < 0.05 {
                continue;
            }
            let got = vol(&simplex_from_vertices(&v));
            assert!((got - expected).abs() < 1e-9 * expected.max(1.0), "{got} vs {expected}");
            done += 1;
        }
    }

    fn random_polytope(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> RealPolytope {
        let mut p = RealPolytope::cube(n, -1.0, 1.0);
        for _ in 0..extra {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.push_le(a, rng.random_range(0.0..0.8));
        }
        p
    }

    #[test]
    fn agrees_with_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 2..=4 {
            for _ in 0..3 {
                let p = random_polytope(&mut rng, n, 3);
                let exact = vol(&p);
                let trials = 200_000;
                let box_vol = 2f64.powi(n as i32);
                let hits = (0..trials)
                    .filter(|_| {
                        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                        p.contains(&x, 0.0)
                    })
                    .count();
                let frac = hits as f64 / trials as f64;
                let se = (frac * (1.0 - frac) / trials as f64).sqrt() * box_vol;
                assert!((frac * box_vol - exact).abs() <= 3.0 * se + 1e-9, "n={n}: {exact} vs {}", frac * box_vol);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn invariant_under_permutation_and_redundancy(seed in any::<u64>(), n in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_polytope(&mut rng, n, 3);
            let v = vol(&p);
            let mut q = RealPolytope::new(n);
            let mut order: Vec<usize> = (0..p.num_rows()).collect();
            order.reverse();
            order.rotate_left(seed as usize % p.num_rows());
            for &r in &order {
                q.push_le(p.rows[r].clone(), p.rhs[r]);
            }
            // redundant: a loose copy, an exact duplicate and a scaled duplicate
            q.push_le(vec![1.0; n], n as f64 + 1.0);
            q.push_le(p.rows[0].clone(), p.rhs[0]);
            q.push_le(p.rows[1].iter().map(|x| 3.0 * x).collect(), 3.0 * p.rhs[1]);
            let w = vol(&q);
            prop_assert!((v - w).abs() <= 1e-9 * v.max(1.0), "{} vs {}", v, w);
        }
    }
}
