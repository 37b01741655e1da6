//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volcount::{CmpOp, Formula, LinearConstraint, Lit, NumericKind, RealPolytope};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Random SMT(LA) formula: `atoms` linear constraints attached to the first
/// Boolean variables, `plain` free Booleans after them, and `clauses` random
/// clauses of width `min_width..=3`. Integer formulas also get equality atoms.
pub fn random_formula(
    seed: u64,
    kind: NumericKind,
    n: usize,
    atoms: usize,
    plain: usize,
    clauses: usize,
    min_width: usize,
) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = atoms + plain;
    let mut atom_map = BTreeMap::new();
    for v in 1..=atoms {
        let mut coeffs: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
        if coeffs.iter().all(|&c| c == 0) {
            coeffs[rng.random_range(0..n)] = 1;
        }
        let ops: &[CmpOp] = match kind {
            NumericKind::Real => &[CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt],
            NumericKind::Int => &[CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt, CmpOp::Eq],
        };
        let op = *ops.choose(&mut rng).unwrap();
        let rhs = rng.random_range(-6..=6);
        atom_map.insert(v, LinearConstraint::from_ints(&coeffs, op, rhs));
    }
    let all: Vec<usize> = (1..=vars).collect();
    let clauses = (0..clauses)
        .map(|_| {
            let width = rng.random_range(min_width..=3).min(vars);
            all.choose_multiple(&mut rng, width)
                .map(|&v| Lit::new(v, rng.random_bool(0.5)))
                .collect()
        })
        .collect();
    let f = Formula {
        num_bool_vars: vars,
        clauses,
        atoms: atom_map,
        num_numeric_vars: n,
        numeric_kind: Some(kind),
        var_names: (0..n).map(|j| format!("x{j}")).collect(),
        aux_vars: BTreeSet::new(),
    };
    f.validate().unwrap();
    f
}

/// Random full-dimensional polytope: a box `[-s, s]^n` with `s` in [1, 4]
/// cut by `extra` random halfspaces that keep the origin strictly inside.
pub fn random_polytope(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> RealPolytope {
    let mut p = RealPolytope::new(n);
    for j in 0..n {
        let s = rng.random_range(1.0..4.0);
        let stretch = rng.random_range(0.2..3.0);
        let mut up = vec![0.0; n];
        up[j] = 1.0;
        p.push_le(up, s * stretch);
        let mut down = vec![0.0; n];
        down[j] = -1.0;
        p.push_le(down, s);
    }
    for _ in 0..extra {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.push_le(a, rng.random_range(0.3..2.0));
    }
    p
}
