//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volcount::deadline::Deadline;
use volcount::driver::report::Outcome;
use volcount::driver::{parse_cli, run, CliAction, Report};
use volcount::enumerate::enumerate_bunches;
use volcount::exact::exact_volume;
use volcount::frontends::parse_file;
use volcount::lp::{lp_optimize, Sense};
use volcount::polyvest::{
    bunch_rng, estimate_volume, phase_count, round_polytope, unit_ball_volume, RoundedPolytope, Rounding,
};
use volcount::{bunch_multiplier, Formula, NumericKind, RealPolytope, SolverConfig};

use common::{fixture, random_formula, random_polytope};

// pinned tolerances
const F1_EXACT_TOL: f64 = 1e-6;
const F1_ESTIMATE_REL: f64 = 0.10;
const SUITE_REL: f64 = 0.15;
const CLOSED_FORM_REL: f64 = 1e-9;
const BALL_REL: f64 = 0.10;
const REUSE_FRACTION: f64 = 0.60;
const ROUNDING_SLACK: f64 = 1e-6;

type Verdict = (bool, String);

fn config(args: &[&str]) -> (SolverConfig, Formula, String) {
    match parse_cli(args).unwrap() {
        CliAction::Run(inv) => {
            let f = parse_file(&inv.input).unwrap();
            (inv.config, f, inv.input.display().to_string())
        }
        CliAction::Help => unreachable!(),
    }
}

fn timed_run(args: &[&str]) -> (Report, Duration) {
    let (cfg, f, name) = config(args);
    let start = Instant::now();
    let r = run(&cfg, &f, &name).unwrap();
    (r, start.elapsed())
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn formula_one() -> Verdict {
    let path = fixture("f1.vs");
    let p = path.to_str().unwrap();
    let (r, t) = timed_run(&["-V", "-P", "-L", "-w=0", p]);
    let vol = r.totals.exact_volume.unwrap_or(f64::NAN);
    let count = r.totals.integer_count.clone().unwrap_or_default();
    let mut mults: Vec<String> = r.bunches.iter().map(|b| b.multiplier.clone()).collect();
    mults.sort();
    let mut close = 0;
    for seed in 0..10 {
        let s = format!("--seed={seed}");
        let (r, _) = timed_run(&["-P", "-w=0", &s, p]);
        if r.totals.estimate.is_some_and(|e| rel_err(e, 0.75) <= F1_ESTIMATE_REL) {
            close += 1;
        }
    }
    let ok = (vol - 0.75).abs() <= F1_EXACT_TOL
        && count == "2"
        && mults == ["1", "2"]
        && close >= 9
        && t < Duration::from_secs(1);
    (
        ok,
        format!(
            "volume {vol} count {count} multipliers {mults:?} estimates within 10%: {close}/10, {:.3} s",
            t.as_secs_f64()
        ),
    )
}

fn count_fixture(name: &str, extra: &[&str], expect: &str, limit: Duration) -> (bool, String, Report) {
    let path = fixture(name);
    let mut args = vec!["-L"];
    args.extend_from_slice(extra);
    args.push(path.to_str().unwrap());
    let (r, t) = timed_run(&args);
    let got = r.totals.integer_count.clone().unwrap_or_default();
    let ok = got == expect && t < limit;
    (ok, format!("{name}: {got} in {:.3} s", t.as_secs_f64()), r)
}

fn getop() -> Verdict {
    let (ok1, d1, r1) = count_fixture("getop_path1.smt2", &[], "242", Duration::from_secs(5));
    let freq = r1.totals.frequency.unwrap_or(f64::NAN);
    let (ok2, d2, _) = count_fixture("getop_path2.smt2", &[], "8085", Duration::from_secs(5));
    let ok_f = (freq - 242.0 / 256.0).abs() < 1e-12;
    (ok1 && ok2 && ok_f, format!("{d1}, frequency {freq:.4}; {d2}"))
}

fn coloring() -> Verdict {
    let (ok, d, _) = count_fixture("coloring.smt2", &[], "768", Duration::from_secs(60));
    (ok, d)
}

fn find_paths() -> Verdict {
    let start = Instant::now();
    let (ok1, d1, _) = count_fixture("find_path1.smt2", &["-w=4"], "4075920", Duration::from_secs(600));
    let (ok2, d2, _) = count_fixture("find_path2.smt2", &["-w=4"], "87516", Duration::from_secs(600));
    let total = start.elapsed();
    (ok1 && ok2 && total < Duration::from_secs(600), format!("{d1}; {d2}"))
}

/// The random suite used by the property substitutions.
fn suite() -> Vec<Formula> {
    (0..20u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let n = 4 + (i as usize % 5);
            let atoms = rng.random_range(4..=10);
            let plain = rng.random_range(2..=5);
            let clauses = (3 * (atoms + plain) / 2).min(60);
            random_formula(1000 + i, NumericKind::Real, n, atoms, plain, clauses, 2)
        })
        .collect()
}

fn estimate_vs_exact(formulas: &[Formula]) -> Verdict {
    let mut close = 0;
    let mut worst = 0.0f64;
    for (i, f) in formulas.iter().enumerate() {
        let mut cfg = SolverConfig { word_length: 4, seed: i as u64, ..SolverConfig::default() };
        cfg.backends.exact_volume = true;
        let r = run(&cfg, f, "suite").unwrap();
        let err = rel_err(r.totals.estimate.unwrap(), r.totals.exact_volume.unwrap());
        worst = worst.max(err);
        if err <= SUITE_REL {
            close += 1;
        }
    }
    (
        close >= 18,
        format!("estimate within 15% of exact on {close}/20 instances, worst {:.1}%", 100.0 * worst),
    )
}

/// Instances with many bunches of uneven volume: eight
/// dimensions, 15 or 20 constraints and three clauses per constraint.
fn many_bunch_suite() -> Vec<Formula> {
    [(15, 45), (15, 45), (20, 60), (20, 60)]
        .iter()
        .enumerate()
        .map(|(i, &(atoms, clauses))| random_formula(2000 + i as u64, NumericKind::Real, 8, atoms, 0, clauses, 3))
        .collect()
}

fn two_round(formulas: &[Formula]) -> Vec<Verdict> {
    let mut coeffs = Vec::new();
    let mut bunches = Vec::new();
    let mut reuse_ok = true;
    let mut reuse_worst = 0.0f64;
    for (i, f) in formulas.iter().enumerate() {
        let cfg = SolverConfig { word_length: 4, seed: i as u64, ..SolverConfig::default() };
        let r = run(&cfg, f, "suite").unwrap();
        let sampled: Vec<_> = r
            .bunches
            .iter()
            .filter_map(|b| b.estimate.as_ref().and_then(Outcome::value))
            .filter(|e| e.phases > 0)
            .collect();
        bunches.push(r.bunches.len());
        coeffs.push(r.totals.average_coefficient.unwrap_or(f64::NAN));
        for e in sampled {
            let first = cfg.min_coeff as usize * e.phases;
            let drawn = e.phases * (first + if e.second_round { e.samples_per_phase } else { 0 });
            let frac = e.fresh_points as f64 / drawn as f64;
            reuse_worst = reuse_worst.max(frac);
            reuse_ok &= frac <= REUSE_FRACTION;
        }
    }
    let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
    let limit = SolverConfig::default().max_coeff as f64 / 4.0;
    vec![
        (
            bunches.iter().all(|&b| b >= 2) && mean <= limit,
            format!("average sampling coefficients {coeffs:.1?} over {bunches:?} bunches, mean {mean:.1} (limit {limit})"),
        ),
        (reuse_ok, format!("largest fresh fraction {reuse_worst:.3} over {} bunches (limit {REUSE_FRACTION})", bunches.iter().sum::<usize>())),
    ]
}

fn bunch_cover() -> Verdict {
    let mut checked = 0;
    for v in 1..=12usize {
        for k in 0..4u64 {
            let clauses = v + (k as usize) * v / 2;
            let f = random_formula(50 * v as u64 + k, NumericKind::Real, 1, 0, v, clauses, 2);
            let bunches = enumerate_bunches(&f, &SolverConfig { word_length: 0, ..Default::default() }, Deadline::none())
                .unwrap();
            let mut covered_total = BigUint::from(0u32);
            for b in &bunches {
                covered_total += bunch_multiplier(b);
            }
            let mut models = 0u64;
            for mask in 0..(1u64 << v) {
                let value = |x: usize| mask >> (x - 1) & 1 == 1;
                let sat = f.clauses.iter().all(|c| c.iter().any(|l| l.satisfied_by(value(l.var()))));
                let covering = bunches
                    .iter()
                    .filter(|b| b.assignment.iter().all(|(&x, &val)| value(x) == val))
                    .count();
                if covering != usize::from(sat) {
                    return (false, format!("v={v}: assignment {mask:b} covered {covering} times, satisfying {sat}"));
                }
                models += u64::from(sat);
            }
            if covered_total != BigUint::from(models) {
                return (false, format!("v={v}: multipliers sum to {covered_total}, models {models}"));
            }
            checked += 1;
        }
    }
    (true, format!("{checked} formulas with up to 12 variables"))
}

fn grid_counts() -> Verdict {
    use num_rational::BigRational;
    let mut checked = 0;
    for i in 0..24u64 {
        let n = 1 + (i as usize % 3);
        let w: u32 = if n == 3 { 4 } else { 5 };
        let f = random_formula(7000 + i, NumericKind::Int, n, 2 + (i as usize % 4), 2, 5, 2);
        let mut cfg = SolverConfig { word_length: w, ..SolverConfig::default() };
        cfg.backends = volcount::Backends { integer_count: true, ..Default::default() };
        let r = run(&cfg, &f, "grid").unwrap();
        let got: u64 = r.totals.integer_count.unwrap().parse().unwrap();
        let (lo, hi) = (-(1i64 << (w - 1)), (1i64 << (w - 1)) - 1);
        let plain: Vec<usize> = (1..=f.num_bool_vars).filter(|v| !f.atoms.contains_key(v)).collect();
        let mut expect = 0u64;
        let mut point = vec![lo; n];
        loop {
            let x: Vec<BigRational> = point.iter().map(|&c| BigRational::from_integer(c.into())).collect();
            let atom_values: Vec<(usize, bool)> =
                f.atoms.iter().map(|(&v, c)| (v, c.is_satisfied_by(&x))).collect();
            for mask in 0..(1u32 << plain.len()) {
                let value = |v: usize| match atom_values.iter().find(|(a, _)| *a == v) {
                    Some(&(_, b)) => b,
                    None => mask >> plain.iter().position(|&p| p == v).unwrap() & 1 == 1,
                };
                if f.clauses.iter().all(|c| c.iter().any(|l| l.satisfied_by(value(l.var())))) {
                    expect += 1;
                }
            }
            let mut j = 0;
            while j < n && point[j] == hi {
                point[j] = lo;
                j += 1;
            }
            if j == n {
                break;
            }
            point[j] += 1;
        }
        if got != expect {
            return (false, format!("instance {i} (n={n}, w={w}): counted {got}, grid {expect}"));
        }
        checked += 1;
    }
    (true, format!("{checked} integer formulas with n <= 3"))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn closed_forms() -> Verdict {
    let mut worst = 0.0f64;
    for n in 1..=6usize {
        let cube = RealPolytope::cube(n, -1.0, 1.0);
        let mut simplex = RealPolytope::new(n);
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            simplex.push_le(r, 0.0);
        }
        simplex.push_le(vec![1.0; n], 1.0);
        let mut cross = RealPolytope::new(n);
        for mask in 0..(1u32 << n) {
            cross.push_le((0..n).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect(), 1.0);
        }
        let cases = [
            (cube, 2f64.powi(n as i32)),
            (simplex, 1.0 / factorial(n)),
            (cross, 2f64.powi(n as i32) / factorial(n)),
        ];
        for (p, expect) in cases {
            let v = exact_volume(&p, &Deadline::none()).unwrap();
            worst = worst.max(rel_err(v, expect));
        }
    }
    (worst <= CLOSED_FORM_REL, format!("cube, simplex and cross-polytope n <= 6, worst relative error {worst:.2e}"))
}

fn ball_estimates() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2usize, 4, 8] {
        let q = RoundedPolytope::unit_ball(n);
        let s = 1600 * phase_count(n);
        let mut rng = bunch_rng(17, n, 1);
        let e = estimate_volume(&q, s, &mut rng, 0, &Deadline::none()).unwrap();
        let err = rel_err(e.volume, unit_ball_volume(n));
        ok &= err <= BALL_REL;
        parts.push(format!("n={n} {:.1}%", 100.0 * err));
    }
    (ok, format!("ball volume estimates {}", parts.join(", ")))
}

fn rounding_contract() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut min_depth = f64::INFINITY;
    let mut max_reach = 0.0f64;
    for i in 0..50usize {
        let n = 1 + i % 10;
        let extra = rng.random_range(0..=2 * n);
        let p = random_polytope(&mut rng, n, extra);
        let q = match round_polytope(&p, &Deadline::none()).unwrap() {
            Rounding::Rounded(q) => q,
            Rounding::ZeroVolume => return (false, format!("polytope {i} reported flat")),
        };
        for (a, b) in q.a.iter().zip(&q.b) {
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            min_depth = min_depth.min(b / norm);
        }
        let mut body = RealPolytope::new(n);
        for (a, &b) in q.a.iter().zip(&q.b) {
            body.push_le(a.clone(), b);
        }
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            directions.push(e.clone());
            e[j] = -1.0;
            directions.push(e);
        }
        for _ in 0..10 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            directions.push(u.iter().map(|x| x / norm).collect());
        }
        for u in &directions {
            let v = lp_optimize(&body, u, Sense::Max).unwrap().value().unwrap_or(f64::INFINITY);
            max_reach = max_reach.max(v / (2.0 * n as f64));
        }
    }
    // volume identity on boxes: Q is a parallelotope with opposite row pairs
    let mut worst_identity = 0.0f64;
    for n in 1..=6usize {
        let widths: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let mut p = RealPolytope::new(n);
        for (j, w) in widths.iter().enumerate() {
            let lo = rng.random_range(-5.0..5.0);
            let mut up = vec![0.0; n];
            up[j] = 1.0;
            p.push_le(up, lo + w);
            let mut down = vec![0.0; n];
            down[j] = -1.0;
            p.push_le(down, -lo);
        }
        let Rounding::Rounded(q) = round_polytope(&p, &Deadline::none()).unwrap() else {
            return (false, "box reported flat".into());
        };
        let ups: Vec<Vec<f64>> = (0..n).map(|j| q.a[2 * j].clone()).collect();
        let slab: f64 = (0..n).map(|j| q.b[2 * j] + q.b[2 * j + 1]).product();
        let vol_q = slab / determinant(ups).abs();
        let expect: f64 = widths.iter().product();
        worst_identity = worst_identity.max(rel_err(vol_q * q.log_scale.exp(), expect));
    }
    let ok = min_depth >= 1.0 - ROUNDING_SLACK && max_reach <= 1.0 + ROUNDING_SLACK && worst_identity <= 1e-9;
    (
        ok,
        format!(
            "50 polytopes: min b/|a| {min_depth:.6}, max reach / 2n {max_reach:.6}; box volume identity error {worst_identity:.2e}"
        ),
    )
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

fn determinism(formulas: &[Formula]) -> Verdict {
    let path = fixture("f1.vs");
    let args = ["-P", "-V", "-L", "-w=0", "--seed=7", "--json", path.to_str().unwrap()];
    let a = timed_run(&args).0.to_json();
    let b = timed_run(&args).0.to_json();
    let mut same = a == b;
    let mut cfg = SolverConfig { word_length: 4, seed: 3, ..SolverConfig::default() };
    cfg.backends.exact_volume = true;
    for f in formulas.iter().take(3) {
        let x = run(&cfg, f, "suite").unwrap().to_json();
        let y = run(&cfg, f, "suite").unwrap().to_json();
        same &= x == y;
    }
    (same, "identical JSON for f1 and three suite instances".into())
}

fn main() {
    let formulas = suite();
    let many = many_bunch_suite();
    let mut results: Vec<(String, Verdict, Duration)> = Vec::new();
    let mut record = |name: &str, f: &mut dyn FnMut() -> Vec<Verdict>, names: &[&str]| {
        let start = Instant::now();
        let verdicts = f();
        let t = start.elapsed();
        for (sub, v) in names.iter().zip(verdicts) {
            results.push((format!("{name}{sub}"), v, t));
        }
    };
    record("1 formula one", &mut || vec![formula_one()], &[""]);
    record("2 getop paths", &mut || vec![getop()], &[""]);
    record("3 coloring", &mut || vec![coloring()], &[""]);
    record("4 find paths", &mut || vec![find_paths()], &[""]);
    record("5a suite estimate vs exact", &mut || vec![estimate_vs_exact(&formulas)], &[""]);
    record("5", &mut || two_round(&many), &["b two-round coefficient", "c point reuse"]);
    record("6a bunch cover", &mut || vec![bunch_cover()], &[""]);
    record("6b integer counts vs grid", &mut || vec![grid_counts()], &[""]);
    record("6c exact volume closed forms", &mut || vec![closed_forms()], &[""]);
    record("6d ball estimates", &mut || vec![ball_estimates()], &[""]);
    record("7 rounding contract", &mut || vec![rounding_contract()], &[""]);
    record("8 determinism", &mut || vec![determinism(&formulas)], &[""]);
    let mut failed = 0;
    for (name, (ok, detail), t) in &results {
        println!("{} [{name}] {detail} ({:.1} s)", if *ok { "PASS" } else { "FAIL" }, t.as_secs_f64());
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
