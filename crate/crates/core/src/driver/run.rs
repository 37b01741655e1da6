//! Orchestration: enumerate bunches, run the selected backends per bunch and
//! assemble the report in bunch order.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use super::plan::two_round_sizes;
use super::report::{BunchRecord, Estimate, Header, Outcome, Report, RunSettings, Totals};
use crate::deadline::Deadline;
use crate::enumerate::enumerate_bunches;
use crate::error::{BackendError, Error};
use crate::exact::{count_integer_points, exact_volume};
use crate::model::{bunch_multiplier, bunch_polytope, CanonicalConstraint, Formula, NumericKind, Polytope, SolverConfig};
use crate::polyvest::{bunch_rng, estimate_volume, phase_count, round_polytope, EstimateResult, RoundedPolytope, Rounding};

fn par_map<T, F>(pool: Option<&rayon::ThreadPool>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match pool {
        Some(p) => p.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

/// First-round state of one bunch.
enum Prepared {
    /// Volume known without sampling (empty, flat, or zero-dimensional).
    Known(f64),
    Sampled { q: RoundedPolytope, first: EstimateResult },
}

fn first_round(poly: &Polytope, index: usize, config: &SolverConfig, deadline: &Deadline) -> Result<Prepared, BackendError> {
    if poly.empty {
        return Ok(Prepared::Known(0.0));
    }
    if poly.dim == 0 {
        return Ok(Prepared::Known(1.0));
    }
    match round_polytope(&poly.to_real(), deadline)? {
        Rounding::ZeroVolume => Ok(Prepared::Known(0.0)),
        Rounding::Rounded(q) => {
            let s_min = config.min_coeff as usize * phase_count(poly.dim);
            let mut rng = bunch_rng(config.seed, index, 1);
            let first = estimate_volume(&q, s_min, &mut rng, config.burnin, deadline)?;
            Ok(Prepared::Sampled { q, first })
        }
    }
}

fn run_estimator(
    polys: &[(Polytope, Vec<CanonicalConstraint>)],
    config: &SolverConfig,
    deadline: &Deadline,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<Result<Estimate, BackendError>>, Error> {
    let prepared = par_map(pool, polys.len(), |i| first_round(&polys[i].0, i, config, deadline));
    if prepared.iter().any(|p| matches!(p, Err(BackendError::Timeout))) {
        return Err(Error::Timeout);
    }
    // sizes are planned over the sampled bunches only
    let sampled: Vec<usize> = (0..polys.len())
        .filter(|&i| matches!(prepared[i], Ok(Prepared::Sampled { .. })))
        .collect();
    let mut plan_for = vec![None; polys.len()];
    for n in sampled.iter().map(|&i| polys[i].0.dim).collect::<std::collections::BTreeSet<_>>() {
        // S_min and S_max scale with l, so bunches are planned per dimension;
        // every bunch of a formula shares its dimension
        let members: Vec<usize> = sampled.iter().copied().filter(|&i| polys[i].0.dim == n).collect();
        let volumes: Vec<f64> = members
            .iter()
            .map(|&i| match &prepared[i] {
                Ok(Prepared::Sampled { first, .. }) => first.volume,
                _ => unreachable!(),
            })
            .collect();
        let l = phase_count(n);
        let plan = two_round_sizes(&volumes, config.min_coeff as usize * l, config.max_coeff as usize * l);
        for (k, &i) in members.iter().enumerate() {
            plan_for[i] = plan.sizes[k];
        }
    }
    let results = par_map(pool, polys.len(), |i| -> Result<Estimate, BackendError> {
        match &prepared[i] {
            Err(e) => Err(e.clone()),
            Ok(Prepared::Known(v)) => Ok(Estimate {
                volume: *v,
                phases: 0,
                round1_volume: None,
                samples_per_phase: 0,
                second_round: false,
                fresh_points: 0,
            }),
            Ok(Prepared::Sampled { q, first }) => {
                let l = first.ratios.len();
                match plan_for[i] {
                    None => Ok(Estimate {
                        volume: first.volume,
                        phases: l,
                        round1_volume: Some(first.volume),
                        samples_per_phase: first.samples_per_phase,
                        second_round: false,
                        fresh_points: first.fresh_total,
                    }),
                    Some(s) => {
                        let mut rng = bunch_rng(config.seed, i, 2);
                        let second = estimate_volume(q, s, &mut rng, config.burnin, deadline)?;
                        Ok(Estimate {
                            volume: second.volume,
                            phases: l,
                            round1_volume: Some(first.volume),
                            samples_per_phase: s,
                            second_round: true,
                            fresh_points: first.fresh_total + second.fresh_total,
                        })
                    }
                }
            }
        }
    });
    if results.iter().any(|r| matches!(r, Err(BackendError::Timeout))) {
        return Err(Error::Timeout);
    }
    Ok(results)
}

/// `count / 2^exp2` without overflowing the intermediate.
fn scaled_ratio(count: &BigInt, exp2: u64) -> f64 {
    let shift = count.bits().saturating_sub(64);
    let mantissa = (count >> shift).to_f64().unwrap_or(f64::NAN);
    let e = shift as i64 - exp2 as i64;
    mantissa * 2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

fn outcome<T>(r: Result<T, BackendError>) -> Outcome<T> {
    match r {
        Ok(v) => Outcome::Value(v),
        Err(e) => Outcome::Error(e.to_string()),
    }
}

pub fn run(config: &SolverConfig, formula: &Formula, input: &str) -> Result<Report, Error> {
    let start = Instant::now();
    config.validate().map_err(Error::Usage)?;
    if config.backends.integer_count && formula.numeric_kind == Some(NumericKind::Real) {
        return Err(Error::Usage("integer counting (-L) needs integer variables".into()));
    }
    let backends = if config.backends.any() {
        config.backends
    } else {
        crate::model::Backends { estimate: true, ..Default::default() }
    };
    let deadline = Deadline::after(config.timeout);
    let pool = match config.threads {
        0 => None,
        t => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))?,
        ),
    };
    let pool = pool.as_ref();

    let bunches = enumerate_bunches(formula, config, deadline)?;
    let polys: Vec<(Polytope, Vec<CanonicalConstraint>)> =
        bunches.iter().map(|b| bunch_polytope(b, formula, config)).collect();
    let multipliers: Vec<BigUint> = bunches.iter().map(bunch_multiplier).collect();

    let estimates = if backends.estimate {
        Some(run_estimator(&polys, config, &deadline, pool)?)
    } else {
        None
    };
    let volumes = if backends.exact_volume {
        let v = par_map(pool, polys.len(), |i| exact_volume(&polys[i].0.to_real(), &deadline));
        if v.iter().any(|r| matches!(r, Err(BackendError::Timeout))) {
            return Err(Error::Timeout);
        }
        Some(v)
    } else {
        None
    };
    let counts = if backends.integer_count {
        let c = par_map(pool, polys.len(), |i| count_integer_points(&polys[i].0, &polys[i].1, &deadline));
        if c.iter().any(|r| matches!(r, Err(BackendError::Timeout))) {
            return Err(Error::Timeout);
        }
        Some(c)
    } else {
        None
    };

    let mut errors = Vec::new();
    let mut records = Vec::with_capacity(bunches.len());
    let mut est_total = Some(0.0);
    let mut vol_total = Some(0.0);
    let mut count_total = Some(BigInt::zero());
    let mut coeff_sum = 0.0;
    let mut coeff_n = 0usize;
    for (i, b) in bunches.iter().enumerate() {
        let mult = &multipliers[i];
        let mult_f = mult.to_f64().unwrap_or(f64::INFINITY);
        let estimate = estimates.as_ref().map(|e| outcome(e[i].clone()));
        if let Some(o) = &estimate {
            match o {
                Outcome::Value(e) => {
                    est_total = est_total.map(|t| t + e.volume * mult_f);
                    if e.phases > 0 {
                        coeff_sum += e.samples_per_phase as f64 / e.phases as f64;
                        coeff_n += 1;
                    }
                }
                Outcome::Error(m) => {
                    est_total = None;
                    errors.push(format!("bunch {}: estimate: {m}", i + 1));
                }
            }
        }
        let exact = volumes.as_ref().map(|v| outcome(v[i].clone()));
        if let Some(o) = &exact {
            match o {
                Outcome::Value(v) => vol_total = vol_total.map(|t| t + v * mult_f),
                Outcome::Error(m) => {
                    vol_total = None;
                    errors.push(format!("bunch {}: volume: {m}", i + 1));
                }
            }
        }
        let count = counts.as_ref().map(|c| match &c[i] {
            Ok(v) => {
                count_total = count_total.take().map(|t| t + v * BigInt::from(mult.clone()));
                Outcome::Value(v.to_string())
            }
            Err(e) => {
                count_total = None;
                errors.push(format!("bunch {}: count: {e}", i + 1));
                Outcome::Error(e.to_string())
            }
        });
        records.push(BunchRecord {
            index: i,
            literals: b.literals().iter().map(|l| l.to_dimacs()).collect(),
            free_user_bools: b.free_user_bools,
            multiplier: mult.to_string(),
            estimate,
            exact_volume: exact,
            integer_count: count,
        });
    }

    let frequency = match (&count_total, config.word_length) {
        (Some(c), w) if backends.integer_count && w > 0 => {
            Some(scaled_ratio(c, w as u64 * formula.num_numeric_vars as u64))
        }
        _ => None,
    };
    let totals = Totals {
        estimate: if backends.estimate { est_total } else { None },
        exact_volume: if backends.exact_volume { vol_total } else { None },
        integer_count: if backends.integer_count { count_total.map(|c| c.to_string()) } else { None },
        frequency,
        average_coefficient: (coeff_n > 0).then(|| coeff_sum / coeff_n as f64),
    };
    Ok(Report {
        input: input.to_string(),
        header: Header {
            bool_vars: formula.num_bool_vars,
            clauses: formula.clauses.len(),
            numeric_vars: formula.num_numeric_vars,
            linear_constraints: formula.atoms.len(),
            numeric_kind: formula.numeric_kind,
        },
        settings: RunSettings {
            word_length: config.word_length,
            min_coeff: config.min_coeff,
            max_coeff: config.max_coeff,
            seed: config.seed,
            burnin: config.burnin,
            backends,
        },
        satisfiable: !bunches.is_empty(),
        bunches: records,
        totals,
        errors,
        wall_time: start.elapsed(),
    })
}
