//! Randomized volume estimation: ellipsoid rounding followed by a multiphase
//! Monte Carlo over concentric balls, with sample points reused from the
//! outer phases.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::deadline::Deadline;
use crate::error::BackendError;
use crate::lp::{interior_point, lp_optimize, Interior, LpOutcome, Sense, FLAT_TOL};
use crate::model::{dot, RealPolytope};

pub mod ellipsoid;
pub mod sampler;

pub use ellipsoid::{cholesky, shallow_cut_update, Ellipsoid};
pub use sampler::{hit_and_run_step, phase_index, Walker};

/// `Q = {y : a y <= b}` with `B(0,1) ⊆ Q ⊆ B(0, radius)` and
/// `vol(P) = vol(Q) · exp(log_scale)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedPolytope {
    pub dim: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub log_scale: f64,
    pub radius: f64,
}

impl RoundedPolytope {
    pub fn from_rows(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>, log_scale: f64) -> Self {
        RoundedPolytope { dim, a, b, log_scale, radius: 2.0 * dim as f64 }
    }

    /// The unit ball, presented as an unconstrained body whose outermost
    /// phase ball has been rescaled to radius 1.
    pub fn unit_ball(dim: usize) -> Self {
        let l = phase_count(dim);
        RoundedPolytope::from_rows(dim, Vec::new(), Vec::new(), -(l as f64) * std::f64::consts::LN_2)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.a.iter().zip(&self.b).all(|(a, b)| dot(a, y) <= b + tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rounding {
    Rounded(RoundedPolytope),
    /// The body is empty or flat within tolerance.
    ZeroVolume,
}

/// `l = ceil(n log2(2n))`.
pub fn phase_count(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let nf = n as f64;
    let l = (nf * (2.0 * nf).log2()).ceil() as usize;
    // guard against log2 landing a hair above an integer
    if l > 0 && 2f64.powf((l - 1) as f64 / nf) >= 2.0 * nf {
        l - 1
    } else {
        l
    }
}

/// `ln` of the volume of the unit `n`-ball, `π^(n/2) / Γ(n/2 + 1)`.
pub fn log_unit_ball_volume(n: usize) -> f64 {
    // Γ(n/2 + 1) by the recurrence Γ(x + 1) = x Γ(x) down to Γ(1) or Γ(1/2)
    let mut log_gamma = 0.0;
    let mut x = n as f64 / 2.0;
    while x > 0.25 {
        log_gamma += x.ln();
        x -= 1.0;
    }
    if n % 2 == 1 {
        log_gamma += 0.5 * std::f64::consts::PI.ln();
    }
    n as f64 / 2.0 * std::f64::consts::PI.ln() - log_gamma
}

pub fn unit_ball_volume(n: usize) -> f64 {
    log_unit_ball_volume(n).exp()
}

/// Rounds `p` (strict rows relaxed) with shallow cuts, `beta = 1/(2n)`.
pub fn round_polytope(p: &RealPolytope, deadline: &Deadline) -> Result<Rounding, BackendError> {
    let n = p.dim;
    assert!(n >= 1, "rounding needs at least one dimension");
    if p.has_equality() {
        return Ok(Rounding::ZeroVolume);
    }
    match interior_point(p)? {
        Interior::Center { .. } => {}
        Interior::Degenerate | Interior::Infeasible => return Ok(Rounding::ZeroVolume),
        Interior::Unbounded => return Err(BackendError::Unbounded),
    }
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (sense, slot) in [(Sense::Max, &mut hi[j]), (Sense::Min, &mut lo[j])] {
            match lp_optimize(p, &e, sense)? {
                LpOutcome::Optimal { value, .. } => *slot = value,
                LpOutcome::Unbounded => return Err(BackendError::Unbounded),
                LpOutcome::Infeasible => return Ok(Rounding::ZeroVolume),
            }
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (l + h) / 2.0).collect();
    let half_diag = lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt() / 2.0;
    let mut e = Ellipsoid::ball(center, half_diag * (1.0 + 1e-9) + f64::MIN_POSITIVE);

    let beta = 1.0 / (2.0 * n as f64);
    let det_floor = 2.0 * n as f64 * FLAT_TOL.ln();
    let norms: Vec<f64> = p.rows.iter().map(|a| dot(a, a).sqrt()).collect();
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations % 256 == 0 {
            deadline.check()?;
            if e.log_det().is_none_or(|d| d < det_floor) {
                return Ok(Rounding::ZeroVolume);
            }
        }
        // most violated row, measured in ellipsoid widths
        let mut worst: Option<(usize, f64)> = None;
        for (i, (a, &b)) in p.rows.iter().zip(&p.rhs).enumerate() {
            if norms[i] == 0.0 {
                continue;
            }
            let w = e.width(a);
            let excess = dot(a, &e.center) + beta * w - b;
            if excess > 0.0 {
                let score = excess / w.max(f64::MIN_POSITIVE);
                if worst.is_none_or(|(_, s)| score > s) {
                    worst = Some((i, score));
                }
            }
        }
        let Some((i, _)) = worst else { break };
        e = shallow_cut_update(&e, &p.rows[i], beta)?;
    }

    let l = cholesky(&e.shape).ok_or(BackendError::NotPositiveDefinite)?;
    let log_det_l: f64 = (0..n).map(|i| l[i][i].ln()).sum();
    if 2.0 * log_det_l < det_floor {
        return Ok(Rounding::ZeroVolume);
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut a_out = Vec::with_capacity(p.rows.len());
    let mut b_out = Vec::with_capacity(p.rows.len());
    for (a, &b) in p.rows.iter().zip(&p.rhs) {
        // row · L / (2n)
        let row: Vec<f64> = (0..n).map(|j| (j..n).map(|k| a[k] * l[k][j]).sum::<f64>() * scale).collect();
        a_out.push(row);
        b_out.push(b - dot(a, &e.center));
    }
    let log_scale = log_det_l - n as f64 * (2.0 * n as f64).ln();
    Ok(Rounding::Rounded(RoundedPolytope::from_rows(n, a_out, b_out, log_scale)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub volume: f64,
    pub log_volume: f64,
    /// Estimated `vol(K_{i+1}) / vol(K_i)` for `i = 0..l`.
    pub ratios: Vec<f64>,
    pub fresh_per_phase: Vec<usize>,
    pub fresh_total: usize,
    pub samples_per_phase: usize,
}

/// Generator for round `round` (1 or 2) of bunch `bunch_index`.
pub fn bunch_rng(seed: u64, bunch_index: usize, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ bunch_index as u64);
    rng.set_stream(round);
    rng
}

/// Multiphase estimate of `vol(P)` from its rounded body, `samples` points
/// per phase. Phases run from the outermost ball inwards and every stored
/// point is reused by all inner phases whose ball contains it.
pub fn estimate_volume<R: Rng>(
    q: &RoundedPolytope,
    samples: usize,
    rng: &mut R,
    burnin: usize,
    deadline: &Deadline,
) -> Result<EstimateResult, BackendError> {
    assert!(samples >= 1);
    let n = q.dim;
    let l = phase_count(n);
    let mut buckets = vec![0usize; l + 1];
    let mut latest: Vec<Option<(usize, Vec<f64>)>> = vec![None; l + 1];
    let mut stored = 0usize;
    let mut ratios = vec![0.0; l];
    let mut fresh_per_phase = vec![0usize; l];

    for i in (0..l).rev() {
        let radius = 2f64.powf((i + 1) as f64 / n as f64);
        let mut available: usize = buckets[..=i + 1].iter().sum();
        if available < samples {
            let start = latest[..=i + 1]
                .iter()
                .flatten()
                .max_by_key(|(seq, _)| *seq)
                .map_or_else(|| vec![0.0; n], |(_, x)| x.clone());
            let mut walker = Walker::new(start, q);
            for _ in 0..burnin {
                walker.step(q, radius, rng);
            }
            while available < samples {
                walker.step(q, radius, rng);
                debug_assert!(q.contains(&walker.x, 1e-7) && dot(&walker.x, &walker.x).sqrt() <= radius * (1.0 + 1e-9));
                let idx = phase_index(&walker.x, n, l).min(i + 1);
                buckets[idx] += 1;
                latest[idx] = Some((stored, walker.x.clone()));
                stored += 1;
                available += 1;
                fresh_per_phase[i] += 1;
                if fresh_per_phase[i] % 4096 == 0 {
                    deadline.check()?;
                    walker.refresh(q);
                }
            }
        }
        let inner: usize = buckets[..=i].iter().sum();
        if inner == 0 {
            return Err(BackendError::EstimationDegenerate(i));
        }
        ratios[i] = samples as f64 / inner as f64;
    }
    let log_volume = log_unit_ball_volume(n) + ratios.iter().map(|r| r.ln()).sum::<f64>() + q.log_scale;
    Ok(EstimateResult {
        volume: log_volume.exp(),
        log_volume,
        ratios,
        fresh_total: fresh_per_phase.iter().sum(),
        fresh_per_phase,
        samples_per_phase: samples,
    })
}
