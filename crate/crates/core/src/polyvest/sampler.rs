//! Coordinate-direction hit-and-run inside `Q ∩ B(0, radius)`.

use rand::Rng;

use super::RoundedPolytope;
use crate::model::dot;

const MIN_CHORD: f64 = 1e-14;

/// Smallest `i` with `‖x‖ <= 2^(i/n)`, capped at `l`.
pub fn phase_index(x: &[f64], n: usize, l: usize) -> usize {
    let r2 = dot(x, x);
    if r2 <= 1.0 {
        return 0;
    }
    let nf = n as f64;
    let bound = |i: usize| 4f64.powf(i as f64 / nf);
    let mut i = ((nf / 2.0) * r2.log2()).ceil().max(0.0) as usize;
    while i > 0 && r2 <= bound(i - 1) {
        i -= 1;
    }
    while i < l && r2 > bound(i) {
        i += 1;
    }
    i.min(l)
}

/// Random walk state; row slacks and the squared norm are updated along
/// with the point.
#[derive(Clone, Debug)]
pub struct Walker {
    pub x: Vec<f64>,
    slack: Vec<f64>,
    norm2: f64,
}

impl Walker {
    pub fn new(x: Vec<f64>, q: &RoundedPolytope) -> Self {
        let slack = q.a.iter().zip(&q.b).map(|(a, b)| b - dot(a, &x)).collect();
        let norm2 = dot(&x, &x);
        Walker { x, slack, norm2 }
    }

    /// Feasible interval of `t` for `x + t e_k`.
    fn chord(&self, q: &RoundedPolytope, k: usize, radius: f64) -> (f64, f64) {
        let xk = self.x[k];
        let disc = (xk * xk - self.norm2 + radius * radius).max(0.0);
        let root = disc.sqrt();
        let (mut lo, mut hi) = (-xk - root, -xk + root);
        for (a, &s) in q.a.iter().zip(&self.slack) {
            let c = a[k];
            if c > 0.0 {
                hi = hi.min(s / c);
            } else if c < 0.0 {
                lo = lo.max(s / c);
            }
        }
        (lo, hi)
    }

    pub fn step<R: Rng>(&mut self, q: &RoundedPolytope, radius: f64, rng: &mut R) {
        let n = self.x.len();
        let k = rng.random_range(0..n);
        let (lo, hi) = self.chord(q, k, radius);
        if !(hi - lo >= MIN_CHORD) {
            return;
        }
        let t = lo + (hi - lo) * rng.random::<f64>();
        let old = self.x[k];
        self.x[k] = old + t;
        self.norm2 += 2.0 * old * t + t * t;
        for (a, s) in q.a.iter().zip(self.slack.iter_mut()) {
            *s -= a[k] * t;
        }
    }

    /// Recomputes the cached quantities from scratch.
    pub fn refresh(&mut self, q: &RoundedPolytope) {
        *self = Walker::new(std::mem::take(&mut self.x), q);
    }
}

/// One hit-and-run step from `x` inside `q ∩ B(0, radius)`.
pub fn hit_and_run_step<R: Rng>(x: &[f64], q: &RoundedPolytope, radius: f64, rng: &mut R) -> Vec<f64> {
    let mut w = Walker::new(x.to_vec(), q);
    w.step(q, radius, rng);
    w.x
}
