//! Ellipsoids `{x : (x-o)^T E^-1 (x-o) <= 1}` and the shallow-cut update.

use crate::error::BackendError;
use crate::model::dot;

#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
}

impl Ellipsoid {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        let mut shape = vec![vec![0.0; n]; n];
        for (i, row) in shape.iter_mut().enumerate() {
            row[i] = radius * radius;
        }
        Ellipsoid { center, shape }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `E a`.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        self.shape.iter().map(|row| dot(row, a)).collect()
    }

    /// Half-width of the ellipsoid along `a`, `sqrt(a^T E a)`.
    pub fn width(&self, a: &[f64]) -> f64 {
        dot(a, &self.apply(a)).max(0.0).sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let Some(l) = cholesky(&self.shape) else { return false };
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let u = forward_substitute(&l, &d);
        dot(&u, &u) <= 1.0 + tol
    }

    /// `ln det E`, or `None` when `E` is not positive definite.
    pub fn log_det(&self) -> Option<f64> {
        cholesky(&self.shape).map(|l| 2.0 * (0..l.len()).map(|i| l[i][i].ln()).sum::<f64>())
    }
}

/// Lower-triangular `L` with `L L^T = m`, or `None` if `m` is not positive definite.
pub fn cholesky(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L u = d` for lower-triangular `L`.
pub fn forward_substitute(l: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut u = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * u[k]).sum();
        u[i] = (d[i] - s) / l[i][i];
    }
    u
}

/// Smallest ellipsoid of the shallow-cut family containing
/// `e ∩ {x : a·x <= a·o + beta·sqrt(a^T E a)}`; `beta = 0` is the central cut.
pub fn shallow_cut_update(e: &Ellipsoid, a: &[f64], beta: f64) -> Result<Ellipsoid, BackendError> {
    let n = e.dim();
    let ea = e.apply(a);
    let aea = dot(a, &ea);
    if !(aea > 0.0) || !aea.is_finite() {
        return Err(BackendError::NotPositiveDefinite);
    }
    let s = aea.sqrt();
    let g: Vec<f64> = ea.iter().map(|v| v / s).collect();
    if n == 1 {
        // the interval [o - r, o + r] cut at o + beta r
        let r = s / a[0].abs();
        let lo = e.center[0] - r;
        let hi = e.center[0] + beta * r;
        let (lo, hi) = if a[0] > 0.0 { (lo, hi) } else { (e.center[0] - beta * r, e.center[0] + r) };
        let half = (hi - lo) / 2.0;
        return Ok(Ellipsoid { center: vec![(lo + hi) / 2.0], shape: vec![vec![half * half]] });
    }
    let nf = n as f64;
    let gamma = (1.0 - nf * beta) / (nf + 1.0);
    let center: Vec<f64> = e.center.iter().zip(&g).map(|(o, gi)| o - gamma * gi).collect();
    let factor = nf * nf * (1.0 - beta * beta) / (nf * nf - 1.0);
    let k = 2.0 * gamma / (1.0 - beta);
    let mut shape = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            shape[i][j] = factor * (e.shape[i][j] - k * g[i] * g[j]);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (shape[i][j] + shape[j][i]) / 2.0;
            shape[i][j] = m;
            shape[j][i] = m;
        }
    }
    if cholesky(&shape).is_none() {
        return Err(BackendError::NotPositiveDefinite);
    }
    Ok(Ellipsoid { center, shape })
}
