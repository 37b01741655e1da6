//! Second-round sample sizes from first-round volume estimates.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoRoundPlan {
    pub volumes: Vec<f64>,
    pub v_max: f64,
    pub s_min: usize,
    pub s_max: usize,
    /// Per-phase sample size of the second round; `None` keeps the first-round value.
    pub sizes: Vec<Option<usize>>,
}

/// `S_i = 2 S_max V_i / V_max`, skipped when `S_i <= S_min` and clamped to `S_max`.
pub fn two_round_sizes(volumes: &[f64], s_min: usize, s_max: usize) -> TwoRoundPlan {
    let v_max = volumes.iter().copied().fold(0.0, f64::max);
    let sizes = volumes
        .iter()
        .map(|&v| {
            if !(v_max > 0.0) {
                return None;
            }
            let s = 2.0 * s_max as f64 * v / v_max;
            if s <= s_min as f64 {
                None
            } else {
                Some((s.ceil() as usize).min(s_max))
            }
        })
        .collect();
    TwoRoundPlan { volumes: volumes.to_vec(), v_max, s_min, s_max, sizes }
}
