//! Sweep results shared by the closed- and open-system drivers.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m0: f64,
    pub s_inv: f64,
    pub p0: f64,
    /// Monte Carlo standard error; zero for deterministic evolutions.
    pub stderr: f64,
    /// Number of trajectories; zero for deterministic evolutions.
    pub k: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Distinct `m0` values in first-appearance order.
    pub fn m0_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.m0) {
                out.push(p.m0);
            }
        }
        out
    }

    /// Points for one `m0`, ordered by `s_inv`.
    pub fn curve(&self, m0: f64) -> Vec<SweepPoint> {
        let mut pts: Vec<SweepPoint> = self.points.iter().filter(|p| p.m0 == m0).copied().collect();
        pts.sort_by(|a, b| a.s_inv.total_cmp(&b.s_inv));
        pts
    }

    /// The point with the largest `P0` for each `m0`.
    pub fn maxima(&self) -> Vec<SweepPoint> {
        self.m0_values()
            .into_iter()
            .filter_map(|m0| {
                self.curve(m0)
                    .into_iter()
                    .max_by(|a, b| a.p0.total_cmp(&b.p0))
            })
            .collect()
    }
}
