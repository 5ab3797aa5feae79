use serde::{Deserialize, Serialize};

use super::{DistortionMetric, TestChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corner {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    /// Weight on the first-decoder rate used to find this point.
    pub lambda: f64,
    pub rate: f64,
    pub delta_rate: f64,
    pub d1: f64,
    pub d2: f64,
    pub corner: Option<Corner>,
}

impl RegionPoint {
    pub(crate) fn from_channel(
        channel: &TestChannel,
        m1: &DistortionMetric,
        m2: &DistortionMetric,
        lambda: f64,
        corner: Option<Corner>,
    ) -> Self {
        let rate = channel.first_decoder_rate().max(0.0);
        let sum = channel.sum_rate();
        Self {
            lambda,
            rate,
            delta_rate: (sum - rate).max(0.0),
            d1: channel.distortion1(m1),
            d2: channel.distortion2(m2),
            corner,
        }
    }

    pub fn sum_rate(&self) -> f64 {
        self.rate + self.delta_rate
    }
}

/// Achievable `(R, Delta R)` pairs: everything above the convex staircase
/// through the stored points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdRegion {
    pub points: Vec<RegionPoint>,
    pub u_cardinality: usize,
    /// Test channel behind each point, in the same order.
    #[serde(skip)]
    pub certificates: Vec<TestChannel>,
}

impl RdRegion {
    pub(crate) fn new(points: Vec<RegionPoint>, certificates: Vec<TestChannel>, u_cardinality: usize) -> Self {
        Self {
            points,
            u_cardinality,
            certificates,
        }
    }

    pub fn corner(&self, which: Corner) -> Option<&RegionPoint> {
        self.points.iter().find(|p| p.corner == Some(which))
    }

    /// Lower-left boundary as `(R, Delta R)` vertices with increasing `R`.
    pub fn boundary(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.points.iter().map(|p| (p.rate, p.delta_rate)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut pareto: Vec<(f64, f64)> = Vec::new();
        for p in v {
            if pareto.last().is_none_or(|l| p.1 < l.1) {
                pareto.push(p);
            }
        }
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for p in pareto {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull
    }

    /// Whether `(rate, delta_rate)` is achievable up to `tol`.
    pub fn contains(&self, rate: f64, delta_rate: f64, tol: f64) -> bool {
        let hull = self.boundary();
        let Some(first) = hull.first() else {
            return false;
        };
        if rate < first.0 - tol {
            return false;
        }
        let floor = match hull.windows(2).find(|w| rate <= w[1].0) {
            Some(w) => {
                let t = (rate - w[0].0) / (w[1].0 - w[0].0);
                w[0].1 + t.clamp(0.0, 1.0) * (w[1].1 - w[0].1)
            }
            None => hull.last().map_or(0.0, |l| l.1),
        };
        delta_rate >= floor - tol
    }
}
