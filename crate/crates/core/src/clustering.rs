//! Non-private weighted k-means: k-means++ seeding and Lloyd iterations.
//!
//! This is the pluggable clustering step applied to the noisy proxy dataset;
//! weights are real-valued because the proxy's counts are noisy.

use crate::core::{nearest_center, sq_dist_unchecked, CenterSet, RngStream, WeightedDataset};
use crate::{Error, Result};

/// How Lloyd iterations are initialized.
#[derive(Debug, Clone)]
pub enum Seeding {
    KMeansPlusPlus,
    Provided(CenterSet),
}

#[derive(Debug, Clone)]
pub struct LloydConfig {
    pub k: usize,
    pub max_iters: usize,
    pub relative_tolerance: f64,
    pub seeding: Seeding,
}

impl LloydConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 10,
            relative_tolerance: 1e-6,
            seeding: Seeding::KMeansPlusPlus,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam {
                name: "k",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        if !(self.relative_tolerance.is_finite() && self.relative_tolerance >= 0.0) {
            return Err(Error::InvalidParam {
                name: "relative_tolerance",
                value: self.relative_tolerance,
                constraint: "must be nonnegative",
            });
        }
        Ok(())
    }
}

/// Weighted draw proportional to `weights`; entries with zero weight are
/// never selected. Assumes some weight is positive.
fn weighted_pick(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let x = rng.uniform() * total;
    let mut acc = 0.0;
    let mut fallback = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            fallback = i;
            if x < acc {
                return i;
            }
        }
    }
    // Rounding pushed x to the very top; take the last positive entry.
    fallback
}

/// Weighted k-means++ seeding: the first center is drawn proportionally to
/// weight, each further center proportionally to `w * d(p, chosen)^2`.
/// Duplicates arise only when fewer than `k` distinct support points exist
/// (all remaining squared distances are zero).
pub fn kmeanspp_seed(data: &WeightedDataset, k: usize, rng: &mut RngStream) -> Result<CenterSet> {
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            value: 0.0,
            constraint: "must be at least 1",
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyInput { what: "weighted data" });
    }
    if data.weights().iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroWeightSupport);
    }

    let points = data.points();
    let weights = data.weights();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[weighted_pick(weights, rng)].clone());

    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist_unchecked(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let masses: Vec<f64> = weights.iter().zip(&d2).map(|(&w, &d)| w * d).collect();
        let next = if masses.iter().sum::<f64>() > 0.0 {
            weighted_pick(&masses, rng)
        } else {
            // Every support point is already a center; duplicate one,
            // weight-proportionally.
            weighted_pick(weights, rng)
        };
        centers.push(points[next].clone());
        let c = centers.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist_unchecked(p, c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    CenterSet::new(centers)
}

/// Weighted Lloyd iterations.
///
/// Alternates nearest-center assignment (ties to the lowest index) with
/// weighted centroid updates until `max_iters` updates have run or the
/// relative cost decrease falls below the tolerance. A cluster whose total
/// weight reaches zero is re-seeded to the point with the largest weighted
/// distance contribution.
pub fn lloyd(
    data: &WeightedDataset,
    config: &LloydConfig,
    rng: &mut RngStream,
) -> Result<CenterSet> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput { what: "weighted data" });
    }
    if data.weights().iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroWeightSupport);
    }

    let mut centers = match &config.seeding {
        Seeding::KMeansPlusPlus => kmeanspp_seed(data, config.k, rng)?.centers().to_vec(),
        Seeding::Provided(set) => {
            if set.k() != config.k {
                return Err(Error::LengthMismatch {
                    expected: config.k,
                    got: set.k(),
                });
            }
            if set.dim() != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    got: set.dim(),
                });
            }
            set.centers().to_vec()
        }
    };

    let points = data.points();
    let weights = data.weights();
    let dim = data.dim();
    let mut assignment = vec![0usize; points.len()];
    let mut prev_cost: Option<f64> = None;

    for _ in 0..config.max_iters {
        let mut cost = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_center(p, &centers);
            assignment[i] = c;
            cost += weights[i] * d;
        }
        if let Some(prev) = prev_cost {
            if prev - cost <= config.relative_tolerance * prev {
                break;
            }
        }
        prev_cost = Some(cost);

        let mut sums = vec![vec![0.0; dim]; config.k];
        let mut mass = vec![0.0; config.k];
        for (i, p) in points.iter().enumerate() {
            let w = weights[i];
            mass[assignment[i]] += w;
            let acc = &mut sums[assignment[i]];
            for j in 0..dim {
                acc[j] += w * p[j];
            }
        }

        let mut repaired: Vec<usize> = Vec::new();
        for c in 0..config.k {
            if mass[c] > 0.0 {
                for j in 0..dim {
                    centers[c][j] = sums[c][j] / mass[c];
                }
            } else {
                // Farthest weighted contributor not already used for repair
                // this round; ties to the lowest index.
                let mut best = None;
                let mut best_contrib = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if repaired.contains(&i) {
                        continue;
                    }
                    let contrib = weights[i] * sq_dist_unchecked(p, &centers[assignment[i]]);
                    if contrib > best_contrib {
                        best_contrib = contrib;
                        best = Some(i);
                    }
                }
                if let Some(i) = best {
                    centers[c] = points[i].clone();
                    repaired.push(i);
                }
            }
        }
    }
    CenterSet::new(centers)
}
