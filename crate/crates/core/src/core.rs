//! Datasets, the k-means objective and the seeded randomness contract.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A dataset of `n` points in `R^d` together with a declared diameter bound.
///
/// The bound is supplied by the caller, not inferred from the data: inferring
/// it would itself leak information in a deployment. Construction verifies
/// that every pairwise distance actually respects the bound.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    diameter_bound: f64,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, diameter_bound: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput { what: "dataset" });
        }
        if !(diameter_bound.is_finite() && diameter_bound > 0.0) {
            return Err(Error::InvalidParam {
                name: "diameter_bound",
                value: diameter_bound,
                constraint: "must be positive and finite",
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::EmptyInput { what: "point" });
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index: i });
            }
        }
        check_diameter(&points, diameter_bound)?;
        Ok(Self {
            points,
            diameter_bound,
        })
    }

    /// Caller guarantees the invariants hold (used for derived datasets whose
    /// bound is implied by construction, e.g. unit-ball images).
    pub(crate) fn new_unchecked(points: Vec<Vec<f64>>, diameter_bound: f64) -> Self {
        Self {
            points,
            diameter_bound,
        }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn diameter_bound(&self) -> f64 {
        self.diameter_bound
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
}

/// Verify every pairwise distance is at most `bound`.
///
/// Two O(n d) sufficient conditions (bounding-box diagonal, containment in a
/// ball of radius `bound / 2` around the origin or the centroid) are tried
/// before the exact O(n^2 d) scan, so well-formed data never pays quadratic
/// cost. The exact scan reports the offending pair.
fn check_diameter(points: &[Vec<f64>], bound: f64) -> Result<()> {
    let dim = points[0].len();
    let bound_sq = bound * bound;

    let mut diag_sq = 0.0;
    for j in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            lo = lo.min(p[j]);
            hi = hi.max(p[j]);
        }
        diag_sq += (hi - lo) * (hi - lo);
    }
    if diag_sq <= bound_sq {
        return Ok(());
    }

    let radius = bound / 2.0;
    let radius_sq = radius * radius;
    let origin = vec![0.0; dim];
    let mut centroid = vec![0.0; dim];
    for p in points {
        for j in 0..dim {
            centroid[j] += p[j];
        }
    }
    for c in centroid.iter_mut() {
        *c /= points.len() as f64;
    }
    for center in [&origin, &centroid] {
        if points
            .iter()
            .all(|p| sq_dist_unchecked(p, center) <= radius_sq)
        {
            return Ok(());
        }
    }

    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = sq_dist_unchecked(&points[i], &points[j]);
            if d > bound_sq {
                return Err(Error::DiameterExceeded {
                    i,
                    j,
                    distance: d.sqrt(),
                    bound,
                });
            }
        }
    }
    Ok(())
}

/// Points with nonnegative real weights.
///
/// Weights are real rather than integer multiplicities because noisy counts
/// are not integers and rounding them would bias the proxy.
#[derive(Debug, Clone)]
pub struct WeightedDataset {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WeightedDataset {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if !points.is_empty() {
            let dim = points[0].len();
            if dim == 0 {
                return Err(Error::EmptyInput { what: "point" });
            }
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteCoordinate { index: i });
                }
            }
            for &w in &weights {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidParam {
                        name: "weight",
                        value: w,
                        constraint: "must be nonnegative and finite",
                    });
                }
            }
            if weights.iter().all(|&w| w == 0.0) {
                return Err(Error::ZeroWeightSupport);
            }
        }
        Ok(Self { points, weights })
    }

    /// All weights equal to one.
    pub fn from_dataset(data: &Dataset) -> Self {
        Self {
            points: data.points().to_vec(),
            weights: vec![1.0; data.n()],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A set of cluster centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterSet {
    centers: Vec<Vec<f64>>,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyInput { what: "center set" });
        }
        let dim = centers[0].len();
        for (i, c) in centers.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index: i });
            }
        }
        Ok(Self { centers })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(SPLITMIX_GAMMA);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded random stream. Identical seed and call sequence give identical
/// outputs, which makes every randomized routine in the crate replayable.
///
/// Streams must not be shared across concurrent tasks; derive a child stream
/// per task instead.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream decorrelated from this one by `label`. Derivation depends
    /// only on the parent seed, not on the parent's position, so derived
    /// streams are order-independent.
    pub fn derive(&self, label: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(label)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer from `[0, n)`.
    pub fn uniform_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "uniform_below requires n > 0");
        let rem = ((1u128 << 64) % n as u128) as u64;
        if rem == 0 {
            return self.next_u64() % n;
        }
        // Reject the top partial block to remove modulo bias.
        let limit = u64::MAX - rem + 1;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % n;
            }
        }
    }

    /// One standard normal draw (Box-Muller; consumes two uniforms).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Squared Euclidean distance between two points of equal dimension.
pub fn squared_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(sq_dist_unchecked(p, q))
}

#[inline]
pub(crate) fn sq_dist_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..p.len() {
        let d = p[j] - q[j];
        acc += d * d;
    }
    acc
}

/// Index of the nearest center and its squared distance. Ties break toward
/// the lowest index.
#[inline]
pub(crate) fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = sq_dist_unchecked(p, &centers[0]);
    for (i, c) in centers.iter().enumerate().skip(1) {
        let d = sq_dist_unchecked(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best, best_d)
}

/// k-means objective: sum over points of the squared distance to the nearest
/// center.
pub fn kmeans_cost(data: &Dataset, centers: &CenterSet) -> Result<f64> {
    if data.dim() != centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: centers.dim(),
        });
    }
    Ok(data
        .points()
        .iter()
        .map(|p| nearest_center(p, centers.centers()).1)
        .sum())
}

/// Weighted k-means objective; each point contributes `w * d(p, S)`.
pub fn kmeans_cost_weighted(data: &WeightedDataset, centers: &CenterSet) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    if data.dim() != centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: centers.dim(),
        });
    }
    Ok(data
        .points()
        .iter()
        .zip(data.weights())
        .map(|(p, &w)| w * nearest_center(p, centers.centers()).1)
        .sum())
}

/// Per-point index of the nearest center (lowest index on ties).
pub fn assign_clusters(data: &Dataset, centers: &CenterSet) -> Result<Vec<usize>> {
    if data.dim() != centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: centers.dim(),
        });
    }
    Ok(data
        .points()
        .iter()
        .map(|p| nearest_center(p, centers.centers()).0)
        .collect())
}
