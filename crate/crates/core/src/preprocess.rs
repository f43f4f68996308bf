//! Dimension reduction and normalization: random projection, scaling into
//! the unit ball, and radial projection of the rare stragglers.

use crate::core::{Dataset, RngStream};
use crate::{Error, Result};

/// A dense Gaussian random projection from `R^d` to `R^{d'}`.
#[derive(Debug, Clone)]
pub struct JlTransform {
    /// Row-major `d' x d` matrix.
    matrix: Vec<Vec<f64>>,
    source_dim: usize,
    target_dim: usize,
    distortion: f64,
}

impl JlTransform {
    /// The identity embedding, useful for tests where no distortion is
    /// wanted. `distortion` is zero, so downstream scaling uses `diameter/2`.
    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| {
                let mut row = vec![0.0; dim];
                row[i] = 1.0;
                row
            })
            .collect();
        Self {
            matrix,
            source_dim: dim,
            target_dim: dim,
            distortion: 0.0,
        }
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                got: p.len(),
            });
        }
        Ok(self
            .matrix
            .iter()
            .map(|row| row.iter().zip(p).map(|(m, x)| m * x).sum())
            .collect())
    }
}

/// Default reduced dimension `max(1, ceil(log2(n) / 2))`.
pub fn default_target_dim(n: usize) -> usize {
    ((n as f64).log2() / 2.0).ceil().max(1.0) as usize
}

/// Gaussian projection matrix with entries i.i.d. `N(0, 1/d')` where
/// `d'` is the default target dimension for `n`.
pub fn make_jl(n: usize, d: usize, eps: f64, rng: &mut RngStream) -> Result<JlTransform> {
    make_jl_with_dim(d, default_target_dim(n), eps, rng)
}

/// Same as [`make_jl`] with an explicit target dimension.
pub fn make_jl_with_dim(
    d: usize,
    target_dim: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<JlTransform> {
    if d == 0 || target_dim == 0 {
        return Err(Error::EmptyInput { what: "dimension" });
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidParam {
            name: "eps",
            value: eps,
            constraint: "must lie in (0, 0.5]",
        });
    }
    let sigma = (1.0 / target_dim as f64).sqrt();
    let matrix = (0..target_dim)
        .map(|_| (0..d).map(|_| sigma * rng.standard_normal()).collect())
        .collect();
    Ok(JlTransform {
        matrix,
        source_dim: d,
        target_dim,
        distortion: eps,
    })
}

/// What `reduce_and_normalize` did: the transform, the scale divisor, and
/// which points had to be radially projected back into the unit ball.
#[derive(Debug, Clone)]
pub struct PreprocessRecord {
    pub transform: JlTransform,
    pub scale_factor: f64,
    pub projected_indices: Vec<usize>,
}

/// Map every point through the transform, divide by `diameter (1 + eps) / 2`
/// so that the distorted image fits the unit ball, and radially project any
/// stragglers onto the unit sphere. The output dataset has diameter bound 2.
///
/// Projection is silent with respect to privacy accounting; the projected
/// indices are recorded for diagnostics only.
pub fn reduce_and_normalize(
    data: &Dataset,
    transform: JlTransform,
) -> Result<(Dataset, PreprocessRecord)> {
    let scale = data.diameter_bound() * (1.0 + transform.distortion()) / 2.0;
    let mut projected = Vec::new();
    let mut points = Vec::with_capacity(data.n());
    for (i, p) in data.points().iter().enumerate() {
        let mut image = transform.apply(p)?;
        for x in image.iter_mut() {
            *x /= scale;
        }
        let norm_sq: f64 = image.iter().map(|x| x * x).sum();
        if norm_sq > 1.0 {
            let norm = norm_sq.sqrt();
            for x in image.iter_mut() {
                *x /= norm;
            }
            projected.push(i);
        }
        points.push(image);
    }
    // Every image lies in the unit ball, so pairwise distances are <= 2 by
    // construction.
    let reduced = Dataset::new_unchecked(points, 2.0);
    Ok((
        reduced,
        PreprocessRecord {
            transform,
            scale_factor: scale,
            projected_indices: projected,
        },
    ))
}

/// Group original-point indices by the cluster their reduced image was
/// assigned to. Cluster `i` of the result holds exactly the points whose
/// image landed in cluster `i`; trailing empty clusters are preserved.
pub fn lift_assignment(
    original: &Dataset,
    record: &PreprocessRecord,
    assignment: &[usize],
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if assignment.len() != original.n() {
        return Err(Error::LengthMismatch {
            expected: original.n(),
            got: assignment.len(),
        });
    }
    if record.transform.source_dim() != original.dim() {
        return Err(Error::DimensionMismatch {
            expected: original.dim(),
            got: record.transform.source_dim(),
        });
    }
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        if c >= k {
            return Err(Error::InvalidParam {
                name: "assignment",
                value: c as f64,
                constraint: "cluster index must be below k",
            });
        }
        members[c].push(i);
    }
    Ok(members)
}
