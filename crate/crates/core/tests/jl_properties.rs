//! Distance preservation of the Gaussian random projection.

use dpkmeans::core::{squared_distance, Dataset, RngStream};
use dpkmeans::preprocess::{make_jl_with_dim, reduce_and_normalize};

/// 200 random points in R^50 projected to 200 dimensions with eps = 0.5:
/// at least 95% of pairs keep their squared distance within a factor of
/// 1 +- eps. Probabilistic, so it runs under three fixed seeds.
#[test]
fn squared_distances_survive_projection() {
    for seed in [1u64, 2, 3] {
        let mut rng = RngStream::new(seed);
        let n = 200;
        let d = 50;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.standard_normal()).collect())
            .collect();
        let transform = make_jl_with_dim(d, 200, 0.5, &mut rng).unwrap();
        let images: Vec<Vec<f64>> = points.iter().map(|p| transform.apply(p).unwrap()).collect();

        let mut within = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let orig = squared_distance(&points[i], &points[j]).unwrap();
                let proj = squared_distance(&images[i], &images[j]).unwrap();
                let ratio = proj / orig;
                if (0.5..=1.5).contains(&ratio) {
                    within += 1;
                }
                pairs += 1;
            }
        }
        let frac = within as f64 / pairs as f64;
        assert!(frac >= 0.95, "seed {seed}: only {frac} of pairs preserved");
    }
}

/// Identity transform with zero distortion scales costs by exactly
/// `(diameter / 2)^2` when the divisor is a power of two.
#[test]
fn identity_reduction_is_exactly_cost_preserving() {
    let points = vec![
        vec![1.0, 0.5],
        vec![-1.0, 0.25],
        vec![0.5, -1.5],
        vec![0.0, 0.0],
    ];
    let data = Dataset::new(points.clone(), 4.0).unwrap();
    let (reduced, record) = reduce_and_normalize(
        &data,
        dpkmeans::preprocess::JlTransform::identity(2),
    )
    .unwrap();
    assert_eq!(record.scale_factor, 2.0);
    assert!(record.projected_indices.is_empty());
    for i in 0..points.len() {
        for j in 0..points.len() {
            let orig = squared_distance(&points[i], &points[j]).unwrap();
            let red = squared_distance(reduced.point(i), reduced.point(j)).unwrap();
            assert_eq!(orig, red * 4.0, "pair ({i}, {j})");
        }
    }
}

#[test]
fn reduced_points_stay_in_unit_ball() {
    let mut rng = RngStream::new(11);
    let points: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..12).map(|_| rng.standard_normal()).collect())
        .collect();
    // A deliberately tight declared diameter forces some projections.
    let max_norm = points
        .iter()
        .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let data = Dataset::new(points, 2.0 * max_norm).unwrap();
    let transform = make_jl_with_dim(12, 4, 0.5, &mut rng).unwrap();
    let (reduced, _) = reduce_and_normalize(&data, transform).unwrap();
    for p in reduced.points() {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 1.0 + 1e-12, "norm {norm}");
    }
}
