//! The end-to-end private k-means algorithm and its privacy accountant.
//!
//! Stage order: dimension reduction and normalization; `m` levels of private
//! grid set cover accumulating candidate centers; a Laplace-noised weighted
//! proxy over the candidates; non-private weighted Lloyd on the proxy;
//! lifting the reduced-space assignment back to the original points; one
//! noisy-average release per cluster in the original space; optionally a few
//! rounds of differentially private Lloyd refinement.

use serde::{Deserialize, Serialize};

use crate::clustering::{lloyd, LloydConfig, Seeding};
use crate::core::{
    assign_clusters, kmeans_cost, nearest_center, CenterSet, Dataset, RngStream, WeightedDataset,
};
use crate::gridcover::{default_rounds, grid_levels, private_grid_set_cover, Selection};
use crate::mechanisms::{laplace_sample, noisy_avg, LaplaceParam};
use crate::preprocess::{default_target_dim, lift_assignment, make_jl_with_dim, reduce_and_normalize};
use crate::{Error, Result};

/// Per-stage privacy parameters of one pipeline run.
///
/// The composed guarantee certified by [`accountant`] assumes
/// `eps_g <= 1/3` (the regime in which the noisy-averaging bound is proved);
/// larger values are accepted so that near-non-private budgets can run, but
/// the certificate then has no backing theorem.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub eps_e: f64,
    pub delta_e: f64,
    pub eps_l: f64,
    pub eps_g: f64,
    pub delta_g: f64,
}

impl PrivacyParams {
    pub fn new(eps_e: f64, delta_e: f64, eps_l: f64, eps_g: f64, delta_g: f64) -> Result<Self> {
        for (name, value) in [("eps_e", eps_e), ("eps_l", eps_l), ("eps_g", eps_g)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    constraint: "must be positive and finite",
                });
            }
        }
        for (name, value) in [("delta_e", delta_e), ("delta_g", delta_g)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    constraint: "must lie in (0, 1)",
                });
            }
        }
        Ok(Self {
            eps_e,
            delta_e,
            eps_l,
            eps_g,
            delta_g,
        })
    }
}

/// One composed stage in the privacy report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageLoss {
    pub stage: String,
    pub eps: f64,
    pub delta: f64,
}

/// The composed `(eps, delta)` guarantee with its per-stage breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub eps_total: f64,
    pub delta_total: f64,
    pub stages: Vec<StageLoss>,
}

/// Compose the per-stage losses.
///
/// The grid-cover loop over all levels and rounds costs
/// `(e eps_e ln(1/delta_e) / 2, delta_e)`; the proxy counts cost
/// `(eps_l, 0)`; the per-cluster noisy averages compose in parallel to
/// `(eps_g, delta_g)`. Each refinement round re-spends `(eps_l, 0)` for its
/// count release and `(eps_g, delta_g)` for its averaging pass.
pub fn accountant(params: &PrivacyParams, dp_lloyd_rounds: usize) -> PrivacyReport {
    let loop_eps = std::f64::consts::E * params.eps_e * (1.0 / params.delta_e).ln() / 2.0;
    let mut stages = vec![
        StageLoss {
            stage: "grid cover (exponential mechanism rounds)".to_string(),
            eps: loop_eps,
            delta: params.delta_e,
        },
        StageLoss {
            stage: "proxy counts (laplace)".to_string(),
            eps: params.eps_l,
            delta: 0.0,
        },
        StageLoss {
            stage: "cluster means (noisy average)".to_string(),
            eps: params.eps_g,
            delta: params.delta_g,
        },
    ];
    if dp_lloyd_rounds > 0 {
        let r = dp_lloyd_rounds as f64;
        stages.push(StageLoss {
            stage: format!("dp-lloyd refinement ({dp_lloyd_rounds} rounds)"),
            eps: r * (params.eps_l + params.eps_g),
            delta: r * params.delta_g,
        });
    }
    let rounds = dp_lloyd_rounds as f64;
    PrivacyReport {
        eps_total: loop_eps
            + params.eps_l
            + params.eps_g
            + rounds * (params.eps_l + params.eps_g),
        delta_total: params.delta_e + params.delta_g + rounds * params.delta_g,
        stages,
    }
}

/// Invert [`accountant`] for a requested total budget (with no refinement
/// rounds): `delta` splits evenly between the grid-cover loop and the
/// averaging stage, `eps` splits in thirds, and `eps_e` is solved from the
/// loop formula. Fails when the averaging share would exceed `1/3`, the
/// regime of its guarantee.
pub fn split_budget(eps_total: f64, delta_total: f64) -> Result<PrivacyParams> {
    if !(eps_total.is_finite() && eps_total > 0.0) {
        return Err(Error::InvalidParam {
            name: "eps_total",
            value: eps_total,
            constraint: "must be positive and finite",
        });
    }
    if !(delta_total > 0.0 && delta_total < 1.0) {
        return Err(Error::InvalidParam {
            name: "delta_total",
            value: delta_total,
            constraint: "must lie in (0, 1)",
        });
    }
    let share = eps_total / 3.0;
    if share > 1.0 / 3.0 + 1e-12 {
        return Err(Error::InfeasibleBudget { eps_g: share });
    }
    let delta_e = delta_total / 2.0;
    let eps_e = 2.0 * share / (std::f64::consts::E * (1.0 / delta_e).ln());
    PrivacyParams::new(eps_e, delta_e, share, share, delta_total / 2.0)
}

/// Configuration of one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    /// The approximation constant: grid growth factor minus one, projection
    /// distortion, and the `k' = ceil(k / eps)` round count.
    pub eps_approx: f64,
    pub privacy: PrivacyParams,
    /// Reduced dimension override; default `max(1, ceil(log2 n / 2))`.
    pub dprime: Option<usize>,
    /// Selection rounds per level; default `ceil(k / eps_approx)`.
    pub kprime: Option<usize>,
    /// Refinement rounds after the main release; each one re-spends
    /// `(eps_l + eps_g, delta_g)`.
    pub dp_lloyd_rounds: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(k: usize, privacy: PrivacyParams, seed: u64) -> Self {
        Self {
            k,
            eps_approx: 0.5,
            privacy,
            dprime: None,
            kprime: None,
            dp_lloyd_rounds: 0,
            seed,
        }
    }
}

/// Observability counters; none of these feed back into the algorithm.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Points removed by the cover rounds at each level.
    pub per_level_covered: Vec<usize>,
    /// Points that needed radial projection during preprocessing.
    pub projected_points: usize,
    /// Candidate centers fed to the proxy (`m * k'`).
    pub candidate_count: usize,
    /// Total proxy weight; close to `n` when the count noise is small,
    /// regardless of how many points the cover rounds removed.
    pub proxy_total_weight: f64,
    /// Noisy cluster sizes released by each refinement round.
    pub dp_lloyd_noisy_counts: Vec<Vec<f64>>,
}

/// Output of one private clustering run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub centers: CenterSet,
    pub assignment: Vec<usize>,
    pub cost: f64,
    pub privacy: PrivacyReport,
    pub diagnostics: Diagnostics,
}

/// Laplace-noised weighted proxy over the candidate centers: each candidate
/// carries `max(0, n_c + Lap(1/eps_l))` where `n_c` counts the reduced
/// points nearest to it (ties to the lowest index). Zero-weight entries are
/// retained; the entry list itself is data-independent.
pub fn build_proxy(
    reduced: &Dataset,
    candidates: &[Vec<f64>],
    eps_l: f64,
    rng: &mut RngStream,
) -> Result<WeightedDataset> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput { what: "candidates" });
    }
    let mut counts = vec![0.0f64; candidates.len()];
    for p in reduced.points() {
        let (idx, _) = nearest_center(p, candidates);
        counts[idx] += 1.0;
    }
    let noise = LaplaceParam::new(1.0 / eps_l)?;
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c + laplace_sample(noise, rng)).max(0.0))
        .collect();
    WeightedDataset::new(candidates.to_vec(), weights)
}

/// Run the full private k-means pipeline.
///
/// Randomness is consumed in a fixed order (projection matrix, cover
/// rounds level by level, proxy noise, seeding, averaging, refinement), so
/// identical data, config and seed give bit-identical results.
pub fn run(data: &Dataset, config: &PipelineConfig) -> Result<ClusteringResult> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidParam {
            name: "n",
            value: n as f64,
            constraint: "pipeline needs at least 2 points",
        });
    }
    if config.k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            value: 0.0,
            constraint: "must be at least 1",
        });
    }
    if !(config.eps_approx > 0.0 && config.eps_approx <= 0.5) {
        return Err(Error::InvalidParam {
            name: "eps_approx",
            value: config.eps_approx,
            constraint: "must lie in (0, 0.5]",
        });
    }
    // Reject malformed budgets up front rather than failing mid-run.
    let privacy = PrivacyParams::new(
        config.privacy.eps_e,
        config.privacy.delta_e,
        config.privacy.eps_l,
        config.privacy.eps_g,
        config.privacy.delta_g,
    )?;
    let eps = config.eps_approx;
    let mut rng = RngStream::new(config.seed);
    let mut diagnostics = Diagnostics::default();

    // Step 1: project, scale, clip into the unit ball.
    let dprime = config.dprime.unwrap_or_else(|| default_target_dim(n));
    let transform = make_jl_with_dim(data.dim(), dprime, eps, &mut rng)?;
    let (reduced, record) = reduce_and_normalize(data, transform)?;
    diagnostics.projected_points = record.projected_indices.len();

    // Step 2: candidate centers from the grid-cover ladder. The pool
    // persists across levels and is conceptually reset afterwards: the proxy
    // below is built from all n reduced points.
    let kprime = config.kprime.unwrap_or_else(|| default_rounds(config.k, eps));
    let levels = grid_levels(n, dprime, eps)?;
    let mut alive = vec![true; n];
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(levels.len() * kprime);
    for level in &levels {
        let outcome = private_grid_set_cover(
            reduced.points(),
            &mut alive,
            level,
            kprime,
            Selection::Mechanism {
                eps_e: privacy.eps_e,
            },
            &mut rng,
        )?;
        diagnostics.per_level_covered.push(outcome.covered.len());
        candidates.extend(outcome.centers);
    }
    diagnostics.candidate_count = candidates.len();

    // Step 3: noisy weighted proxy over the candidates.
    let proxy = build_proxy(&reduced, &candidates, privacy.eps_l, &mut rng)?;
    diagnostics.proxy_total_weight = proxy.total_weight();

    // Step 4: cluster the proxy, lift the assignment, release noisy means.
    let lloyd_config = LloydConfig {
        seeding: Seeding::KMeansPlusPlus,
        ..LloydConfig::new(config.k)
    };
    let proxy_centers = lloyd(&proxy, &lloyd_config, &mut rng)?;
    let reduced_assignment = assign_clusters(&reduced, &proxy_centers)?;
    let members = lift_assignment(data, &record, &reduced_assignment, config.k)?;

    let dim = data.dim();
    let diameter = data.diameter_bound();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(config.k);
    for cluster in &members {
        let member_points: Vec<&[f64]> = cluster.iter().map(|&i| data.point(i)).collect();
        centers.push(noisy_avg(
            &member_points,
            dim,
            diameter,
            privacy.eps_g,
            privacy.delta_g,
            &mut rng,
        )?);
    }

    // Optional refinement: reassign in the original space, release noisy
    // counts, re-release noisy means.
    for _ in 0..config.dp_lloyd_rounds {
        let center_set = CenterSet::new(centers.clone())?;
        let assignment = assign_clusters(data, &center_set)?;
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); config.k];
        for (i, &c) in assignment.iter().enumerate() {
            clusters[c].push(i);
        }
        let count_noise = LaplaceParam::new(1.0 / privacy.eps_l)?;
        let noisy_counts: Vec<f64> = clusters
            .iter()
            .map(|members| members.len() as f64 + laplace_sample(count_noise, &mut rng))
            .collect();
        diagnostics.dp_lloyd_noisy_counts.push(noisy_counts);
        for (c, cluster) in clusters.iter().enumerate() {
            let member_points: Vec<&[f64]> = cluster.iter().map(|&i| data.point(i)).collect();
            centers[c] = noisy_avg(
                &member_points,
                dim,
                diameter,
                privacy.eps_g,
                privacy.delta_g,
                &mut rng,
            )?;
        }
    }

    let centers = CenterSet::new(centers)?;
    let assignment = assign_clusters(data, &centers)?;
    let cost = kmeans_cost(data, &centers)?;
    Ok(ClusteringResult {
        centers,
        assignment,
        cost,
        privacy: accountant(&privacy, config.dp_lloyd_rounds),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accountant_example_values() {
        let params = PrivacyParams::new(0.2, (-1.0f64).exp(), 0.1, 0.1, 0.05).unwrap();
        let report = accountant(&params, 0);
        // e * 0.2 * ln(e) / 2 + 0.1 + 0.1
        assert!((report.eps_total - 0.471_828_182_845_904_5).abs() < 1e-12);
        // 1/e + 0.05
        assert!((report.delta_total - 0.417_879_441_171_442_3).abs() < 1e-12);
    }

    #[test]
    fn accountant_rounds_surcharge() {
        let params = PrivacyParams::new(0.2, 0.1, 0.3, 0.25, 0.01).unwrap();
        let base = accountant(&params, 0);
        let one = accountant(&params, 1);
        assert!((one.eps_total - base.eps_total - (0.3 + 0.25)).abs() < 1e-12);
        assert!((one.delta_total - base.delta_total - 0.01).abs() < 1e-12);
        assert_eq!(one.stages.len(), 4);
    }

    #[test]
    fn accountant_small_eps_e_limit() {
        // As eps_e -> 0 the loop loss vanishes and only delta_e remains.
        let params = PrivacyParams::new(1e-300, 0.2, 1e-12, 1e-12, 1e-12).unwrap();
        let report = accountant(&params, 0);
        assert!(report.eps_total < 1e-11);
        assert!((report.delta_total - 0.2).abs() < 1e-11);
    }

    #[test]
    fn split_budget_closed_form() {
        let params = split_budget(1.0, 1e-6).unwrap();
        assert!((params.eps_l - 1.0 / 3.0).abs() < 1e-15);
        assert!((params.eps_g - 1.0 / 3.0).abs() < 1e-15);
        assert!((params.delta_e - 5e-7).abs() < 1e-21);
        let expected_eps_e = 2.0 / (3.0 * std::f64::consts::E * (2e6f64).ln());
        assert!((params.eps_e - expected_eps_e).abs() < 1e-15);
    }

    #[test]
    fn split_budget_round_trips() {
        let mut rng = RngStream::new(42);
        for _ in 0..100 {
            let eps = 0.01 + rng.uniform() * 0.99;
            let delta = 10f64.powf(-1.0 - rng.uniform() * 8.0);
            let params = split_budget(eps, delta).unwrap();
            let report = accountant(&params, 0);
            assert!(
                (report.eps_total - eps).abs() <= 1e-12 * eps,
                "eps {eps} -> {}",
                report.eps_total
            );
            assert!(
                (report.delta_total - delta).abs() <= 1e-12 * delta,
                "delta {delta} -> {}",
                report.delta_total
            );
        }
    }

    #[test]
    fn split_budget_rejects_infeasible() {
        assert!(matches!(
            split_budget(2.0, 1e-6),
            Err(Error::InfeasibleBudget { .. })
        ));
        assert!(split_budget(0.0, 1e-6).is_err());
        assert!(split_budget(1.0, 0.0).is_err());
        assert!(split_budget(1.0, 1.0).is_err());
    }

    #[test]
    fn proxy_weights_follow_counts() {
        // Candidates at the data points, huge eps_l (noise ~ 0): weight 1
        // per candidate.
        let reduced = Dataset::new(vec![vec![0.0, 0.0], vec![0.5, 0.0]], 2.0).unwrap();
        let candidates = vec![vec![0.0, 0.0], vec![0.5, 0.0]];
        let mut rng = RngStream::new(5);
        let proxy = build_proxy(&reduced, &candidates, 1e9, &mut rng).unwrap();
        assert_eq!(proxy.len(), 2);
        for (&w, expected) in proxy.weights().iter().zip([1.0, 1.0]) {
            assert!((w - expected).abs() < 1e-6, "{w} vs {expected}");
        }

        // All points nearest to the first candidate.
        let reduced = Dataset::new(
            (0..10).map(|i| vec![0.01 * i as f64, 0.0]).collect(),
            2.0,
        )
        .unwrap();
        let candidates = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let proxy = build_proxy(&reduced, &candidates, 1e9, &mut rng).unwrap();
        assert!((proxy.weights()[0] - 10.0).abs() < 1e-6);
        assert!(proxy.weights()[1] < 1e-6);
    }

    #[test]
    fn proxy_clamps_negative_weights() {
        // eps_l tiny: huge noise, clamped at zero; weights never negative.
        let reduced = Dataset::new(vec![vec![0.0], vec![0.1]], 2.0).unwrap();
        let candidates = vec![vec![0.0], vec![0.1], vec![0.9]];
        for seed in 0..50 {
            let mut rng = RngStream::new(seed);
            match build_proxy(&reduced, &candidates, 0.01, &mut rng) {
                Ok(proxy) => {
                    assert!(proxy.weights().iter().all(|&w| w >= 0.0));
                    assert_eq!(proxy.len(), 3);
                }
                // All weights clamped to zero is a legal (if useless) draw.
                Err(Error::ZeroWeightSupport) => {}
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
    }

    fn near_nonprivate_params() -> PrivacyParams {
        // Total eps ~ 1000 with delta = 1e-6, pushed far past the certified
        // regime on purpose: the pipeline then behaves almost non-privately.
        PrivacyParams::new(
            800.0 / (std::f64::consts::E * (2e6f64).ln()),
            5e-7,
            300.0,
            300.0,
            5e-7,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_two_point_run() {
        let data = Dataset::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], 2.0).unwrap();
        let params = split_budget(1.0, 1e-3).unwrap();
        let config = PipelineConfig::new(1, params, 7);
        let result = run(&data, &config).unwrap();
        assert_eq!(result.centers.k(), 1);
        assert_eq!(result.assignment, vec![0, 0]);
        assert!(result.cost.is_finite());
        let expected = accountant(&params, 0);
        assert_eq!(result.privacy.eps_total, expected.eps_total);
        assert_eq!(result.privacy.delta_total, expected.delta_total);
    }

    #[test]
    fn single_tight_cluster_recovers_mean() {
        // k = 1 at a near-non-private budget: the released center lands
        // within 0.05 * diameter of the true mean.
        let mut gen = RngStream::new(33);
        let n = 400;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..6)
                    .map(|_| 1.0 + 0.02 * gen.standard_normal())
                    .collect()
            })
            .collect();
        let diameter = 8.0;
        let mut mean = vec![0.0; 6];
        for p in &points {
            for j in 0..6 {
                mean[j] += p[j] / n as f64;
            }
        }
        let data = Dataset::new(points, diameter).unwrap();
        let config = PipelineConfig::new(1, near_nonprivate_params(), 11);
        let result = run(&data, &config).unwrap();
        let dist = crate::core::squared_distance(&result.centers.centers()[0], &mean)
            .unwrap()
            .sqrt();
        assert!(
            dist <= 0.05 * diameter,
            "center strayed {dist} from the mean"
        );
    }

    #[test]
    fn candidate_count_is_m_times_kprime() {
        let data = Dataset::new(
            (0..20).map(|i| vec![0.1 * i as f64, 0.0]).collect(),
            4.0,
        )
        .unwrap();
        let params = split_budget(0.8, 1e-4).unwrap();
        let mut config = PipelineConfig::new(2, params, 3);
        config.dprime = Some(2);
        let result = run(&data, &config).unwrap();
        let m = grid_levels(20, 2, 0.5).unwrap().len();
        let kprime = default_rounds(2, 0.5);
        assert_eq!(result.diagnostics.candidate_count, m * kprime);
        assert_eq!(result.diagnostics.per_level_covered.len(), m);
    }

    #[test]
    fn run_is_deterministic() {
        let mut gen = RngStream::new(1);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![gen.uniform() * 2.0 - 1.0, gen.uniform() * 2.0 - 1.0])
            .collect();
        let data = Dataset::new(points, 4.0).unwrap();
        let params = split_budget(1.0, 1e-4).unwrap();
        let mut config = PipelineConfig::new(3, params, 99);
        config.dp_lloyd_rounds = 1;
        let a = run(&data, &config).unwrap();
        let b = run(&data, &config).unwrap();
        assert_eq!(a.centers.centers(), b.centers.centers());
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.cost, b.cost);
        assert_eq!(
            a.diagnostics.dp_lloyd_noisy_counts,
            b.diagnostics.dp_lloyd_noisy_counts
        );
    }
}
