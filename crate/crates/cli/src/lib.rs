//! Dataset ingestion, synthetic and hard-instance generators, and the
//! seeded benchmark harness behind the `dpkmeans` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dpkmeans::clustering::{lloyd, LloydConfig};
use dpkmeans::core::{kmeans_cost, CenterSet, Dataset, RngStream, WeightedDataset};
use dpkmeans::mechanisms::sample_in_ball;
use dpkmeans::pipeline::{
    accountant, run, split_budget, PipelineConfig, PrivacyParams, PrivacyReport,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{row}:{col}: cannot parse '{cell}' as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },

    #[error("{path}:{row}: ragged row: expected {expected} columns, got {got}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error(transparent)]
    Core(#[from] dpkmeans::Error),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error(
        "could not sample {k} codewords with pairwise Hamming distance >= {d}/4 in {d} dimensions"
    )]
    RetryExhausted { k: usize, d: usize },
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parse a headerless CSV of real-valued rows into a dataset with the given
/// declared diameter. `skip_header` drops the first line.
pub fn ingest_csv(path: &Path, diameter: f64, skip_header: bool) -> Result<Dataset> {
    let content = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut expected_width: Option<usize> = None;
    for (idx, line) in content.lines().enumerate() {
        let row = idx + 1;
        if skip_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let trimmed = cell.trim();
            let value: f64 = trimmed.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                row,
                col: col + 1,
                cell: trimmed.to_string(),
            })?;
            values.push(value);
        }
        if let Some(width) = expected_width {
            if values.len() != width {
                return Err(CliError::RaggedRow {
                    path: path.to_path_buf(),
                    row,
                    expected: width,
                    got: values.len(),
                });
            }
        } else {
            expected_width = Some(values.len());
        }
        points.push(values);
    }
    Ok(Dataset::new(points, diameter)?)
}

/// Write a dataset as a headerless CSV.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for p in data.points() {
        for (j, x) in p.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Gaussian mixture: component means uniform in the centered unit box,
/// points Gaussian with the given per-coordinate spread around a uniformly
/// chosen mean, clipped to the ball whose diameter is the box diagonal.
/// The declared diameter bound is that diagonal, `sqrt(d)`.
pub fn gen_synthetic(
    n: usize,
    d: usize,
    n_components: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d == 0 || n_components == 0 {
        return Err(CliError::InvalidSpec(
            "n, d and components must all be positive".to_string(),
        ));
    }
    if n_components > n {
        return Err(CliError::InvalidSpec(format!(
            "components ({n_components}) must not exceed n ({n})"
        )));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(CliError::InvalidSpec(format!(
            "spread ({spread}) must be nonnegative"
        )));
    }
    let mut rng = RngStream::new(seed);
    let means: Vec<Vec<f64>> = (0..n_components)
        .map(|_| (0..d).map(|_| rng.uniform() - 0.5).collect())
        .collect();
    let diameter = (d as f64).sqrt();
    let radius = diameter / 2.0;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mean = &means[rng.uniform_below(n_components as u64) as usize];
            let mut p: Vec<f64> = mean
                .iter()
                .map(|&m| m + spread * rng.standard_normal())
                .collect();
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > radius {
                for x in p.iter_mut() {
                    *x *= radius / norm;
                }
            }
            p
        })
        .collect();
    Ok(Dataset::new(points, diameter)?)
}

/// Hard instance for private clustering: `k` binary codewords in the unit
/// cube with pairwise Hamming distance at least `d/4`, each repeated
/// `multiplicity` times. The optimal k-means cost is exactly zero; any
/// private algorithm must pay a positive cost in expectation.
pub fn gen_hard_instance(k: usize, d: usize, multiplicity: usize, seed: u64) -> Result<Dataset> {
    if k == 0 || d == 0 || multiplicity == 0 {
        return Err(CliError::InvalidSpec(
            "k, d and multiplicity must all be positive".to_string(),
        ));
    }
    let mut rng = RngStream::new(seed);
    let mut codewords: Vec<Vec<f64>> = Vec::with_capacity(k);
    let max_attempts = 200 * k;
    let mut attempts = 0;
    while codewords.len() < k {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CliError::RetryExhausted { k, d });
        }
        let candidate: Vec<f64> = (0..d)
            .map(|_| if rng.uniform() < 0.5 { 0.0 } else { 1.0 })
            .collect();
        let ok = codewords.iter().all(|w| {
            let hamming = w
                .iter()
                .zip(&candidate)
                .filter(|(a, b)| a != b)
                .count();
            4 * hamming >= d
        });
        if ok {
            codewords.push(candidate);
        }
    }
    let mut points = Vec::with_capacity(k * multiplicity);
    for w in &codewords {
        for _ in 0..multiplicity {
            points.push(w.clone());
        }
    }
    Ok(Dataset::new(points, (d as f64).sqrt())?)
}

/// The codewords of a hard instance, in dataset order (one per block of
/// `multiplicity` points).
pub fn hard_instance_codewords(data: &Dataset, multiplicity: usize) -> Vec<Vec<f64>> {
    data.points()
        .iter()
        .step_by(multiplicity)
        .cloned()
        .collect()
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone)]
pub enum DataSpec {
    File {
        path: PathBuf,
        diameter: f64,
        skip_header: bool,
    },
    Synthetic {
        n: usize,
        d: usize,
        components: usize,
        spread: f64,
    },
    HardInstance {
        codewords: usize,
        d: usize,
        multiplicity: usize,
    },
}

/// The privacy budget, either a total to be split or explicit parameters.
#[derive(Debug, Clone)]
pub enum BudgetSpec {
    /// `delta_total` defaults to `n^{-1.5}` when absent.
    Split {
        eps_total: f64,
        delta_total: Option<f64>,
    },
    Explicit(PrivacyParams),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub data: DataSpec,
    pub k_values: Vec<usize>,
    pub budget: BudgetSpec,
    pub eps_approx: f64,
    pub dprime: Option<usize>,
    pub kprime: Option<usize>,
    pub dp_lloyd_rounds: usize,
    pub reps: usize,
    pub seed: u64,
    /// Output stem; the harness writes `<stem>.runs.jsonl`,
    /// `<stem>.runs.csv` and `<stem>.summary.csv`.
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn new(data: DataSpec, k_values: Vec<usize>, eps_total: f64, out: PathBuf) -> Self {
        Self {
            data,
            k_values,
            budget: BudgetSpec::Split {
                eps_total,
                delta_total: None,
            },
            eps_approx: 0.5,
            dprime: None,
            kprime: None,
            dp_lloyd_rounds: 1,
            reps: 5,
            seed: 42,
            out,
        }
    }
}

pub const ALGORITHMS: [&str; 3] = ["private", "lloyd", "random"];

/// One benchmark run, one line in the run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub k: usize,
    pub rep: usize,
    pub seed: u64,
    pub cost: f64,
    pub wall_ms: f64,
    pub privacy: Option<PrivacyReport>,
}

/// Per-(algorithm, k) aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub k: usize,
    pub reps: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub eps_total: Option<f64>,
    pub delta_total: Option<f64>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<SummaryRow>,
    pub runs_jsonl: PathBuf,
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
}

fn materialize(data: &DataSpec, seed: u64) -> Result<Dataset> {
    match data {
        DataSpec::File {
            path,
            diameter,
            skip_header,
        } => ingest_csv(path, *diameter, *skip_header),
        DataSpec::Synthetic {
            n,
            d,
            components,
            spread,
        } => gen_synthetic(*n, *d, *components, *spread, seed),
        DataSpec::HardInstance {
            codewords,
            d,
            multiplicity,
        } => gen_hard_instance(*codewords, *d, *multiplicity, seed),
    }
}

/// `k` centers drawn uniformly from the ball of radius `diameter/2` around
/// the data centroid.
pub fn random_centers_baseline(data: &Dataset, k: usize, rng: &mut RngStream) -> CenterSet {
    let dim = data.dim();
    let mut centroid = vec![0.0; dim];
    for p in data.points() {
        for j in 0..dim {
            centroid[j] += p[j];
        }
    }
    for c in centroid.iter_mut() {
        *c /= data.n() as f64;
    }
    let centers = (0..k)
        .map(|_| {
            let offset = sample_in_ball(dim, data.diameter_bound() / 2.0, rng);
            offset
                .iter()
                .zip(&centroid)
                .map(|(o, c)| o + c)
                .collect::<Vec<f64>>()
        })
        .collect();
    CenterSet::new(centers).expect("k >= 1 validated by caller")
}

/// Run the full experiment grid: for every `k` and repetition, the private
/// pipeline, non-private Lloyd (10 iterations, k-means++ seeding) and the
/// uniform-random-centers baseline, each on an independently derived seed so
/// results do not depend on execution order. Emits a self-describing JSONL
/// record per run, a flat per-run CSV, and a per-(algorithm, k) summary CSV
/// whose bytes are a deterministic function of the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    if spec.k_values.is_empty() {
        return Err(CliError::InvalidSpec("k values must be nonempty".to_string()));
    }
    if spec.reps == 0 {
        return Err(CliError::InvalidSpec("reps must be at least 1".to_string()));
    }
    let root = RngStream::new(spec.seed);
    let data = materialize(&spec.data, root.derive(0xda7a).seed())?;
    let n = data.n();

    let params = match &spec.budget {
        BudgetSpec::Split {
            eps_total,
            delta_total,
        } => {
            let delta = delta_total.unwrap_or_else(|| (n as f64).powf(-1.5));
            split_budget(*eps_total, delta)?
        }
        BudgetSpec::Explicit(params) => *params,
    };
    let report = accountant(&params, spec.dp_lloyd_rounds);

    let mut records: Vec<RunRecord> = Vec::new();
    for &k in &spec.k_values {
        for rep in 0..spec.reps {
            for (algo_idx, algorithm) in ALGORITHMS.iter().enumerate() {
                let run_seed = root
                    .derive(algo_idx as u64)
                    .derive(k as u64)
                    .derive(rep as u64)
                    .seed();
                let start = Instant::now();
                let (cost, privacy) = match *algorithm {
                    "private" => {
                        let config = PipelineConfig {
                            k,
                            eps_approx: spec.eps_approx,
                            privacy: params,
                            dprime: spec.dprime,
                            kprime: spec.kprime,
                            dp_lloyd_rounds: spec.dp_lloyd_rounds,
                            seed: run_seed,
                        };
                        let result = run(&data, &config)?;
                        (result.cost, Some(result.privacy))
                    }
                    "lloyd" => {
                        let weighted = WeightedDataset::from_dataset(&data);
                        let mut rng = RngStream::new(run_seed);
                        let centers = lloyd(&weighted, &LloydConfig::new(k), &mut rng)?;
                        (kmeans_cost(&data, &centers)?, None)
                    }
                    "random" => {
                        let mut rng = RngStream::new(run_seed);
                        let centers = random_centers_baseline(&data, k, &mut rng);
                        (kmeans_cost(&data, &centers)?, None)
                    }
                    _ => unreachable!(),
                };
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                records.push(RunRecord {
                    algorithm: algorithm.to_string(),
                    k,
                    rep,
                    seed: run_seed,
                    cost,
                    wall_ms,
                    privacy,
                });
            }
        }
    }

    let summaries = summarize(&records, &spec.k_values, spec.reps, &report);
    let output = write_outputs(spec, &records, &summaries)?;
    Ok(ExperimentOutput {
        records,
        summaries,
        runs_jsonl: output.0,
        runs_csv: output.1,
        summary_csv: output.2,
    })
}

/// Sample mean and standard deviation (n - 1 divisor; zero for one rep).
pub fn mean_and_std(costs: &[f64]) -> (f64, f64) {
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    if costs.len() < 2 {
        return (mean, 0.0);
    }
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(
    records: &[RunRecord],
    k_values: &[usize],
    reps: usize,
    report: &PrivacyReport,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for algorithm in ALGORITHMS {
        for &k in k_values {
            let costs: Vec<f64> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.k == k)
                .map(|r| r.cost)
                .collect();
            let (mean_cost, std_cost) = mean_and_std(&costs);
            let (eps_total, delta_total) = if algorithm == "private" {
                (Some(report.eps_total), Some(report.delta_total))
            } else {
                (None, None)
            };
            rows.push(SummaryRow {
                algorithm: algorithm.to_string(),
                k,
                reps,
                mean_cost,
                std_cost,
                eps_total,
                delta_total,
            });
        }
    }
    rows
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_outputs(
    spec: &ExperimentSpec,
    records: &[RunRecord],
    summaries: &[SummaryRow],
) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let stem = spec.out.as_os_str().to_string_lossy().to_string();
    let runs_jsonl = PathBuf::from(format!("{stem}.runs.jsonl"));
    let runs_csv = PathBuf::from(format!("{stem}.runs.csv"));
    let summary_csv = PathBuf::from(format!("{stem}.summary.csv"));

    let mut jsonl = String::new();
    for record in records {
        jsonl.push_str(&serde_json::to_string(record).expect("record serializes"));
        jsonl.push('\n');
    }
    fs::write(&runs_jsonl, jsonl).map_err(|source| CliError::Io {
        path: runs_jsonl.clone(),
        source,
    })?;

    let mut csv = String::from("algorithm,k,seed,cost,eps_total,delta_total,wall_ms\n");
    for r in records {
        let (eps, delta) = r
            .privacy
            .as_ref()
            .map(|p| (Some(p.eps_total), Some(p.delta_total)))
            .unwrap_or((None, None));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.algorithm,
            r.k,
            r.seed,
            r.cost,
            opt_f64(eps),
            opt_f64(delta),
            r.wall_ms
        );
    }
    fs::write(&runs_csv, csv).map_err(|source| CliError::Io {
        path: runs_csv.clone(),
        source,
    })?;

    let mut csv = String::from("algorithm,k,reps,mean_cost,std_cost,eps_total,delta_total\n");
    for s in summaries {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.algorithm,
            s.k,
            s.reps,
            s.mean_cost,
            s.std_cost,
            opt_f64(s.eps_total),
            opt_f64(s.delta_total)
        );
    }
    fs::write(&summary_csv, csv).map_err(|source| CliError::Io {
        path: summary_csv.clone(),
        source,
    })?;

    Ok((runs_jsonl, runs_csv, summary_csv))
}

/// Split a requested budget, compose it back (with any refinement-round
/// surcharge), and report whether the zero-round composition reproduces the
/// request to 1e-12 relative.
pub fn budget_report(
    eps_total: f64,
    delta_total: f64,
    dp_lloyd_rounds: usize,
) -> Result<(PrivacyParams, PrivacyReport, bool)> {
    let params = split_budget(eps_total, delta_total)?;
    let base = accountant(&params, 0);
    let round_trip_ok = (base.eps_total - eps_total).abs() <= 1e-12 * eps_total
        && (base.delta_total - delta_total).abs() <= 1e-12 * delta_total;
    let report = accountant(&params, dp_lloyd_rounds);
    Ok((params, report, round_trip_ok))
}
