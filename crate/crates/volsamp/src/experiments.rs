//! Dataset ingestion, worst-case instance generation, and the loss-curve
//! harness.
//!
//! The harness runs a (method, k, repetition) grid over one dataset, with a
//! seed derived independently per cell, so results are bit-reproducible and
//! insensitive to grid edits or thread scheduling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{rescaled_estimator, subset_estimator, RegressionProblem};
use crate::linalg::{leverage_scores, Matrix, Vector};
use crate::rng::{derive_seed, label, RngState};
use crate::sampling::{
    leverage_iid_sample, leveraged_volume_sample, volume_sample, FastLeveragedSampler,
    FastSamplerOptions, RescalingDistribution,
};

/// Largest feature count [`expand_monomials`] will generate by default.
pub const DEFAULT_MONOMIAL_CAP: usize = 1024;

/// Subsampling methods the harness can compare. Configs accept both the
/// serialized snake_case names and the CLI's kebab-case spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Volume,
    #[serde(alias = "leverage-iid")]
    LeverageIid,
    #[serde(alias = "leveraged-volume")]
    LeveragedVolume,
    #[serde(alias = "fast-leveraged-volume")]
    FastLeveragedVolume,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Volume,
        Method::LeverageIid,
        Method::LeveragedVolume,
        Method::FastLeveragedVolume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Volume => "volume",
            Method::LeverageIid => "leverage_iid",
            Method::LeveragedVolume => "leveraged_volume",
            Method::FastLeveragedVolume => "fast_leveraged_volume",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    /// Accepts both snake_case (config files) and kebab-case (CLI flags).
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "volume" => Ok(Method::Volume),
            "leverage_iid" => Ok(Method::LeverageIid),
            "leveraged_volume" => Ok(Method::LeveragedVolume),
            "fast_leveraged_volume" => Ok(Method::FastLeveragedVolume),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown method '{other}'"),
            }),
        }
    }
}

/// Where the dataset comes from: a file on disk or the builtin worst-case
/// instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Builtin {
        /// Only "lowerbound" is recognized.
        builtin: String,
        #[serde(default = "default_lb_n")]
        n: usize,
        #[serde(default = "default_lb_d")]
        d: usize,
        #[serde(default = "default_lb_target")]
        target_loss: f64,
    },
    Path(PathBuf),
}

fn default_lb_n() -> usize {
    100
}

fn default_lb_d() -> usize {
    10
}

fn default_lb_target() -> f64 {
    2.0 / 3.0
}

fn default_repetitions() -> usize {
    100
}

fn default_monomial_cap() -> usize {
    DEFAULT_MONOMIAL_CAP
}

/// One loss-curve experiment: dataset, methods, sample-size grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    pub k_grid: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub root_seed: u64,
    /// Prepend a constant-1 column after loading.
    #[serde(default)]
    pub intercept: bool,
    /// Expand features to all degree-2 monomials before running.
    #[serde(default)]
    pub expand_monomials: bool,
    #[serde(default = "default_monomial_cap")]
    pub monomial_cap: usize,
    /// Sketch accuracy for the fast sampler; 0 skips the sketch.
    #[serde(default)]
    pub fast_epsilon: f64,
}

/// One (method, k, repetition) cell of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct LossCurveRecord {
    pub dataset: String,
    pub method: Method,
    pub k: usize,
    pub repetition: usize,
    /// Unnormalized total loss over all n rows.
    pub loss: f64,
    /// `loss / L(w*)` of the full problem.
    pub loss_ratio: f64,
}

/// A cell whose sampler or solve failed; the sweep continues past it.
#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub method: Method,
    pub k: usize,
    pub repetition: usize,
    pub message: String,
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct LossCurves {
    pub dataset: String,
    /// Rows of the problem the sweep ran on, for per-row loss scaling.
    pub n: usize,
    pub records: Vec<LossCurveRecord>,
    pub failures: Vec<CellFailure>,
}

/// Aggregated cell: mean and standard error over repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub k: usize,
    pub mean_loss: f64,
    pub stderr: f64,
    pub repetitions: usize,
}

/// How a dataset file is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// Decide from the file extension.
    Auto,
    /// Whitespace-separated numbers, one row per line.
    Dense,
    /// `label idx:val idx:val ...` with 1-based indices.
    Libsvm,
}

impl InputFormat {
    /// Extension-based detection. Datasets published in the sparse format
    /// usually carry no extension at all, so that is the default.
    pub fn detect(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("dense") | Some("mat") | Some("dat") => InputFormat::Dense,
            _ => InputFormat::Libsvm,
        }
    }

    fn resolve(self, path: &Path) -> InputFormat {
        match self {
            InputFormat::Auto => InputFormat::detect(path),
            other => other,
        }
    }
}

/// A parsed dataset plus bookkeeping from cleaning.
#[derive(Debug)]
pub struct LoadedDataset {
    pub problem: RegressionProblem,
    /// All-zero feature rows removed before construction.
    pub dropped_rows: usize,
}

/// Parses the sparse `label idx:val` format. Rows whose features are all
/// zero are dropped; `intercept` then prepends a constant-1 column.
pub fn parse_libsvm(text: &str, intercept: bool) -> Result<LoadedDataset> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut width = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else {
            continue;
        };
        let y: f64 = first.parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("label '{first}' is not a number"),
        })?;
        let mut features: Vec<(usize, f64)> = Vec::new();
        for token in tokens {
            let (idx_str, val_str) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("expected idx:val, found '{token}'"),
            })?;
            let idx: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("feature index '{idx_str}' is not an integer"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("feature value '{val_str}' is not a number"),
            })?;
            if features.iter().any(|&(j, _)| j == idx) {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("duplicate feature index {idx}"),
                });
            }
            width = width.max(idx);
            features.push((idx, val));
        }
        rows.push((y, features));
    }
    if rows.is_empty() || width == 0 {
        return Err(Error::EmptyDataset);
    }
    let kept: Vec<&(f64, Vec<(usize, f64)>)> = rows
        .iter()
        .filter(|(_, f)| f.iter().any(|&(_, v)| v != 0.0))
        .collect();
    let dropped_rows = rows.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let offset = usize::from(intercept);
    let mut x = Matrix::zeros(kept.len(), width + offset);
    let mut y = Vector::zeros(kept.len());
    for (r, (label, features)) in kept.iter().enumerate() {
        y[r] = *label;
        if intercept {
            x[(r, 0)] = 1.0;
        }
        for &(idx, val) in features {
            x[(r, idx - 1 + offset)] = val;
        }
    }
    finish_load(x, y, dropped_rows)
}

/// Parses whitespace-separated numeric rows as a plain matrix.
pub fn parse_dense_matrix(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    reason: format!("'{t}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            continue;
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("row has {} values, expected {w}", values.len()),
                });
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = width.unwrap();
    Ok(Matrix::from_fn(rows.len(), width, |r, c| rows[r][c]))
}

/// Dense regression file: first column is the response, the rest are
/// features, matching the label-first convention of the sparse format.
pub fn parse_dense_problem(text: &str, intercept: bool) -> Result<LoadedDataset> {
    let full = parse_dense_matrix(text)?;
    if full.ncols() < 2 {
        return Err(Error::InvalidSize {
            reason: "a dense regression file needs a response column plus features".into(),
        });
    }
    let raw: Vec<usize> = (0..full.nrows())
        .filter(|&r| (1..full.ncols()).any(|c| full[(r, c)] != 0.0))
        .collect();
    let dropped_rows = full.nrows() - raw.len();
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let offset = usize::from(intercept);
    let d = full.ncols() - 1;
    let mut x = Matrix::zeros(raw.len(), d + offset);
    let mut y = Vector::zeros(raw.len());
    for (r, &src) in raw.iter().enumerate() {
        y[r] = full[(src, 0)];
        if intercept {
            x[(r, 0)] = 1.0;
        }
        for c in 0..d {
            x[(r, c + offset)] = full[(src, c + 1)];
        }
    }
    finish_load(x, y, dropped_rows)
}

fn finish_load(x: Matrix, y: Vector, dropped_rows: usize) -> Result<LoadedDataset> {
    match RegressionProblem::new(x, y) {
        Ok(problem) => Ok(LoadedDataset {
            problem,
            dropped_rows,
        }),
        Err(Error::RankDeficient { ratio, .. }) => Err(Error::RankDeficient {
            ratio,
            hint: "dataset Gram matrix is singular; drop redundant columns \
                   (expand_monomials performs such a cleanup)",
        }),
        Err(e) => Err(e),
    }
}

/// Loads a regression problem from disk in the given format.
pub fn load_problem(path: &Path, format: InputFormat, intercept: bool) -> Result<LoadedDataset> {
    let text = read_file(path)?;
    match format.resolve(path) {
        InputFormat::Libsvm => parse_libsvm(&text, intercept),
        InputFormat::Dense => parse_dense_problem(&text, intercept),
        InputFormat::Auto => unreachable!("resolve removes Auto"),
    }
}

/// Loads a bare matrix (no response column) from disk.
pub fn load_matrix(path: &Path, format: InputFormat) -> Result<Matrix> {
    let text = read_file(path)?;
    match format.resolve(path) {
        InputFormat::Dense => parse_dense_matrix(&text),
        // Sparse files always carry a label; parse fully, keep the features.
        InputFormat::Libsvm => Ok(parse_libsvm(&text, false)?.problem.x().clone()),
        InputFormat::Auto => unreachable!("resolve removes Auto"),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig {
        reason: format!("cannot read {}: {e}", path.display()),
    })
}

/// Expands features to all degree-2 monomials `x_i`, `x_i x_j` (i <= j) and
/// drops columns that do not increase the rank, greedily in generation
/// order, so the output Gram matrix is always full rank.
pub fn expand_monomials(p: &RegressionProblem, cap: usize) -> Result<RegressionProblem> {
    let (n, d) = (p.n(), p.d());
    let features = d + d * (d + 1) / 2;
    if features > cap {
        return Err(Error::ExpansionTooLarge { features, cap });
    }
    let x = p.x();
    let mut candidates: Vec<Vector> = Vec::with_capacity(features);
    for c in 0..d {
        candidates.push(x.column(c).into_owned());
    }
    for i in 0..d {
        for j in i..d {
            candidates.push(Vector::from_fn(n, |r, _| x[(r, i)] * x[(r, j)]));
        }
    }
    let kept = independent_columns(&candidates, n);
    let mut expanded = Matrix::zeros(n, kept.len());
    for (out, &c) in kept.iter().enumerate() {
        expanded.set_column(out, &candidates[c]);
    }
    RegressionProblem::new(expanded, p.y().clone())
}

/// Greedy rank-preserving selection via Gram-Schmidt with
/// reorthogonalization; keeps the first column of every dependent group.
fn independent_columns(candidates: &[Vector], n: usize) -> Vec<usize> {
    let mut basis: Vec<Vector> = Vec::new();
    let mut kept = Vec::new();
    for (idx, col) in candidates.iter().enumerate() {
        let scale = col.norm();
        if scale == 0.0 {
            continue;
        }
        let mut residual = col.clone();
        // Two orthogonalization passes keep the basis numerically sound.
        for _ in 0..2 {
            for b in &basis {
                let coeff = b.dot(&residual);
                residual -= b.scale(coeff);
            }
        }
        if residual.norm() > 1e-10 * scale {
            basis.push(residual.normalize());
            kept.push(idx);
            if kept.len() == n {
                break;
            }
        }
    }
    kept
}

/// Closed-form shrinkage factor and optimum loss of the worst-case design.
pub fn lower_bound_optimum(n: usize, d: usize, gamma: f64) -> (f64, f64) {
    let m = (n - d) as f64 / d as f64;
    let c = 1.0 / (1.0 + m * gamma * gamma);
    (c, d as f64 * (1.0 - c))
}

/// The hard instance for unweighted subsampling: an identity block with
/// unit responses on top of `(n-d)/d` copies of a faint identity with zero
/// responses. Its optimum loss is `d (1 - c)` with
/// `c = (1 + ((n-d)/d) γ²)^{-1}`.
pub fn lower_bound_instance(n: usize, d: usize, gamma: f64) -> Result<RegressionProblem> {
    if d == 0 || n % d != 0 {
        return Err(Error::ShapeMismatch {
            reason: format!("d={d} must be positive and divide n={n}"),
        });
    }
    if n / d < 2 {
        return Err(Error::ShapeMismatch {
            reason: format!("need at least two blocks, got n/d={}", n / d),
        });
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: format!("gamma={gamma} must be positive"),
        });
    }
    let mut x = Matrix::zeros(n, d);
    let mut y = Vector::zeros(n);
    for i in 0..d {
        x[(i, i)] = 1.0;
        y[i] = 1.0;
    }
    for block in 1..n / d {
        for i in 0..d {
            x[(block * d + i, i)] = gamma;
        }
    }
    RegressionProblem::new(x, y)
}

/// Finds γ with `L(w*) = target` by bisection; the optimum loss is
/// strictly increasing in γ with range (0, d).
pub fn solve_gamma_for_loss(n: usize, d: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < d as f64) {
        return Err(Error::InvalidConfig {
            reason: format!("target loss {target} outside (0, {d})"),
        });
    }
    let loss = |g: f64| lower_bound_optimum(n, d, g).1;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while loss(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonConvergence { trials: 0 });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if loss(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Resolves the config's dataset into a problem and a display name.
pub fn resolve_dataset(cfg: &ExperimentConfig) -> Result<(RegressionProblem, String)> {
    match &cfg.dataset {
        DatasetSpec::Builtin {
            builtin,
            n,
            d,
            target_loss,
        } => {
            if builtin != "lowerbound" {
                return Err(Error::InvalidConfig {
                    reason: format!("unknown builtin dataset '{builtin}'"),
                });
            }
            if cfg.intercept || cfg.expand_monomials {
                return Err(Error::InvalidConfig {
                    reason: "intercept and monomial expansion do not apply to the builtin \
                             worst-case instance"
                        .into(),
                });
            }
            let gamma = solve_gamma_for_loss(*n, *d, *target_loss)?;
            let p = lower_bound_instance(*n, *d, gamma)?;
            Ok((p, format!("lowerbound-n{n}-d{d}")))
        }
        DatasetSpec::Path(path) => {
            if path.as_os_str() == "lowerbound" {
                let n = default_lb_n();
                let d = default_lb_d();
                let gamma = solve_gamma_for_loss(n, d, default_lb_target())?;
                let p = lower_bound_instance(n, d, gamma)?;
                return Ok((p, format!("lowerbound-n{n}-d{d}")));
            }
            let loaded = load_problem(path, InputFormat::Auto, cfg.intercept)?;
            let mut problem = loaded.problem;
            if cfg.expand_monomials {
                problem = expand_monomials(&problem, cfg.monomial_cap)?;
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dataset")
                .to_string();
            Ok((problem, name))
        }
    }
}

fn validate_config(cfg: &ExperimentConfig, d: usize) -> Result<()> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "methods list is empty".into(),
        });
    }
    if cfg.k_grid.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "k_grid is empty".into(),
        });
    }
    if cfg.repetitions == 0 {
        return Err(Error::InvalidConfig {
            reason: "repetitions must be at least 1".into(),
        });
    }
    if let Some(&bad) = cfg.k_grid.iter().find(|&&k| k < d) {
        return Err(Error::InvalidConfig {
            reason: format!("k={bad} is below the dataset dimension d={d}"),
        });
    }
    Ok(())
}

/// Runs the full grid. Each cell's seed is derived from
/// `(root_seed, method, k, repetition)`, so cells are independent of grid
/// layout and of each other; failures are collected, not fatal. `jobs == 0`
/// uses the default rayon pool.
pub fn run_loss_curves(cfg: &ExperimentConfig, jobs: usize) -> Result<LossCurves> {
    let (problem, dataset) = resolve_dataset(cfg)?;
    validate_config(cfg, problem.d())?;

    let fast_sampler = if cfg.methods.contains(&Method::FastLeveragedVolume) {
        let mut setup = RngState::new(derive_seed(cfg.root_seed, &[label("fast_setup")]));
        Some(FastLeveragedSampler::new(
            problem.x(),
            FastSamplerOptions::for_epsilon(cfg.fast_epsilon),
            &mut setup,
        )?)
    } else {
        None
    };
    let q_lev = RescalingDistribution::from_leverage_scores(&leverage_scores(problem.x())?)?;

    let mut cells = Vec::new();
    for (midx, &method) in cfg.methods.iter().enumerate() {
        for &k in &cfg.k_grid {
            for rep in 0..cfg.repetitions {
                cells.push((midx, method, k, rep));
            }
        }
    }

    let run = || {
        cells
            .par_iter()
            .map(|&(midx, method, k, rep)| {
                let seed =
                    derive_seed(cfg.root_seed, &[label(method.name()), k as u64, rep as u64]);
                let mut rng = RngState::new(seed);
                let outcome =
                    run_cell(&problem, method, k, fast_sampler.as_ref(), &q_lev, &mut rng);
                (midx, method, k, rep, outcome)
            })
            .collect::<Vec<_>>()
    };
    let mut results = if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("cannot build a {jobs}-thread pool: {e}"),
            })?
            .install(run)
    };
    results.sort_by_key(|&(midx, _, k, rep, _)| (midx, k, rep));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (_, method, k, repetition, outcome) in results {
        match outcome {
            Ok((loss, loss_ratio)) => records.push(LossCurveRecord {
                dataset: dataset.clone(),
                method,
                k,
                repetition,
                loss,
                loss_ratio,
            }),
            Err(e) => failures.push(CellFailure {
                method,
                k,
                repetition,
                message: e.to_string(),
            }),
        }
    }
    Ok(LossCurves {
        dataset,
        n: problem.n(),
        records,
        failures,
    })
}

fn run_cell(
    p: &RegressionProblem,
    method: Method,
    k: usize,
    fast: Option<&FastLeveragedSampler>,
    q_lev: &RescalingDistribution,
    rng: &mut RngState,
) -> Result<(f64, f64)> {
    let est = match method {
        Method::Volume => {
            let s = volume_sample(p.x(), k, rng)?;
            subset_estimator(p, &s)?
        }
        Method::LeverageIid => {
            let pi = leverage_iid_sample(q_lev, k, rng)?;
            rescaled_estimator(p, &pi)?
        }
        Method::LeveragedVolume => {
            let pi = leveraged_volume_sample(p.x(), k, rng)?;
            rescaled_estimator(p, &pi)?
        }
        Method::FastLeveragedVolume => {
            let sampler = fast.expect("fast sampler prepared for its method");
            let pi = sampler.sample(p.x(), k, rng)?;
            rescaled_estimator(p, &pi)?
        }
    };
    if !(est.loss.is_finite() && est.loss_ratio.is_finite()) {
        return Err(Error::NonFinite {
            context: "loss of a sampled estimator".into(),
        });
    }
    Ok((est.loss, est.loss_ratio))
}

/// Mean and standard error per (method, k), in record order; empty input
/// yields no rows.
pub fn aggregate(records: &[LossCurveRecord]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut cells: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let key = (r.method.name(), r.k);
        if !cells.contains_key(&key) {
            order.push((r.method, r.k));
        }
        cells.entry(key).or_default().push(r.loss);
    }
    order
        .into_iter()
        .map(|(method, k)| {
            let losses = &cells[&(method.name(), k)];
            let reps = losses.len();
            let mean = losses.iter().sum::<f64>() / reps as f64;
            let stderr = if reps < 2 {
                0.0
            } else {
                let var =
                    losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (reps - 1) as f64;
                (var / reps as f64).sqrt()
            };
            SummaryRow {
                method,
                k,
                mean_loss: mean,
                stderr,
                repetitions: reps,
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the per-repetition records. `per_row` divides losses by n to
/// match the usual average-loss display; ratios are scale-free either way.
pub fn write_records_csv(
    out: &mut dyn Write,
    records: &[LossCurveRecord],
    per_row: bool,
    n: usize,
) -> std::io::Result<()> {
    let scale = if per_row { 1.0 / n as f64 } else { 1.0 };
    writeln!(out, "dataset,method,k,repetition,loss,loss_ratio")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.dataset),
            r.method.name(),
            r.k,
            r.repetition,
            r.loss * scale,
            r.loss_ratio,
        )?;
    }
    Ok(())
}

/// Writes the aggregated summary, same `per_row` convention.
pub fn write_summary_csv(
    out: &mut dyn Write,
    rows: &[SummaryRow],
    per_row: bool,
    n: usize,
) -> std::io::Result<()> {
    let scale = if per_row { 1.0 / n as f64 } else { 1.0 };
    writeln!(out, "method,k,mean_loss,stderr")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.method.name(),
            r.k,
            r.mean_loss * scale,
            r.stderr * scale,
        )?;
    }
    Ok(())
}
